//! Repair categorisation (ARG / INV / ORC) over a small Java-subset syntax
//! tree, with ordered tree edit distance for AST-level edit counting.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::diff::{word_diff, GroupKind};
use crate::java::strip_comments;
use crate::tokenize::{PunctTokenizer, Tokenizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Block,
    MethodDecl,
    Statement,
    Invocation,
    Assertion,
    Argument,
    Literal,
    Identifier,
    Operator,
    Type,
    Annotation,
    AnnotationArg,
    /// A statement the parser could not make sense of.
    Opaque,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MiniAst {
    pub kind: NodeKind,
    pub label: String,
    /// Receiver text of an invocation (`account` in `account.deposit(..)`).
    pub qualifier: String,
    pub children: Vec<MiniAst>,
}

impl MiniAst {
    pub fn leaf(kind: NodeKind, label: impl Into<String>) -> Self {
        MiniAst { kind, label: label.into(), qualifier: String::new(), children: Vec::new() }
    }

    pub fn with(kind: NodeKind, label: impl Into<String>, children: Vec<MiniAst>) -> Self {
        MiniAst { kind, label: label.into(), qualifier: String::new(), children }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(MiniAst::size).sum::<usize>()
    }

    /// Kind-only structure, ignoring labels.
    pub fn shape(&self) -> String {
        let mut s = format!("({:?}", self.kind);
        for c in &self.children {
            s.push(' ');
            s.push_str(&c.shape());
        }
        s.push(')');
        s
    }

    /// Structure with labels, used for identity comparisons.
    pub fn render(&self) -> String {
        let mut s = format!("({:?}", self.kind);
        if !self.qualifier.is_empty() {
            s.push_str(&format!(" {}.", self.qualifier));
        }
        if !self.label.is_empty() {
            s.push_str(&format!(" {:?}", self.label));
        }
        for c in &self.children {
            s.push(' ');
            s.push_str(&c.render());
        }
        s.push(')');
        s
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a MiniAst)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }

    /// True when no statement-level item could be parsed.
    pub fn is_opaque(&self) -> bool {
        let mut any = false;
        let mut structured = false;
        self.walk(&mut |n| match n.kind {
            NodeKind::Opaque => any = true,
            NodeKind::Block => {}
            _ => structured = true,
        });
        any && !structured
    }
}

pub fn is_assertion_name(name: &str) -> bool {
    name.starts_with("assert") || name.starts_with("expect") || name.starts_with("fail")
}

const EXPECTED_ARGS: [&str; 2] = ["expected", "expectedExceptions"];
const OP_CHARS: &str = "+-*/%=<>!&|^?:~";
const CONTROL: [&str; 11] = ["if", "for", "while", "switch", "catch", "try", "else", "do", "synchronized", "finally", "static"];
const TYPE_WORDS: [&str; 4] = ["class", "interface", "enum", "record"];
const MODIFIERS: [&str; 8] = ["final", "static", "public", "private", "protected", "abstract", "synchronized", "default"];
const STMT_KEYWORDS: [&str; 5] = ["return", "throw", "break", "continue", "yield"];

fn is_op(t: &str) -> bool {
    !t.is_empty() && t.chars().all(|c| OP_CHARS.contains(c))
}

fn is_ident(t: &str) -> bool {
    let mut cs = t.chars();
    matches!(cs.next(), Some(c) if c.is_alphabetic() || c == '_' || c == '$')
        && t.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '$')
        && !matches!(t, "true" | "false" | "null" | "new" | "instanceof")
}

fn is_literal(t: &str) -> bool {
    t.starts_with('"') || t.starts_with('\'') || t.starts_with(|c: char| c.is_ascii_digit()) || matches!(t, "true" | "false" | "null")
}

/// Tokens with multi-character operators and decimal numbers merged.
fn lex(lines: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for line in strip_comments(lines) {
        let toks = PunctTokenizer.tokenize(&line);
        let mut prev_end = usize::MAX;
        let mut k = 0;
        while k < toks.len() {
            let t = &toks[k];
            let adjacent = t.start == prev_end;
            if adjacent && is_op(&t.text) && out.last().is_some_and(|p| is_op(p)) {
                out.last_mut().unwrap().push_str(&t.text);
            } else if t.text.starts_with(|c: char| c.is_ascii_digit())
                && k + 2 < toks.len()
                && toks[k + 1].text == "."
                && toks[k + 1].start == t.end
                && toks[k + 2].start == toks[k + 1].end
                && toks[k + 2].text.starts_with(|c: char| c.is_ascii_digit())
            {
                out.push(format!("{}.{}", t.text, toks[k + 2].text));
                prev_end = toks[k + 2].end;
                k += 3;
                continue;
            } else {
                out.push(t.text.clone());
            }
            prev_end = t.end;
            k += 1;
        }
    }
    out
}

/// Index of the bracket closing the one at `open`, or the end of input.
fn matching(t: &[String], open: usize) -> usize {
    let mut depth = 0usize;
    for (k, tok) in t.iter().enumerate().skip(open) {
        match tok.as_str() {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    return k;
                }
            }
            _ => {}
        }
    }
    t.len()
}

/// Parses statement-shaped Java text. Never fails: anything unrecognised
/// becomes an [`NodeKind::Opaque`] node.
pub fn parse_mini<S: AsRef<str>>(lines: &[S]) -> MiniAst {
    let lines: Vec<String> = lines.iter().map(|l| l.as_ref().to_string()).collect();
    let toks = lex(&lines);
    let mut i = 0;
    MiniAst::with(NodeKind::Block, "", parse_items(&toks, &mut i, false))
}

fn parse_items(t: &[String], i: &mut usize, nested: bool) -> Vec<MiniAst> {
    let mut items = Vec::new();
    while *i < t.len() {
        match t[*i].as_str() {
            "}" => {
                *i += 1;
                if nested {
                    break;
                }
            }
            "{" => {
                *i += 1;
                let body = parse_items(t, i, true);
                items.push(MiniAst::with(NodeKind::Block, "", body));
            }
            ";" => *i += 1,
            "@" if t.get(*i + 1).is_some_and(|n| is_ident(n) && n != "interface") => items.push(parse_annotation(t, i)),
            _ => items.push(parse_statement(t, i)),
        }
    }
    items
}

fn parse_annotation(t: &[String], i: &mut usize) -> MiniAst {
    *i += 1;
    let mut name = t[*i].clone();
    *i += 1;
    while *i + 1 < t.len() && t[*i] == "." && is_ident(&t[*i + 1]) {
        name = format!("{name}.{}", t[*i + 1]);
        *i += 2;
    }
    let mut args = Vec::new();
    if t.get(*i).map(String::as_str) == Some("(") {
        let close = matching(t, *i);
        for piece in split_top(&t[*i + 1..close.min(t.len())]) {
            let (key, expr) = if piece.len() >= 2 && is_ident(&piece[0]) && piece[1] == "=" {
                (piece[0].clone(), &piece[2..])
            } else {
                ("value".to_string(), piece)
            };
            let children = parse_expr(expr).unwrap_or_else(|_| vec![opaque(expr)]);
            args.push(MiniAst::with(NodeKind::AnnotationArg, key, children));
        }
        *i = close + 1;
    }
    MiniAst::with(NodeKind::Annotation, name, args)
}

fn opaque(t: &[String]) -> MiniAst {
    MiniAst::leaf(NodeKind::Opaque, t.join(" "))
}

fn parse_statement(t: &[String], i: &mut usize) -> MiniAst {
    let start = *i;
    let mut depth = 0usize;
    let mut j = start;
    let mut term = None;
    while j < t.len() {
        match t[j].as_str() {
            "(" | "[" => depth += 1,
            ")" | "]" => depth = depth.saturating_sub(1),
            "{" if depth > 0 => depth += 1,
            "}" if depth > 0 => depth -= 1,
            "{" => {
                if j > start && (t[j - 1] == "=" || t[j - 1] == "]") {
                    j = matching(t, j);
                } else {
                    term = Some('{');
                    break;
                }
            }
            "}" => break,
            ";" if depth == 0 => {
                term = Some(';');
                break;
            }
            _ => {}
        }
        j += 1;
    }
    let header = &t[start..j.min(t.len())];
    match term {
        Some('{') => {
            *i = j + 1;
            let body = MiniAst::with(NodeKind::Block, "", parse_items(t, i, true));
            header_node(header, body)
        }
        Some(_) => {
            *i = j + 1;
            simple_statement(header)
        }
        None => {
            *i = j.max(start + 1).min(t.len().max(start + 1));
            if header.is_empty() {
                return MiniAst::leaf(NodeKind::Opaque, t.get(start).cloned().unwrap_or_default());
            }
            simple_statement(header)
        }
    }
}

fn header_node(header: &[String], body: MiniAst) -> MiniAst {
    let Some(first) = header.first() else {
        return body;
    };
    if CONTROL.contains(&first.as_str()) {
        let (label, rest) = if first == "else" && header.get(1).map(String::as_str) == Some("if") {
            ("else if".to_string(), &header[2..])
        } else {
            (first.clone(), &header[1..])
        };
        let mut children = parse_expr(rest).unwrap_or_else(|_| vec![opaque(rest)]);
        children.push(body);
        return MiniAst::with(NodeKind::Statement, label, children);
    }
    if let Some(k) = header.iter().position(|t| TYPE_WORDS.contains(&t.as_str())) {
        let name = header.get(k + 1).cloned().unwrap_or_default();
        return MiniAst::with(NodeKind::Statement, header[k].clone(), vec![MiniAst::leaf(NodeKind::Identifier, name), body]);
    }
    if let Some(name) = method_decl_name(header) {
        return MiniAst::with(NodeKind::MethodDecl, name, vec![body]);
    }
    let mut stmt = simple_statement(header);
    if stmt.kind == NodeKind::Opaque {
        stmt = MiniAst::with(NodeKind::Statement, "", vec![stmt]);
    }
    stmt.children.push(body);
    stmt
}

fn method_decl_name(header: &[String]) -> Option<String> {
    let p = header.iter().position(|t| t == "(")?;
    if p == 0 {
        return None;
    }
    let name = &header[p - 1];
    if !is_ident(name) || CONTROL.contains(&name.as_str()) || STMT_KEYWORDS.contains(&name.as_str()) {
        return None;
    }
    let prefix_ok = header[..p - 1].iter().all(|t| is_ident(t) || t == "." || t == "[" || t == "]" || t == "," || t == "?" || (is_op(t) && t.chars().all(|c| c == '<' || c == '>' || c == '?')));
    if !prefix_ok || p < 2 && !name.starts_with(char::is_uppercase) {
        return None;
    }
    let close = matching(header, p);
    let tail = &header[(close + 1).min(header.len())..];
    let tail_ok = tail.is_empty() || tail[0] == "throws" && tail[1..].iter().all(|t| is_ident(t) || t == "," || t == ".");
    tail_ok.then(|| name.clone())
}

fn simple_statement(header: &[String]) -> MiniAst {
    let Some(first) = header.first() else {
        return MiniAst::leaf(NodeKind::Statement, "");
    };
    if STMT_KEYWORDS.contains(&first.as_str()) {
        let rest = &header[1..];
        return match parse_expr(rest) {
            Ok(children) => MiniAst::with(NodeKind::Statement, first.clone(), children),
            Err(()) => opaque(header),
        };
    }
    if first == "assert" {
        let rest = &header[1..];
        return match parse_expr(rest) {
            Ok(children) => MiniAst::with(
                NodeKind::Statement,
                "",
                vec![MiniAst::with(NodeKind::Assertion, "assert", vec![MiniAst::with(NodeKind::Argument, "", children)])],
            ),
            Err(()) => opaque(header),
        };
    }
    if let Some(decl) = parse_decl(header) {
        return decl;
    }
    match parse_expr(header) {
        Ok(children) => MiniAst::with(NodeKind::Statement, "", children),
        Err(()) => opaque(header),
    }
}

fn parse_decl(header: &[String]) -> Option<MiniAst> {
    let mut j = 0;
    while j < header.len() && MODIFIERS.contains(&header[j].as_str()) {
        j += 1;
    }
    let (ty, k) = parse_type(header, j)?;
    let name = header.get(k)?;
    if !is_ident(name) {
        return None;
    }
    let rest = &header[k + 1..];
    let init = match rest.first().map(String::as_str) {
        None => &rest[..0],
        Some("=") => &rest[1..],
        Some(",") => rest,
        _ => return None,
    };
    let mut children = vec![MiniAst::leaf(NodeKind::Type, ty), MiniAst::leaf(NodeKind::Identifier, name.clone())];
    match parse_expr(init) {
        Ok(c) => children.extend(c),
        Err(()) => children.push(opaque(init)),
    }
    Some(MiniAst::with(NodeKind::Statement, "decl", children))
}

/// `Name(.Name)*(<...>)?([])*` starting at `j`; returns its text and end.
fn parse_type(t: &[String], mut j: usize) -> Option<(String, usize)> {
    if !t.get(j).is_some_and(|s| is_ident(s)) {
        return None;
    }
    let mut text = t[j].clone();
    j += 1;
    while j + 1 < t.len() && t[j] == "." && is_ident(&t[j + 1]) {
        text.push('.');
        text.push_str(&t[j + 1]);
        j += 2;
    }
    if t.get(j).is_some_and(|s| s.starts_with('<') && is_op(s)) {
        let mut depth: i32 = 0;
        loop {
            let tok = t.get(j)?;
            if is_op(tok) && tok.chars().all(|c| c == '<' || c == '>' || c == '?') {
                depth += tok.chars().filter(|&c| c == '<').count() as i32;
                depth -= tok.chars().filter(|&c| c == '>').count() as i32;
            } else if !(is_ident(tok) || tok == "," || tok == "." || tok == "[" || tok == "]") {
                return None;
            }
            text.push_str(tok);
            j += 1;
            if depth <= 0 {
                break;
            }
        }
    }
    while j + 1 < t.len() && t[j] == "[" && t[j + 1] == "]" {
        text.push_str("[]");
        j += 2;
    }
    Some((text, j))
}

/// Splits at top-level commas; type arguments after `new` are skipped.
fn split_top(t: &[String]) -> Vec<&[String]> {
    let mut out = Vec::new();
    if t.is_empty() {
        return out;
    }
    let mut depth = 0usize;
    let mut start = 0;
    let mut j = 0;
    while j < t.len() {
        match t[j].as_str() {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth = depth.saturating_sub(1),
            "new" => {
                if let Some((_, k)) = parse_type(t, j + 1) {
                    j = k;
                    continue;
                }
            }
            "," if depth == 0 => {
                out.push(&t[start..j]);
                start = j + 1;
            }
            _ => {}
        }
        j += 1;
    }
    out.push(&t[start..]);
    out
}

fn parse_args(inner: &[String]) -> Result<Vec<MiniAst>, ()> {
    let mut args = Vec::new();
    for piece in split_top(inner) {
        if piece.is_empty() {
            return Err(());
        }
        args.push(MiniAst::with(NodeKind::Argument, "", parse_expr(piece)?));
    }
    Ok(args)
}

fn invocation(name: &str, qualifier: String, args: Vec<MiniAst>) -> MiniAst {
    let kind = if is_assertion_name(name) { NodeKind::Assertion } else { NodeKind::Invocation };
    MiniAst { kind, label: name.to_string(), qualifier, children: args }
}

/// Flat list of expression nodes; parentheses are transparent.
fn parse_expr(t: &[String]) -> Result<Vec<MiniAst>, ()> {
    let mut out = Vec::new();
    let mut i = 0;
    let mut after_operand = false;
    while i < t.len() {
        let tok = t[i].as_str();
        match tok {
            _ if is_op(tok) || tok == "instanceof" || tok == "," || tok == ";" => {
                out.push(MiniAst::leaf(NodeKind::Operator, tok));
                after_operand = false;
                i += 1;
            }
            "(" => {
                let close = matching(t, i);
                if close >= t.len() {
                    return Err(());
                }
                out.extend(parse_expr(&t[i + 1..close])?);
                i = close + 1;
                if t.get(i).map(String::as_str) == Some(".") {
                    i += 1;
                    out.extend(parse_chain(t, &mut i, true)?);
                    after_operand = true;
                } else {
                    // a cast may be followed directly by its operand
                    after_operand = false;
                }
            }
            "[" | "{" => {
                let close = matching(t, i);
                if close >= t.len() {
                    return Err(());
                }
                out.extend(parse_expr(&t[i + 1..close])?);
                i = close + 1;
                after_operand = true;
            }
            ")" | "]" | "}" => return Err(()),
            "new" => {
                if after_operand {
                    return Err(());
                }
                out.extend(parse_new(t, &mut i)?);
                after_operand = true;
            }
            _ if is_literal(tok) => {
                if after_operand {
                    return Err(());
                }
                out.push(MiniAst::leaf(NodeKind::Literal, tok));
                i += 1;
                after_operand = true;
            }
            _ if is_ident(tok) => {
                if after_operand {
                    return Err(());
                }
                out.extend(parse_chain(t, &mut i, false)?);
                after_operand = true;
            }
            _ => return Err(()),
        }
    }
    Ok(out)
}

/// A dotted access chain with invocations, starting at an identifier (or
/// just after `.` when `chained`).
fn parse_chain(t: &[String], i: &mut usize, chained: bool) -> Result<Vec<MiniAst>, ()> {
    let mut nodes = Vec::new();
    let mut path: Vec<String> = Vec::new();
    let _ = chained;
    loop {
        if t.get(*i).is_some_and(|s| s.starts_with('<') && is_op(s)) {
            let (_, k) = parse_type(&[String::from("T")].iter().chain(&t[*i..]).cloned().collect::<Vec<_>>(), 0).ok_or(())?;
            *i += k - 1;
        }
        let Some(name) = t.get(*i).filter(|s| is_ident(s)) else {
            return Err(());
        };
        path.push(name.clone());
        *i += 1;
        match t.get(*i).map(String::as_str) {
            Some("(") => {
                let close = matching(t, *i);
                if close >= t.len() {
                    return Err(());
                }
                let args = parse_args(&t[*i + 1..close])?;
                let name = path.pop().unwrap_or_default();
                nodes.push(invocation(&name, path.join("."), args));
                path.clear();
                *i = close + 1;
            }
            Some("[") => {
                nodes.push(MiniAst::leaf(NodeKind::Identifier, path.join(".")));
                path.clear();
                let close = matching(t, *i);
                if close >= t.len() {
                    return Err(());
                }
                nodes.extend(parse_expr(&t[*i + 1..close])?);
                *i = close + 1;
            }
            _ => {}
        }
        if t.get(*i).map(String::as_str) == Some(".") {
            *i += 1;
            continue;
        }
        break;
    }
    if !path.is_empty() {
        nodes.push(MiniAst::leaf(NodeKind::Identifier, path.join(".")));
    }
    Ok(nodes)
}

fn parse_new(t: &[String], i: &mut usize) -> Result<Vec<MiniAst>, ()> {
    let (ty, mut k) = parse_type(t, *i + 1).ok_or(())?;
    let base = ty.split('<').next().unwrap_or(&ty).to_string();
    let mut nodes = Vec::new();
    match t.get(k).map(String::as_str) {
        Some("(") => {
            let close = matching(t, k);
            if close >= t.len() {
                return Err(());
            }
            nodes.push(invocation(&format!("new {base}"), String::new(), parse_args(&t[k + 1..close])?));
            k = close + 1;
            if t.get(k).map(String::as_str) == Some("{") {
                let end = matching(t, k);
                let mut j = 0;
                let body = parse_items(&t[k + 1..end.min(t.len())], &mut j, false);
                nodes.push(MiniAst::with(NodeKind::Block, "", body));
                k = end + 1;
            }
        }
        Some("[") => {
            let mut args = Vec::new();
            while t.get(k).map(String::as_str) == Some("[") {
                let close = matching(t, k);
                if close >= t.len() {
                    return Err(());
                }
                if close > k + 1 {
                    args.push(MiniAst::with(NodeKind::Argument, "", parse_expr(&t[k + 1..close])?));
                }
                k = close + 1;
            }
            if t.get(k).map(String::as_str) == Some("{") {
                let close = matching(t, k);
                if close >= t.len() {
                    return Err(());
                }
                args.extend(parse_args(&t[k + 1..close])?);
                k = close + 1;
            }
            nodes.push(invocation(&format!("new {base}[]"), String::new(), args));
        }
        _ => return Err(()),
    }
    *i = k;
    if t.get(*i).map(String::as_str) == Some(".") {
        *i += 1;
        nodes.extend(parse_chain(t, i, true)?);
    }
    Ok(nodes)
}

// ---------------------------------------------------------------------------
// Tree edit distance

const TED_LIMIT: usize = 4_000_000;

/// Post-order view of a tree.
struct Flat<'a> {
    nodes: Vec<&'a MiniAst>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    lml: Vec<usize>,
}

impl<'a> Flat<'a> {
    fn new(root: &'a MiniAst) -> Self {
        let mut f = Flat { nodes: Vec::new(), parent: Vec::new(), children: Vec::new(), lml: Vec::new() };
        f.visit(root);
        f
    }

    fn visit(&mut self, n: &'a MiniAst) -> usize {
        let kids: Vec<usize> = n.children.iter().map(|c| self.visit(c)).collect();
        let id = self.nodes.len();
        self.lml.push(kids.first().map_or(id, |&k| self.lml[k]));
        for &k in &kids {
            self.parent[k] = Some(id);
        }
        self.nodes.push(n);
        self.parent.push(None);
        self.children.push(kids);
        id
    }

    fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Key roots of the subtree rooted at `root`, ascending.
    fn keyroots(&self, root: usize) -> Vec<usize> {
        let lo = self.lml[root];
        let mut seen: HashMap<usize, usize> = HashMap::new();
        for i in lo..=root {
            seen.insert(self.lml[i], i);
        }
        let mut k: Vec<usize> = seen.into_values().collect();
        k.sort_unstable();
        k
    }
}

fn relabel_cost(a: &MiniAst, b: &MiniAst) -> u32 {
    if a.kind != b.kind {
        3
    } else if a.label == b.label && a.qualifier == b.qualifier {
        0
    } else {
        1
    }
}

struct Zs<'a, 'b> {
    a: &'a Flat<'a>,
    b: &'b Flat<'b>,
    a_root: usize,
    b_root: usize,
    td: Vec<u32>,
    w: usize,
}

impl<'a, 'b> Zs<'a, 'b> {
    fn new(a: &'a Flat<'a>, b: &'b Flat<'b>, a_root: usize, b_root: usize) -> Self {
        let w = b_root - b.lml[b_root] + 1;
        let h = a_root - a.lml[a_root] + 1;
        let mut z = Zs { a, b, a_root, b_root, td: vec![0; h * w], w };
        for &i in &a.keyroots(a_root) {
            for &j in &b.keyroots(b_root) {
                z.forest(i, j);
            }
        }
        z
    }

    fn td(&self, i: usize, j: usize) -> u32 {
        let ai = i - self.a.lml[self.a_root];
        let bj = j - self.b.lml[self.b_root];
        self.td[ai * self.w + bj]
    }

    fn forest(&mut self, i: usize, j: usize) -> Vec<Vec<u32>> {
        let (a, b) = (self.a, self.b);
        let (li, lj) = (a.lml[i], b.lml[j]);
        let (h, w) = (i - li + 2, j - lj + 2);
        let mut fd = vec![vec![0u32; w]; h];
        for x in 1..h {
            fd[x][0] = x as u32;
        }
        for y in 1..w {
            fd[0][y] = y as u32;
        }
        for x in 1..h {
            let xi = li + x - 1;
            for y in 1..w {
                let yj = lj + y - 1;
                let del = fd[x - 1][y] + 1;
                let ins = fd[x][y - 1] + 1;
                if a.lml[xi] == li && b.lml[yj] == lj {
                    let v = del.min(ins).min(fd[x - 1][y - 1] + relabel_cost(a.nodes[xi], b.nodes[yj]));
                    fd[x][y] = v;
                    let ai = xi - a.lml[self.a_root];
                    let bj = yj - b.lml[self.b_root];
                    self.td[ai * self.w + bj] = v;
                } else {
                    let sub = fd[a.lml[xi] - li][b.lml[yj] - lj] + self.td(xi, yj);
                    fd[x][y] = del.min(ins).min(sub);
                }
            }
        }
        fd
    }

    fn distance(&self) -> u32 {
        self.td(self.a_root, self.b_root)
    }

    /// Optimal node mapping (global post-order ids).
    fn mapping(&mut self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut stack = vec![(self.a_root, self.b_root)];
        while let Some((i, j)) = stack.pop() {
            let fd = self.forest(i, j);
            let (a, b) = (self.a, self.b);
            let (li, lj) = (a.lml[i], b.lml[j]);
            let (mut x, mut y) = (i - li + 1, j - lj + 1);
            while x > 0 || y > 0 {
                if x > 0 && y > 0 {
                    let (xi, yj) = (li + x - 1, lj + y - 1);
                    if a.lml[xi] == li && b.lml[yj] == lj {
                        if fd[x][y] == fd[x - 1][y - 1] + relabel_cost(a.nodes[xi], b.nodes[yj]) {
                            out.push((xi, yj));
                            x -= 1;
                            y -= 1;
                            continue;
                        }
                    } else {
                        let (px, py) = (a.lml[xi] - li, b.lml[yj] - lj);
                        if fd[x][y] == fd[px][py] + self.td(xi, yj) {
                            stack.push((xi, yj));
                            x = px;
                            y = py;
                            continue;
                        }
                    }
                }
                if x > 0 && fd[x][y] == fd[x - 1][y] + 1 {
                    x -= 1;
                } else {
                    y -= 1;
                }
            }
        }
        out
    }
}

/// Exact ordered tree edit distance with unit insert/delete cost, rename
/// cost 1 within a node kind and 3 across kinds.
pub fn tree_edit_distance(a: &MiniAst, b: &MiniAst) -> usize {
    let (fa, fb) = (Flat::new(a), Flat::new(b));
    Zs::new(&fa, &fb, fa.len() - 1, fb.len() - 1).distance() as usize
}

fn subtree_start(f: &Flat, root: usize) -> usize {
    f.lml[root]
}

/// Mapping between subtrees; very large pairs are aligned child by child.
fn map_subtrees(fa: &Flat, fb: &Flat, i: usize, j: usize, out: &mut Vec<(usize, usize)>) {
    let sa = i - subtree_start(fa, i) + 1;
    let sb = j - subtree_start(fb, j) + 1;
    if sa.saturating_mul(sb) <= TED_LIMIT {
        out.extend(Zs::new(fa, fb, i, j).mapping());
        return;
    }
    if fa.nodes[i].kind == fb.nodes[j].kind {
        out.push((i, j));
    }
    let ca: Vec<String> = fa.children[i].iter().map(|&c| fa.nodes[c].render()).collect();
    let cb: Vec<String> = fb.children[j].iter().map(|&c| fb.nodes[c].render()).collect();
    let groups = word_diff(&ca, &cb);
    let mut k = 0;
    while k < groups.len() {
        let g = &groups[k];
        match g.kind {
            GroupKind::Keep => {
                for (x, y) in g.old.clone().zip(g.new.clone()) {
                    let (ra, rb) = (fa.children[i][x], fb.children[j][y]);
                    let (sa, sb) = (subtree_start(fa, ra), subtree_start(fb, rb));
                    out.extend((sa..=ra).zip(sb..=rb));
                }
            }
            GroupKind::Del if groups.get(k + 1).is_some_and(|n| n.kind == GroupKind::Add) => {
                let add = &groups[k + 1];
                for (x, y) in g.old.clone().zip(add.new.clone()) {
                    map_subtrees(fa, fb, fa.children[i][x], fb.children[j][y], out);
                }
                k += 1;
            }
            _ => {}
        }
        k += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    Insert,
    Delete,
    Update,
    Move,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditAction {
    pub action: ActionKind,
    pub node: NodeKind,
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub new_label: Option<String>,
}

struct TreeDiff<'a, 'b> {
    fa: Flat<'a>,
    fb: Flat<'b>,
    map_a: Vec<Option<usize>>,
    map_b: Vec<Option<usize>>,
}

impl<'a, 'b> TreeDiff<'a, 'b> {
    fn new(a: &'a MiniAst, b: &'b MiniAst) -> Self {
        let (fa, fb) = (Flat::new(a), Flat::new(b));
        let mut pairs = Vec::new();
        map_subtrees(&fa, &fb, fa.len() - 1, fb.len() - 1, &mut pairs);
        let mut map_a = vec![None; fa.len()];
        let mut map_b = vec![None; fb.len()];
        for (x, y) in pairs {
            map_a[x] = Some(y);
            map_b[y] = Some(x);
        }
        TreeDiff { fa, fb, map_a, map_b }
    }

    fn deleted(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.fa.len()).filter(|&i| self.map_a[i].is_none())
    }

    fn inserted(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.fb.len()).filter(|&j| self.map_b[j].is_none())
    }

    fn updated(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.fa.len()).filter_map(|i| {
            let j = self.map_a[i]?;
            (relabel_cost(self.fa.nodes[i], self.fb.nodes[j]) > 0).then_some((i, j))
        })
    }

    fn actions(&self) -> Vec<EditAction> {
        let del_roots: Vec<usize> = self.deleted().filter(|&i| self.fa.parent[i].is_none_or(|p| self.map_a[p].is_some())).collect();
        let ins_roots: Vec<usize> = self.inserted().filter(|&j| self.fb.parent[j].is_none_or(|p| self.map_b[p].is_some())).collect();
        let mut out = Vec::new();
        let mut ins_left: Vec<Option<usize>> = ins_roots.iter().copied().map(Some).collect();
        for &d in &del_roots {
            let dn = self.fa.nodes[d];
            let fully_deleted = (self.fa.lml[d]..=d).all(|k| self.map_a[k].is_none());
            let moved = if fully_deleted {
                ins_left.iter_mut().find(|s| s.is_some_and(|j| (self.fb.lml[j]..=j).all(|k| self.map_b[k].is_none()) && self.fb.nodes[j] == dn))
            } else {
                None
            };
            if let Some(slot) = moved {
                *slot = None;
                out.push(EditAction { action: ActionKind::Move, node: dn.kind, label: dn.label.clone(), new_label: None });
            } else {
                out.push(EditAction { action: ActionKind::Delete, node: dn.kind, label: dn.label.clone(), new_label: None });
            }
        }
        for j in ins_left.into_iter().flatten() {
            let n = self.fb.nodes[j];
            out.push(EditAction { action: ActionKind::Insert, node: n.kind, label: n.label.clone(), new_label: None });
        }
        for (i, j) in self.updated() {
            let (a, b) = (self.fa.nodes[i], self.fb.nodes[j]);
            out.push(EditAction {
                action: ActionKind::Update,
                node: a.kind,
                label: label_with_qualifier(a),
                new_label: Some(label_with_qualifier(b)),
            });
        }
        out
    }
}

fn label_with_qualifier(n: &MiniAst) -> String {
    if n.qualifier.is_empty() {
        n.label.clone()
    } else {
        format!("{}.{}", n.qualifier, n.label)
    }
}

/// AST-level edit script: node edits grouped into whole-subtree inserts and
/// deletes, identical deleted/inserted subtrees reported as moves.
pub fn tree_edit_actions(broken: &MiniAst, repaired: &MiniAst) -> Vec<EditAction> {
    TreeDiff::new(broken, repaired).actions()
}

/// Cost of the node-level script behind [`tree_edit_actions`], before
/// grouping. Equals [`tree_edit_distance`] whenever the exact algorithm runs.
pub fn edit_script_cost(broken: &MiniAst, repaired: &MiniAst) -> usize {
    let d = TreeDiff::new(broken, repaired);
    let relabels: u32 = d.updated().map(|(i, j)| relabel_cost(d.fa.nodes[i], d.fb.nodes[j])).sum();
    d.deleted().count() + d.inserted().count() + relabels as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "ARG")]
    Arg,
    #[serde(rename = "INV")]
    Inv,
    #[serde(rename = "ORC")]
    Orc,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Arg => "ARG",
            Category::Inv => "INV",
            Category::Orc => "ORC",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairCategory {
    pub set: BTreeSet<Category>,
    pub other: bool,
    pub ast_edit_count: usize,
    /// No AST-level difference at all (e.g. a whitespace-only change).
    pub degenerate: bool,
}

impl RepairCategory {
    /// `ARG+INV`, `ORC`, or `OTH`.
    pub fn label(&self) -> String {
        if self.set.is_empty() {
            return "OTH".into();
        }
        self.set.iter().map(Category::to_string).collect::<Vec<_>>().join("+")
    }
}

fn in_oracle(f: &Flat, mut k: usize) -> bool {
    loop {
        let n = f.nodes[k];
        if n.kind == NodeKind::Assertion || n.kind == NodeKind::AnnotationArg && EXPECTED_ARGS.contains(&n.label.as_str()) {
            return true;
        }
        match f.parent[k] {
            Some(p) => k = p,
            None => return false,
        }
    }
}

/// Nearest enclosing invocation, reached through an argument.
fn owning_invocation(f: &Flat, k: usize) -> Option<usize> {
    let mut through_arg = f.nodes[k].kind == NodeKind::Argument;
    let mut cur = f.parent[k]?;
    loop {
        match f.nodes[cur].kind {
            NodeKind::Invocation | NodeKind::Assertion => return through_arg.then_some(cur),
            NodeKind::Argument => through_arg = true,
            NodeKind::Statement | NodeKind::Block | NodeKind::MethodDecl => return None,
            _ => {}
        }
        cur = f.parent[cur]?;
    }
}

fn contains_invocation(f: &Flat, k: usize) -> bool {
    (f.lml[k]..k).any(|d| f.nodes[d].kind == NodeKind::Invocation)
}

fn classify_side(f: &Flat, mapped: &[Option<usize>], k: usize, set: &mut BTreeSet<Category>) {
    if in_oracle(f, k) {
        set.insert(Category::Orc);
    } else if f.nodes[k].kind == NodeKind::Invocation {
        set.insert(Category::Inv);
    } else if owning_invocation(f, k).is_some_and(|inv| mapped[inv].is_some()) {
        set.insert(Category::Arg);
    }
}

/// Categorises the repair `broken → repaired` (whole test sources or any
/// statement-shaped fragments).
pub fn categorize<S: AsRef<str>>(broken: &[S], repaired: &[S]) -> RepairCategory {
    let (a, b) = (parse_mini(broken), parse_mini(repaired));
    let diff = TreeDiff::new(&a, &b);
    let mut set = BTreeSet::new();
    for i in diff.deleted() {
        classify_side(&diff.fa, &diff.map_a, i, &mut set);
    }
    for j in diff.inserted() {
        classify_side(&diff.fb, &diff.map_b, j, &mut set);
    }
    for (i, j) in diff.updated() {
        let (fa, fb) = (&diff.fa, &diff.fb);
        let (na, nb) = (fa.nodes[i], fb.nodes[j]);
        if in_oracle(fa, i) || in_oracle(fb, j) {
            set.insert(Category::Orc);
        } else if na.kind == NodeKind::Invocation && na.label != nb.label {
            set.insert(Category::Inv);
        } else if na.kind == NodeKind::Type {
            let parent = fa.parent[i];
            if parent.is_some_and(|p| fa.nodes[p].label == "decl" && contains_invocation(fa, p)) {
                set.insert(Category::Arg);
            }
        } else if owning_invocation(fa, i).is_some_and(|inv| diff.map_a[inv].is_some()) {
            set.insert(Category::Arg);
        }
    }
    let ast_edit_count = diff.actions().len();
    RepairCategory { other: set.is_empty(), set, ast_edit_count, degenerate: ast_edit_count == 0 }
}

//! Lightweight indexer for the Java subset needed to locate classes and
//! methods: packages, (nested) type declarations, methods and constructors
//! with their 1-based line spans. Comments are ignored; anything it does not
//! recognise is skipped rather than rejected.

use serde::{Deserialize, Serialize};

use crate::tokenize::{is_word_char, PunctTokenizer, Tokenizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeclKind {
    Class,
    Method,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decl {
    pub kind: DeclKind,
    pub fqn: String,
    /// First line of the declaration, annotations included.
    pub start: usize,
    pub end: usize,
    pub annotations: Vec<String>,
}

impl Decl {
    pub fn is_test(&self) -> bool {
        self.kind == DeclKind::Method && self.annotations.iter().any(|a| a == "Test" || a.ends_with(".Test"))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JavaFile {
    pub package: Option<String>,
    pub decls: Vec<Decl>,
}

impl JavaFile {
    pub fn methods(&self) -> impl Iterator<Item = &Decl> {
        self.decls.iter().filter(|d| d.kind == DeclKind::Method)
    }

    pub fn classes(&self) -> impl Iterator<Item = &Decl> {
        self.decls.iter().filter(|d| d.kind == DeclKind::Class)
    }

    /// Innermost declaration of `kind` containing `line`.
    pub fn enclosing(&self, line: usize, kind: DeclKind) -> Option<&Decl> {
        self.decls
            .iter()
            .filter(|d| d.kind == kind && d.start <= line && line <= d.end)
            .min_by_key(|d| d.end - d.start)
    }
}

#[derive(Debug, Clone)]
struct Tok {
    text: String,
    line: usize,
}

const TYPE_KEYWORDS: [&str; 4] = ["class", "interface", "enum", "record"];

/// Replaces comment characters with spaces, keeping line structure and
/// string literals intact.
pub fn strip_comments(lines: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(lines.len());
    let mut in_block = false;
    for line in lines {
        let chars: Vec<char> = line.chars().collect();
        let mut buf = String::with_capacity(line.len());
        let mut i = 0;
        let mut quote: Option<char> = None;
        while i < chars.len() {
            let c = chars[i];
            if in_block {
                if c == '*' && chars.get(i + 1) == Some(&'/') {
                    in_block = false;
                    buf.push_str("  ");
                    i += 2;
                } else {
                    buf.push(' ');
                    i += 1;
                }
                continue;
            }
            if let Some(q) = quote {
                buf.push(c);
                if c == '\\' && i + 1 < chars.len() {
                    buf.push(chars[i + 1]);
                    i += 2;
                    continue;
                }
                if c == q {
                    quote = None;
                }
                i += 1;
                continue;
            }
            match c {
                '"' | '\'' => {
                    quote = Some(c);
                    buf.push(c);
                    i += 1;
                }
                '/' if chars.get(i + 1) == Some(&'/') => {
                    buf.extend(std::iter::repeat_n(' ', chars.len() - i));
                    break;
                }
                '/' if chars.get(i + 1) == Some(&'*') => {
                    in_block = true;
                    buf.push_str("  ");
                    i += 2;
                }
                _ => {
                    buf.push(c);
                    i += 1;
                }
            }
        }
        out.push(buf);
    }
    out
}

fn lex(lines: &[String]) -> Vec<Tok> {
    let clean = strip_comments(lines);
    let mut out = Vec::new();
    for (i, l) in clean.iter().enumerate() {
        for t in PunctTokenizer.tokenize(l) {
            out.push(Tok { text: t.text, line: i + 1 });
        }
    }
    out
}

fn is_ident(s: &str) -> bool {
    s.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_' || c == '$') && s.chars().all(is_word_char)
}

/// Index of the token matching the opener at `open` (which must be `(`, `{`, `[` or `<`).
fn matching(toks: &[Tok], open: usize) -> usize {
    let (o, c) = match toks[open].text.as_str() {
        "(" => ("(", ")"),
        "{" => ("{", "}"),
        "[" => ("[", "]"),
        _ => ("<", ">"),
    };
    let mut depth = 0usize;
    for (k, t) in toks.iter().enumerate().skip(open) {
        if t.text == o {
            depth += 1;
        } else if t.text == c {
            depth -= 1;
            if depth == 0 {
                return k;
            }
        }
    }
    toks.len() - 1
}

struct ClassFrame {
    decl_index: usize,
    body_depth: usize,
}

pub fn index_file(lines: &[String]) -> JavaFile {
    let toks = lex(lines);
    let mut file = JavaFile::default();
    let mut frames: Vec<ClassFrame> = Vec::new();
    let mut depth = 0usize;
    let mut decl_start = 0usize;
    let mut i = 0usize;

    while i < toks.len() {
        let t = toks[i].text.as_str();
        let at_decl_level = frames.last().map_or(depth == 0, |f| f.body_depth == depth);
        if !at_decl_level {
            match t {
                "{" => depth += 1,
                "}" => depth = depth.saturating_sub(1),
                _ => {}
            }
            i += 1;
            continue;
        }
        match t {
            ";" => {
                if frames.is_empty() && toks[decl_start].text == "package" {
                    let name: String = toks[decl_start + 1..i].iter().map(|t| t.text.as_str()).collect();
                    file.package = Some(name);
                }
                decl_start = i + 1;
                i += 1;
            }
            "}" => {
                if let Some(f) = frames.pop() {
                    file.decls[f.decl_index].end = toks[i].line;
                }
                depth = depth.saturating_sub(1);
                decl_start = i + 1;
                i += 1;
            }
            "{" => {
                let decl = &toks[decl_start..i];
                let (annotations, rest) = split_annotations(decl);
                if let Some(name) = type_decl_name(&rest) {
                    let owner = qualified_owner(&file, &frames);
                    let fqn = if owner.is_empty() { name } else { format!("{owner}.{name}") };
                    file.decls.push(Decl {
                        kind: DeclKind::Class,
                        fqn: fqn.clone(),
                        start: toks[decl_start.min(i)].line,
                        end: toks[i].line,
                        annotations,
                    });
                    depth += 1;
                    frames.push(ClassFrame {
                        decl_index: file.decls.len() - 1,
                        body_depth: depth,
                    });
                    decl_start = i + 1;
                    i += 1;
                    continue;
                }
                let close = matching(&toks, i);
                if let (Some(sig), false) = (method_signature(&rest), frames.is_empty()) {
                    let owner = qualified_owner(&file, &frames);
                    file.decls.push(Decl {
                        kind: DeclKind::Method,
                        fqn: format!("{owner}.{sig}"),
                        start: toks[decl_start.min(i)].line,
                        end: toks[close].line,
                        annotations,
                    });
                    decl_start = close + 1;
                } else if rest.iter().any(|t| t.text == "=") {
                    // initializer expression; declaration ends at its ';'
                } else {
                    decl_start = close + 1;
                }
                i = close + 1;
            }
            _ => i += 1,
        }
    }
    for f in frames {
        file.decls[f.decl_index].end = lines.len().max(1);
    }
    file
}

fn qualified_owner(file: &JavaFile, frames: &[ClassFrame]) -> String {
    match frames.last() {
        Some(f) => file.decls[f.decl_index].fqn.clone(),
        None => file.package.clone().unwrap_or_default(),
    }
}

/// Splits leading/embedded annotations off a declaration.
fn split_annotations(decl: &[Tok]) -> (Vec<String>, Vec<Tok>) {
    let mut names = Vec::new();
    let mut rest = Vec::new();
    let mut k = 0;
    while k < decl.len() {
        if decl[k].text == "@" && k + 1 < decl.len() && decl[k + 1].text != "interface" {
            let mut name = decl[k + 1].text.clone();
            k += 2;
            while k + 1 < decl.len() && decl[k].text == "." && is_ident(&decl[k + 1].text) {
                name.push('.');
                name.push_str(&decl[k + 1].text);
                k += 2;
            }
            if k < decl.len() && decl[k].text == "(" {
                k = matching(decl, k) + 1;
            }
            names.push(name);
            continue;
        }
        rest.push(decl[k].clone());
        k += 1;
    }
    (names, rest)
}

fn type_decl_name(decl: &[Tok]) -> Option<String> {
    for k in 0..decl.len() {
        let prev_dot = k > 0 && decl[k - 1].text == ".";
        if TYPE_KEYWORDS.contains(&decl[k].text.as_str()) && !prev_dot {
            return decl.get(k + 1).filter(|t| is_ident(&t.text)).map(|t| t.text.clone());
        }
    }
    None
}

/// `name(Type,Type)` for a method or constructor header.
fn method_signature(decl: &[Tok]) -> Option<String> {
    let open = decl.iter().position(|t| t.text == "(")?;
    if open == 0 || decl[..open].iter().any(|t| t.text == "=") {
        return None;
    }
    let name = &decl[open - 1].text;
    if !is_ident(name) || matches!(name.as_str(), "if" | "for" | "while" | "switch" | "catch" | "synchronized" | "new" | "return") {
        return None;
    }
    let close = matching(decl, open);
    let params = param_types(&decl[open + 1..close]);
    Some(format!("{name}({})", params.join(",")))
}

fn param_types(toks: &[Tok]) -> Vec<String> {
    let mut params: Vec<Vec<&Tok>> = vec![Vec::new()];
    let mut angle = 0i32;
    let mut paren = 0i32;
    for t in toks {
        match t.text.as_str() {
            "<" => angle += 1,
            ">" => angle -= 1,
            "(" => paren += 1,
            ")" => paren -= 1,
            "," if angle == 0 && paren == 0 => {
                params.push(Vec::new());
                continue;
            }
            _ => {}
        }
        params.last_mut().unwrap().push(t);
    }
    params
        .into_iter()
        .filter(|p| !p.is_empty())
        .map(|p| {
            let owned: Vec<Tok> = p.into_iter().cloned().collect();
            let (_, p) = split_annotations(&owned);
            let p: Vec<&Tok> = p.iter().filter(|t| t.text != "final").collect();
            let body = if p.len() > 1 { &p[..p.len() - 1] } else { &p[..] };
            let mut ty = String::new();
            let mut generic = 0;
            let mut dots = 0;
            for t in body {
                match t.text.as_str() {
                    "<" => generic += 1,
                    ">" => generic -= 1,
                    _ if generic > 0 => {}
                    "." => {
                        dots += 1;
                        if dots == 3 {
                            ty.push_str("[]");
                            dots = 0;
                        }
                    }
                    s => {
                        if dots == 1 {
                            ty.push('.');
                        }
                        dots = 0;
                        ty.push_str(s);
                    }
                }
            }
            ty
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lines(s: &str) -> Vec<String> {
        s.lines().map(str::to_string).collect()
    }

    #[test]
    fn indexes_running_example() {
        let src = lines(
            "package bank;\n\
             public class BankAccount {\n\
             \tprivate int balance = 0;\n\
             \tpublic int getBalance() { return balance; }\n\
             \tpublic int deposit(int amount) {\n\
             \t\tbalance += amount;\n\
             \t}\n\
             }",
        );
        let f = index_file(&src);
        assert_eq!(f.package.as_deref(), Some("bank"));
        let c: Vec<_> = f.classes().collect();
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].fqn.as_str(), c[0].start, c[0].end), ("bank.BankAccount", 2, 8));
        let m: Vec<_> = f.methods().map(|d| (d.fqn.as_str(), d.start, d.end)).collect();
        assert_eq!(m, vec![("bank.BankAccount.getBalance()", 4, 4), ("bank.BankAccount.deposit(int)", 5, 7)]);
    }

    #[test]
    fn annotations_generics_and_constructors() {
        let src = lines(
            "class T {\n\
             // comment with { brace\n\
             @Test\n\
             @SuppressWarnings(\"x\")\n\
             public void a(final List<Map<String, Integer>> xs, String... rest) throws Exception {\n\
               Runnable r = new Runnable() { public void run() {} };\n\
             }\n\
             int[] arr = { 1, 2 };\n\
             static { init(); }\n\
             T(int x) { }\n\
             class Inner { void b(java.lang.String s) {} }\n\
             }",
        );
        let f = index_file(&src);
        let m: Vec<_> = f.methods().map(|d| (d.fqn.as_str(), d.start, d.end, d.is_test())).collect();
        assert_eq!(
            m,
            vec![
                ("T.a(List,String[])", 3, 7, true),
                ("T.T(int)", 10, 10, false),
                ("T.Inner.b(java.lang.String)", 11, 11, false),
            ]
        );
        assert_eq!(f.enclosing(11, DeclKind::Class).unwrap().fqn, "T.Inner");
        assert_eq!(f.enclosing(8, DeclKind::Method), None);
    }

    #[test]
    fn block_comments_are_ignored() {
        let src = lines("class A {\n/* void x() {\n} */\nvoid y() {}\n}");
        let f = index_file(&src);
        let m: Vec<_> = f.methods().map(|d| d.fqn.as_str()).collect();
        assert_eq!(m, vec!["A.y()"]);
    }
}

//! Evaluation metrics: exact match, plausible-repair rate, BLEU-4 and a
//! CodeBLEU variant over the Java-subset tree.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::engine::Prediction;
use crate::error::{Error, Result};
use crate::model::{CandidateRepair, RepairInstance, Verdict};
use crate::taxonomy::{parse_mini, MiniAst, NodeKind};
use crate::tokenize::{flat_words, Tokenizer};

/// Canonical token sequence used for exact-match comparison.
pub fn code_tokens<S: AsRef<str>>(tok: &dyn Tokenizer, lines: &[S]) -> Vec<String> {
    flat_words(tok, lines)
}

/// True iff any candidate token sequence equals the ground truth's.
pub fn exact_match<S: AsRef<str>>(tok: &dyn Tokenizer, candidates: &[Vec<S>], gt: &[S]) -> bool {
    let want = code_tokens(tok, gt);
    candidates.iter().any(|c| code_tokens(tok, c) == want)
}

fn candidate_matches(tok: &dyn Tokenizer, c: &CandidateRepair, want: &[String]) -> bool {
    c.verdict != Verdict::Invalid && c.repaired.as_ref().is_some_and(|r| code_tokens(tok, r) == want)
}

/// Sets `exact_match` on every candidate.
pub fn mark_exact_matches(tok: &dyn Tokenizer, candidates: &mut [CandidateRepair], gt: &[String]) {
    let want = code_tokens(tok, gt);
    for c in candidates.iter_mut() {
        c.exact_match = candidate_matches(tok, c, &want);
    }
}

/// The best-ranked exact match, or the top-ranked candidate.
pub fn select_best<'a>(tok: &dyn Tokenizer, candidates: &'a [CandidateRepair], gt: &[String]) -> Result<&'a CandidateRepair> {
    let want = code_tokens(tok, gt);
    candidates
        .iter()
        .filter(|c| candidate_matches(tok, c, &want))
        .min_by_key(|c| c.rank)
        .or_else(|| candidates.iter().min_by_key(|c| c.rank))
        .ok_or_else(|| Error::Contract("cannot select from an empty candidate list".into()))
}

fn ngram_counts<T: Hash + Eq>(toks: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut m = HashMap::new();
    if toks.len() >= n {
        for w in toks.windows(n) {
            *m.entry(w).or_default() += 1;
        }
    }
    m
}

fn brevity_penalty(c: usize, r: usize) -> f64 {
    if c == 0 {
        0.0
    } else if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    }
}

/// Sentence BLEU-4 with uniform weights. No unigram overlap scores 0; a
/// higher order without matches contributes `1 / (c_n + 1)`, where `c_n` is
/// the number of candidate n-grams.
pub fn bleu4<T: Hash + Eq>(candidate: &[T], reference: &[T]) -> f64 {
    if candidate.is_empty() {
        return if reference.is_empty() { 1.0 } else { 0.0 };
    }
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let cand = ngram_counts(candidate, n);
        let refc = ngram_counts(reference, n);
        let total: usize = cand.values().sum();
        let matched: usize = cand.iter().map(|(g, &k)| k.min(refc.get(g).copied().unwrap_or(0))).sum();
        let p = match matched {
            0 if n == 1 => return 0.0,
            0 => 1.0 / (total + 1) as f64,
            m => m as f64 / total as f64,
        };
        log_sum += p.ln() / 4.0;
    }
    (brevity_penalty(candidate.len(), reference.len()) * log_sum.exp()).clamp(0.0, 1.0)
}

const JAVA_KEYWORDS: [&str; 53] = [
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const", "continue", "default", "do",
    "double", "else", "enum", "extends", "final", "finally", "float", "for", "goto", "if", "implements", "import",
    "instanceof", "int", "interface", "long", "native", "new", "package", "private", "protected", "public", "return",
    "short", "static", "strictfp", "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try",
    "void", "volatile", "while", "true", "false", "null",
];

const KEYWORD_WEIGHT: f64 = 1.0;
const OTHER_WEIGHT: f64 = 0.2;

/// Unigram precision weighting Java keywords five times more than other
/// tokens, times the brevity penalty.
pub fn weighted_unigram<S: AsRef<str> + Hash + Eq>(candidate: &[S], reference: &[S]) -> f64 {
    if candidate.is_empty() {
        return if reference.is_empty() { 1.0 } else { 0.0 };
    }
    let refc = ngram_counts(reference, 1);
    let weight = |t: &S| if JAVA_KEYWORDS.contains(&t.as_ref()) { KEYWORD_WEIGHT } else { OTHER_WEIGHT };
    let (mut num, mut den) = (0.0, 0.0);
    for (g, &k) in &ngram_counts(candidate, 1) {
        let w = weight(&g[0]);
        num += w * k.min(refc.get(g).copied().unwrap_or(0)) as f64;
        den += w * k as f64;
    }
    (brevity_penalty(candidate.len(), reference.len()) * num / den).clamp(0.0, 1.0)
}

fn subtree_shapes(t: &MiniAst) -> HashMap<String, usize> {
    let mut m = HashMap::new();
    for c in &t.children {
        c.walk(&mut |n| {
            if n.kind != NodeKind::Opaque && n.kind != NodeKind::Block {
                *m.entry(n.shape()).or_default() += 1;
            }
        });
    }
    m
}

fn clipped_ratio<K: Hash + Eq>(cand: &HashMap<K, usize>, reference: &HashMap<K, usize>) -> f64 {
    let total: usize = reference.values().sum();
    if total == 0 {
        return if cand.values().sum::<usize>() == 0 { 1.0 } else { 0.0 };
    }
    let matched: usize = reference.iter().map(|(k, &v)| v.min(cand.get(k).copied().unwrap_or(0))).sum();
    matched as f64 / total as f64
}

/// Share of the reference's (kind-only) subtrees also present in the
/// candidate.
pub fn syntax_match(candidate: &MiniAst, reference: &MiniAst) -> f64 {
    clipped_ratio(&subtree_shapes(candidate), &subtree_shapes(reference))
}

const ASSIGN_OPS: [&str; 12] = ["=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=", ">>>="];

fn root_var(path: &str) -> Option<&str> {
    let first = path.split('.').next()?;
    first.starts_with(|c: char| c.is_lowercase() || c == '_').then_some(first)
}

fn vars_in<'a>(nodes: &'a [MiniAst], out: &mut Vec<&'a str>) {
    for n in nodes {
        n.walk(&mut |x| {
            let v = match x.kind {
                NodeKind::Identifier => root_var(&x.label),
                NodeKind::Invocation | NodeKind::Assertion => root_var(&x.qualifier),
                _ => None,
            };
            out.extend(v);
        });
    }
}

fn flow_edges<'a>(n: &'a MiniAst, out: &mut Vec<(&'static str, &'a str, &'a str)>) {
    if n.kind == NodeKind::Statement {
        if n.label == "decl" && n.children.len() >= 2 {
            let def = n.children[1].label.as_str();
            let mut uses = Vec::new();
            vars_in(&n.children[2..], &mut uses);
            out.extend(uses.into_iter().map(|u| ("def", def, u)));
        } else if let Some(k) = n.children.iter().position(|c| c.kind == NodeKind::Operator && ASSIGN_OPS.contains(&c.label.as_str())) {
            let def = n.children[..k].iter().rev().find(|c| c.kind == NodeKind::Identifier).and_then(|c| root_var(&c.label));
            if let Some(def) = def {
                let mut uses = Vec::new();
                vars_in(&n.children[k + 1..], &mut uses);
                out.extend(uses.into_iter().map(|u| ("def", def, u)));
            }
        }
    }
    if matches!(n.kind, NodeKind::Invocation | NodeKind::Assertion) {
        if let Some(recv) = root_var(&n.qualifier) {
            let mut uses = Vec::new();
            vars_in(&n.children, &mut uses);
            out.extend(uses.into_iter().map(|u| ("call", recv, u)));
        }
    }
    for c in &n.children {
        flow_edges(c, out);
    }
}

/// Data-flow edges with variables renamed by order of first appearance.
fn dataflow(t: &MiniAst) -> HashMap<(&'static str, usize, usize), usize> {
    let mut edges = Vec::new();
    flow_edges(t, &mut edges);
    let mut names: HashMap<&str, usize> = HashMap::new();
    let mut m = HashMap::new();
    for (kind, a, b) in edges {
        let next = names.len();
        let ia = *names.entry(a).or_insert(next);
        let next = names.len();
        let ib = *names.entry(b).or_insert(next);
        *m.entry((kind, ia, ib)).or_default() += 1;
    }
    m
}

/// Share of the reference's def-use edges also present in the candidate,
/// up to consistent variable renaming.
pub fn dataflow_match(candidate: &MiniAst, reference: &MiniAst) -> f64 {
    clipped_ratio(&dataflow(candidate), &dataflow(reference))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeBleu {
    pub score: f64,
    pub bleu: f64,
    pub weighted: f64,
    pub syntax: f64,
    pub dataflow: f64,
    /// One side could not be parsed; syntax and data-flow were scored 0.
    pub fallback: bool,
}

pub fn codebleu<S: AsRef<str>>(tok: &dyn Tokenizer, candidate: &[S], reference: &[S]) -> CodeBleu {
    let (c, r) = (code_tokens(tok, candidate), code_tokens(tok, reference));
    if c == r {
        return CodeBleu { score: 1.0, bleu: 1.0, weighted: 1.0, syntax: 1.0, dataflow: 1.0, fallback: false };
    }
    let bleu = bleu4(&c, &r);
    let weighted = weighted_unigram(&c, &r);
    let (tc, tr) = (parse_mini(candidate), parse_mini(reference));
    let fallback = tc.is_opaque() || tr.is_opaque();
    let (syntax, flow) = if fallback { (0.0, 0.0) } else { (syntax_match(&tc, &tr), dataflow_match(&tc, &tr)) };
    let score = 0.25 * (bleu + weighted + syntax + flow);
    CodeBleu { score, bleu, weighted, syntax, dataflow: flow, fallback }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub id: String,
    pub em: bool,
    pub plausible: bool,
    pub bleu: f64,
    pub codebleu: f64,
    pub best_rank: Option<usize>,
    pub fallback: bool,
}

impl InstanceResult {
    fn missing(id: &str) -> Self {
        InstanceResult { id: id.to_string(), em: false, plausible: false, bleu: 0.0, codebleu: 0.0, best_rank: None, fallback: false }
    }
}

/// Scores one instance from its candidate list.
pub fn score_instance(tok: &dyn Tokenizer, inst: &RepairInstance, candidates: &[CandidateRepair]) -> Result<InstanceResult> {
    let gt = inst.repaired_lines()?;
    if candidates.is_empty() {
        return Ok(InstanceResult::missing(&inst.id));
    }
    let best = select_best(tok, candidates, &gt)?;
    let want = code_tokens(tok, &gt);
    let em = candidates.iter().any(|c| candidate_matches(tok, c, &want));
    let lines = best.repaired.clone().unwrap_or_default();
    let cb = codebleu(tok, &lines, &gt);
    Ok(InstanceResult {
        id: inst.id.clone(),
        em,
        plausible: candidates.iter().any(|c| c.verdict == Verdict::Plausible),
        bleu: bleu4(&code_tokens(tok, &lines), &want),
        codebleu: cb.score,
        best_rank: Some(best.rank),
        fallback: cb.fallback,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub em: f64,
    pub pr: f64,
    pub bleu: f64,
    pub codebleu: f64,
    pub n: usize,
    pub rows: Vec<InstanceResult>,
}

/// Percent averages over the rows.
pub fn aggregate(rows: Vec<InstanceResult>) -> Result<EvalReport> {
    if rows.is_empty() {
        return Err(Error::Contract("cannot aggregate an empty evaluation set".into()));
    }
    let n = rows.len() as f64;
    let pct = |f: &dyn Fn(&InstanceResult) -> f64| 100.0 * rows.iter().map(f).sum::<f64>() / n;
    Ok(EvalReport {
        em: pct(&|r| r.em as u8 as f64),
        pr: pct(&|r| r.plausible as u8 as f64),
        bleu: pct(&|r| r.bleu),
        codebleu: pct(&|r| r.codebleu),
        n: rows.len(),
        rows,
    })
}

/// Scores every dataset instance; an instance without a prediction counts
/// as a miss.
pub fn evaluate(tok: &dyn Tokenizer, dataset: &[RepairInstance], predictions: &[Prediction]) -> Result<EvalReport> {
    let by_id: HashMap<&str, &Prediction> = predictions.iter().map(|p| (p.id.as_str(), p)).collect();
    for p in predictions {
        if !dataset.iter().any(|i| i.id == p.id) {
            log::warn!("prediction for unknown instance {}", p.id);
        }
    }
    let rows = dataset
        .iter()
        .map(|inst| match by_id.get(inst.id.as_str()) {
            Some(p) => score_instance(tok, inst, &p.candidates),
            None => {
                log::warn!("no prediction for instance {}", inst.id);
                Ok(InstanceResult::missing(&inst.id))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    aggregate(rows)
}

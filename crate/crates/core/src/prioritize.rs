//! Hunk prioritisation: hp1 (call-graph depth, context type, breakage
//! similarity) and hp2 (breakage similarity, repetition, test similarity).

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hunks::HunkSets;
use crate::model::{CallGraph, GraphKind, Hunk, RepairInstance};
use crate::similarity::{repetition_counts, tfidf_cosine};
use crate::tokenize::{flat_words, Tokenizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Hp1,
    Hp2,
}

/// Ordered so that `Method < Class < None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ContextType {
    Method,
    Class,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HunkPriority {
    pub hunk_id: usize,
    /// Edge count from the test; `None` when unreachable.
    pub depth: Option<usize>,
    pub context_type: ContextType,
    pub brk_sim: f64,
    pub test_sim: f64,
    pub repetition: usize,
}

/// Node a hunk maps to in a graph of the given kind.
pub fn graph_node(hunk: &Hunk, kind: GraphKind) -> &str {
    match kind {
        GraphKind::MethodLevel => &hunk.enclosing,
        GraphKind::ClassLevel => hunk.class_name(),
    }
}

pub fn call_graph_depth(hunk: &Hunk, graph: &CallGraph) -> Option<usize> {
    graph.depth(graph_node(hunk, graph.kind))
}

pub fn compute_priorities<T: Tokenizer + ?Sized>(inst: &RepairInstance, sets: &HunkSets, tok: &T) -> Vec<HunkPriority> {
    let hunks = &sets.all;
    let docs: Vec<Vec<String>> = hunks.iter().map(|h| flat_words(tok, &h.changed_lines().collect::<Vec<_>>())).collect();
    let brk = tfidf_cosine(&docs, &flat_words(tok, &inst.breakage_lines()));
    let test = tfidf_cosine(&docs, &flat_words(tok, &inst.broken_test.source));
    let rep = repetition_counts(hunks);
    (0..hunks.len())
        .map(|i| {
            let (context_type, depth) = if sets.covered_method.contains(&i) {
                (ContextType::Method, inst.call_graph_method.as_ref().and_then(|g| call_graph_depth(&hunks[i], g)))
            } else if sets.covered_class.contains(&i) {
                (ContextType::Class, inst.call_graph_class.as_ref().and_then(|g| call_graph_depth(&hunks[i], g)))
            } else {
                (ContextType::None, None)
            };
            HunkPriority { hunk_id: i, depth, context_type, brk_sim: brk[i], test_sim: test[i], repetition: rep[i] }
        })
        .collect()
}

fn depth_cmp(a: Option<usize>, b: Option<usize>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => x.cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
}

/// Orders `priorities` by the strategy's criteria, breaking remaining ties
/// by (file, old_start) of `hunks[hunk_id]`.
pub fn prioritize(hunks: &[Hunk], priorities: &[HunkPriority], strategy: Strategy) -> Result<Vec<usize>> {
    if strategy == Strategy::Hp1 {
        if let Some(p) = priorities.iter().find(|p| p.context_type == ContextType::None) {
            return Err(Error::Contract(format!("hunk {} is outside the covered context and cannot be ranked by hp1", p.hunk_id)));
        }
    }
    let mut order: Vec<&HunkPriority> = priorities.iter().collect();
    order.sort_by(|a, b| {
        let primary = match strategy {
            Strategy::Hp1 => depth_cmp(a.depth, b.depth)
                .then(a.context_type.cmp(&b.context_type))
                .then(b.brk_sim.total_cmp(&a.brk_sim)),
            Strategy::Hp2 => b
                .brk_sim
                .total_cmp(&a.brk_sim)
                .then(b.repetition.cmp(&a.repetition))
                .then(b.test_sim.total_cmp(&a.test_sim)),
        };
        let (ha, hb) = (&hunks[a.hunk_id], &hunks[b.hunk_id]);
        primary.then_with(|| (&ha.file, ha.old_start).cmp(&(&hb.file, hb.old_start)))
    });
    Ok(order.into_iter().map(|p| p.hunk_id).collect())
}

//! SUT diffing into method- and class-level hunks, and repair-context sets.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use similar::{capture_diff_slices, Algorithm, DiffTag};

use crate::error::{Error, Result};
use crate::java;
use crate::model::{class_of_method, CallGraph, Hunk, HunkLevel, RepairInstance};

pub type FileMap = BTreeMap<String, Vec<String>>;

/// One row of the external method-index JSON. Names containing `(` are
/// methods, anything else a class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub file: String,
    pub fqn: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Span {
    fqn: String,
    start: usize,
    end: usize,
}

/// Method and class line spans for one version of the SUT.
#[derive(Debug, Clone, Default)]
pub struct SourceIndex {
    methods: BTreeMap<String, Vec<Span>>,
    classes: BTreeMap<String, Vec<Span>>,
}

impl SourceIndex {
    pub fn from_entries(entries: &[IndexEntry]) -> Self {
        let mut idx = SourceIndex::default();
        for e in entries {
            let span = Span { fqn: e.fqn.clone(), start: e.start, end: e.end };
            let map = if e.fqn.contains('(') { &mut idx.methods } else { &mut idx.classes };
            map.entry(e.file.clone()).or_default().push(span);
        }
        for spans in idx.methods.values_mut().chain(idx.classes.values_mut()) {
            spans.sort_by_key(|s| (s.start, s.end));
        }
        idx
    }

    /// Builds the index with the bundled Java indexer.
    pub fn from_java(files: &FileMap) -> Self {
        Self::from_entries(&java_entries(files))
    }

    pub fn entries(&self) -> Vec<IndexEntry> {
        let mut out = Vec::new();
        for (file, spans) in self.classes.iter().chain(self.methods.iter()) {
            for s in spans {
                out.push(IndexEntry { file: file.clone(), fqn: s.fqn.clone(), start: s.start, end: s.end });
            }
        }
        out.sort_by(|a, b| (&a.file, a.start, &a.fqn).cmp(&(&b.file, b.start, &b.fqn)));
        out
    }

    fn validate(&self, files: &FileMap) -> Result<()> {
        for (file, spans) in &self.methods {
            let len = files.get(file).map_or(usize::MAX, Vec::len);
            for s in spans {
                if s.start == 0 || s.start > s.end || s.end > len {
                    return Err(Error::Structure(format!("span of {} ({}-{}) outside {file}", s.fqn, s.start, s.end)));
                }
            }
            for w in spans.windows(2) {
                if w[1].start <= w[0].end {
                    return Err(Error::Structure(format!("overlapping method spans {} and {} in {file}", w[0].fqn, w[1].fqn)));
                }
            }
        }
        Ok(())
    }

    fn method_at(&self, file: &str, line: usize) -> Option<&Span> {
        self.methods.get(file)?.iter().find(|s| s.start <= line && line <= s.end)
    }

    fn class_at(&self, file: &str, line: usize) -> Option<&str> {
        self.classes
            .get(file)?
            .iter()
            .filter(|s| s.start <= line && line <= s.end)
            .min_by_key(|s| s.end - s.start)
            .map(|s| s.fqn.as_str())
    }

    fn outer_class(&self, file: &str) -> String {
        self.classes
            .get(file)
            .and_then(|v| v.first())
            .map(|s| s.fqn.clone())
            .unwrap_or_else(|| file.rsplit('/').next().unwrap_or(file).trim_end_matches(".java").to_string())
    }

    fn method_names(&self, file: &str) -> BTreeSet<String> {
        self.methods.get(file).map(|v| v.iter().map(|s| s.fqn.clone()).collect()).unwrap_or_default()
    }

    fn method_span(&self, file: &str, fqn: &str) -> Option<&Span> {
        self.methods.get(file)?.iter().find(|s| s.fqn == fqn)
    }
}

pub fn java_entries(files: &FileMap) -> Vec<IndexEntry> {
    let mut out = Vec::new();
    for (path, lines) in files {
        for d in java::index_file(lines).decls {
            out.push(IndexEntry { file: path.clone(), fqn: d.fqn, start: d.start, end: d.end });
        }
    }
    out
}

/// Maps every old method name to itself or to its most Jaro–Winkler-similar
/// new name within the same class. Old names with no candidate are absent.
pub fn match_method_names(old_fqns: &BTreeSet<String>, new_fqns: &BTreeSet<String>) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for old in old_fqns {
        if new_fqns.contains(old) {
            out.insert(old.clone(), old.clone());
            continue;
        }
        let class = class_of_method(old);
        let sig = &old[class.len()..];
        let mut best: Option<(f64, &String)> = None;
        for new in new_fqns.iter().filter(|n| class_of_method(n) == class && !old_fqns.contains(*n)) {
            let sim = strsim::jaro_winkler(sig, &new[class.len()..]);
            // BTreeSet iteration is sorted, so strict > keeps the smallest name on ties
            if best.is_none_or(|(b, _)| sim > b) {
                best = Some((sim, new));
            }
        }
        if let Some((_, new)) = best {
            out.insert(old.clone(), new.clone());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Key {
    Method(String),
    Class(String),
}

/// Diffs every file present in both versions into method hunks (M) and
/// class hunks (C).
pub fn extract_hunks(
    old_files: &FileMap,
    new_files: &FileMap,
    old_index: &SourceIndex,
    new_index: &SourceIndex,
) -> Result<(Vec<Hunk>, Vec<Hunk>)> {
    old_index.validate(old_files)?;
    new_index.validate(new_files)?;
    let mut method_hunks = Vec::new();
    let mut class_hunks = Vec::new();
    for (path, old) in old_files {
        let Some(new) = new_files.get(path) else { continue };
        if old == new {
            continue;
        }
        let renames = match_method_names(&old_index.method_names(path), &new_index.method_names(path));
        let mut back: BTreeMap<&str, &str> = BTreeMap::new();
        for (o, n) in &renames {
            back.entry(n.as_str()).or_insert(o.as_str());
        }
        for h in diff_file(path, old, new, old_index, new_index, &renames, &back) {
            match h.level {
                HunkLevel::Method => method_hunks.push(h),
                HunkLevel::Class => class_hunks.push(h),
            }
        }
    }
    Ok((method_hunks, class_hunks))
}

pub(crate) struct Block {
    pub(crate) old: std::ops::Range<usize>,
    pub(crate) new: std::ops::Range<usize>,
}

pub(crate) fn change_blocks(old: &[String], new: &[String]) -> Vec<Block> {
    let mut out: Vec<Block> = Vec::new();
    let mut open = false;
    for op in capture_diff_slices(Algorithm::Myers, old, new) {
        let (tag, o, n) = op.as_tag_tuple();
        if tag == DiffTag::Equal {
            open = false;
            continue;
        }
        match out.last_mut() {
            Some(b) if open => {
                b.old.end = o.end;
                b.new.end = n.end;
            }
            _ => out.push(Block { old: o, new: n }),
        }
        open = true;
    }
    out
}

fn diff_file(
    path: &str,
    old: &[String],
    new: &[String],
    old_index: &SourceIndex,
    new_index: &SourceIndex,
    renames: &BTreeMap<String, String>,
    back: &BTreeMap<&str, &str>,
) -> Vec<Hunk> {
    let class_key = |index: &SourceIndex, line: usize| {
        Key::Class(index.class_at(path, line).map(str::to_string).unwrap_or_else(|| old_index.outer_class(path)))
    };
    let mut out = Vec::new();
    for block in change_blocks(old, new) {
        let mut order: Vec<Key> = Vec::new();
        let mut groups: BTreeMap<Key, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
        for i in block.old.clone() {
            let key = match old_index.method_at(path, i + 1) {
                Some(m) => Key::Method(m.fqn.clone()),
                None => class_key(old_index, i + 1),
            };
            if !groups.contains_key(&key) {
                order.push(key.clone());
            }
            groups.entry(key).or_default().0.push(i);
        }
        for j in block.new.clone() {
            let key = match new_index.method_at(path, j + 1).and_then(|m| back.get(m.fqn.as_str())) {
                Some(old_fqn) => Key::Method(old_fqn.to_string()),
                None => class_key(new_index, j + 1),
            };
            if !groups.contains_key(&key) {
                order.push(key.clone());
            }
            groups.entry(key).or_default().1.push(j);
        }
        for key in order {
            let (dels, adds) = &groups[&key];
            let (level, enclosing) = match &key {
                Key::Method(f) => (HunkLevel::Method, f.clone()),
                Key::Class(c) => (HunkLevel::Class, c.clone()),
            };
            let mut hunk = Hunk {
                file: path.to_string(),
                level,
                enclosing,
                deleted_lines: dels.iter().map(|&i| old[i].clone()).collect(),
                added_lines: adds.iter().map(|&j| new[j].clone()).collect(),
                old_start: dels.first().map_or(block.old.start, |&i| i) + 1,
                new_start: adds.first().map_or(block.new.start, |&j| j) + 1,
                context_before: Vec::new(),
                context_after: Vec::new(),
            };
            if let Key::Method(old_fqn) = &key {
                if let Some(span) = renames.get(old_fqn).and_then(|n| new_index.method_span(path, n)) {
                    let before = block.new.start;
                    if before >= 1 && span.start <= before && before <= span.end {
                        hunk.context_before.push(new[before - 1].clone());
                    }
                    let after = block.new.end + 1;
                    if after <= new.len() && span.start <= after && after <= span.end {
                        hunk.context_after.push(new[after - 1].clone());
                    }
                }
            }
            out.push(hunk);
        }
    }
    out
}

/// Hunk sets as indices into `all`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HunkSets {
    pub all: Vec<Hunk>,
    pub method_hunks: Vec<usize>,
    pub class_hunks: Vec<usize>,
    pub covered_method: Vec<usize>,
    pub covered_class: Vec<usize>,
}

impl HunkSets {
    pub fn is_covered(&self, id: usize) -> bool {
        self.covered_method.contains(&id) || self.covered_class.contains(&id)
    }
}

pub fn build_context_sets(m: Vec<Hunk>, c: Vec<Hunk>, gm: Option<&CallGraph>, gc: Option<&CallGraph>) -> HunkSets {
    let mut all = m;
    let n_method = all.len();
    all.extend(c);
    let method_depths = gm.map(CallGraph::depths).unwrap_or_default();
    let class_depths = gc.map(CallGraph::depths).unwrap_or_default();
    let covered_method: Vec<usize> =
        (0..n_method).filter(|&i| method_depths.contains_key(all[i].enclosing.as_str())).collect();
    let covered_class = (0..all.len())
        .filter(|i| !covered_method.contains(i) && class_depths.contains_key(all[*i].class_name()))
        .collect();
    HunkSets {
        method_hunks: (0..n_method).collect(),
        class_hunks: (n_method..all.len()).collect(),
        covered_method,
        covered_class,
        all,
    }
}

/// Context sets over an instance's hunks, indexed like `sut_hunks`.
pub fn instance_context_sets(inst: &RepairInstance) -> HunkSets {
    let method_depths = inst.call_graph_method.as_ref().map(CallGraph::depths).unwrap_or_default();
    let class_depths = inst.call_graph_class.as_ref().map(CallGraph::depths).unwrap_or_default();
    let hunks = &inst.sut_hunks;
    let method_hunks: Vec<usize> = (0..hunks.len()).filter(|&i| hunks[i].level == HunkLevel::Method).collect();
    let class_hunks = (0..hunks.len()).filter(|&i| hunks[i].level == HunkLevel::Class).collect();
    let covered_method: Vec<usize> =
        method_hunks.iter().copied().filter(|&i| method_depths.contains_key(hunks[i].enclosing.as_str())).collect();
    let covered_class = (0..hunks.len())
        .filter(|i| !covered_method.contains(i) && class_depths.contains_key(hunks[*i].class_name()))
        .collect();
    HunkSets { all: hunks.clone(), method_hunks, class_hunks, covered_method, covered_class }
}

/// Lines of a method declaration (by span) in a file.
pub fn method_lines(files: &FileMap, index: &SourceIndex, file: &str, fqn: &str) -> Option<Vec<String>> {
    let span = index.method_span(file, fqn)?;
    Some(files.get(file)?[span.start - 1..span.end].to_vec())
}

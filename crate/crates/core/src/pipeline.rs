//! Mining test-repair candidates from git history, exclusion filters,
//! temporal splits.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;
use std::process::Command;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::diff::{word_diff, GroupKind};
use crate::error::{Error, Result};
use crate::hunks::{change_blocks, extract_hunks, java_entries, FileMap, SourceIndex};
use crate::java::{index_file, Decl};
use crate::model::*;
use crate::prompt::{Codec, IoConfig, IoFormat};
use crate::tokenize::{flat_words, is_word_char, PunctTokenizer, Tokenizer};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MineConfig {
    /// Path fragment marking test sources.
    pub test_root: String,
    pub test_annotation: String,
    /// Defaults to the repository directory name.
    pub project: Option<String>,
}

impl Default for MineConfig {
    fn default() -> Self {
        MineConfig { test_root: "src/test".into(), test_annotation: "@Test".into(), project: None }
    }
}

impl MineConfig {
    fn is_test_file(&self, path: &str, contents: &[&[String]]) -> bool {
        path.contains(&self.test_root) || contents.iter().any(|c| c.iter().any(|l| l.contains(&self.test_annotation)))
    }

    fn is_test_method(&self, d: &Decl) -> bool {
        let name = self.test_annotation.trim_start_matches('@');
        d.annotations.iter().any(|a| a == name || a.ends_with(&format!(".{name}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationStatus {
    PendingValidation,
    Validated,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinedCandidate {
    pub instance: RepairInstance,
    pub status: ValidationStatus,
    /// Non-test Java files touched by the commit.
    pub sut_files_changed: usize,
    /// The repair only inserts lines; the breakage then marks the line
    /// preceding the insertion.
    pub add_only: bool,
}

fn git(repo: &Path, args: &[&str]) -> Result<Vec<u8>> {
    let out = Command::new("git").arg("-C").arg(repo).args(args).output().map_err(|e| Error::io(repo, e))?;
    if !out.status.success() {
        return Err(Error::Git(format!("git {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim())));
    }
    Ok(out.stdout)
}

fn show(repo: &Path, rev: &str, path: &str) -> Result<Vec<String>> {
    let out = git(repo, &["show", &format!("{rev}:{path}")])?;
    Ok(String::from_utf8_lossy(&out).lines().map(str::to_string).collect())
}

struct Commit {
    hash: String,
    parent: Option<String>,
    time: DateTime<Utc>,
}

fn commits(repo: &Path) -> Result<Vec<Commit>> {
    let out = git(repo, &["log", "--format=%H %ct %P", "HEAD"])?;
    String::from_utf8_lossy(&out)
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            let secs: i64 = f.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Git(format!("bad log line {l:?}")))?;
            Ok(Commit {
                hash: f[0].to_string(),
                parent: f.get(2).map(|s| s.to_string()),
                time: DateTime::from_timestamp(secs, 0).ok_or_else(|| Error::Git(format!("bad timestamp {secs}")))?,
            })
        })
        .collect()
}

/// Every commit reachable from HEAD is compared with its first parent;
/// root commits are skipped.
pub fn mine_repo(repo: impl AsRef<Path>, config: &MineConfig) -> Result<Vec<MinedCandidate>> {
    let repo = repo.as_ref();
    std::fs::metadata(repo).map_err(|e| Error::io(repo, e))?;
    let project = match &config.project {
        Some(p) => p.clone(),
        None => std::fs::canonicalize(repo)
            .map_err(|e| Error::io(repo, e))?
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "repo".into()),
    };
    let all = commits(repo)?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(8);
    let chunk = all.len().div_ceil(workers).max(1);
    let results: Vec<Result<Vec<MinedCandidate>>> = std::thread::scope(|s| {
        let handles: Vec<_> = all
            .chunks(chunk)
            .map(|part| {
                let project = &project;
                s.spawn(move || -> Result<Vec<MinedCandidate>> {
                    let mut out = Vec::new();
                    for c in part {
                        out.extend(mine_commit(repo, c, config, project)?);
                    }
                    Ok(out)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("mining worker panicked")).collect()
    });
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

fn mine_commit(repo: &Path, c: &Commit, config: &MineConfig, project: &str) -> Result<Vec<MinedCandidate>> {
    let Some(parent) = &c.parent else { return Ok(vec![]) };
    let raw = git(repo, &["diff", "--no-renames", "--name-status", "-z", parent, &c.hash])?;
    let raw = String::from_utf8_lossy(&raw);
    let fields: Vec<&str> = raw.split('\0').filter(|s| !s.is_empty()).collect();
    let mut sut_old = FileMap::new();
    let mut sut_new = FileMap::new();
    let mut tests: Vec<(String, Vec<String>, Vec<String>)> = Vec::new();
    let mut sut_files_changed = 0;
    for pair in fields.chunks(2) {
        let [status, path] = pair else { continue };
        if !path.ends_with(".java") {
            continue;
        }
        let old = if status.starts_with('A') { vec![] } else { show(repo, parent, path)? };
        let new = if status.starts_with('D') { vec![] } else { show(repo, &c.hash, path)? };
        if config.is_test_file(path, &[&old, &new]) {
            if status.starts_with('M') {
                tests.push((path.to_string(), old, new));
            }
        } else {
            sut_files_changed += 1;
            if status.starts_with('M') {
                sut_old.insert(path.to_string(), old);
                sut_new.insert(path.to_string(), new);
            }
        }
    }
    if tests.is_empty() {
        return Ok(vec![]);
    }
    let hunks = match extract_hunks(&sut_old, &sut_new, &SourceIndex::from_java(&sut_old), &SourceIndex::from_java(&sut_new)) {
        Ok((m, cl)) => cl.into_iter().chain(m).collect(),
        Err(e) => {
            log::warn!("commit {}: SUT hunks skipped: {e}", c.hash);
            vec![]
        }
    };
    let mut sut_entries = java_entries(&sut_old);
    sut_entries.extend(java_entries(&sut_new));

    let mut out = Vec::new();
    for (path, old, new) in &tests {
        let old_idx = index_file(old);
        let new_idx = index_file(new);
        let new_tests: HashMap<&str, &Decl> =
            new_idx.methods().filter(|d| config.is_test_method(d)).map(|d| (d.fqn.as_str(), d)).collect();
        for od in old_idx.methods().filter(|d| config.is_test_method(d)) {
            let Some(nd) = new_tests.get(od.fqn.as_str()) else {
                log::debug!("commit {}: {} has no counterpart", c.hash, od.fqn);
                continue;
            };
            let broken = old[od.start - 1..od.end].to_vec();
            let repaired = new[nd.start - 1..nd.end].to_vec();
            if broken == repaired {
                continue;
            }
            let blocks = change_blocks(&broken, &repaired);
            if blocks.len() != 1 {
                continue;
            }
            let b = &blocks[0];
            let add_only = b.old.is_empty();
            let lines = if add_only { LineRange::single(b.old.start.max(1)) } else { LineRange::new(b.old.start + 1, b.old.end) };
            let (gm, gc) = name_call_graphs(&od.fqn, &broken, &sut_entries);
            let test = |source: Vec<String>| TestCase {
                fully_qualified_name: od.fqn.clone(),
                source,
                file_path: path.clone(),
                annotation_present: true,
            };
            out.push(MinedCandidate {
                instance: RepairInstance {
                    id: format!("{project}:{}:{}", &c.hash[..c.hash.len().min(10)], od.fqn),
                    broken_test: test(broken),
                    repaired_test: test(repaired),
                    breakage: BreakageSpec::new(vec![lines], BreakageKind::Unknown),
                    sut_hunks: hunks.clone(),
                    call_graph_method: Some(gm),
                    call_graph_class: Some(gc),
                    commit: c.hash.clone(),
                    commit_time: c.time,
                    project: project.to_string(),
                },
                status: ValidationStatus::PendingValidation,
                sut_files_changed,
                add_only,
            });
        }
    }
    Ok(out)
}

fn simple_method_name(fqn: &str) -> &str {
    let head = fqn.split('(').next().unwrap_or(fqn);
    head.rsplit('.').next().unwrap_or(head)
}

/// Depth-one graphs linking the test to SUT methods it calls by simple name
/// and to the classes it mentions.
fn name_call_graphs(test_fqn: &str, body: &[String], entries: &[crate::hunks::IndexEntry]) -> (CallGraph, CallGraph) {
    let words: Vec<String> = body.iter().flat_map(|l| PunctTokenizer.words(l)).collect();
    let called: HashSet<&str> = words.windows(2).filter(|w| w[1] == "(").map(|w| w[0].as_str()).collect();
    let mentioned: HashSet<&str> = words.iter().map(String::as_str).collect();
    let mut method_edges = BTreeSet::new();
    let mut classes = BTreeSet::new();
    for e in entries.iter().filter(|e| e.fqn.contains('(')) {
        if called.contains(simple_method_name(&e.fqn)) {
            method_edges.insert((test_fqn.to_string(), e.fqn.clone()));
            classes.insert(class_of_method(&e.fqn).to_string());
        }
    }
    for e in entries.iter().filter(|e| !e.fqn.contains('(')) {
        if mentioned.contains(e.fqn.rsplit('.').next().unwrap_or(&e.fqn)) {
            classes.insert(e.fqn.clone());
        }
    }
    let class_edges = classes.into_iter().map(|c| (test_fqn.to_string(), c)).collect();
    (
        CallGraph::reachable(test_fqn, GraphKind::MethodLevel, method_edges.into_iter().collect()),
        CallGraph::reachable(test_fqn, GraphKind::ClassLevel, class_edges),
    )
}

type DedupeKey = (Vec<String>, Vec<String>, Vec<(String, Vec<String>, Vec<String>)>);

fn dedupe_key(inst: &RepairInstance) -> DedupeKey {
    let trim = |v: &[String]| v.iter().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect::<Vec<_>>();
    let mut hunks: Vec<_> = inst.sut_hunks.iter().map(|h| (h.file.clone(), trim(&h.deleted_lines), trim(&h.added_lines))).collect();
    hunks.sort();
    (trim(&inst.broken_test.source), trim(&inst.repaired_test.source), hunks)
}

/// Indices of candidates that repeat an earlier (by commit time) one.
fn duplicate_flags(cands: &[MinedCandidate]) -> Vec<bool> {
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by_key(|&i| (cands[i].instance.commit_time, i));
    let mut seen = HashSet::new();
    let mut dup = vec![false; cands.len()];
    for i in order {
        if !seen.insert(dedupe_key(&cands[i].instance)) {
            dup[i] = true;
        }
    }
    dup
}

pub fn dedupe(cands: Vec<MinedCandidate>) -> Vec<MinedCandidate> {
    let dup = duplicate_flags(&cands);
    cands.into_iter().zip(dup).filter(|(_, d)| !d).map(|(c, _)| c).collect()
}

pub fn detect_test_only_commit(cand: &MinedCandidate) -> bool {
    cand.sut_files_changed == 0
}

/// A single identifier replaced by another in some SUT hunk, and the test
/// repair is exactly that rename applied to the breakage lines.
pub fn detect_trivial(tok: &dyn Tokenizer, inst: &RepairInstance) -> bool {
    let Ok(repaired) = inst.repaired_lines() else { return false };
    let broken = flat_words(tok, &inst.breakage_lines());
    let repaired = flat_words(tok, &repaired);
    let is_ident = |s: &str| s.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_') && s.chars().all(is_word_char);
    inst.sut_hunks.iter().any(|h| {
        let old = flat_words(tok, &h.deleted_lines);
        let new = flat_words(tok, &h.added_lines);
        let changes: Vec<_> = word_diff(&old, &new).into_iter().filter(|g| g.kind != GroupKind::Keep).collect();
        let [d, a] = changes.as_slice() else { return false };
        if d.kind != GroupKind::Del || a.kind != GroupKind::Add || d.old.len() != 1 || a.new.len() != 1 {
            return false;
        }
        let (from, to) = (&old[d.old.start], &new[a.new.start]);
        if !is_ident(from) || !is_ident(to) || !broken.contains(from) {
            return false;
        }
        let renamed: Vec<&String> = broken.iter().map(|t| if t == from { to } else { t }).collect();
        renamed.len() == repaired.len() && renamed.iter().zip(&repaired).all(|(x, y)| *x == y)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    Duplicate,
    TestOnly,
    EmptyContext,
    NoBreakageLocation,
    Length,
}

impl ExclusionReason {
    pub const ALL: [ExclusionReason; 5] = [
        ExclusionReason::Duplicate,
        ExclusionReason::TestOnly,
        ExclusionReason::EmptyContext,
        ExclusionReason::NoBreakageLocation,
        ExclusionReason::Length,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ExclusionReason::Duplicate => "duplicate",
            ExclusionReason::TestOnly => "test_only",
            ExclusionReason::EmptyContext => "empty_context",
            ExclusionReason::NoBreakageLocation => "no_breakage_location",
            ExclusionReason::Length => "length",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub id: String,
    pub commit: String,
    pub reason: ExclusionReason,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub kept: Vec<RepairInstance>,
    pub excluded: Vec<Exclusion>,
}

impl FilterOutcome {
    pub fn count(&self, reason: ExclusionReason) -> usize {
        self.excluded.iter().filter(|e| e.reason == reason).count()
    }
}

/// Each candidate gets at most one reason, the first that applies in
/// [`ExclusionReason::ALL`] order. Length is checked under IO2.
pub fn apply_exclusion_filters(cands: Vec<MinedCandidate>, codec: &Codec) -> Result<FilterOutcome> {
    let dup = duplicate_flags(&cands);
    let io2 = IoConfig::new(IoFormat::Io2);
    let mut out = FilterOutcome::default();
    for (c, is_dup) in cands.into_iter().zip(dup) {
        let reason = if is_dup {
            Some((ExclusionReason::Duplicate, String::new()))
        } else if detect_test_only_commit(&c) {
            Some((ExclusionReason::TestOnly, String::new()))
        } else if c.instance.sut_hunks.is_empty() {
            Some((ExclusionReason::EmptyContext, String::new()))
        } else if c.add_only {
            Some((ExclusionReason::NoBreakageLocation, String::new()))
        } else {
            match codec.encode_instance(&c.instance, &io2) {
                Ok(_) => None,
                Err(e @ (Error::Truncation { .. } | Error::OutputTooLong { .. })) => Some((ExclusionReason::Length, e.to_string())),
                Err(e) => return Err(e),
            }
        };
        match reason {
            None => out.kept.push(c.instance),
            Some((reason, detail)) => out.excluded.push(Exclusion { id: c.instance.id, commit: c.instance.commit, reason, detail }),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: u32,
    pub val: u32,
    pub test: u32,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 80, val: 5, test: 15 }
    }
}

impl FromStr for SplitRatios {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<u32> = s
            .split(',')
            .map(|p| p.trim().parse().map_err(|_| Error::Contract(format!("bad ratio {p:?}"))))
            .collect::<Result<_>>()?;
        let [train, val, test] = parts[..] else { return Err(Error::Contract(format!("expected three ratios, got {s:?}"))) };
        if train + val + test != 100 {
            return Err(Error::Contract(format!("ratios {s:?} do not sum to 100")));
        }
        Ok(SplitRatios { train, val, test })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Split {
    pub train: Vec<RepairInstance>,
    pub val: Vec<RepairInstance>,
    pub test: Vec<RepairInstance>,
    /// Trivial repairs that fell into validation or test.
    pub dropped_trivial: Vec<String>,
}

/// Per project, oldest commits to train and newest to test. Ties in
/// commit time at a boundary go to the earlier split.
pub fn split(instances: Vec<RepairInstance>, ratios: SplitRatios, tok: &dyn Tokenizer) -> Split {
    let mut by_project: BTreeMap<String, Vec<RepairInstance>> = BTreeMap::new();
    for i in instances {
        by_project.entry(i.project.clone()).or_default().push(i);
    }
    let mut out = Split::default();
    for (project, mut items) in by_project {
        items.sort_by(|a, b| (a.commit_time, &a.id).cmp(&(b.commit_time, &b.id)));
        let n = items.len();
        if n < 3 {
            log::warn!("project {project} has {n} instances; all assigned to train");
            out.train.extend(items);
            continue;
        }
        let extend = |mut k: usize, floor: usize| {
            while k > floor && k < n && items[k].commit_time == items[k - 1].commit_time {
                k += 1;
            }
            k
        };
        let train_end = extend(n * ratios.train as usize / 100, 0);
        let val_end = extend((train_end + n * ratios.val as usize / 100).min(n), train_end);
        let mut rest = items.split_off(train_end);
        let test = rest.split_off(val_end - train_end);
        out.train.extend(items);
        for (inst, val) in rest.into_iter().map(|i| (i, true)).chain(test.into_iter().map(|i| (i, false))) {
            if detect_trivial(tok, &inst) {
                out.dropped_trivial.push(inst.id);
            } else if val {
                out.val.push(inst);
            } else {
                out.test.push(inst);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Overlap {
    NoIntersection,
    ExactMatch,
    SomeIntersection,
}

pub fn breakage_error_overlap(inst: &RepairInstance, error_lines: &BTreeSet<usize>) -> Overlap {
    let brk = inst.breakage.line_set();
    if brk == *error_lines {
        Overlap::ExactMatch
    } else if brk.is_disjoint(error_lines) {
        Overlap::NoIntersection
    } else {
        Overlap::SomeIntersection
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapRow {
    pub overlap: Overlap,
    pub count: usize,
    pub percent: f64,
    /// Published share over all failures, for comparison only.
    pub reference_percent: f64,
}

pub fn overlap_table(values: &[Overlap]) -> Vec<OverlapRow> {
    [(Overlap::NoIntersection, 41.2), (Overlap::ExactMatch, 50.1), (Overlap::SomeIntersection, 8.7)]
        .into_iter()
        .map(|(o, reference_percent)| {
            let count = values.iter().filter(|&&v| v == o).count();
            let percent = if values.is_empty() { 0.0 } else { 100.0 * count as f64 / values.len() as f64 };
            OverlapRow { overlap: o, count, percent, reference_percent }
        })
        .collect()
}

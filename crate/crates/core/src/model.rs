//! Shared domain types and the JSONL dataset schema.

use std::collections::{HashSet, VecDeque};
use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestCase {
    pub fully_qualified_name: String,
    pub source: Vec<String>,
    pub file_path: String,
    pub annotation_present: bool,
}

impl TestCase {
    /// `pkg.Class` part of the FQN.
    pub fn class_name(&self) -> &str {
        class_of_method(&self.fully_qualified_name)
    }

    /// Bare method name.
    pub fn method_name(&self) -> &str {
        let head = self.fully_qualified_name.split('(').next().unwrap_or("");
        head.rsplit('.').next().unwrap_or(head)
    }

    pub fn simple_class_name(&self) -> &str {
        let c = self.class_name();
        c.rsplit('.').next().unwrap_or(c)
    }

    fn validate(&self, id: &str, which: &str) -> Result<()> {
        if self.source.is_empty() {
            return Err(Error::validation(id, format!("{which} source is empty")));
        }
        if !self.fully_qualified_name.contains('.') {
            return Err(Error::validation(
                id,
                format!("{which} name {:?} is not fully qualified", self.fully_qualified_name),
            ));
        }
        Ok(())
    }
}

/// `pkg.Class.method(T)` → `pkg.Class`; a name without parameters is taken
/// as a method name whose last segment is dropped.
pub fn class_of_method(fqn: &str) -> &str {
    let head = fqn.split('(').next().unwrap_or(fqn);
    match head.rfind('.') {
        Some(i) => &fqn[..i],
        None => head,
    }
}

/// Inclusive, 1-based line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineRange {
    pub start: usize,
    pub end: usize,
}

impl LineRange {
    pub fn new(start: usize, end: usize) -> Self {
        LineRange { start, end }
    }

    pub fn single(line: usize) -> Self {
        LineRange { start: line, end: line }
    }

    pub fn contains(&self, line: usize) -> bool {
        self.start <= line && line <= self.end
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BreakageKind {
    CompileError,
    RuntimeFailure,
    /// Not yet established by execution.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BreakageSpec {
    pub lines: Vec<LineRange>,
    pub kind: BreakageKind,
}

impl BreakageSpec {
    pub fn new(lines: Vec<LineRange>, kind: BreakageKind) -> Self {
        BreakageSpec { lines, kind }
    }

    pub fn line_set(&self) -> std::collections::BTreeSet<usize> {
        self.lines.iter().flat_map(|r| r.start..=r.end).collect()
    }

    /// Covering range from the first breakage line to the last.
    pub fn span(&self) -> LineRange {
        LineRange::new(self.lines[0].start, self.lines[self.lines.len() - 1].end)
    }

    pub fn validate(&self, id: &str, source_len: usize) -> Result<()> {
        if self.lines.is_empty() {
            return Err(Error::validation(id, "breakage has no ranges"));
        }
        let mut prev_end = 0;
        for r in &self.lines {
            if r.start == 0 || r.start > r.end {
                return Err(Error::validation(id, format!("malformed breakage range {}-{}", r.start, r.end)));
            }
            if r.end > source_len {
                return Err(Error::validation(
                    id,
                    format!("breakage range {}-{} exceeds test length {}", r.start, r.end, source_len),
                ));
            }
            if r.start <= prev_end {
                return Err(Error::validation(id, "breakage ranges overlap or are unsorted"));
            }
            prev_end = r.end;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HunkLevel {
    Method,
    Class,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hunk {
    pub file: String,
    pub level: HunkLevel,
    pub enclosing: String,
    pub deleted_lines: Vec<String>,
    pub added_lines: Vec<String>,
    pub old_start: usize,
    pub new_start: usize,
    /// Unchanged line(s) of the same method just before the change.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub context_before: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub context_after: Vec<String>,
}

impl Hunk {
    /// Class the hunk belongs to.
    pub fn class_name(&self) -> &str {
        match self.level {
            HunkLevel::Method => class_of_method(&self.enclosing),
            HunkLevel::Class => &self.enclosing,
        }
    }

    pub fn changed_lines(&self) -> impl Iterator<Item = &String> {
        self.deleted_lines.iter().chain(self.added_lines.iter())
    }

    fn validate(&self, id: &str) -> Result<()> {
        if self.deleted_lines.is_empty() && self.added_lines.is_empty() {
            return Err(Error::validation(id, format!("empty hunk in {}", self.file)));
        }
        if self.level == HunkLevel::Method && !self.enclosing.contains('(') {
            return Err(Error::validation(id, format!("method hunk enclosing {:?} is not a method", self.enclosing)));
        }
        if self.old_start == 0 || self.new_start == 0 {
            return Err(Error::validation(id, "hunk line numbers are 1-based"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GraphKind {
    MethodLevel,
    ClassLevel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CallGraph {
    pub root: String,
    pub kind: GraphKind,
    pub edges: Vec<(String, String)>,
}

impl CallGraph {
    /// Keeps only the edges reachable from `root`.
    pub fn reachable(root: impl Into<String>, kind: GraphKind, edges: Vec<(String, String)>) -> Self {
        let root = root.into();
        let reached: HashSet<String> = bfs_depths(&root, &edges).into_keys().map(str::to_string).collect();
        let edges = edges.into_iter().filter(|(a, _)| reached.contains(a)).collect();
        CallGraph { root, kind, edges }
    }

    /// Shortest edge count from the root to `node`.
    pub fn depth(&self, node: &str) -> Option<usize> {
        bfs_depths(&self.root, &self.edges).get(node).copied()
    }

    pub fn depths(&self) -> std::collections::HashMap<&str, usize> {
        bfs_depths(&self.root, &self.edges)
    }

    fn validate(&self, id: &str) -> Result<()> {
        if self.root.is_empty() {
            return Err(Error::validation(id, "call graph has no root"));
        }
        let depths = bfs_depths(&self.root, &self.edges);
        if let Some((a, _)) = self.edges.iter().find(|(a, _)| !depths.contains_key(a.as_str())) {
            return Err(Error::validation(id, format!("call graph edge from unreachable node {a}")));
        }
        Ok(())
    }
}

fn bfs_depths<'a>(root: &'a str, edges: &'a [(String, String)]) -> std::collections::HashMap<&'a str, usize> {
    let mut adj: std::collections::HashMap<&str, Vec<&str>> = std::collections::HashMap::new();
    for (a, b) in edges {
        adj.entry(a.as_str()).or_default().push(b.as_str());
    }
    let mut depth = std::collections::HashMap::new();
    depth.insert(root, 0);
    let mut queue = VecDeque::from([root]);
    while let Some(n) = queue.pop_front() {
        let d = depth[n];
        for &m in adj.get(n).map(Vec::as_slice).unwrap_or(&[]) {
            if !depth.contains_key(m) {
                depth.insert(m, d + 1);
                queue.push_back(m);
            }
        }
    }
    depth
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepairInstance {
    pub id: String,
    pub broken_test: TestCase,
    pub repaired_test: TestCase,
    pub breakage: BreakageSpec,
    pub sut_hunks: Vec<Hunk>,
    pub call_graph_method: Option<CallGraph>,
    pub call_graph_class: Option<CallGraph>,
    pub commit: String,
    #[serde(with = "utc_seconds")]
    pub commit_time: DateTime<Utc>,
    pub project: String,
}

impl RepairInstance {
    pub fn validate(&self) -> Result<()> {
        let id = self.id.as_str();
        if id.is_empty() {
            return Err(Error::validation("<unnamed>", "empty id"));
        }
        self.broken_test.validate(id, "broken test")?;
        self.repaired_test.validate(id, "repaired test")?;
        if self.broken_test.class_name() != self.repaired_test.class_name() {
            return Err(Error::validation(id, "broken and repaired tests belong to different classes"));
        }
        self.breakage.validate(id, self.broken_test.source.len())?;
        for h in &self.sut_hunks {
            h.validate(id)?;
        }
        for g in [&self.call_graph_method, &self.call_graph_class].into_iter().flatten() {
            g.validate(id)?;
        }
        if let Some(g) = &self.call_graph_method {
            if g.kind != GraphKind::MethodLevel {
                return Err(Error::validation(id, "call_graph_method is not method-level"));
            }
        }
        if let Some(g) = &self.call_graph_class {
            if g.kind != GraphKind::ClassLevel {
                return Err(Error::validation(id, "call_graph_class is not class-level"));
            }
        }
        Ok(())
    }

    /// Broken-test span covered by the breakage and the matching span of the
    /// repaired test (0-based, half-open). Lines outside the span must be
    /// unchanged between the two versions.
    pub fn repair_spans(&self) -> Result<(std::ops::Range<usize>, std::ops::Range<usize>)> {
        let b = &self.broken_test.source;
        let r = &self.repaired_test.source;
        let span = self.breakage.span();
        let prefix = span.start - 1;
        let suffix = b.len() - span.end;
        if prefix + suffix > r.len() {
            return Err(Error::validation(&self.id, "repaired test shorter than unchanged context"));
        }
        let same = |x: &String, y: &String| x.trim() == y.trim();
        let prefix_ok = b[..prefix].iter().zip(&r[..prefix]).all(|(x, y)| same(x, y));
        let suffix_ok = b[b.len() - suffix..].iter().zip(&r[r.len() - suffix..]).all(|(x, y)| same(x, y));
        if !prefix_ok || !suffix_ok {
            return Err(Error::validation(&self.id, "repair changes lines outside the breakage span"));
        }
        Ok((prefix..b.len() - suffix, prefix..r.len() - suffix))
    }

    pub fn breakage_lines(&self) -> Vec<String> {
        let s = self.breakage.span();
        self.broken_test.source[s.start - 1..s.end].to_vec()
    }

    pub fn repaired_lines(&self) -> Result<Vec<String>> {
        let (_, r) = self.repair_spans()?;
        Ok(self.repaired_test.source[r].to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Unvalidated,
    Plausible,
    CompileFail,
    TestFail,
    Invalid,
}

/// One generated repair. `exact_match` is tracked apart from the execution
/// verdict since an exact match is not assumed to be plausible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRepair {
    pub text: String,
    pub beam_score: f64,
    pub rank: usize,
    pub verdict: Verdict,
    #[serde(default)]
    pub exact_match: bool,
    /// Trimmed repaired lines once the candidate has been resolved.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repaired: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CandidateRepair {
    pub fn new(text: impl Into<String>, beam_score: f64, rank: usize) -> Self {
        CandidateRepair {
            text: text.into(),
            beam_score,
            rank,
            verdict: Verdict::Unvalidated,
            exact_match: false,
            repaired: None,
            note: None,
        }
    }

    pub fn invalidate(&mut self, why: impl Into<String>) {
        self.verdict = Verdict::Invalid;
        self.note = Some(why.into());
    }
}

mod utc_seconds {
    use chrono::{DateTime, NaiveDateTime, SubsecRound, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    const FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.trunc_subsecs(0).format(FORMAT).to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        if let Ok(t) = NaiveDateTime::parse_from_str(&s, FORMAT) {
            return Ok(t.and_utc());
        }
        DateTime::parse_from_rfc3339(&s)
            .map(|t| t.with_timezone(&Utc).trunc_subsecs(0))
            .map_err(serde::de::Error::custom)
    }
}

/// Serializes one value as a JSON line with lexicographically sorted keys.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string(&v)?)
}

pub fn instance_to_line(inst: &RepairInstance) -> Result<String> {
    let mut v = serde_json::to_value(inst)?;
    if let serde_json::Value::Object(map) = &mut v {
        map.insert("schema_version".into(), SCHEMA_VERSION.into());
    }
    Ok(serde_json::to_string(&v)?)
}

pub fn instance_from_line(line: &str, lineno: usize) -> Result<RepairInstance> {
    let parse_err = |message: String| Error::Parse { line: lineno, message };
    let mut v: serde_json::Value = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
    let map = v.as_object_mut().ok_or_else(|| parse_err("not a JSON object".into()))?;
    match map.remove("schema_version").and_then(|s| s.as_u64()) {
        Some(SCHEMA_VERSION) => {}
        Some(other) => return Err(parse_err(format!("unsupported schema_version {other}"))),
        None => return Err(parse_err("missing schema_version".into())),
    }
    let inst: RepairInstance = serde_json::from_value(v).map_err(|e| parse_err(e.to_string()))?;
    inst.validate()?;
    Ok(inst)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<RepairInstance>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let inst = instance_from_line(line, i + 1)?;
        if !ids.insert(inst.id.clone()) {
            return Err(Error::validation(&inst.id, "duplicate id"));
        }
        out.push(inst);
    }
    Ok(out)
}

pub fn save_dataset(instances: &[RepairInstance], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    for inst in instances {
        inst.validate()?;
        buf.extend_from_slice(instance_to_line(inst)?.as_bytes());
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Reads any JSONL file of `T` rows.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() }))
        .collect()
}

pub fn write_jsonl<T: Serialize>(rows: &[T], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = String::new();
    for r in rows {
        buf.push_str(&to_sorted_json(r)?);
        buf.push('\n');
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

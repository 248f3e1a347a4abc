//! Candidate generation against a pluggable backend, patch application and
//! execution-based plausibility.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::edit_seq::{apply_edit_sequence, EditSequence};
use crate::error::{Error, Result};
use crate::model::{read_jsonl, BreakageSpec, CandidateRepair, RepairInstance, Verdict};
use crate::prompt::{trimmed, Codec, IoConfig, OutputKind};
use crate::tokenize::{line_stream, Tokenizer, NEWLINE};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub input: String,
    pub beam_size: usize,
    pub max_output_tokens: usize,
}

impl GenerationRequest {
    pub fn new(input: impl Into<String>, beam_size: usize) -> Result<Self> {
        if beam_size == 0 {
            return Err(Error::Contract("beam_size must be at least 1".into()));
        }
        Ok(GenerationRequest { input: input.into(), beam_size, max_output_tokens: 256 })
    }

    fn wire(&self) -> WireRequest {
        WireRequest { input: self.input.clone(), beam_size: self.beam_size, max_new_tokens: self.max_output_tokens }
    }
}

/// One backend output as sent over the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawCandidate {
    pub text: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireRequest {
    pub input: String,
    pub beam_size: usize,
    pub max_new_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub candidates: Vec<RawCandidate>,
}

pub trait Backend: Send + Sync {
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<RawCandidate>>;
}

/// Backend answering from a closure.
pub struct StubBackend<F>(pub F);

impl<F> Backend for StubBackend<F>
where
    F: Fn(&GenerationRequest) -> Vec<RawCandidate> + Send + Sync,
{
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<RawCandidate>> {
        Ok((self.0)(request))
    }
}

/// Client for the `/generate` + `/health` inference service.
pub struct HttpBackend {
    base: String,
    agent: ureq::Agent,
    max_retries: u32,
    backoff: Duration,
}

impl HttpBackend {
    pub fn new(base: impl Into<String>) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(600)).build();
        HttpBackend { base: base.into().trim_end_matches('/').to_string(), agent, max_retries: 3, backoff: Duration::from_millis(250) }
    }

    pub fn with_retries(mut self, max_retries: u32, backoff: Duration) -> Self {
        self.max_retries = max_retries;
        self.backoff = backoff;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.agent = ureq::AgentBuilder::new().timeout(timeout).build();
        self
    }

    pub fn health(&self) -> Result<()> {
        self.with_retry(|| self.agent.get(&format!("{}/health", self.base)).call().map(|_| ()))
    }

    fn with_retry<T>(&self, mut call: impl FnMut() -> std::result::Result<T, ureq::Error>) -> Result<T> {
        let mut attempt = 0;
        loop {
            let message = match call() {
                Ok(v) => return Ok(v),
                Err(ureq::Error::Status(code, resp)) if code < 500 => {
                    let body = resp.into_string().unwrap_or_default();
                    return Err(Error::Protocol(format!("HTTP {code}: {body}")));
                }
                Err(ureq::Error::Status(code, _)) => format!("HTTP {code}"),
                Err(e) => e.to_string(),
            };
            if attempt >= self.max_retries {
                return Err(Error::Transport { retries: attempt, message });
            }
            log::warn!("backend call failed ({message}); retry {}", attempt + 1);
            std::thread::sleep(self.backoff * 2u32.pow(attempt));
            attempt += 1;
        }
    }
}

impl Backend for HttpBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<RawCandidate>> {
        let url = format!("{}/generate", self.base);
        let body = request.wire();
        let resp = self.with_retry(|| self.agent.post(&url).send_json(&body))?;
        let parsed: WireResponse = resp.into_json().map_err(|e| Error::Protocol(format!("bad /generate body: {e}")))?;
        Ok(parsed.candidates)
    }
}

/// One recorded exchange with the inference service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub request: WireRequest,
    pub response: WireResponse,
}

/// Replays recorded `/generate` exchanges keyed by input and beam size.
#[derive(Debug, Default)]
pub struct FixtureBackend {
    entries: HashMap<(String, usize), Vec<RawCandidate>>,
}

impl FixtureBackend {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let rows: Vec<FixtureEntry> = read_jsonl(path)?;
        Ok(Self::from_entries(rows))
    }

    pub fn from_entries(rows: impl IntoIterator<Item = FixtureEntry>) -> Self {
        let entries = rows.into_iter().map(|e| ((e.request.input, e.request.beam_size), e.response.candidates)).collect();
        FixtureBackend { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Backend for FixtureBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<RawCandidate>> {
        self.entries
            .get(&(request.input.clone(), request.beam_size))
            .cloned()
            .ok_or_else(|| Error::Protocol("no recorded response for this request".into()))
    }
}

/// Ranked candidates for one request. IO4 outputs that do not parse as an
/// edit sequence are kept with verdict `Invalid`.
pub fn generate_candidates(
    request: &GenerationRequest,
    backend: &dyn Backend,
    codec: &Codec,
    output: OutputKind,
) -> Result<Vec<CandidateRepair>> {
    let raw = backend.generate(request)?;
    if raw.len() != request.beam_size {
        return Err(Error::Protocol(format!("expected {} candidates, got {}", request.beam_size, raw.len())));
    }
    if raw.iter().any(|c| !c.score.is_finite()) {
        return Err(Error::Protocol("non-finite candidate score".into()));
    }
    if raw.windows(2).any(|w| w[1].score > w[0].score) {
        return Err(Error::Protocol("candidate scores are not in descending order".into()));
    }
    let mut out = Vec::with_capacity(raw.len());
    for (i, c) in raw.into_iter().enumerate() {
        let mut cand = CandidateRepair::new(c.text, c.score, i + 1);
        if output == OutputKind::EditSequence {
            if let Err(e) = EditSequence::parse(&cand.text, codec.specials(), codec.tokenizer()) {
                cand.invalidate(e.to_string());
            }
        }
        out.push(cand);
    }
    Ok(out)
}

/// Trimmed repaired lines a candidate stands for.
pub fn repaired_lines(codec: &Codec, breakage_lines: &[String], text: &str, output: OutputKind) -> Result<Vec<String>> {
    match output {
        OutputKind::CodeSequence => {
            if text.trim().is_empty() {
                return Ok(Vec::new());
            }
            Ok(text.split('\n').map(|l| l.trim().to_string()).collect())
        }
        OutputKind::EditSequence => {
            let tok = codec.tokenizer();
            let seq = EditSequence::parse(text, codec.specials(), tok)?;
            let old = trimmed(breakage_lines);
            let tokens = apply_edit_sequence(&line_stream(tok, &old), &seq)?;
            Ok(restore_lines(tok, &old, &tokens))
        }
    }
}

/// Splits a token stream at line markers, reusing original line text where
/// a line's tokens are unchanged.
fn restore_lines(tok: &dyn Tokenizer, original: &[String], tokens: &[String]) -> Vec<String> {
    if tokens.is_empty() {
        return Vec::new();
    }
    let originals: Vec<Vec<String>> = original.iter().map(|l| tok.words(l)).collect();
    let mut next = 0;
    tokens
        .split(|t| t == NEWLINE)
        .map(|line| {
            if let Some(k) = (next..originals.len()).find(|&k| originals[k] == line) {
                next = k + 1;
                return original[k].clone();
            }
            detokenize(line)
        })
        .collect()
}

/// Joins tokens with Java-ish spacing.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    const NO_SPACE_BEFORE: [&str; 7] = [".", ",", ";", ")", "]", "(", "["];
    const NO_SPACE_AFTER: [&str; 4] = [".", "(", "[", "@"];
    let mut out = String::new();
    let mut prev: Option<&str> = None;
    for t in tokens {
        let t = t.as_ref();
        if let Some(p) = prev {
            if !NO_SPACE_BEFORE.contains(&t) && !NO_SPACE_AFTER.contains(&p) {
                out.push(' ');
            }
        }
        out.push_str(t);
        prev = Some(t);
    }
    out
}

fn indentation(line: &str) -> &str {
    &line[..line.len() - line.trim_start().len()]
}

/// Replaces the breakage span of `test_source` with the candidate's lines.
/// Lines equal to the original keep their text; others take the
/// indentation of the original line at the same offset.
pub fn apply_candidate(
    codec: &Codec,
    test_source: &[String],
    breakage: &BreakageSpec,
    candidate: &CandidateRepair,
    output: OutputKind,
) -> Result<Vec<String>> {
    if candidate.verdict == Verdict::Invalid {
        return Err(Error::Contract(format!("candidate {} is invalid", candidate.rank)));
    }
    let span = breakage.span();
    let old = &test_source[span.start - 1..span.end];
    let lines = match &candidate.repaired {
        Some(l) => l.clone(),
        None => repaired_lines(codec, old, &candidate.text, output)?,
    };
    let mut out = Vec::with_capacity(test_source.len() + lines.len());
    out.extend_from_slice(&test_source[..span.start - 1]);
    for (i, line) in lines.iter().enumerate() {
        let orig = &old[i.min(old.len() - 1)];
        if orig.trim() == line {
            out.push(orig.clone());
        } else {
            out.push(format!("{}{}", indentation(orig), line));
        }
    }
    out.extend_from_slice(&test_source[span.end..]);
    Ok(out)
}

/// Fills `repaired` for every candidate that is not already invalid;
/// candidates that fail to apply become invalid.
pub fn resolve_candidates(codec: &Codec, inst: &RepairInstance, candidates: &mut [CandidateRepair], output: OutputKind) {
    let breakage = inst.breakage_lines();
    for c in candidates.iter_mut().filter(|c| c.verdict != Verdict::Invalid) {
        match repaired_lines(codec, &breakage, &c.text, output) {
            Ok(lines) => c.repaired = Some(lines),
            Err(e) => c.invalidate(e.to_string()),
        }
    }
}

/// Prediction file row: the candidate list generated for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub candidates: Vec<CandidateRepair>,
}

/// Encodes, generates and resolves candidates for one instance.
pub fn repair_instance(
    codec: &Codec,
    inst: &RepairInstance,
    config: &IoConfig,
    backend: &dyn Backend,
    beam_size: usize,
) -> Result<Prediction> {
    let order = codec.ordered_hunks(inst, config)?;
    let input = codec.build_input(inst, config, &order)?;
    let mut request = GenerationRequest::new(input.text, beam_size)?;
    request.max_output_tokens = config.max_output_tokens;
    let mut candidates = generate_candidates(&request, backend, codec, config.output)?;
    resolve_candidates(codec, inst, &mut candidates, config.output);
    Ok(Prediction { id: inst.id.clone(), candidates })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExecutionVerdict {
    Pass,
    TestCompileError(usize),
    TestRuntimeFailure(usize),
    Invalid,
}

const PASS_PATTERN: &str = "Tests run: 1, Failures: 0, Errors: 0, Skipped: 0";

/// Classifies a Maven log for one test. Patterns are tried in the order
/// pass, compile error, runtime failure; anything else is invalid.
pub fn classify_execution_log(log: &str, test_fqn: &str, test_file: &str) -> ExecutionVerdict {
    if log.contains(PASS_PATTERN) {
        return ExecutionVerdict::Pass;
    }
    let head = test_fqn.split('(').next().unwrap_or(test_fqn);
    let (class, method) = match head.rsplit_once('.') {
        Some((c, m)) => (c.rsplit('.').next().unwrap_or(c), m),
        None => ("", head),
    };
    let number = |re: &Regex| re.captures(log).and_then(|c| c.iter().skip(1).flatten().next()).and_then(|m| m.as_str().parse().ok());

    if log.contains("COMPILATION ERROR") || log.contains("Compilation failure") {
        let rel = test_file.trim_start_matches("./").trim_start_matches('/');
        let re = Regex::new(&format!(r"\[ERROR\] /.+/{}:\[(\d+),\d+\]", regex::escape(rel))).expect("valid regex");
        if let Some(line) = number(&re) {
            return ExecutionVerdict::TestCompileError(line);
        }
    }
    if !class.is_empty() {
        let (c, m) = (regex::escape(class), regex::escape(method));
        let re = Regex::new(&format!(
            r"\[ERROR\]\s+(?:[\w$]+\.)*{c}\.{m}:(\d+)|at\s+(?:[\w$]+\.)*{c}\.{m}\({c}\.java:(\d+)\)"
        ))
        .expect("valid regex");
        if let Some(line) = number(&re) {
            return ExecutionVerdict::TestRuntimeFailure(line);
        }
    }
    ExecutionVerdict::Invalid
}

pub fn verdict_of(exec: ExecutionVerdict) -> Verdict {
    match exec {
        ExecutionVerdict::Pass => Verdict::Plausible,
        ExecutionVerdict::TestCompileError(_) => Verdict::CompileFail,
        ExecutionVerdict::TestRuntimeFailure(_) => Verdict::TestFail,
        ExecutionVerdict::Invalid => Verdict::Invalid,
    }
}

/// Runs a patched test file and returns the build log.
pub trait Executor: Send + Sync {
    fn execute(&self, inst: &RepairInstance, patched: &[String]) -> std::result::Result<String, String>;
}

impl<F> Executor for F
where
    F: Fn(&RepairInstance, &[String]) -> std::result::Result<String, String> + Send + Sync,
{
    fn execute(&self, inst: &RepairInstance, patched: &[String]) -> std::result::Result<String, String> {
        self(inst, patched)
    }
}

/// FNV-1a 64 digest of the patched file, as lowercase hex.
pub fn patched_digest(lines: &[String]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for (i, line) in lines.iter().enumerate() {
        if i > 0 {
            h = (h ^ u64::from(b'\n')).wrapping_mul(0x0100_0000_01b3);
        }
        for b in line.bytes() {
            h = (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayLog {
    pub digest: String,
    pub log: String,
}

/// Executor answering with canned logs keyed by patched-file digest.
#[derive(Debug, Default, Clone)]
pub struct ReplayExecutor {
    logs: HashMap<String, String>,
}

impl ReplayExecutor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let rows: Vec<ReplayLog> = read_jsonl(path)?;
        Ok(ReplayExecutor { logs: rows.into_iter().map(|r| (r.digest, r.log)).collect() })
    }

    pub fn insert(&mut self, patched: &[String], log: impl Into<String>) {
        self.logs.insert(patched_digest(patched), log.into());
    }

    pub fn rows(&self) -> Vec<ReplayLog> {
        let mut rows: Vec<_> = self.logs.iter().map(|(d, l)| ReplayLog { digest: d.clone(), log: l.clone() }).collect();
        rows.sort_by(|a, b| a.digest.cmp(&b.digest));
        rows
    }
}

impl Executor for ReplayExecutor {
    fn execute(&self, _inst: &RepairInstance, patched: &[String]) -> std::result::Result<String, String> {
        let d = patched_digest(patched);
        self.logs.get(&d).cloned().ok_or_else(|| format!("no recorded log for digest {d}"))
    }
}

type Slot = Arc<OnceLock<std::result::Result<String, String>>>;

/// Executor results memoised per (instance, patched text); safe to share
/// across threads, and each key is executed at most once.
#[derive(Default)]
pub struct ExecutionCache {
    slots: Mutex<HashMap<(String, String), Slot>>,
    calls: AtomicUsize,
}

impl ExecutionCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn run(&self, executor: &dyn Executor, inst: &RepairInstance, patched: &[String]) -> std::result::Result<String, String> {
        let key = (inst.id.clone(), patched_digest(patched));
        let slot = self.slots.lock().unwrap_or_else(|p| p.into_inner()).entry(key).or_default().clone();
        slot.get_or_init(|| {
            self.calls.fetch_add(1, Ordering::Relaxed);
            executor.execute(inst, patched)
        })
        .clone()
    }

    /// How many times the executor has actually been invoked.
    pub fn executor_calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

/// Validates candidates in rank order; returns whether any is plausible.
pub fn plausibility(
    codec: &Codec,
    inst: &RepairInstance,
    candidates: &mut [CandidateRepair],
    output: OutputKind,
    executor: &dyn Executor,
    cache: &ExecutionCache,
) -> bool {
    let fqn = &inst.repaired_test.fully_qualified_name;
    let file = &inst.broken_test.file_path;
    for c in candidates.iter_mut() {
        if c.verdict == Verdict::Invalid {
            continue;
        }
        let patched = match apply_candidate(codec, &inst.broken_test.source, &inst.breakage, c, output) {
            Ok(p) => p,
            Err(e) => {
                c.invalidate(e.to_string());
                continue;
            }
        };
        match cache.run(executor, inst, &patched) {
            Ok(log) => {
                c.verdict = verdict_of(classify_execution_log(&log, fqn, file));
            }
            Err(cause) => c.invalidate(format!("executor failed: {cause}")),
        }
    }
    candidates.iter().any(|c| c.verdict == Verdict::Plausible)
}

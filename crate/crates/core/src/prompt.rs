//! Model input/output encoding for the four IO formats.

use serde::{Deserialize, Serialize};

use crate::diff::{word_diff, GroupKind};
use crate::edit_seq::encode_edit_sequence;
use crate::error::{Error, Result};
use crate::hunks::instance_context_sets;
use crate::model::{BreakageSpec, Hunk, RepairInstance, TestCase};
use crate::prioritize::{compute_priorities, prioritize, Strategy};
use crate::special::{Piece, Special, SpecialTokens};
use crate::tokenize::{line_stream, PunctTokenizer, Tokenizer, NEWLINE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IoFormat {
    Io1,
    Io2,
    Io3,
    Io4,
}

impl std::str::FromStr for IoFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "io1" => Ok(IoFormat::Io1),
            "io2" => Ok(IoFormat::Io2),
            "io3" => Ok(IoFormat::Io3),
            "io4" => Ok(IoFormat::Io4),
            other => Err(Error::Contract(format!("unknown IO format {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HunkRepr {
    LineLevel,
    WordLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContextSource {
    Covered,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputKind {
    CodeSequence,
    EditSequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IoConfig {
    pub format: IoFormat,
    pub max_input_tokens: usize,
    pub max_output_tokens: usize,
    pub hunk_repr: HunkRepr,
    pub context_source: ContextSource,
    pub strategy: Strategy,
    pub output: OutputKind,
}

impl IoConfig {
    pub fn new(format: IoFormat) -> Self {
        let (context_source, strategy, hunk_repr, output) = match format {
            IoFormat::Io1 => (ContextSource::Covered, Strategy::Hp1, HunkRepr::LineLevel, OutputKind::CodeSequence),
            IoFormat::Io2 => (ContextSource::All, Strategy::Hp2, HunkRepr::LineLevel, OutputKind::CodeSequence),
            IoFormat::Io3 => (ContextSource::All, Strategy::Hp2, HunkRepr::WordLevel, OutputKind::CodeSequence),
            IoFormat::Io4 => (ContextSource::All, Strategy::Hp2, HunkRepr::WordLevel, OutputKind::EditSequence),
        };
        IoConfig { format, max_input_tokens: 512, max_output_tokens: 256, hunk_repr, context_source, strategy, output }
    }

    pub fn with_budget(mut self, input: usize, output: usize) -> Self {
        self.max_input_tokens = input;
        self.max_output_tokens = output;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedInput {
    pub text: String,
    pub included: Vec<usize>,
    pub tokens: usize,
}

/// One prompts.jsonl row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub id: String,
    pub input: String,
    pub expected_output: String,
    pub included_hunks: Vec<usize>,
}

pub struct Codec {
    tokenizer: Box<dyn Tokenizer>,
    specials: SpecialTokens,
}

impl Default for Codec {
    fn default() -> Self {
        Codec::new(Box::new(PunctTokenizer), SpecialTokens::default())
    }
}

/// A rendered code fragment plus whether it begins a source line.
struct Fragment {
    text: String,
    starts_line: bool,
}

impl Codec {
    pub fn new(tokenizer: Box<dyn Tokenizer>, specials: SpecialTokens) -> Self {
        Codec { tokenizer, specials }
    }

    pub fn tokenizer(&self) -> &dyn Tokenizer {
        self.tokenizer.as_ref()
    }

    pub fn specials(&self) -> &SpecialTokens {
        &self.specials
    }

    fn sp(&self, s: Special) -> &str {
        self.specials.surface(s)
    }

    fn code(&self, line: &str) -> String {
        self.specials.escape(line.trim())
    }

    /// Tokens in rendered text: special tokens count 1 each, line breaks 0.
    pub fn count_tokens(&self, text: &str) -> usize {
        self.specials
            .split(text)
            .into_iter()
            .map(|p| match p {
                Piece::Special(_) => 1,
                Piece::Code(c) => self.tokenizer.tokenize(c).len(),
            })
            .sum()
    }

    pub fn render_test_context(&self, test: &TestCase, breakage: &BreakageSpec) -> String {
        let mut lines = vec![self.sp(Special::TestContext).to_string()];
        for (i, line) in test.source.iter().enumerate() {
            let n = i + 1;
            if breakage.lines.iter().any(|r| r.start == n) {
                lines.push(self.sp(Special::BreakageOpen).to_string());
            }
            let code = self.code(line);
            if !code.is_empty() {
                lines.push(code);
            }
            if breakage.lines.iter().any(|r| r.end == n) {
                lines.push(self.sp(Special::BreakageClose).to_string());
            }
        }
        lines.join("\n")
    }

    pub fn render_hunk(&self, hunk: &Hunk, repr: HunkRepr) -> String {
        match repr {
            HunkRepr::LineLevel => self.render_line_level(hunk),
            HunkRepr::WordLevel => self.render_word_level(hunk),
        }
    }

    fn render_line_level(&self, hunk: &Hunk) -> String {
        let mut out = self.sp(Special::HunkOpen).to_string();
        let mut first = true;
        for (marker, lines) in [(Special::DelOpen, &hunk.deleted_lines), (Special::AddOpen, &hunk.added_lines)] {
            let lines: Vec<String> = lines.iter().map(|l| self.code(l)).filter(|l| !l.is_empty()).collect();
            if lines.is_empty() {
                continue;
            }
            out.push(if first { ' ' } else { '\n' });
            out.push_str(self.sp(marker));
            for l in lines {
                out.push('\n');
                out.push_str(&l);
            }
            first = false;
        }
        out.push(' ');
        out.push_str(self.sp(Special::HunkClose));
        out
    }

    fn render_word_level(&self, hunk: &Hunk) -> String {
        let side = |changed: &[String]| -> Vec<String> {
            hunk.context_before
                .iter()
                .chain(changed)
                .chain(&hunk.context_after)
                .map(|l| self.code(l))
                .filter(|l| !l.is_empty())
                .collect()
        };
        let old_lines = side(&hunk.deleted_lines);
        let new_lines = side(&hunk.added_lines);
        let old = self.positioned(&old_lines);
        let new = self.positioned(&new_lines);
        let old_words: Vec<&str> = old.iter().map(|p| p.text(&old_lines)).collect();
        let new_words: Vec<&str> = new.iter().map(|p| p.text(&new_lines)).collect();

        let mut out = self.sp(Special::HunkOpen).to_string();
        for g in word_diff(&old_words, &new_words) {
            let frag = match g.kind {
                GroupKind::Del => fragment(&old[g.old.clone()], &old_lines),
                _ => fragment(&new[g.new.clone()], &new_lines),
            };
            let markers = match g.kind {
                GroupKind::Keep => None,
                GroupKind::Del => Some((Special::DelOpen, Special::DelClose)),
                GroupKind::Add => Some((Special::AddOpen, Special::AddClose)),
            };
            if let Some((open, _)) = markers {
                out.push(' ');
                out.push_str(self.sp(open));
            }
            if let Some(f) = &frag {
                out.push(if f.starts_line { '\n' } else { ' ' });
                out.push_str(&f.text);
            }
            if let Some((_, close)) = markers {
                out.push(' ');
                out.push_str(self.sp(close));
            }
        }
        out.push(' ');
        out.push_str(self.sp(Special::HunkClose));
        out
    }

    fn positioned(&self, lines: &[String]) -> Vec<Pos> {
        let mut out = Vec::new();
        for (i, l) in lines.iter().enumerate() {
            if i > 0 {
                out.push(Pos::Newline);
            }
            for (k, t) in self.tokenizer.tokenize(l).into_iter().enumerate() {
                out.push(Pos::Token { line: i, start: t.start, end: t.end, first: k == 0 });
            }
        }
        out
    }

    /// Input text for `ordered` hunks (ids into `sut_hunks`), adding whole
    /// hunks in order while the budget allows.
    pub fn build_input(&self, inst: &RepairInstance, config: &IoConfig, ordered: &[usize]) -> Result<EncodedInput> {
        let mut text = self.render_test_context(&inst.broken_test, &inst.breakage);
        text.push('\n');
        text.push_str(self.sp(Special::RepairContext));
        let tc = self.count_tokens(&text);
        let budget = config.max_input_tokens;
        let mut total = tc;
        let mut included = Vec::new();
        for (k, &id) in ordered.iter().enumerate() {
            let h = self.render_hunk(&inst.sut_hunks[id], config.hunk_repr);
            let n = self.count_tokens(&h);
            if total + n > budget {
                if k == 0 {
                    return Err(Error::Truncation { test_context: tc, first_hunk: n, needed: tc + n, budget });
                }
                break;
            }
            total += n;
            text.push('\n');
            text.push_str(&h);
            included.push(id);
        }
        if ordered.is_empty() && tc > budget {
            return Err(Error::Truncation { test_context: tc, first_hunk: 0, needed: tc, budget });
        }
        Ok(EncodedInput { text, included, tokens: total })
    }

    /// Hunk ids ordered for the instance under `config`.
    pub fn ordered_hunks(&self, inst: &RepairInstance, config: &IoConfig) -> Result<Vec<usize>> {
        let sets = instance_context_sets(inst);
        let priorities = compute_priorities(inst, &sets, self.tokenizer.as_ref());
        let selected: Vec<_> = match config.context_source {
            ContextSource::All => priorities,
            ContextSource::Covered => {
                priorities.into_iter().filter(|p| sets.is_covered(p.hunk_id)).collect()
            }
        };
        prioritize(&inst.sut_hunks, &selected, config.strategy)
    }

    /// Breakage tokens as one stream with line markers.
    pub fn breakage_tokens(&self, inst: &RepairInstance) -> Vec<String> {
        line_stream(self.tokenizer.as_ref(), &trimmed(&inst.breakage_lines()))
    }

    pub fn expected_output(&self, inst: &RepairInstance, config: &IoConfig) -> Result<String> {
        let repaired = inst.repaired_lines()?;
        let out = match config.output {
            OutputKind::CodeSequence => trimmed(&repaired).join("\n"),
            OutputKind::EditSequence => {
                let b = self.breakage_tokens(inst);
                let r = line_stream(self.tokenizer.as_ref(), &trimmed(&repaired));
                encode_edit_sequence(&b, &r)?.serialize(&self.specials)
            }
        };
        let n = self.count_tokens(&out);
        if n > config.max_output_tokens {
            return Err(Error::OutputTooLong { tokens: n, budget: config.max_output_tokens });
        }
        Ok(out)
    }

    pub fn encode_instance(&self, inst: &RepairInstance, config: &IoConfig) -> Result<PromptRecord> {
        let order = self.ordered_hunks(inst, config)?;
        let input = self.build_input(inst, config, &order)?;
        let expected_output = self.expected_output(inst, config)?;
        Ok(PromptRecord { id: inst.id.clone(), input: input.text, expected_output, included_hunks: input.included })
    }
}

pub fn trimmed(lines: &[String]) -> Vec<String> {
    lines.iter().map(|l| l.trim().to_string()).collect()
}

#[derive(Debug, Clone, Copy)]
enum Pos {
    Token { line: usize, start: usize, end: usize, first: bool },
    Newline,
}

impl Pos {
    fn text<'a>(&self, lines: &'a [String]) -> &'a str {
        match *self {
            Pos::Token { line, start, end, .. } => &lines[line][start..end],
            Pos::Newline => NEWLINE,
        }
    }
}

/// Verbatim slices of the tokens' source lines, joined by line breaks.
fn fragment(positions: &[Pos], lines: &[String]) -> Option<Fragment> {
    let mut parts: Vec<String> = Vec::new();
    let mut current: Option<(usize, usize, usize)> = None;
    let mut starts_line = None;
    let flush = |cur: &mut Option<(usize, usize, usize)>, parts: &mut Vec<String>| {
        if let Some((line, s, e)) = cur.take() {
            parts.push(lines[line][s..e].to_string());
        }
    };
    for p in positions {
        match *p {
            Pos::Newline => flush(&mut current, &mut parts),
            Pos::Token { line, start, end, first } => {
                starts_line.get_or_insert(first);
                current = match current {
                    Some((l, s, _)) if l == line => Some((l, s, end)),
                    other => {
                        let mut o = other;
                        flush(&mut o, &mut parts);
                        Some((line, start, end))
                    }
                };
            }
        }
    }
    flush(&mut current, &mut parts);
    if parts.is_empty() {
        return None;
    }
    Some(Fragment { text: parts.join("\n"), starts_line: starts_line.unwrap_or(false) })
}

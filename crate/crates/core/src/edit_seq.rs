//! Unambiguous edit sequences: ordered token replacements whose target is
//! unique at application time.

use std::collections::HashSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::diff::{kept_pairs, word_diff, GroupKind};
use crate::error::{Error, Result};
use crate::special::{Piece, Special, SpecialTokens};
use crate::tokenize::{Tokenizer, NEWLINE};

/// Tokens after which an inserted statement is anchored.
pub const TERMINATORS: [&str; 3] = [";", "{", "}"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReplaceMode {
    Plain,
    KeepBefore,
    KeepAfter,
}

impl ReplaceMode {
    fn markers(self) -> (Special, Special) {
        match self {
            ReplaceMode::Plain => (Special::ReplaceOld, Special::ReplaceNew),
            ReplaceMode::KeepBefore => (Special::ReplaceOldKeepBefore, Special::ReplaceNewKeepBefore),
            ReplaceMode::KeepAfter => (Special::ReplaceOldKeepAfter, Special::ReplaceNewKeepAfter),
        }
    }

    fn from_old_marker(s: Special) -> Option<Self> {
        match s {
            Special::ReplaceOld => Some(ReplaceMode::Plain),
            Special::ReplaceOldKeepBefore => Some(ReplaceMode::KeepBefore),
            Special::ReplaceOldKeepAfter => Some(ReplaceMode::KeepAfter),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    pub mode: ReplaceMode,
    pub old_tokens: Vec<String>,
    pub new_tokens: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditSequence {
    pub replacements: Vec<Replacement>,
}

impl EditSequence {
    pub fn is_empty(&self) -> bool {
        self.replacements.is_empty()
    }

    pub fn len(&self) -> usize {
        self.replacements.len()
    }

    /// Space-separated token rendering; line breaks appear as `\n`.
    pub fn serialize(&self, specials: &SpecialTokens) -> String {
        let mut parts: Vec<String> = Vec::new();
        for r in &self.replacements {
            let (old, new) = r.mode.markers();
            parts.push(specials.surface(old).to_string());
            parts.extend(r.old_tokens.iter().map(|t| specials.escape(t)));
            parts.push(specials.surface(new).to_string());
            parts.extend(r.new_tokens.iter().map(|t| specials.escape(t)));
            parts.push(specials.surface(Special::ReplaceEnd).to_string());
        }
        parts.join(" ")
    }

    pub fn parse<T: Tokenizer + ?Sized>(text: &str, specials: &SpecialTokens, tok: &T) -> Result<Self> {
        #[derive(PartialEq)]
        enum State {
            Start,
            Old(ReplaceMode),
            New(ReplaceMode),
        }
        let err = |position: usize, message: &str| Error::EditParse { position, message: message.to_string() };
        let mut out = Vec::new();
        let mut state = State::Start;
        let (mut s, mut n) = (Vec::new(), Vec::new());
        for (pos, piece) in specials.split(text).into_iter().enumerate() {
            match (piece, &state) {
                (Piece::Code(c), State::Start) => {
                    if !c.trim().is_empty() {
                        return Err(err(pos, "code outside a replacement"));
                    }
                }
                (Piece::Code(c), State::Old(_)) => s.extend(code_tokens(&specials.unescape(c), tok)),
                (Piece::Code(c), State::New(_)) => n.extend(code_tokens(&specials.unescape(c), tok)),
                (Piece::Special(sp), State::Start) => match ReplaceMode::from_old_marker(sp) {
                    Some(mode) => state = State::Old(mode),
                    None => return Err(err(pos, "expected a replaceOld marker")),
                },
                (Piece::Special(sp), State::Old(mode)) => {
                    if sp != mode.markers().1 {
                        return Err(err(pos, "replaceOld without matching replaceNew"));
                    }
                    state = State::New(*mode);
                }
                (Piece::Special(sp), State::New(mode)) => {
                    if sp != Special::ReplaceEnd {
                        return Err(err(pos, "expected replaceEnd"));
                    }
                    out.push(Replacement { mode: *mode, old_tokens: std::mem::take(&mut s), new_tokens: std::mem::take(&mut n) });
                    state = State::Start;
                }
            }
        }
        if state != State::Start {
            return Err(err(usize::MAX, "missing replaceEnd"));
        }
        Ok(EditSequence { replacements: out })
    }
}

/// Tokens of a possibly multi-line code run with [`NEWLINE`] between lines.
fn code_tokens<T: Tokenizer + ?Sized>(code: &str, tok: &T) -> Vec<String> {
    let mut out = Vec::new();
    for (i, line) in code.split('\n').enumerate() {
        if i > 0 {
            out.push(NEWLINE.to_string());
        }
        out.extend(tok.words(line));
    }
    out
}

/// Start positions of `needle` in `hay`; an empty needle matches everywhere.
pub fn occurrences<T: PartialEq>(hay: &[T], needle: &[T]) -> Vec<usize> {
    if needle.len() > hay.len() {
        return Vec::new();
    }
    (0..=hay.len() - needle.len()).filter(|&i| hay[i..i + needle.len()] == *needle).collect()
}

pub fn apply_edit_sequence(tokens: &[String], seq: &EditSequence) -> Result<Vec<String>> {
    let mut work = tokens.to_vec();
    for (index, r) in seq.replacements.iter().enumerate() {
        let occ = occurrences(&work, &r.old_tokens);
        if occ.len() != 1 {
            return Err(Error::Ambiguity { index, occurrences: occ.len() });
        }
        let at = occ[0];
        work.splice(at..at + r.old_tokens.len(), r.new_tokens.iter().cloned());
    }
    Ok(work)
}

#[derive(Debug, Clone)]
struct Region {
    old: Range<usize>,
    new: Range<usize>,
}

/// Encodes the transformation `breakage → repaired` as an edit sequence.
pub fn encode_edit_sequence(breakage: &[String], repaired: &[String]) -> Result<EditSequence> {
    if breakage == repaired {
        return Ok(EditSequence::default());
    }
    if breakage.is_empty() {
        return Err(Error::Encoding("no breakage tokens to anchor on".into()));
    }
    let groups = word_diff(breakage, repaired);
    let kept: HashSet<(usize, usize)> = kept_pairs(&groups).into_iter().collect();

    let mut regions: Vec<Region> = Vec::new();
    for g in groups.iter().filter(|g| g.kind != GroupKind::Keep) {
        match regions.last_mut() {
            Some(r) if r.old.end == g.old.start && r.new.end == g.new.start => {
                r.old.end = g.old.end;
                r.new.end = g.new.end;
            }
            _ => regions.push(Region { old: g.old.clone(), new: g.new.clone() }),
        }
    }

    let mut anchored: Vec<Region> = Vec::new();
    for mut r in regions {
        if r.old.is_empty() {
            let p = r.old.start;
            let after_terminator = p > 0 && TERMINATORS.contains(&breakage[p - 1].as_str());
            if after_terminator || p == breakage.len() {
                r.old.start -= 1;
                r.new.start -= 1;
            } else if let Some(prev) = anchored.last_mut().filter(|prev| prev.old.end == p) {
                prev.old.end = r.old.end;
                prev.new.end = r.new.end;
                continue;
            } else {
                r.old.end += 1;
                r.new.end += 1;
            }
        }
        match anchored.last_mut() {
            Some(prev) if prev.old.end > r.old.start => {
                prev.old.end = prev.old.end.max(r.old.end);
                prev.new.end = prev.new.end.max(r.new.end);
            }
            _ => anchored.push(r),
        }
    }

    let mut pending: std::collections::VecDeque<Region> = anchored.into();
    let mut committed: Vec<(Region, Range<usize>, Range<usize>)> = Vec::new();
    while let Some(region) = pending.pop_front() {
        let (prev_old_end, prev_new_end) =
            committed.last().map_or((0, 0), |(_, o, n)| (o.end, n.end));
        let next_old_start = pending.front().map_or(breakage.len(), |r| r.old.start);
        let mut work: Vec<String> = repaired[..prev_new_end].to_vec();
        work.extend_from_slice(&breakage[prev_old_end..]);
        match find_unique(breakage, &work, &region, prev_old_end, prev_new_end, next_old_start) {
            Some((old, new)) => committed.push((region, old, new)),
            None => {
                if let Some(next) = pending.pop_front() {
                    pending.push_front(Region { old: region.old.start..next.old.end, new: region.new.start..next.new.end });
                } else if let Some((prev, _, _)) = committed.pop() {
                    pending.push_front(Region { old: prev.old.start..region.old.end, new: prev.new.start..region.new.end });
                } else {
                    return Err(Error::Encoding("no uniquely identifiable replacement target".into()));
                }
            }
        }
    }

    let replacements = committed
        .into_iter()
        .map(|(_, old, new)| {
            let both = !old.is_empty() && !new.is_empty();
            let left = both && kept.contains(&(old.start, new.start));
            let right = both && kept.contains(&(old.end - 1, new.end - 1));
            let mode = match (left, right) {
                (true, false) => ReplaceMode::KeepBefore,
                (false, true) => ReplaceMode::KeepAfter,
                _ => ReplaceMode::Plain,
            };
            Replacement { mode, old_tokens: breakage[old].to_vec(), new_tokens: repaired[new].to_vec() }
        })
        .collect();
    Ok(EditSequence { replacements })
}

/// Shortest context expansion of `region` whose target is unique both in the
/// original breakage and in the current working text. Left-only expansions
/// are tried before right-only ones, then mixed ones.
fn find_unique(
    breakage: &[String],
    work: &[String],
    region: &Region,
    lo: usize,
    new_lo: usize,
    hi: usize,
) -> Option<(Range<usize>, Range<usize>)> {
    let max_left = region.old.start - lo;
    let max_right = hi - region.old.end;
    let offset = new_lo as isize - lo as isize;
    for extra in 0..=(max_left + max_right) {
        let mut splits: Vec<(usize, usize)> = Vec::new();
        if extra == 0 {
            splits.push((0, 0));
        } else {
            splits.push((extra, 0));
            splits.push((0, extra));
            splits.extend((1..extra).map(|l| (l, extra - l)));
        }
        for (l, r) in splits {
            if l > max_left || r > max_right {
                continue;
            }
            let old = region.old.start - l..region.old.end + r;
            let target = &breakage[old.clone()];
            if target.is_empty() || occurrences(breakage, target).len() != 1 {
                continue;
            }
            let at = (old.start as isize + offset) as usize;
            let occ = occurrences(work, target);
            if occ.len() == 1 && occ[0] == at {
                return Some((old, region.new.start - l..region.new.end + r));
            }
        }
    }
    None
}

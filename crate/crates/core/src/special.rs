//! Special-token vocabulary, escaping and splitting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Prefixed to any literal occurrence of a special-token surface inside code.
pub const SENTINEL: char = '\u{E000}';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Special {
    TestContext,
    RepairContext,
    BreakageOpen,
    BreakageClose,
    HunkOpen,
    HunkClose,
    DelOpen,
    DelClose,
    AddOpen,
    AddClose,
    ReplaceOld,
    ReplaceOldKeepBefore,
    ReplaceOldKeepAfter,
    ReplaceNew,
    ReplaceNewKeepBefore,
    ReplaceNewKeepAfter,
    ReplaceEnd,
}

impl Special {
    pub const ALL: [Special; 17] = [
        Special::TestContext,
        Special::RepairContext,
        Special::BreakageOpen,
        Special::BreakageClose,
        Special::HunkOpen,
        Special::HunkClose,
        Special::DelOpen,
        Special::DelClose,
        Special::AddOpen,
        Special::AddClose,
        Special::ReplaceOld,
        Special::ReplaceOldKeepBefore,
        Special::ReplaceOldKeepAfter,
        Special::ReplaceNew,
        Special::ReplaceNewKeepBefore,
        Special::ReplaceNewKeepAfter,
        Special::ReplaceEnd,
    ];

    pub fn default_surface(self) -> &'static str {
        match self {
            Special::TestContext => "[<TESTCONTEXT>]",
            Special::RepairContext => "[<REPAIRCONTEXT>]",
            Special::BreakageOpen => "[<BREAKAGE>]",
            Special::BreakageClose => "[</BREAKAGE>]",
            Special::HunkOpen => "[<HUNK>]",
            Special::HunkClose => "[</HUNK>]",
            Special::DelOpen => "[<DEL>]",
            Special::DelClose => "[</DEL>]",
            Special::AddOpen => "[<ADD>]",
            Special::AddClose => "[</ADD>]",
            Special::ReplaceOld => "[<replaceOld>]",
            Special::ReplaceOldKeepBefore => "[<replaceOldKeepBefore>]",
            Special::ReplaceOldKeepAfter => "[<replaceOldKeepAfter>]",
            Special::ReplaceNew => "[<replaceNew>]",
            Special::ReplaceNewKeepBefore => "[<replaceNewKeepBefore>]",
            Special::ReplaceNewKeepAfter => "[<replaceNewKeepAfter>]",
            Special::ReplaceEnd => "[<replaceEnd>]",
        }
    }
}

/// A piece of rendered text: either a special token or a run of code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Piece<'a> {
    Special(Special),
    Code(&'a str),
}

/// Surface strings for every [`Special`]; rebindable to a model's added tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecialTokens {
    surfaces: BTreeMap<Special, String>,
}

impl Default for SpecialTokens {
    fn default() -> Self {
        SpecialTokens {
            surfaces: Special::ALL.iter().map(|s| (*s, s.default_surface().to_string())).collect(),
        }
    }
}

impl SpecialTokens {
    /// Overrides surfaces from a JSON object such as `{"TestContext": "<extra_id_0>"}`.
    pub fn from_mapping_json(text: &str) -> Result<Self> {
        let overrides: BTreeMap<Special, String> = serde_json::from_str(text)?;
        let mut out = SpecialTokens::default();
        for (k, v) in overrides {
            if v.trim().is_empty() || v.chars().any(char::is_whitespace) {
                return Err(Error::Contract(format!("surface for {k:?} must be non-empty without whitespace")));
            }
            out.surfaces.insert(k, v);
        }
        let mut seen = std::collections::HashSet::new();
        for v in out.surfaces.values() {
            if !seen.insert(v.as_str()) {
                return Err(Error::Contract(format!("duplicate special surface {v}")));
            }
        }
        Ok(out)
    }

    pub fn surface(&self, s: Special) -> &str {
        &self.surfaces[&s]
    }

    pub fn lookup(&self, text: &str) -> Option<Special> {
        self.surfaces.iter().find(|(_, v)| v.as_str() == text).map(|(k, _)| *k)
    }

    /// Longest surface starting at byte `at`.
    fn match_at(&self, text: &str, at: usize) -> Option<(Special, usize)> {
        let rest = &text[at..];
        self.surfaces
            .iter()
            .filter(|(_, v)| rest.starts_with(v.as_str()))
            .max_by_key(|(_, v)| v.len())
            .map(|(k, v)| (*k, v.len()))
    }

    /// Prefixes literal special surfaces (and the sentinel itself) with [`SENTINEL`].
    pub fn escape(&self, code: &str) -> String {
        let mut out = String::with_capacity(code.len());
        let mut i = 0;
        while i < code.len() {
            let c = code[i..].chars().next().unwrap();
            if c == SENTINEL {
                out.push(SENTINEL);
                out.push(SENTINEL);
                i += c.len_utf8();
                continue;
            }
            if let Some((_, len)) = self.match_at(code, i) {
                out.push(SENTINEL);
                out.push_str(&code[i..i + len]);
                i += len;
                continue;
            }
            out.push(c);
            i += c.len_utf8();
        }
        out
    }

    pub fn unescape(&self, code: &str) -> String {
        strip_sentinels(code)
    }

    /// Splits rendered text into special tokens and code runs. Escaped
    /// surfaces stay inside code runs.
    pub fn split<'a>(&self, text: &'a str) -> Vec<Piece<'a>> {
        let mut out = Vec::new();
        let mut code_start = 0;
        let mut i = 0;
        while i < text.len() {
            let c = text[i..].chars().next().unwrap();
            if c == SENTINEL {
                i += c.len_utf8();
                if i < text.len() {
                    let next = text[i..].chars().next().unwrap();
                    if next == SENTINEL {
                        i += next.len_utf8();
                    } else if let Some((_, len)) = self.match_at(text, i) {
                        i += len;
                    }
                }
                continue;
            }
            if let Some((special, len)) = self.match_at(text, i) {
                if code_start < i {
                    out.push(Piece::Code(&text[code_start..i]));
                }
                out.push(Piece::Special(special));
                i += len;
                code_start = i;
                continue;
            }
            i += c.len_utf8();
        }
        if code_start < text.len() {
            out.push(Piece::Code(&text[code_start..]));
        }
        out
    }
}

fn strip_sentinels(code: &str) -> String {
    let mut out = String::with_capacity(code.len());
    let mut chars = code.chars().peekable();
    while let Some(c) = chars.next() {
        if c == SENTINEL {
            if chars.peek() == Some(&SENTINEL) {
                chars.next();
                out.push(SENTINEL);
            }
            continue;
        }
        out.push(c);
    }
    out
}

//! Code tokenization shared by every text-processing stage.
//!
//! The default [`PunctTokenizer`] splits on whitespace, emits every
//! punctuation character as its own token and keeps quoted string/char
//! literals whole. Identifiers and numbers are maximal runs of word
//! characters. Tokens remember their byte span so renderers can slice the
//! original text back out.

use std::collections::HashSet;

/// The pseudo-token standing for a line break in multi-line token streams.
pub const NEWLINE: &str = "\n";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    /// Byte offset of the first character within the tokenized text.
    pub start: usize,
    /// Byte offset one past the last character.
    pub end: usize,
}

pub trait Tokenizer: Send + Sync {
    /// Splits one line (or any newline-free text) into tokens.
    fn tokenize(&self, text: &str) -> Vec<Token>;

    /// Identity recorded alongside artifacts that depend on tokenization.
    fn name(&self) -> &str;

    fn words(&self, text: &str) -> Vec<String> {
        self.tokenize(text).into_iter().map(|t| t.text).collect()
    }

    /// Tokens of several lines, each line preceded by a [`NEWLINE`] token
    /// except the first.
    fn line_stream<S: AsRef<str>>(&self, lines: &[S]) -> Vec<String>
    where
        Self: Sized,
    {
        line_stream(self, lines)
    }
}

pub fn line_stream<T: Tokenizer + ?Sized, S: AsRef<str>>(tok: &T, lines: &[S]) -> Vec<String> {
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if i > 0 {
            out.push(NEWLINE.to_string());
        }
        out.extend(tok.words(line.as_ref()));
    }
    out
}

/// Tokens of every line concatenated, without line markers.
pub fn flat_words<T: Tokenizer + ?Sized, S: AsRef<str>>(tok: &T, lines: &[S]) -> Vec<String> {
    lines.iter().flat_map(|l| tok.words(l.as_ref())).collect()
}

/// Default model-free tokenizer.
#[derive(Debug, Clone, Copy, Default)]
pub struct PunctTokenizer;

pub fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

impl Tokenizer for PunctTokenizer {
    fn tokenize(&self, text: &str) -> Vec<Token> {
        let mut out = Vec::new();
        let mut chars = text.char_indices().peekable();
        while let Some(&(start, c)) = chars.peek() {
            if c.is_whitespace() {
                chars.next();
                continue;
            }
            if is_word_char(c) {
                let mut end = start;
                while let Some(&(i, ch)) = chars.peek() {
                    if !is_word_char(ch) {
                        break;
                    }
                    end = i + ch.len_utf8();
                    chars.next();
                }
                out.push(Token { text: text[start..end].to_string(), start, end });
                continue;
            }
            if c == '"' || c == '\'' {
                let quote = c;
                chars.next();
                let mut end = start + 1;
                let mut escaped = false;
                let mut closed = false;
                while let Some(&(i, ch)) = chars.peek() {
                    chars.next();
                    end = i + ch.len_utf8();
                    if escaped {
                        escaped = false;
                    } else if ch == '\\' {
                        escaped = true;
                    } else if ch == quote {
                        closed = true;
                        break;
                    }
                }
                if closed {
                    out.push(Token { text: text[start..end].to_string(), start, end });
                } else {
                    // Unterminated literal: fall back to tokenizing the quote alone
                    // and rescanning the remainder.
                    out.push(Token { text: quote.to_string(), start, end: start + 1 });
                    let rest = self.tokenize(&text[start + 1..]);
                    out.extend(rest.into_iter().map(|t| Token {
                        text: t.text,
                        start: t.start + start + 1,
                        end: t.end + start + 1,
                    }));
                    return out;
                }
                continue;
            }
            chars.next();
            let end = start + c.len_utf8();
            out.push(Token { text: text[start..end].to_string(), start, end });
        }
        out
    }

    fn name(&self) -> &str {
        "punct-v1"
    }
}

/// Greedy longest-match segmentation of each default token against an
/// external vocabulary. Pieces not covered by the vocabulary fall back to
/// single characters.
#[derive(Debug, Clone)]
pub struct VocabTokenizer {
    vocab: HashSet<String>,
    max_len: usize,
    name: String,
}

impl VocabTokenizer {
    pub fn new<I, S>(name: impl Into<String>, entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let vocab: HashSet<String> = entries.into_iter().map(Into::into).filter(|s| !s.is_empty()).collect();
        let max_len = vocab.iter().map(|s| s.chars().count()).max().unwrap_or(1);
        VocabTokenizer { vocab, max_len, name: name.into() }
    }

    /// One vocabulary entry per line.
    pub fn from_lines(name: impl Into<String>, text: &str) -> Self {
        Self::new(name, text.lines().map(str::to_string))
    }
}

impl Tokenizer for VocabTokenizer {
    fn tokenize(&self, text: &str) -> Vec<Token> {
        let mut out = Vec::new();
        for base in PunctTokenizer.tokenize(text) {
            let chars: Vec<(usize, char)> = base.text.char_indices().collect();
            let mut i = 0;
            while i < chars.len() {
                let mut taken = 1;
                let upper = self.max_len.min(chars.len() - i);
                for len in (1..=upper).rev() {
                    let s = chars[i].0;
                    let e = if i + len < chars.len() { chars[i + len].0 } else { base.text.len() };
                    if self.vocab.contains(&base.text[s..e]) {
                        taken = len;
                        break;
                    }
                }
                let s = chars[i].0;
                let e = if i + taken < chars.len() { chars[i + taken].0 } else { base.text.len() };
                out.push(Token {
                    text: base.text[s..e].to_string(),
                    start: base.start + s,
                    end: base.start + e,
                });
                i += taken;
            }
        }
        out
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// Collapses a text to its token sequence joined by single spaces.
pub fn canonical<T: Tokenizer + ?Sized>(tok: &T, text: &str) -> String {
    let mut out = String::new();
    for line in text.lines() {
        for w in tok.words(line) {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(&w);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<String> {
        PunctTokenizer.words(s)
    }

    #[test]
    fn splits_punctuation_and_keeps_literals() {
        assert_eq!(
            words(r#"account.deposit(500, "USD");"#),
            vec!["account", ".", "deposit", "(", "500", ",", "\"USD\"", ")", ";"]
        );
        assert_eq!(words("balance += amount"), vec!["balance", "+", "=", "amount"]);
        assert_eq!(words("@Test"), vec!["@", "Test"]);
    }

    #[test]
    fn spans_slice_back_to_text() {
        let text = r#"  x = "a b" + y_1;"#;
        for t in PunctTokenizer.tokenize(text) {
            assert_eq!(&text[t.start..t.end], t.text);
        }
    }

    #[test]
    fn string_literal_with_escapes() {
        assert_eq!(words(r#"f("a\"b", 'c')"#), vec!["f", "(", r#""a\"b""#, ",", "'c'", ")"]);
    }

    #[test]
    fn unterminated_quote_falls_back() {
        assert_eq!(words(r#"say "hi"#), vec!["say", "\"", "hi"]);
    }

    #[test]
    fn line_stream_inserts_newline_markers() {
        let s = PunctTokenizer.line_stream(&["a;", "b;"]);
        assert_eq!(s, vec!["a", ";", "\n", "b", ";"]);
    }

    #[test]
    fn vocab_tokenizer_longest_match() {
        let tok = VocabTokenizer::new("toy", ["get", "Balance", "getB"]);
        assert_eq!(tok.words("getBalance()"), vec!["getB", "a", "l", "a", "n", "c", "e", "(", ")"]);
        let tok = VocabTokenizer::new("toy", ["get", "Balance"]);
        assert_eq!(tok.words("getBalance"), vec!["get", "Balance"]);
    }

    #[test]
    fn canonical_collapses_whitespace() {
        assert_eq!(canonical(&PunctTokenizer, "a  (b)\n  c"), "a ( b ) c");
    }
}

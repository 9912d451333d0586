//! Rule-based tokenizer and sentence splitter.
//!
//! Tokens are maximal runs of letters/digits, or single punctuation
//! characters. Sentences end at `.`, `?` or `!` followed by whitespace and
//! an uppercase letter (unless the period closes a known abbreviation), at
//! line breaks, and at the end of the text.

use crate::interval::Interval;

pub const DEFAULT_ABBREVIATIONS: &[&str] = &["Dr.", "Mr.", "Mrs.", "Ms.", "vs.", "e.g.", "i.e."];

/// Token spans in character offsets.
pub fn token_spans(text: &str) -> Vec<Interval> {
    let mut out = Vec::new();
    let mut run_start: Option<usize> = None;
    let mut pos = 0;
    for c in text.chars() {
        if c.is_alphanumeric() {
            run_start.get_or_insert(pos);
        } else {
            if let Some(s) = run_start.take() {
                out.push(Interval { start: s, end: pos });
            }
            if !c.is_whitespace() {
                out.push(Interval {
                    start: pos,
                    end: pos + 1,
                });
            }
        }
        pos += 1;
    }
    if let Some(s) = run_start {
        out.push(Interval { start: s, end: pos });
    }
    out
}

#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    abbreviations: Vec<String>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        Self::new(DEFAULT_ABBREVIATIONS.iter().map(|s| s.to_string()))
    }
}

impl SentenceSplitter {
    pub fn new(abbreviations: impl IntoIterator<Item = String>) -> Self {
        Self {
            abbreviations: abbreviations.into_iter().collect(),
        }
    }

    /// One abbreviation per line; blank lines ignored.
    pub fn from_list(text: &str) -> Self {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string),
        )
    }

    pub fn abbreviations(&self) -> &[String] {
        &self.abbreviations
    }

    /// Sentence spans in character offsets, trimmed of surrounding whitespace.
    pub fn split(&self, text: &str) -> Vec<Interval> {
        let chars: Vec<char> = text.chars().collect();
        let mut out = Vec::new();
        let mut start: Option<usize> = None;
        // end of the last non-whitespace character seen in the current sentence
        let mut last = 0;
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c == '\n' || c == '\r' {
                if let Some(s) = start.take() {
                    out.push(Interval { start: s, end: last });
                }
                i += 1;
                continue;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            start.get_or_insert(i);
            last = i + 1;
            if matches!(c, '.' | '?' | '!') && self.ends_sentence(&chars, i) {
                out.push(Interval {
                    start: start.take().unwrap(),
                    end: i + 1,
                });
            }
            i += 1;
        }
        if let Some(s) = start {
            out.push(Interval { start: s, end: last });
        }
        out
    }

    fn ends_sentence(&self, chars: &[char], at: usize) -> bool {
        let mut j = at + 1;
        let mut saw_space = false;
        while j < chars.len() && chars[j].is_whitespace() {
            if chars[j] == '\n' || chars[j] == '\r' {
                // the line break closes the sentence anyway
                return false;
            }
            saw_space = true;
            j += 1;
        }
        if !saw_space || j >= chars.len() || !chars[j].is_uppercase() {
            return false;
        }
        if chars[at] == '.' {
            let word_start = chars[..at]
                .iter()
                .rposition(|c| c.is_whitespace())
                .map_or(0, |p| p + 1);
            let word: String = chars[word_start..=at].iter().collect();
            if self.abbreviations.iter().any(|a| *a == word) {
                return false;
            }
        }
        true
    }
}

/// Sentence spans with the default abbreviation list.
pub fn sentence_spans(text: &str) -> Vec<Interval> {
    SentenceSplitter::default().split(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(s: usize, e: usize) -> Interval {
        Interval { start: s, end: e }
    }

    #[test]
    fn tiny_sentence() {
        assert_eq!(token_spans("A b."), vec![iv(0, 1), iv(2, 3), iv(3, 4)]);
        assert_eq!(sentence_spans("A b."), vec![iv(0, 4)]);
    }

    #[test]
    fn empty_text() {
        assert!(token_spans("").is_empty());
        assert!(sentence_spans("").is_empty());
        assert!(sentence_spans(" \n\n ").is_empty());
    }

    #[test]
    fn abbreviation_does_not_split() {
        let text = "Dr. Smith came. He left.";
        assert_eq!(sentence_spans(text), vec![iv(0, 15), iv(16, 24)]);
        let bare = SentenceSplitter::new(Vec::new());
        assert_eq!(bare.split(text), vec![iv(0, 3), iv(4, 15), iv(16, 24)]);
    }

    #[test]
    fn newline_closes_sentence() {
        let text = "PAST MEDICAL HISTORY: diabetes\nMEDICATIONS: aspirin.\n";
        assert_eq!(sentence_spans(text), vec![iv(0, 30), iv(31, 52)]);
    }

    #[test]
    fn lowercase_continuation_is_same_sentence() {
        assert_eq!(sentence_spans("Temp 98.6 today. ok then."), vec![iv(0, 25)]);
    }

    #[test]
    fn tokens_and_sentences_never_cross() {
        let text = "Pt. seen by Dr. Lee!  BP 120/80 e.g. stable?\nNo fever. Plan: d/c.";
        let sentences = sentence_spans(text);
        for tok in token_spans(text) {
            let inside = sentences.iter().any(|s| s.start <= tok.start && tok.end <= s.end);
            let outside = sentences.iter().all(|s| tok.end <= s.start || tok.start >= s.end);
            assert!(inside || outside, "token {tok} crosses a sentence");
        }
    }

    #[test]
    fn unicode_tokens_use_char_offsets() {
        assert_eq!(token_spans("naïve café"), vec![iv(0, 5), iv(6, 10)]);
    }
}

//! Dictionary concept tagging.
//!
//! Every contiguous token run of a sentence (up to `max_phrase_tokens`, never
//! across punctuation) is looked up case-insensitively in the lexicon. Hits
//! contained in a longer hit are dropped, as are single-token hits on
//! function words. CUI annotations then feed TUI and SP-POS annotations
//! through the lexicon's mapping tables.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::doc::{token_spans, AnnotationId, Document, NewAnnotation, TOKEN};
use crate::interval::Interval;

pub const CUI: &str = "CUI";
pub const TUI: &str = "TUI";
pub const SP_POS: &str = "SP-POS";
pub const DEFAULT_MAX_PHRASE_TOKENS: usize = 12;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file} line {line}: {message}")]
    Line {
        file: String,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: HashMap<Vec<String>, Vec<String>>,
    preferred: HashMap<String, String>,
    cui_to_tui: HashMap<String, Vec<String>>,
    token_to_pos: HashMap<String, Vec<String>>,
    function_words: HashSet<String>,
    pub max_phrase_tokens: usize,
}

impl Default for Lexicon {
    fn default() -> Self {
        Self {
            entries: HashMap::new(),
            preferred: HashMap::new(),
            cui_to_tui: HashMap::new(),
            token_to_pos: HashMap::new(),
            function_words: HashSet::new(),
            max_phrase_tokens: DEFAULT_MAX_PHRASE_TOKENS,
        }
    }
}

/// Lexicon source files; only the term file is mandatory.
#[derive(Debug, Clone, Default)]
pub struct LexiconPaths {
    pub terms: PathBuf,
    pub tuis: Option<PathBuf>,
    pub pos: Option<PathBuf>,
    pub function_words: Option<PathBuf>,
}

pub fn fold(token: &str) -> String {
    token.to_lowercase()
}

fn is_punctuation(token: &str) -> bool {
    !token.chars().any(char::is_alphanumeric)
}

fn push_unique(list: &mut Vec<String>, item: &str) {
    if !list.iter().any(|x| x == item) {
        list.push(item.to_string());
    }
}

/// Non-blank, non-comment lines split on tabs, with 1-based line numbers.
fn records<'a>(text: &'a str, file: &'a str, min_fields: usize) -> impl Iterator<Item = Result<(usize, Vec<&'a str>), LexiconError>> + 'a {
    text.lines().enumerate().filter_map(move |(i, raw)| {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            return None;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() < min_fields || fields[..min_fields].iter().any(|f| f.is_empty()) {
            return Some(Err(LexiconError::Line {
                file: file.to_string(),
                line: i + 1,
                message: format!("expected {min_fields} tab-separated fields"),
            }));
        }
        Some(Ok((i + 1, fields)))
    })
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a term; repeated (term, CUI) pairs collapse.
    pub fn add_term(&mut self, term: &str, cui: &str, preferred: Option<&str>) -> bool {
        let chars: Vec<char> = term.chars().collect();
        let key: Vec<String> = token_spans(term)
            .into_iter()
            .map(|s| fold(&chars[s.start..s.end].iter().collect::<String>()))
            .collect();
        if key.is_empty() {
            return false;
        }
        push_unique(self.entries.entry(key).or_default(), cui);
        if let Some(p) = preferred.filter(|p| !p.is_empty()) {
            self.preferred.entry(cui.to_string()).or_insert_with(|| p.to_string());
        }
        true
    }

    pub fn add_tui(&mut self, cui: &str, tui: &str) {
        push_unique(self.cui_to_tui.entry(cui.to_string()).or_default(), tui);
    }

    pub fn add_pos(&mut self, token: &str, tag: &str) {
        push_unique(self.token_to_pos.entry(fold(token)).or_default(), tag);
    }

    pub fn add_function_word(&mut self, token: &str) {
        self.function_words.insert(fold(token));
    }

    /// Number of distinct term token sequences.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// CUIs for an already tokenized phrase, compared case-insensitively.
    pub fn lookup<S: AsRef<str>>(&self, tokens: &[S]) -> Option<&[String]> {
        let key: Vec<String> = tokens.iter().map(|t| fold(t.as_ref())).collect();
        self.entries.get(&key).map(Vec::as_slice)
    }

    pub fn preferred_term(&self, cui: &str) -> Option<&str> {
        self.preferred.get(cui).map(String::as_str)
    }

    pub fn tuis(&self, cui: &str) -> &[String] {
        self.cui_to_tui.get(cui).map_or(&[], Vec::as_slice)
    }

    pub fn pos_tags(&self, token: &str) -> &[String] {
        self.token_to_pos.get(&fold(token)).map_or(&[], Vec::as_slice)
    }

    pub fn is_function_word(&self, token: &str) -> bool {
        self.function_words.contains(&fold(token))
    }

    pub fn parse_terms(&mut self, text: &str, file: &str) -> Result<(), LexiconError> {
        for rec in records(text, file, 2) {
            let (line, f) = rec?;
            if !self.add_term(f[0], f[1], f.get(2).copied()) {
                return Err(LexiconError::Line {
                    file: file.to_string(),
                    line,
                    message: format!("term {:?} has no tokens", f[0]),
                });
            }
        }
        Ok(())
    }

    pub fn parse_tuis(&mut self, text: &str, file: &str) -> Result<(), LexiconError> {
        for rec in records(text, file, 2) {
            let (_, f) = rec?;
            self.add_tui(f[0], f[1]);
        }
        Ok(())
    }

    pub fn parse_pos(&mut self, text: &str, file: &str) -> Result<(), LexiconError> {
        for rec in records(text, file, 2) {
            let (line, f) = rec?;
            let tags: Vec<&str> = f[1].split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
            if tags.is_empty() {
                return Err(LexiconError::Line {
                    file: file.to_string(),
                    line,
                    message: "no tags".into(),
                });
            }
            for t in tags {
                self.add_pos(f[0], t);
            }
        }
        Ok(())
    }

    pub fn parse_function_words(&mut self, text: &str) {
        for w in text.lines().map(str::trim).filter(|w| !w.is_empty() && !w.starts_with('#')) {
            self.add_function_word(w);
        }
    }

    pub fn load(paths: &LexiconPaths) -> Result<Self, LexiconError> {
        fn read(path: &Path) -> Result<String, LexiconError> {
            fs::read_to_string(path).map_err(|source| LexiconError::Io {
                path: path.to_path_buf(),
                source,
            })
        }
        let mut lex = Lexicon::new();
        lex.parse_terms(&read(&paths.terms)?, &paths.terms.display().to_string())?;
        if let Some(p) = &paths.tuis {
            lex.parse_tuis(&read(p)?, &p.display().to_string())?;
        }
        if let Some(p) = &paths.pos {
            lex.parse_pos(&read(p)?, &p.display().to_string())?;
        }
        if let Some(p) = &paths.function_words {
            lex.parse_function_words(&read(p)?);
        }
        Ok(lex)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptMatch {
    /// Half-open range of token ordinals within the sentence.
    pub tokens: (usize, usize),
    pub span: Interval,
    pub cuis: Vec<String>,
}

/// A sentence token: its document span and text.
pub type TokenRef<'a> = (Interval, &'a str);

/// Greedy longest-match tagging of one sentence. Output is ordered by token
/// range.
pub fn tag_sentence(tokens: &[TokenRef<'_>], lexicon: &Lexicon) -> Vec<ConceptMatch> {
    let n = tokens.len();
    let cap = lexicon.max_phrase_tokens.min(n);
    let mut hits: Vec<(usize, usize, &[String])> = Vec::new();
    for i in 0..n {
        let mut key: Vec<String> = Vec::with_capacity(cap);
        for j in i..(i + cap).min(n) {
            if is_punctuation(tokens[j].1) {
                break;
            }
            key.push(fold(tokens[j].1));
            if let Some(cuis) = lexicon.entries.get(&key) {
                hits.push((i, j + 1, cuis));
            }
        }
    }
    // longest first, then leftmost; a hit inside a committed one is dropped
    hits.sort_by_key(|&(s, e, _)| (std::cmp::Reverse(e - s), s));
    let mut kept: Vec<(usize, usize, &[String])> = Vec::new();
    for hit in hits {
        if !kept.iter().any(|k| k.0 <= hit.0 && hit.1 <= k.1) {
            kept.push(hit);
        }
    }
    kept.retain(|&(s, e, _)| !(e - s == 1 && lexicon.is_function_word(tokens[s].1)));
    kept.sort_by_key(|&(s, e, _)| (s, e));
    kept.into_iter()
        .map(|(s, e, cuis)| ConceptMatch {
            tokens: (s, e),
            span: Interval {
                start: tokens[s].0.start,
                end: tokens[e - 1].0.end,
            },
            cuis: cuis.to_vec(),
        })
        .collect()
}

fn sentence_tokens(doc: &Document, sentence: Interval) -> Vec<(Interval, String)> {
    doc.annotations_within(sentence, TOKEN)
        .into_iter()
        .map(|t| (t.span, doc.text(t.span).to_string()))
        .collect()
}

/// Tags one sentence annotation, adding one `CUI` annotation per match and
/// candidate concept.
pub fn annotate_concepts(doc: &mut Document, sentence: AnnotationId, lexicon: &Lexicon) -> Vec<AnnotationId> {
    let Some(span) = doc.annotation(sentence).map(|a| a.span) else {
        return Vec::new();
    };
    let owned = sentence_tokens(doc, span);
    let tokens: Vec<TokenRef<'_>> = owned.iter().map(|(s, t)| (*s, t.as_str())).collect();
    let mut new = Vec::new();
    for m in tag_sentence(&tokens, lexicon) {
        for cui in &m.cuis {
            let mut ann = NewAnnotation::new(CUI, m.span)
                .with_value(cui.clone())
                .with_attr("token_start", m.tokens.0.to_string())
                .with_attr("token_end", m.tokens.1.to_string())
                .with_attr("sentence", sentence.0.to_string())
                .with_provenance("lexicon");
            if let Some(p) = lexicon.preferred_term(cui) {
                ann = ann.with_attr("preferred", p);
            }
            new.push(ann);
        }
    }
    new.into_iter()
        .map(|a| doc.add_annotation(a).expect("match spans lie inside the sentence"))
        .collect()
}

/// One `TUI` annotation per (CUI annotation, mapped semantic type).
pub fn annotate_tuis(doc: &mut Document, lexicon: &Lexicon) -> Vec<AnnotationId> {
    let new: Vec<NewAnnotation> = doc
        .annotations()
        .iter()
        .filter(|a| a.type_name == CUI)
        .flat_map(|a| {
            lexicon.tuis(&a.value).iter().map(|tui| {
                NewAnnotation::new(TUI, a.span)
                    .with_value(tui.clone())
                    .with_attr("cui", a.value.clone())
                    .with_provenance("lexicon")
            })
        })
        .collect();
    new.into_iter()
        .map(|a| doc.add_annotation(a).expect("copied span"))
        .collect()
}

/// One `SP-POS` annotation per token with lexicon tags; the value lists
/// every possible tag, comma separated.
pub fn annotate_sp_pos(doc: &mut Document, lexicon: &Lexicon) -> Vec<AnnotationId> {
    let new: Vec<NewAnnotation> = doc
        .annotations()
        .iter()
        .filter(|a| a.type_name == TOKEN)
        .filter_map(|a| {
            let tags = lexicon.pos_tags(doc.text(a.span));
            (!tags.is_empty()).then(|| {
                NewAnnotation::new(SP_POS, a.span)
                    .with_value(tags.join(","))
                    .with_provenance("lexicon")
            })
        })
        .collect();
    new.into_iter()
        .map(|a| doc.add_annotation(a).expect("copied span"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc::{DocId, SentenceSplitter};
    use proptest::prelude::*;

    fn toks(words: &[&'static str]) -> Vec<TokenRef<'static>> {
        let mut pos = 0;
        words
            .iter()
            .map(|w| {
                let span = Interval::new(pos, pos + w.chars().count()).unwrap();
                pos = span.end + 1;
                (span, *w)
            })
            .collect()
    }

    fn lex(terms: &[(&str, &str)]) -> Lexicon {
        let mut l = Lexicon::new();
        for (t, c) in terms {
            l.add_term(t, c, None);
        }
        l
    }

    fn summary(ms: &[ConceptMatch]) -> Vec<(String, (usize, usize))> {
        ms.iter().map(|m| (m.cuis.join("|"), m.tokens)).collect()
    }

    const HEART: &[&str] = &["congenital", "defect", "of", "the", "heart"];

    #[test]
    fn congenital_defect_examples() {
        let l = lex(&[("congenital defect", "C0"), ("heart", "C1"), ("congenital", "C2")]);
        let got = tag_sentence(&toks(HEART), &l);
        assert_eq!(summary(&got), vec![("C0".into(), (0, 2)), ("C1".into(), (4, 5))]);
        assert_eq!(got[0].span, Interval::new(0, 17).unwrap());

        let l = lex(&[
            ("congenital defect", "C0"),
            ("heart", "C1"),
            ("congenital", "C2"),
            ("defect of the heart", "C3"),
        ]);
        let got = tag_sentence(&toks(HEART), &l);
        assert_eq!(summary(&got), vec![("C0".into(), (0, 2)), ("C3".into(), (1, 5))]);
    }

    #[test]
    fn function_words_and_empty() {
        let mut l = lex(&[("the", "C9")]);
        l.add_function_word("The");
        assert!(tag_sentence(&toks(HEART), &l).is_empty());
        assert!(tag_sentence(&[], &l).is_empty());
    }

    #[test]
    fn case_folding_and_punctuation() {
        let l = lex(&[("Heart Attack", "C5"), ("attack , then", "C6")]);
        assert_eq!(l.lookup(&["heart", "attack"]).unwrap(), ["C5".to_string()]);
        let got = tag_sentence(&toks(&["HEART", "attack", ",", "then"]), &l);
        assert_eq!(summary(&got), vec![("C5".into(), (0, 2))]);
    }

    #[test]
    fn phrase_cap() {
        let mut l = lex(&[("a b c", "C1"), ("a", "C2")]);
        l.max_phrase_tokens = 2;
        let got = tag_sentence(&toks(&["a", "b", "c"]), &l);
        assert_eq!(summary(&got), vec![("C2".into(), (0, 1))]);
    }

    #[test]
    fn term_file_parsing() {
        let mut l = Lexicon::new();
        l.parse_terms("heart attack\tC1\tMyocardial infarction\nheart attack\tC1\n", "terms").unwrap();
        assert_eq!(l.len(), 1);
        assert_eq!(l.lookup(&["heart", "attack"]).unwrap().len(), 1);
        assert_eq!(l.preferred_term("C1"), Some("Myocardial infarction"));
        l.parse_terms("fever\tC2\n", "terms").unwrap();
        assert_eq!(l.len(), 2);
        let err = Lexicon::new().parse_terms("fever\tC2\nbad line\n", "terms").unwrap_err();
        assert!(matches!(err, LexiconError::Line { line: 2, .. }), "{err}");
        let err = Lexicon::new().parse_pos("cold\t\n", "pos").unwrap_err();
        assert!(matches!(err, LexiconError::Line { line: 1, .. }), "{err}");
    }

    #[test]
    fn load_from_files() {
        let dir = tempfile::tempdir().unwrap();
        let write = |name: &str, body: &str| {
            let p = dir.path().join(name);
            fs::write(&p, body).unwrap();
            p
        };
        let paths = LexiconPaths {
            terms: write("terms.tsv", "cold\tC1\n"),
            tuis: Some(write("tui.tsv", "C1\tT047\nC1\tT033\n")),
            pos: Some(write("pos.tsv", "cold\tnoun,adjective\n")),
            function_words: Some(write("fw.txt", "the\nof\n")),
        };
        let l = Lexicon::load(&paths).unwrap();
        assert_eq!(l.tuis("C1").len(), 2);
        assert_eq!(l.pos_tags("COLD"), ["noun", "adjective"]);
        assert!(l.is_function_word("Of"));
        let missing = LexiconPaths {
            terms: dir.path().join("nope"),
            ..LexiconPaths::default()
        };
        assert!(matches!(Lexicon::load(&missing), Err(LexiconError::Io { .. })));
    }

    fn prepared(text: &str) -> (Document, AnnotationId) {
        let mut doc = Document::new(DocId(1), "d", text);
        for t in doc.tokenize() {
            doc.add_annotation(t).unwrap();
        }
        let sentences = doc.split_sentences(&SentenceSplitter::default());
        let ids: Vec<_> = sentences.into_iter().map(|s| doc.add_annotation(s).unwrap()).collect();
        (doc, ids[0])
    }

    #[test]
    fn annotations_per_cui_then_tui_and_pos() {
        let mut l = lex(&[("cold", "C1"), ("cold", "C2")]);
        l.add_tui("C1", "T047");
        l.add_tui("C1", "T033");
        l.add_pos("cold", "noun");
        l.add_pos("cold", "adjective");
        let (mut doc, sentence) = prepared("Patient has a cold today.");
        let ids = annotate_concepts(&mut doc, sentence, &l);
        assert_eq!(ids.len(), 2);
        let spans: HashSet<Interval> = ids.iter().map(|id| doc.annotation(*id).unwrap().span).collect();
        assert_eq!(spans.len(), 1);
        let span = *spans.iter().next().unwrap();
        assert_eq!(doc.text(span), "cold");

        let tuis = annotate_tuis(&mut doc, &l);
        assert_eq!(tuis.len(), 2);
        assert!(tuis.iter().all(|id| doc.annotation(*id).unwrap().span == span));

        let pos = annotate_sp_pos(&mut doc, &l);
        assert_eq!(pos.len(), 1);
        assert_eq!(doc.annotation(pos[0]).unwrap().value, "noun,adjective");
    }

    #[test]
    fn no_matches_no_annotations() {
        let l = lex(&[("fever", "C1")]);
        let (mut doc, sentence) = prepared("All quiet.");
        assert!(annotate_concepts(&mut doc, sentence, &l).is_empty());
        assert!(annotate_tuis(&mut doc, &l).is_empty());
    }

    /// Every contiguous run, every hit, then exact containment and
    /// function-word filtering.
    fn oracle(words: &[&str], lexicon: &Lexicon) -> Vec<(usize, usize)> {
        let n = words.len();
        let mut hits = Vec::new();
        for i in 0..n {
            for j in i + 1..=n {
                let run = &words[i..j];
                if j - i > lexicon.max_phrase_tokens || run.iter().any(|w| is_punctuation(w)) {
                    continue;
                }
                if lexicon.lookup(run).is_some() {
                    hits.push((i, j));
                }
            }
        }
        let mut kept: Vec<(usize, usize)> = hits
            .iter()
            .copied()
            .filter(|&(s, e)| !hits.iter().any(|&(s2, e2)| s2 <= s && e <= e2 && (s2, e2) != (s, e)))
            .filter(|&(s, e)| !(e - s == 1 && lexicon.is_function_word(words[s])))
            .collect();
        kept.sort();
        kept
    }

    const VOCAB: &[&str] = &["a", "b", "c", "d", "the", ","];

    fn case() -> impl Strategy<Value = (Vec<usize>, Vec<Vec<usize>>)> {
        (
            prop::collection::vec(0..VOCAB.len(), 0..=12),
            prop::collection::vec(prop::collection::vec(0..5usize, 1..=4), 0..10),
        )
    }

    proptest! {
        #[test]
        fn matches_brute_force((sentence, terms) in case()) {
            let words: Vec<&'static str> = sentence.iter().map(|&i| VOCAB[i]).collect();
            let mut l = Lexicon::new();
            l.add_function_word("the");
            for (k, t) in terms.iter().enumerate() {
                let term: Vec<&str> = t.iter().map(|&i| VOCAB[i]).collect();
                l.add_term(&term.join(" "), &format!("C{k}"), None);
            }
            let got = tag_sentence(&toks(&words), &l);
            let ranges: Vec<_> = got.iter().map(|m| m.tokens).collect();
            prop_assert_eq!(&ranges, &oracle(&words, &l));
            for a in &ranges {
                for b in &ranges {
                    prop_assert!(a == b || !(b.0 <= a.0 && a.1 <= b.1));
                }
            }
            let upper: Vec<String> = words.iter().map(|w| w.to_uppercase()).collect();
            let upper_toks: Vec<TokenRef<'_>> = toks(&words).iter().zip(&upper).map(|(t, u)| (t.0, u.as_str())).collect();
            prop_assert_eq!(tag_sentence(&upper_toks, &l), got);
        }
    }
}

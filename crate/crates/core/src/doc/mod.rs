//! Documents, corpora and stand-off annotations.
//!
//! A [`Document`] owns immutable text plus an [`AnnotationIndex`]: an
//! interval tree over annotation spans, an id map and a per-type index.
//! Spans are character offsets (Unicode scalar values), not bytes.

pub(crate) mod exchange;
mod segment;
mod text;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::attrs::{Attributes, RESERVED_PREFIX};
use crate::interval::{AllenRelation, Interval};
use crate::tree::IntervalTree;

pub use exchange::{
    export_annotations, parse_annotation_lines, ExternalAnnotation, ImportError, LineError,
    EXPORT_HEADER,
};
pub use segment::{segment_spans, Segments};
pub use text::{sentence_spans, token_spans, SentenceSplitter, DEFAULT_ABBREVIATIONS};

pub const TOKEN: &str = "token";
pub const SENTENCE: &str = "sentence";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DocId(pub i64);

/// Annotation ids are unique across the whole store: the owning document's
/// id in the high 32 bits and a per-document ordinal in the low 32.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AnnotationId(pub i64);

impl AnnotationId {
    pub fn compose(doc: DocId, ordinal: u32) -> Self {
        AnnotationId((doc.0 << 32) | i64::from(ordinal))
    }

    pub fn doc(self) -> DocId {
        DocId(self.0 >> 32)
    }

    pub fn ordinal(self) -> u32 {
        (self.0 & 0xffff_ffff) as u32
    }
}

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for AnnotationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum DocError {
    #[error("span {span} lies outside document of {len} characters")]
    OutOfBounds { span: Interval, len: usize },
    #[error("annotation {0} already exists")]
    Duplicate(AnnotationId),
    #[error("annotation {0} not found")]
    NotFound(AnnotationId),
    #[error("annotation {id} belongs to document {found}, not {expected}")]
    WrongDocument {
        id: AnnotationId,
        expected: DocId,
        found: DocId,
    },
    #[error("annotation type name must not be empty")]
    EmptyType,
    #[error("attribute key {0:?} uses the reserved '@' prefix")]
    ReservedKey(String),
    #[error("concept spans {0} and {1} overlap")]
    Overlap(Interval, Interval),
    #[error("concept {0} precedes {1}; pass concepts in text order")]
    Order(Interval, Interval),
    #[error(transparent)]
    Import(#[from] ImportError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub id: AnnotationId,
    pub doc_id: DocId,
    pub span: Interval,
    pub type_name: String,
    pub value: String,
    pub attributes: Attributes,
    pub provenance: String,
}

/// An annotation that has not been given an id yet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewAnnotation {
    pub span: Interval,
    pub type_name: String,
    pub value: String,
    pub attributes: Attributes,
    pub provenance: String,
}

impl NewAnnotation {
    pub fn new(type_name: impl Into<String>, span: Interval) -> Self {
        Self {
            span,
            type_name: type_name.into(),
            value: String::new(),
            attributes: Attributes::new(),
            provenance: String::new(),
        }
    }

    pub fn with_value(mut self, value: impl Into<String>) -> Self {
        self.value = value.into();
        self
    }

    pub fn with_attr(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.attributes.insert(key.into(), value.into());
        self
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub id: i64,
    pub name: String,
    pub metadata: BTreeMap<String, String>,
    pub documents: BTreeSet<DocId>,
}

/// Interval tree, id map and type index over one document's annotations.
/// All three are updated together.
#[derive(Debug, Clone, Default)]
pub struct AnnotationIndex {
    tree: IntervalTree<AnnotationId>,
    by_id: HashMap<AnnotationId, Annotation>,
    by_type: HashMap<String, BTreeSet<AnnotationId>>,
}

impl AnnotationIndex {
    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    pub fn get(&self, id: AnnotationId) -> Option<&Annotation> {
        self.by_id.get(&id)
    }

    pub fn tree(&self) -> &IntervalTree<AnnotationId> {
        &self.tree
    }

    /// Every annotation in canonical span order, ties by id.
    pub fn iter(&self) -> impl Iterator<Item = &Annotation> + '_ {
        self.tree.iter().map(|(_, id)| &self.by_id[id])
    }

    pub fn ids_of_type(&self, type_name: &str) -> impl Iterator<Item = AnnotationId> + '_ {
        self.by_type.get(type_name).into_iter().flatten().copied()
    }

    pub fn count_of_type(&self, type_name: &str) -> usize {
        self.by_type.get(type_name).map_or(0, BTreeSet::len)
    }

    fn insert(&mut self, ann: Annotation) -> Result<(), DocError> {
        if self.by_id.contains_key(&ann.id) {
            return Err(DocError::Duplicate(ann.id));
        }
        self.tree
            .insert(ann.span, ann.id)
            .map_err(|_| DocError::Duplicate(ann.id))?;
        self.by_type
            .entry(ann.type_name.clone())
            .or_default()
            .insert(ann.id);
        self.by_id.insert(ann.id, ann);
        Ok(())
    }

    fn remove(&mut self, id: AnnotationId) -> Result<Annotation, DocError> {
        let ann = self.by_id.remove(&id).ok_or(DocError::NotFound(id))?;
        self.tree
            .remove(&ann.span, &id)
            .expect("tree and id map agree");
        if let Some(ids) = self.by_type.get_mut(&ann.type_name) {
            ids.remove(&id);
            if ids.is_empty() {
                self.by_type.remove(&ann.type_name);
            }
        }
        Ok(ann)
    }

    /// Verifies the tree, id map and type index describe the same set.
    pub fn audit(&self) -> Result<(), String> {
        self.tree.audit()?;
        if self.tree.len() != self.by_id.len() {
            return Err("tree and id map sizes differ".into());
        }
        for (span, id) in self.tree.iter() {
            let ann = self.by_id.get(id).ok_or(format!("tree entry {id} missing"))?;
            if ann.span != span {
                return Err(format!("annotation {id} indexed under wrong span"));
            }
            if !self.by_type.get(&ann.type_name).is_some_and(|s| s.contains(id)) {
                return Err(format!("annotation {id} missing from type index"));
            }
        }
        let typed: usize = self.by_type.values().map(BTreeSet::len).sum();
        if typed != self.by_id.len() {
            return Err("type index has stale entries".into());
        }
        Ok(())
    }
}

/// What the store last saw of this document; maintained by the store layer.
#[derive(Debug, Clone, Default)]
pub(crate) struct SyncState {
    pub(crate) document_persisted: bool,
    /// Fingerprint of each annotation row as last written or read.
    pub(crate) rows: HashMap<AnnotationId, u64>,
}

#[derive(Debug, Clone)]
pub struct Document {
    id: DocId,
    name: String,
    content: String,
    /// Byte offset of each character, absent for pure ASCII text.
    char_bytes: Option<Vec<usize>>,
    char_len: usize,
    pub metadata: BTreeMap<String, String>,
    index: AnnotationIndex,
    dirty: BTreeSet<AnnotationId>,
    removed: BTreeSet<AnnotationId>,
    next_ordinal: u32,
    pub(crate) sync: SyncState,
}

impl Document {
    pub fn new(id: DocId, name: impl Into<String>, content: impl Into<String>) -> Self {
        let content = content.into();
        let (char_bytes, char_len) = if content.is_ascii() {
            (None, content.len())
        } else {
            let offsets: Vec<usize> = content.char_indices().map(|(b, _)| b).collect();
            let n = offsets.len();
            (Some(offsets), n)
        };
        Self {
            id,
            name: name.into(),
            content,
            char_bytes,
            char_len,
            metadata: BTreeMap::new(),
            index: AnnotationIndex::default(),
            dirty: BTreeSet::new(),
            removed: BTreeSet::new(),
            next_ordinal: 1,
            sync: SyncState::default(),
        }
    }

    pub fn id(&self) -> DocId {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn content(&self) -> &str {
        &self.content
    }

    /// Length in characters.
    pub fn char_len(&self) -> usize {
        self.char_len
    }

    pub fn annotations(&self) -> &AnnotationIndex {
        &self.index
    }

    pub fn annotation(&self, id: AnnotationId) -> Option<&Annotation> {
        self.index.get(id)
    }

    pub fn byte_offset(&self, char_pos: usize) -> usize {
        match &self.char_bytes {
            None => char_pos,
            Some(offsets) => offsets.get(char_pos).copied().unwrap_or(self.content.len()),
        }
    }

    /// Character position of a byte offset that lies on a char boundary.
    pub fn char_offset(&self, byte_pos: usize) -> usize {
        match &self.char_bytes {
            None => byte_pos,
            Some(offsets) => offsets.partition_point(|&b| b < byte_pos),
        }
    }

    /// The text covered by `span`.
    pub fn text(&self, span: Interval) -> &str {
        &self.content[self.byte_offset(span.start)..self.byte_offset(span.end)]
    }

    pub fn full_span(&self) -> Interval {
        Interval {
            start: 0,
            end: self.char_len,
        }
    }

    fn check_span(&self, span: Interval) -> Result<(), DocError> {
        if span.start > span.end || span.end > self.char_len {
            return Err(DocError::OutOfBounds {
                span,
                len: self.char_len,
            });
        }
        Ok(())
    }

    fn check_fields(type_name: &str, attributes: &Attributes) -> Result<(), DocError> {
        if type_name.is_empty() {
            return Err(DocError::EmptyType);
        }
        if let Some(key) = attributes.keys().find(|k| k.starts_with(RESERVED_PREFIX)) {
            return Err(DocError::ReservedKey(key.clone()));
        }
        Ok(())
    }

    pub fn add_annotation(&mut self, new: NewAnnotation) -> Result<AnnotationId, DocError> {
        self.check_span(new.span)?;
        Self::check_fields(&new.type_name, &new.attributes)?;
        let id = AnnotationId::compose(self.id, self.next_ordinal);
        let ann = Annotation {
            id,
            doc_id: self.id,
            span: new.span,
            type_name: new.type_name,
            value: new.value,
            attributes: new.attributes,
            provenance: new.provenance,
        };
        self.index.insert(ann)?;
        self.next_ordinal += 1;
        self.mark_dirty(id);
        Ok(id)
    }

    /// Inserts an annotation that already carries its id.
    pub fn insert_annotation(&mut self, ann: Annotation) -> Result<AnnotationId, DocError> {
        self.check_span(ann.span)?;
        Self::check_fields(&ann.type_name, &ann.attributes)?;
        if ann.doc_id != self.id || ann.id.doc() != self.id {
            return Err(DocError::WrongDocument {
                id: ann.id,
                expected: self.id,
                found: ann.doc_id,
            });
        }
        let id = ann.id;
        self.index.insert(ann)?;
        self.next_ordinal = self.next_ordinal.max(id.ordinal() + 1);
        self.mark_dirty(id);
        Ok(id)
    }

    pub fn set_value(&mut self, id: AnnotationId, value: impl Into<String>) -> Result<(), DocError> {
        let ann = self.index.by_id.get_mut(&id).ok_or(DocError::NotFound(id))?;
        ann.value = value.into();
        self.mark_dirty(id);
        Ok(())
    }

    pub fn set_attribute(
        &mut self,
        id: AnnotationId,
        key: impl Into<String>,
        value: impl Into<String>,
    ) -> Result<(), DocError> {
        let key = key.into();
        if key.starts_with(RESERVED_PREFIX) {
            return Err(DocError::ReservedKey(key));
        }
        let ann = self.index.by_id.get_mut(&id).ok_or(DocError::NotFound(id))?;
        ann.attributes.insert(key, value.into());
        self.mark_dirty(id);
        Ok(())
    }

    pub fn remove_annotation(&mut self, id: AnnotationId) -> Result<Annotation, DocError> {
        let ann = self.index.remove(id)?;
        self.dirty.remove(&id);
        self.removed.insert(id);
        Ok(ann)
    }

    fn mark_dirty(&mut self, id: AnnotationId) {
        self.removed.remove(&id);
        self.dirty.insert(id);
    }

    /// Annotations added or modified since the last checkpoint.
    pub fn dirty(&self) -> &BTreeSet<AnnotationId> {
        &self.dirty
    }

    /// Annotations removed since the last checkpoint.
    pub fn removed(&self) -> &BTreeSet<AnnotationId> {
        &self.removed
    }

    pub fn clear_dirty(&mut self) {
        self.dirty.clear();
        self.removed.clear();
    }

    /// Annotations whose span stands in `rel` to `b`, optionally of one
    /// type, in canonical order.
    pub fn annotations_satisfying(
        &self,
        rel: AllenRelation,
        b: Interval,
        type_filter: Option<&str>,
    ) -> Vec<&Annotation> {
        self.index
            .tree
            .query(rel, &b)
            .into_iter()
            .map(|(_, id)| &self.index.by_id[id])
            .filter(|a| type_filter.is_none_or(|t| a.type_name == t))
            .collect()
    }

    /// Up to `k` annotations starting at or after `anchor`'s end (adjacent
    /// ones included), in canonical order. The anchor itself is skipped.
    pub fn next_annotations(
        &self,
        anchor: &Annotation,
        k: usize,
        type_filter: Option<&str>,
    ) -> Vec<&Annotation> {
        let mut out = Vec::with_capacity(k);
        if k == 0 {
            return out;
        }
        self.index.tree.scan_from(anchor.span.end, |_, id| {
            let ann = &self.index.by_id[id];
            if ann.id != anchor.id && type_filter.is_none_or(|t| ann.type_name == t) {
                out.push(ann);
            }
            out.len() < k
        });
        out
    }

    /// All annotations of `type_name` lying within `span`, canonical order.
    pub fn annotations_within(&self, span: Interval, type_name: &str) -> Vec<&Annotation> {
        let mut out = Vec::new();
        self.index.tree.scan_from(span.start, |key, id| {
            if key.start > span.end {
                return false;
            }
            let ann = &self.index.by_id[id];
            if key.end <= span.end && ann.type_name == type_name {
                out.push(ann);
            }
            true
        });
        out
    }

    /// Splits `sentence` around two concepts; see [`segment_spans`].
    pub fn segment_context(
        &self,
        c1: &Annotation,
        c2: &Annotation,
        sentence: &Annotation,
    ) -> Result<Segments, DocError> {
        if c1.id == c2.id {
            return Err(DocError::Overlap(c1.span, c2.span));
        }
        segment_spans(sentence.span, c1.span, c2.span)
    }

    /// Token annotations over the whole document (not inserted).
    pub fn tokenize(&self) -> Vec<NewAnnotation> {
        token_spans(&self.content)
            .into_iter()
            .map(|span| {
                NewAnnotation::new(TOKEN, span)
                    .with_value(self.text(span))
                    .with_provenance("builtin:tokenizer")
            })
            .collect()
    }

    /// Sentence annotations over the whole document (not inserted).
    pub fn split_sentences(&self, splitter: &SentenceSplitter) -> Vec<NewAnnotation> {
        splitter
            .split(&self.content)
            .into_iter()
            .map(|span| NewAnnotation::new(SENTENCE, span).with_provenance("builtin:sentences"))
            .collect()
    }

    /// Imports every line addressed to this document. Nothing is imported
    /// unless all of those lines are valid.
    pub fn import_external_annotations(&mut self, text: &str) -> Result<usize, DocError> {
        let records = parse_annotation_lines(text)?;
        let mine: Vec<_> = records.into_iter().filter(|r| r.doc_name == self.name).collect();
        self.import_records(mine)
    }

    pub fn import_records(&mut self, records: Vec<ExternalAnnotation>) -> Result<usize, DocError> {
        let bad: Vec<LineError> = records
            .iter()
            .filter_map(|r| {
                let check = self
                    .check_span(r.span)
                    .and_then(|_| Self::check_fields(&r.type_name, &r.attributes));
                check.err().map(|e| LineError {
                    line: r.line,
                    message: e.to_string(),
                })
            })
            .collect();
        if !bad.is_empty() {
            return Err(ImportError { lines: bad }.into());
        }
        let count = records.len();
        for r in records {
            self.add_annotation(r.into_new())?;
        }
        Ok(count)
    }

    /// Every annotation in the external line format.
    pub fn export_annotations(&self) -> String {
        export_annotations(&self.name, self.index.iter())
    }
}

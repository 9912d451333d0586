//! Stand-off annotation engine for clinical text.
//!
//! Documents keep their text immutable; annotations live beside it as typed
//! spans indexed by an interval tree that answers Allen-relation queries.
//! Everything can be marshalled to a relational store, and the pipeline
//! stages (sections, sentences, tokens, concepts, graphs) build on that.

pub mod attrs;
pub mod concepts;
pub mod doc;
pub mod graph;
pub mod inline;
pub mod interval;
pub mod sections;
pub mod store;
pub mod tree;

pub use attrs::Attributes;
pub use doc::{Annotation, AnnotationId, Corpus, DocError, DocId, Document, NewAnnotation};
pub use interval::{canonical_compare, relate, AllenRelation, Interval, IntervalError, RelationSet};
pub use store::{Store, StoreError};
pub use tree::{IntervalTree, TreeError};

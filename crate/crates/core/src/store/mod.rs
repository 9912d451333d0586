//! Relational persistence of corpora, documents, annotations, instances
//! and graphs.
//!
//! Documents are marshalled into rows and unmarshalled back into an
//! in-memory [`Document`] with a rebuilt interval index. After the first
//! marshal, [`Store::checkpoint`] writes only the annotations the document
//! reports as dirty. Every multi-row write runs in one transaction.
//!
//! The engine is SQLite behind a single connection; nothing beyond plain
//! DDL/DML and unique indexes is relied upon.

mod instances;
pub mod schema;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::Path;
use std::time::Duration;

use rusqlite::{params, Connection, ErrorCode, OpenFlags, OptionalExtension, Transaction, TransactionBehavior};
use thiserror::Error;

use crate::attrs::{self, Attributes};
use crate::doc::{Annotation, AnnotationId, DocError, DocId, Document};
use crate::interval::Interval;

pub use instances::InstanceKind;

const PROVENANCE_KEY: &str = "@provenance";
const SOURCE_KEY: &str = "source";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store unreachable: {0}")]
    Unreachable(String),
    #[error("table {table} exists with an incompatible layout ({detail}); migration required")]
    MigrationRequired { table: String, detail: String },
    #[error("{0} not found")]
    NotFound(String),
    #[error("document {0} has not been marshalled yet")]
    NotMarshalled(DocId),
    #[error("annotation {0} was changed in the store by another writer")]
    Conflict(AnnotationId),
    #[error("document {0} already exists in the store with different content")]
    DocumentConflict(DocId),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("foreign key violation: {0}")]
    ForeignKey(String),
    #[error("malformed data field: {0}")]
    Data(#[from] serde_json::Error),
    #[error(transparent)]
    Doc(#[from] DocError),
    #[error(transparent)]
    Sql(rusqlite::Error),
}

impl From<rusqlite::Error> for StoreError {
    fn from(e: rusqlite::Error) -> Self {
        match e.sqlite_error() {
            Some(err) if err.extended_code == rusqlite::ffi::SQLITE_CONSTRAINT_FOREIGNKEY => {
                StoreError::ForeignKey(e.to_string())
            }
            _ => StoreError::Sql(e),
        }
    }
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

/// Rows written by a marshal or checkpoint.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RowCounts {
    pub documents: usize,
    pub annotations: usize,
}

/// Where an annotation lives, as returned by value lookups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationRef {
    pub annotation_id: AnnotationId,
    pub document_id: DocId,
    pub span: Interval,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentSummary {
    pub id: DocId,
    pub name: String,
    pub size: usize,
}

pub struct Store {
    pub(crate) conn: Connection,
}

impl Store {
    /// Opens a store from a connection string: a file path, `sqlite:PATH`,
    /// or `sqlite::memory:`.
    pub fn connect(connection: &str) -> Result<Self> {
        let target = connection.trim();
        let path = match target.split_once(':') {
            Some(("sqlite", rest)) => rest.trim_start_matches("//"),
            Some((scheme, _)) if scheme.len() > 1 && !scheme.contains(['/', '\\']) => {
                return Err(StoreError::Unreachable(format!("unsupported engine {scheme:?}")));
            }
            _ => target,
        };
        if path.is_empty() {
            return Err(StoreError::Unreachable("empty connection string".into()));
        }
        if path == ":memory:" {
            Self::open_in_memory()
        } else {
            Self::open(path)
        }
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let flags = OpenFlags::SQLITE_OPEN_READ_WRITE
            | OpenFlags::SQLITE_OPEN_CREATE
            | OpenFlags::SQLITE_OPEN_NO_MUTEX;
        let conn = Connection::open_with_flags(path, flags)
            .map_err(|e| StoreError::Unreachable(format!("{}: {e}", path.display())))?;
        Self::configure(conn)
    }

    pub fn open_in_memory() -> Result<Self> {
        let conn =
            Connection::open_in_memory().map_err(|e| StoreError::Unreachable(e.to_string()))?;
        Self::configure(conn)
    }

    fn configure(conn: Connection) -> Result<Self> {
        conn.busy_timeout(Duration::from_secs(10))
            .map_err(|e| StoreError::Unreachable(e.to_string()))?;
        // probe: fails here for unreadable or non-database files
        conn.execute_batch("PRAGMA foreign_keys = ON; SELECT count(*) FROM sqlite_master;")
            .map_err(|e| StoreError::Unreachable(e.to_string()))?;
        Ok(Self { conn })
    }

    /// Raw connection, for inspection and tooling.
    pub fn connection(&self) -> &Connection {
        &self.conn
    }

    /// Creates missing tables and indexes; returns the tables created.
    /// Existing tables must have exactly the expected columns.
    pub fn init_schema(&mut self) -> Result<Vec<String>> {
        let tx = write_transaction(&mut self.conn)?;
        let mut created = Vec::new();
        for table in schema::TABLES {
            let columns = table_columns(&tx, table.name)?;
            if columns.is_empty() {
                tx.execute_batch(table.ddl)?;
                created.push(table.name.to_string());
            } else if columns != table.columns {
                return Err(StoreError::MigrationRequired {
                    table: table.name.into(),
                    detail: format!("found columns {columns:?}, expected {:?}", table.columns),
                });
            }
        }
        for ix in schema::INDEXES {
            tx.execute_batch(ix)?;
        }
        tx.commit()?;
        Ok(created)
    }

    /// DDL of every table and index currently in the store.
    pub fn dump_schema(&self) -> Result<String> {
        let mut stmt = self.conn.prepare(
            "SELECT sql FROM sqlite_master WHERE sql IS NOT NULL AND name NOT LIKE 'sqlite_%' ORDER BY type DESC, name",
        )?;
        let rows = stmt.query_map([], |r| r.get::<_, String>(0))?;
        let mut out = String::new();
        for sql in rows {
            out.push_str(&sql?);
            out.push_str(";\n");
        }
        Ok(out)
    }

    pub fn table_names(&self) -> Result<Vec<String>> {
        let mut stmt = self
            .conn
            .prepare("SELECT name FROM sqlite_master WHERE type = 'table' ORDER BY name")?;
        let names = stmt.query_map([], |r| r.get(0))?;
        Ok(names.collect::<rusqlite::Result<_>>()?)
    }

    /// Allocates a document row for new content and returns the in-memory
    /// document bound to it.
    pub fn create_document(&mut self, name: &str, content: &str) -> Result<Document> {
        self.conn.execute(
            "INSERT INTO documents (name, source, size, data, content) VALUES (?1, '', ?2, '{}', ?3)",
            params![name, content.chars().count() as i64, content],
        )?;
        let id = DocId(self.conn.last_insert_rowid());
        let mut doc = Document::new(id, name, content);
        doc.sync.document_persisted = true;
        Ok(doc)
    }

    pub fn document_id(&self, name: &str) -> Result<Option<DocId>> {
        Ok(self
            .conn
            .query_row("SELECT id FROM documents WHERE name = ?1", [name], |r| r.get(0))
            .optional()?
            .map(DocId))
    }

    pub fn documents(&self) -> Result<Vec<DocumentSummary>> {
        let mut stmt = self
            .conn
            .prepare("SELECT id, name, size FROM documents ORDER BY id")?;
        let rows = stmt.query_map([], |r| {
            Ok(DocumentSummary {
                id: DocId(r.get(0)?),
                name: r.get(1)?,
                size: r.get::<_, i64>(2)? as usize,
            })
        })?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    /// Writes the document row if the store lacks it, then every dirty
    /// annotation. Marshalling an unchanged document writes nothing.
    pub fn marshal_document(&mut self, doc: &mut Document) -> Result<RowCounts> {
        let tx = write_transaction(&mut self.conn)?;
        let mut counts = RowCounts::default();
        if !doc.sync.document_persisted {
            let existing: Option<(String, String)> = tx
                .query_row(
                    "SELECT name, content FROM documents WHERE id = ?1",
                    [doc.id().0],
                    |r| Ok((r.get(0)?, r.get(1)?)),
                )
                .optional()?;
            match existing {
                Some((name, content)) if name == doc.name() && content == doc.content() => {}
                Some(_) => return Err(StoreError::DocumentConflict(doc.id())),
                None => {
                    let mut data = doc.metadata.clone();
                    let source = data.remove(SOURCE_KEY).unwrap_or_default();
                    tx.execute(
                        "INSERT INTO documents (id, name, source, size, data, content) VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
                        params![
                            doc.id().0,
                            doc.name(),
                            source,
                            doc.char_len() as i64,
                            attrs::serialize(&data),
                            doc.content()
                        ],
                    )?;
                    counts.documents = 1;
                }
            }
        }
        let (written, fingerprints) = write_dirty(&tx, doc)?;
        tx.commit()?;
        doc.sync.document_persisted = true;
        apply_fingerprints(doc, fingerprints);
        counts.annotations = written;
        Ok(counts)
    }

    /// Writes only the annotations changed since the last checkpoint.
    /// On any error nothing is written and the dirty set is kept.
    pub fn checkpoint(&mut self, doc: &mut Document) -> Result<usize> {
        if !doc.sync.document_persisted {
            return Err(StoreError::NotMarshalled(doc.id()));
        }
        let tx = write_transaction(&mut self.conn)?;
        let (written, fingerprints) = write_dirty(&tx, doc)?;
        tx.commit()?;
        apply_fingerprints(doc, fingerprints);
        Ok(written)
    }

    /// Checkpoints `doc` and, in the same transaction, merges `entries`
    /// into the stored document metadata (and into `doc.metadata`).
    pub fn checkpoint_with_metadata(&mut self, doc: &mut Document, entries: &[(&str, &str)]) -> Result<usize> {
        if !doc.sync.document_persisted {
            return Err(StoreError::NotMarshalled(doc.id()));
        }
        let tx = write_transaction(&mut self.conn)?;
        let (written, fingerprints) = write_dirty(&tx, doc)?;
        let data: String = tx.query_row("SELECT data FROM documents WHERE id = ?1", [doc.id().0], |r| r.get(0))?;
        let mut data = attrs::deserialize(&data)?;
        for (k, v) in entries {
            data.insert(k.to_string(), v.to_string());
        }
        tx.execute(
            "UPDATE documents SET data = ?2 WHERE id = ?1",
            params![doc.id().0, attrs::serialize(&data)],
        )?;
        tx.commit()?;
        apply_fingerprints(doc, fingerprints);
        for (k, v) in entries {
            doc.metadata.insert(k.to_string(), v.to_string());
        }
        Ok(written)
    }

    /// Stored metadata of a document, `source` included.
    pub fn document_metadata(&self, id: DocId) -> Result<Attributes> {
        let row: Option<(String, String)> = self
            .conn
            .query_row("SELECT source, data FROM documents WHERE id = ?1", [id.0], |r| {
                Ok((r.get(0)?, r.get(1)?))
            })
            .optional()?;
        let (source, data) = row.ok_or_else(|| StoreError::NotFound(format!("document {id}")))?;
        let mut meta = attrs::deserialize(&data)?;
        if !source.is_empty() {
            meta.insert(SOURCE_KEY.into(), source);
        }
        Ok(meta)
    }

    /// Number of stored annotations of one type in a document.
    pub fn count_annotations(&self, doc: DocId, type_name: &str) -> Result<usize> {
        let n: i64 = self.conn.query_row(
            "SELECT count(*) FROM annotations a JOIN annotation_types t ON t.id = a.type_id
             WHERE a.document_id = ?1 AND t.name = ?2",
            params![doc.0, type_name],
            |r| r.get(0),
        )?;
        Ok(n as usize)
    }

    pub fn unmarshal_document(&self, id: DocId) -> Result<Document> {
        let row: Option<(String, String, String, String)> = self
            .conn
            .query_row(
                "SELECT name, source, data, content FROM documents WHERE id = ?1",
                [id.0],
                |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?)),
            )
            .optional()?;
        let (name, source, data, content) =
            row.ok_or_else(|| StoreError::NotFound(format!("document {id}")))?;
        let mut doc = Document::new(id, name, content);
        doc.metadata = attrs::deserialize(&data)?;
        if !source.is_empty() {
            doc.metadata.insert(SOURCE_KEY.into(), source);
        }
        let mut stmt = self.conn.prepare_cached(
            "SELECT a.id, a.\"start\", a.\"end\", t.name, a.value, a.data
             FROM annotations a JOIN annotation_types t ON t.id = a.type_id
             WHERE a.document_id = ?1",
        )?;
        let rows = stmt.query_map([id.0], |r| {
            Ok((
                r.get::<_, i64>(0)?,
                r.get::<_, i64>(1)?,
                r.get::<_, i64>(2)?,
                r.get::<_, String>(3)?,
                r.get::<_, String>(4)?,
                r.get::<_, String>(5)?,
            ))
        })?;
        let mut fingerprints = Vec::new();
        for row in rows {
            let (ann_id, start, end, type_name, value, data) = row?;
            let span = Interval::new(start as usize, end as usize)
                .map_err(|e| StoreError::Validation(e.to_string()))?;
            let fp = fingerprint(id, span, &type_name, &value, &data);
            let mut attributes = attrs::deserialize(&data)?;
            let provenance = attributes.remove(PROVENANCE_KEY).unwrap_or_default();
            let ann = Annotation {
                id: AnnotationId(ann_id),
                doc_id: id,
                span,
                type_name,
                value,
                attributes,
                provenance,
            };
            fingerprints.push((ann.id, fp));
            doc.insert_annotation(ann)?;
        }
        doc.clear_dirty();
        doc.sync.document_persisted = true;
        doc.sync.rows = fingerprints.into_iter().collect();
        Ok(doc)
    }

    pub fn unmarshal_by_name(&self, name: &str) -> Result<Document> {
        let id = self
            .document_id(name)?
            .ok_or_else(|| StoreError::NotFound(format!("document {name:?}")))?;
        self.unmarshal_document(id)
    }

    /// Annotations of `type_name` whose value is exactly `value`.
    pub fn query_by_value(&self, type_name: &str, value: &str) -> Result<Vec<AnnotationRef>> {
        let mut stmt = self.conn.prepare_cached(
            "SELECT a.id, a.document_id, a.\"start\", a.\"end\"
             FROM annotations a
             WHERE a.type_id = (SELECT id FROM annotation_types WHERE name = ?1) AND a.value = ?2
             ORDER BY a.document_id, a.\"start\", a.\"end\", a.id",
        )?;
        let rows = stmt.query_map(params![type_name, value], |r| {
            Ok(AnnotationRef {
                annotation_id: AnnotationId(r.get(0)?),
                document_id: DocId(r.get(1)?),
                span: Interval {
                    start: r.get::<_, i64>(2)? as usize,
                    end: r.get::<_, i64>(3)? as usize,
                },
            })
        })?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn create_corpus(&mut self, name: &str, description: &str, metadata: &Attributes) -> Result<i64> {
        self.conn.execute(
            "INSERT INTO corpora (name, description, data) VALUES (?1, ?2, ?3)",
            params![name, description, attrs::serialize(metadata)],
        )?;
        Ok(self.conn.last_insert_rowid())
    }

    pub fn corpus_id(&self, name: &str) -> Result<Option<i64>> {
        Ok(self
            .conn
            .query_row("SELECT id FROM corpora WHERE name = ?1", [name], |r| r.get(0))
            .optional()?)
    }

    /// Adds a document to a corpus; a no-op when already a member.
    pub fn add_to_corpus(&mut self, corpus_id: i64, doc: DocId) -> Result<()> {
        self.conn.execute(
            "INSERT OR IGNORE INTO corpora_documents (corpus_id, document_id) VALUES (?1, ?2)",
            params![corpus_id, doc.0],
        )?;
        Ok(())
    }

    pub fn corpus_documents(&self, corpus_id: i64) -> Result<Vec<DocId>> {
        let mut stmt = self.conn.prepare(
            "SELECT document_id FROM corpora_documents WHERE corpus_id = ?1 ORDER BY document_id",
        )?;
        let ids = stmt.query_map([corpus_id], |r| r.get(0).map(DocId))?;
        Ok(ids.collect::<rusqlite::Result<_>>()?)
    }

    pub(crate) fn row_exists(&self, sql: &str, id: i64) -> Result<bool> {
        Ok(self.conn.query_row(sql, [id], |_| Ok(())).optional()?.is_some())
    }
}

fn table_columns(conn: &Connection, table: &str) -> Result<Vec<String>> {
    let mut stmt = conn.prepare("SELECT name FROM pragma_table_info(?1) ORDER BY cid")?;
    let names = stmt.query_map([table], |r| r.get(0))?;
    Ok(names.collect::<rusqlite::Result<_>>()?)
}

fn fingerprint(doc: DocId, span: Interval, type_name: &str, value: &str, data: &str) -> u64 {
    let mut h = DefaultHasher::new();
    (doc.0, span.start, span.end, type_name, value, data).hash(&mut h);
    h.finish()
}

fn data_field(ann: &Annotation) -> String {
    if ann.provenance.is_empty() {
        return attrs::serialize(&ann.attributes);
    }
    let mut map = ann.attributes.clone();
    map.insert(PROVENANCE_KEY.into(), ann.provenance.clone());
    attrs::serialize(&map)
}

fn type_id(tx: &Transaction<'_>, name: &str) -> Result<i64> {
    let found: Option<i64> = tx
        .prepare_cached("SELECT id FROM annotation_types WHERE name = ?1")?
        .query_row([name], |r| r.get(0))
        .optional()?;
    if let Some(id) = found {
        return Ok(id);
    }
    tx.prepare_cached("INSERT INTO annotation_types (name, description) VALUES (?1, '')")?
        .execute([name])?;
    Ok(tx.last_insert_rowid())
}

fn stored_fingerprint(tx: &Transaction<'_>, id: AnnotationId) -> Result<Option<u64>> {
    let row = tx
        .prepare_cached(
            "SELECT a.document_id, a.\"start\", a.\"end\", t.name, a.value, a.data
             FROM annotations a JOIN annotation_types t ON t.id = a.type_id WHERE a.id = ?1",
        )?
        .query_row([id.0], |r| {
            Ok((
                r.get::<_, i64>(0)?,
                r.get::<_, i64>(1)?,
                r.get::<_, i64>(2)?,
                r.get::<_, String>(3)?,
                r.get::<_, String>(4)?,
                r.get::<_, String>(5)?,
            ))
        })
        .optional()?;
    Ok(row.map(|(doc, s, e, ty, value, data)| {
        let span = Interval {
            start: s as usize,
            end: e as usize,
        };
        fingerprint(DocId(doc), span, &ty, &value, &data)
    }))
}

enum Fingerprint {
    Set(AnnotationId, u64),
    Gone(AnnotationId),
}

/// Writes dirty and removed annotations inside `tx`. Returns the number of
/// row writes and the fingerprints to record once the transaction commits.
fn write_dirty(tx: &Transaction<'_>, doc: &Document) -> Result<(usize, Vec<Fingerprint>)> {
    let mut written = 0;
    let mut out = Vec::new();
    for &id in doc.dirty() {
        let ann = doc.annotation(id).ok_or(DocError::NotFound(id))?;
        let data = data_field(ann);
        let known = doc.sync.rows.get(&id).copied();
        let current = stored_fingerprint(tx, id)?;
        if current != known {
            return Err(StoreError::Conflict(id));
        }
        let ty = type_id(tx, &ann.type_name)?;
        if known.is_some() {
            tx.prepare_cached(
                "UPDATE annotations SET \"start\" = ?2, \"end\" = ?3, type_id = ?4, value = ?5, data = ?6 WHERE id = ?1",
            )?
            .execute(params![id.0, ann.span.start as i64, ann.span.end as i64, ty, ann.value, data])?;
        } else {
            tx.prepare_cached(
                "INSERT INTO annotations (id, document_id, \"start\", \"end\", type_id, value, data) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
            )?
            .execute(params![
                id.0,
                doc.id().0,
                ann.span.start as i64,
                ann.span.end as i64,
                ty,
                ann.value,
                data
            ])?;
        }
        written += 1;
        out.push(Fingerprint::Set(
            id,
            fingerprint(doc.id(), ann.span, &ann.type_name, &ann.value, &data),
        ));
    }
    for &id in doc.removed() {
        let Some(known) = doc.sync.rows.get(&id).copied() else {
            continue;
        };
        if stored_fingerprint(tx, id)? != Some(known) {
            return Err(StoreError::Conflict(id));
        }
        tx.prepare_cached("DELETE FROM annotations WHERE id = ?1")?
            .execute([id.0])?;
        written += 1;
        out.push(Fingerprint::Gone(id));
    }
    Ok((written, out))
}

fn apply_fingerprints(doc: &mut Document, fingerprints: Vec<Fingerprint>) {
    for f in fingerprints {
        match f {
            Fingerprint::Set(id, fp) => {
                doc.sync.rows.insert(id, fp);
            }
            Fingerprint::Gone(id) => {
                doc.sync.rows.remove(&id);
            }
        }
    }
    doc.clear_dirty();
}

/// Write transactions take the write lock up front, so concurrent writers
/// wait on the busy timeout instead of failing a lock upgrade.
pub(crate) fn write_transaction(conn: &mut Connection) -> Result<Transaction<'_>> {
    Ok(conn.transaction_with_behavior(TransactionBehavior::Immediate)?)
}

/// Whether an error is the engine reporting a locked or busy database.
pub fn is_busy(err: &StoreError) -> bool {
    matches!(err, StoreError::Sql(e) if matches!(e.sqlite_error_code(), Some(ErrorCode::DatabaseBusy | ErrorCode::DatabaseLocked)))
}

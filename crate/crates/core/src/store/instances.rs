//! Task instances, instance sets and ground-truth labels.

use std::fmt;
use std::str::FromStr;

use rusqlite::{params, OptionalExtension};

use super::{write_transaction, Result, Store, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceKind {
    /// Exactly one document.
    Document,
    /// Exactly two annotations.
    AnnotationPair,
    /// One or more documents.
    DocumentSet,
}

impl InstanceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InstanceKind::Document => "document",
            InstanceKind::AnnotationPair => "annotation_pair",
            InstanceKind::DocumentSet => "document_set",
        }
    }

    fn content_kind(self) -> &'static str {
        match self {
            InstanceKind::AnnotationPair => "annotation",
            _ => "document",
        }
    }

    fn check_arity(self, n: usize) -> Result<()> {
        let ok = match self {
            InstanceKind::Document => n == 1,
            InstanceKind::AnnotationPair => n == 2,
            InstanceKind::DocumentSet => n >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(StoreError::Validation(format!(
                "{} instance cannot hold {n} content ids",
                self.as_str()
            )))
        }
    }
}

impl fmt::Display for InstanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InstanceKind {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "document" => Ok(InstanceKind::Document),
            "annotation_pair" => Ok(InstanceKind::AnnotationPair),
            "document_set" => Ok(InstanceKind::DocumentSet),
            _ => Err(StoreError::Validation(format!("unknown instance kind {s:?}"))),
        }
    }
}

impl Store {
    pub fn create_instance(&mut self, corpus_id: i64, kind: InstanceKind, content_ids: &[i64]) -> Result<i64> {
        kind.check_arity(content_ids.len())?;
        let mut unique = content_ids.to_vec();
        unique.sort_unstable();
        unique.dedup();
        if unique.len() != content_ids.len() {
            return Err(StoreError::Validation("repeated content id".into()));
        }
        if !self.row_exists("SELECT 1 FROM corpora WHERE id = ?1", corpus_id)? {
            return Err(StoreError::ForeignKey(format!("corpus {corpus_id} does not exist")));
        }
        let lookup = match kind.content_kind() {
            "annotation" => "SELECT 1 FROM annotations WHERE id = ?1",
            _ => "SELECT 1 FROM documents WHERE id = ?1",
        };
        for &id in content_ids {
            if !self.row_exists(lookup, id)? {
                return Err(StoreError::ForeignKey(format!(
                    "{} {id} does not exist",
                    kind.content_kind()
                )));
            }
        }
        let tx = write_transaction(&mut self.conn)?;
        tx.execute(
            "INSERT INTO instances (corpus_id, kind, data) VALUES (?1, ?2, '{}')",
            params![corpus_id, kind.as_str()],
        )?;
        let instance = tx.last_insert_rowid();
        for &id in content_ids {
            tx.execute(
                "INSERT INTO instances_content (instance_id, content_kind, content_id) VALUES (?1, ?2, ?3)",
                params![instance, kind.content_kind(), id],
            )?;
        }
        tx.commit()?;
        Ok(instance)
    }

    pub fn instance_content(&self, instance_id: i64) -> Result<(InstanceKind, Vec<i64>)> {
        let kind: Option<String> = self
            .conn
            .query_row("SELECT kind FROM instances WHERE id = ?1", [instance_id], |r| r.get(0))
            .optional()?;
        let kind: InstanceKind = kind
            .ok_or_else(|| StoreError::NotFound(format!("instance {instance_id}")))?
            .parse()?;
        let mut stmt = self.conn.prepare(
            "SELECT content_id FROM instances_content WHERE instance_id = ?1 ORDER BY content_id",
        )?;
        let ids = stmt.query_map([instance_id], |r| r.get(0))?;
        Ok((kind, ids.collect::<rusqlite::Result<_>>()?))
    }

    pub fn create_instance_set(
        &mut self,
        corpus_id: i64,
        name: &str,
        purpose: &str,
        instance_ids: &[i64],
    ) -> Result<i64> {
        let tx = write_transaction(&mut self.conn)?;
        tx.execute(
            "INSERT INTO instance_sets (corpus_id, name, purpose, data) VALUES (?1, ?2, ?3, '{}')",
            params![corpus_id, name, purpose],
        )?;
        let set = tx.last_insert_rowid();
        for &id in instance_ids {
            tx.execute(
                "INSERT OR IGNORE INTO instance_set_members (instance_set_id, instance_id) VALUES (?1, ?2)",
                params![set, id],
            )?;
        }
        tx.commit()?;
        Ok(set)
    }

    pub fn instance_set_members(&self, set_id: i64) -> Result<Vec<i64>> {
        let mut stmt = self.conn.prepare(
            "SELECT instance_id FROM instance_set_members WHERE instance_set_id = ?1 ORDER BY instance_id",
        )?;
        let ids = stmt.query_map([set_id], |r| r.get(0))?;
        Ok(ids.collect::<rusqlite::Result<_>>()?)
    }

    /// Instance sets of a corpus with the given purpose (e.g. "train").
    pub fn instance_sets(&self, corpus_id: i64, purpose: &str) -> Result<Vec<(i64, String)>> {
        let mut stmt = self.conn.prepare(
            "SELECT id, name FROM instance_sets WHERE corpus_id = ?1 AND purpose = ?2 ORDER BY id",
        )?;
        let rows = stmt.query_map(params![corpus_id, purpose], |r| Ok((r.get(0)?, r.get(1)?)))?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    /// Records the gold label for `(instance, task)`; a later call replaces it.
    pub fn set_groundtruth(&mut self, instance_id: i64, task: &str, label: &str) -> Result<()> {
        self.conn.execute(
            "INSERT INTO groundtruth (instance_id, task, label, data) VALUES (?1, ?2, ?3, '{}')
             ON CONFLICT (instance_id, task) DO UPDATE SET label = excluded.label",
            params![instance_id, task, label],
        )?;
        Ok(())
    }

    pub fn groundtruth(&self, instance_id: i64, task: &str) -> Result<Option<String>> {
        Ok(self
            .conn
            .query_row(
                "SELECT label FROM groundtruth WHERE instance_id = ?1 AND task = ?2",
                params![instance_id, task],
                |r| r.get(0),
            )
            .optional()?)
    }
}

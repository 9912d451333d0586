//! Graph and mining-result persistence.
//!
//! A graph is one `graphs` row plus one `linkage_graph` row per edge. Node
//! labels also go into the row's data map (`node.<id>`), so isolated nodes
//! survive a round trip.

use rusqlite::{params, OptionalExtension, Transaction};

use crate::attrs::{self, Attributes};
use crate::store::{write_transaction, Result, Store, StoreError};

use super::matching::{find_subgraph_occurrences, SubgraphMapping};
use super::mining::FrequentPattern;
use super::LabeledGraph;

fn insert_graph(tx: &Transaction<'_>, g: &LabeledGraph) -> Result<i64> {
    let mut data = Attributes::new();
    data.insert("directed".into(), g.directed.to_string());
    for (i, l) in g.labels().iter().enumerate() {
        data.insert(format!("node.{i}"), l.clone());
    }
    tx.execute(
        "INSERT INTO graphs (name, type, data) VALUES (?1, ?2, ?3)",
        params![g.name, g.graph_type, attrs::serialize(&data)],
    )?;
    let id = tx.last_insert_rowid();
    let mut stmt = tx.prepare(
        "INSERT INTO linkage_graph (graph_id, node1, node2, edge_label, node1_label, node2_label)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
    )?;
    for e in g.edges() {
        stmt.execute(params![
            id,
            e.src as i64,
            e.dst as i64,
            e.label,
            g.label(e.src),
            g.label(e.dst)
        ])?;
    }
    Ok(id)
}

impl Store {
    /// Stores `g` and sets its id to the new row id.
    pub fn persist_graph(&mut self, g: &mut LabeledGraph) -> Result<i64> {
        let tx = write_transaction(&mut self.conn)?;
        let id = insert_graph(&tx, g)?;
        tx.commit()?;
        g.id = id;
        Ok(id)
    }

    pub fn load_graph(&self, id: i64) -> Result<LabeledGraph> {
        let row: Option<(String, String, String)> = self
            .conn
            .query_row("SELECT name, type, data FROM graphs WHERE id = ?1", [id], |r| {
                Ok((r.get(0)?, r.get(1)?, r.get(2)?))
            })
            .optional()?;
        let (name, graph_type, data) = row.ok_or_else(|| StoreError::NotFound(format!("graph {id}")))?;
        let data = attrs::deserialize(&data)?;
        let mut stmt = self.conn.prepare(
            "SELECT node1, node2, edge_label, node1_label, node2_label FROM linkage_graph
             WHERE graph_id = ?1 ORDER BY rowid",
        )?;
        let edges = stmt
            .query_map([id], |r| {
                Ok((
                    r.get::<_, i64>(0)? as usize,
                    r.get::<_, i64>(1)? as usize,
                    r.get::<_, String>(2)?,
                    r.get::<_, String>(3)?,
                    r.get::<_, String>(4)?,
                ))
            })?
            .collect::<rusqlite::Result<Vec<_>>>()?;

        let mut labels: Vec<Option<String>> = Vec::new();
        let mut put = |node: usize, label: &str| {
            if labels.len() <= node {
                labels.resize(node + 1, None);
            }
            labels[node].get_or_insert_with(|| label.to_string());
        };
        for (key, label) in &data {
            if let Some(node) = key.strip_prefix("node.").and_then(|n| n.parse().ok()) {
                put(node, label);
            }
        }
        for (s, d, _, sl, dl) in &edges {
            put(*s, sl);
            put(*d, dl);
        }
        let directed = data.get("directed").is_none_or(|d| d == "true");
        let mut g = LabeledGraph::new(name, graph_type, directed);
        g.id = id;
        for (i, l) in labels.into_iter().enumerate() {
            let l = l.ok_or_else(|| StoreError::Validation(format!("graph {id} lacks a label for node {i}")))?;
            g.add_node(l);
        }
        for (s, d, label, _, _) in edges {
            g.add_edge(s, d, label)
                .map_err(|e| StoreError::Validation(format!("graph {id}: {e}")))?;
        }
        Ok(g)
    }

    /// Stores each pattern as a `subgraph` graph with a `sig_subgraph` row,
    /// and every embedding into its supporting graphs as `lg_sigsub` rows.
    /// `graphs` must be the slice that was mined, already persisted.
    /// Returns the `sig_subgraph` ids.
    pub fn persist_mining_results(&mut self, patterns: &[FrequentPattern], graphs: &[LabeledGraph]) -> Result<Vec<i64>> {
        let tx = write_transaction(&mut self.conn)?;
        let mut ids = Vec::with_capacity(patterns.len());
        for p in patterns {
            let graph_id = insert_graph(&tx, &p.pattern)?;
            let mut data = Attributes::new();
            data.insert("code".into(), p.code.to_json());
            tx.execute(
                "INSERT INTO sig_subgraph (subgraph_graph_id, support, data) VALUES (?1, ?2, ?3)",
                params![graph_id, p.support as i64, attrs::serialize(&data)],
            )?;
            let sig = tx.last_insert_rowid();
            for &gi in p.members() {
                let g = graphs
                    .get(gi)
                    .ok_or_else(|| StoreError::Validation(format!("pattern refers to graph #{gi} outside the mined set")))?;
                for m in find_subgraph_occurrences(g, &p.pattern) {
                    tx.execute(
                        "INSERT INTO lg_sigsub (graph_id, sig_subgraph_id, node_mapping) VALUES (?1, ?2, ?3)",
                        params![g.id, sig, serde_json::to_string(&m.node_map)?],
                    )?;
                }
            }
            ids.push(sig);
        }
        tx.commit()?;
        Ok(ids)
    }

    /// The pattern graph and support of a `sig_subgraph` row.
    pub fn load_sig_subgraph(&self, sig_id: i64) -> Result<(LabeledGraph, usize)> {
        let row: Option<(i64, i64)> = self
            .conn
            .query_row(
                "SELECT subgraph_graph_id, support FROM sig_subgraph WHERE id = ?1",
                [sig_id],
                |r| Ok((r.get(0)?, r.get(1)?)),
            )
            .optional()?;
        let (graph_id, support) = row.ok_or_else(|| StoreError::NotFound(format!("sig_subgraph {sig_id}")))?;
        Ok((self.load_graph(graph_id)?, support as usize))
    }

    pub fn load_mappings(&self, sig_id: i64) -> Result<Vec<SubgraphMapping>> {
        let subgraph_id: i64 = self
            .conn
            .query_row("SELECT subgraph_graph_id FROM sig_subgraph WHERE id = ?1", [sig_id], |r| r.get(0))
            .optional()?
            .ok_or_else(|| StoreError::NotFound(format!("sig_subgraph {sig_id}")))?;
        let mut stmt = self.conn.prepare(
            "SELECT graph_id, node_mapping FROM lg_sigsub WHERE sig_subgraph_id = ?1 ORDER BY rowid",
        )?;
        let rows = stmt
            .query_map([sig_id], |r| Ok((r.get::<_, i64>(0)?, r.get::<_, String>(1)?)))?
            .collect::<rusqlite::Result<Vec<_>>>()?;
        rows.into_iter()
            .map(|(graph_id, mapping)| {
                Ok(SubgraphMapping {
                    graph_id,
                    subgraph_id,
                    node_map: serde_json::from_str(&mapping)?,
                })
            })
            .collect()
    }

    /// Ids of stored graphs of one type, ascending.
    pub fn graph_ids(&self, graph_type: &str) -> Result<Vec<i64>> {
        let mut stmt = self.conn.prepare("SELECT id FROM graphs WHERE type = ?1 ORDER BY id")?;
        let ids = stmt.query_map([graph_type], |r| r.get(0))?;
        Ok(ids.collect::<rusqlite::Result<_>>()?)
    }
}

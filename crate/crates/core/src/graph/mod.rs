//! Labeled sentence graphs: construction from dependency parses, subgraph
//! matching, frequent subgraph mining and persistence.

mod matching;
mod mining;
mod persist;

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::doc::exchange::{escape, unescape};
use crate::doc::{Annotation, Document, TOKEN};
use crate::interval::Interval;

pub use matching::{canonical_code, find_subgraph_occurrences, is_isomorphic, occurs_in, CanonicalCode, SubgraphMapping};
pub use mining::{mine_frequent_subgraphs, FrequentPattern, DEFAULT_MAX_NODES};

pub const DEPENDENCY: &str = "dependency";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("node {0} does not exist")]
    MissingNode(usize),
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub label: String,
}

/// A graph with labeled nodes `0..n` and labeled edges. Undirected graphs
/// store each edge with `src < dst`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledGraph {
    pub id: i64,
    pub name: String,
    pub graph_type: String,
    pub directed: bool,
    labels: Vec<String>,
    edges: Vec<Edge>,
}

impl LabeledGraph {
    pub fn new(name: impl Into<String>, graph_type: impl Into<String>, directed: bool) -> Self {
        Self {
            id: 0,
            name: name.into(),
            graph_type: graph_type.into(),
            directed,
            labels: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn add_node(&mut self, label: impl Into<String>) -> usize {
        self.labels.push(label.into());
        self.labels.len() - 1
    }

    /// Adds an edge; returns `false` if the identical edge already exists.
    pub fn add_edge(&mut self, src: usize, dst: usize, label: impl Into<String>) -> Result<bool, GraphError> {
        for n in [src, dst] {
            if n >= self.labels.len() {
                return Err(GraphError::MissingNode(n));
            }
        }
        if src == dst {
            return Err(GraphError::SelfLoop(src));
        }
        let (src, dst) = if self.directed { (src, dst) } else { (src.min(dst), src.max(dst)) };
        let edge = Edge {
            src,
            dst,
            label: label.into(),
        };
        if self.edges.contains(&edge) {
            return Ok(false);
        }
        self.edges.push(edge);
        Ok(true)
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> &str {
        &self.labels[node]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Whether an edge `src -> dst` with `label` exists (either direction
    /// for undirected graphs).
    pub fn has_edge(&self, src: usize, dst: usize, label: &str) -> bool {
        self.edges.iter().any(|e| {
            e.label == label && ((e.src == src && e.dst == dst) || (!self.directed && e.src == dst && e.dst == src))
        })
    }

    /// Whether the nodes and edges form one connected component.
    pub fn is_connected(&self) -> bool {
        let n = self.labels.len();
        if n == 0 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(x) = stack.pop() {
            for e in &self.edges {
                let other = if e.src == x {
                    e.dst
                } else if e.dst == x {
                    e.src
                } else {
                    continue;
                };
                if !seen[other] {
                    seen[other] = true;
                    stack.push(other);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Parses the graph interchange format: a `graph` header line per graph,
/// followed by `n` node lines and `e` edge lines. Node ids are renumbered
/// densely in order of appearance.
pub fn parse_graphs(text: &str) -> Result<Vec<LabeledGraph>, GraphError> {
    let mut graphs: Vec<LabeledGraph> = Vec::new();
    let mut ids: Vec<i64> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let err = |message: String| GraphError::Parse { line, message };
        let fields: Vec<String> = raw.split('\t').map(unescape).collect::<Result<_, _>>().map_err(err)?;
        let int = |s: &str| s.parse::<i64>().map_err(|_| err(format!("expected an integer, got {s:?}")));
        match fields[0].as_str() {
            "graph" => {
                if !(4..=5).contains(&fields.len()) {
                    return Err(err("graph line needs id, name and type".into()));
                }
                let directed = match fields.get(4).map(String::as_str) {
                    None | Some("directed") => true,
                    Some("undirected") => false,
                    Some(other) => return Err(err(format!("unknown direction {other:?}"))),
                };
                let mut g = LabeledGraph::new(fields[2].clone(), fields[3].clone(), directed);
                g.id = int(&fields[1])?;
                graphs.push(g);
                ids.clear();
            }
            "n" | "e" if graphs.is_empty() => return Err(err("node or edge before any graph line".into())),
            "n" => {
                if fields.len() != 3 {
                    return Err(err("node line needs id and label".into()));
                }
                let id = int(&fields[1])?;
                if ids.contains(&id) {
                    return Err(err(format!("duplicate node {id}")));
                }
                ids.push(id);
                graphs.last_mut().expect("checked above").add_node(fields[2].clone());
            }
            "e" => {
                if fields.len() != 4 {
                    return Err(err("edge line needs source, target and label".into()));
                }
                let node = |s: &str| {
                    let id = int(s)?;
                    ids.iter().position(|&x| x == id).ok_or_else(|| err(format!("unknown node {id}")))
                };
                let (src, dst) = (node(&fields[1])?, node(&fields[2])?);
                graphs
                    .last_mut()
                    .expect("checked above")
                    .add_edge(src, dst, fields[3].clone())
                    .map_err(|e| err(e.to_string()))?;
            }
            other => return Err(err(format!("unknown record type {other:?}"))),
        }
    }
    Ok(graphs)
}

pub fn write_graphs<'a>(graphs: impl IntoIterator<Item = &'a LabeledGraph>) -> String {
    let mut out = String::new();
    for g in graphs {
        let direction = if g.directed { "directed" } else { "undirected" };
        let _ = writeln!(
            out,
            "graph\t{}\t{}\t{}\t{direction}",
            g.id,
            escape(&g.name, false),
            escape(&g.graph_type, false)
        );
        for (i, l) in g.labels.iter().enumerate() {
            let _ = writeln!(out, "n\t{i}\t{}", escape(l, false));
        }
        for e in &g.edges {
            let _ = writeln!(out, "e\t{}\t{}\t{}", e.src, e.dst, escape(&e.label, false));
        }
    }
    out
}

/// Result of [`build_dependency_graph`].
#[derive(Debug, Clone)]
pub struct SentenceGraph {
    pub graph: LabeledGraph,
    /// Node of each sentence token, in token order.
    pub token_nodes: Vec<usize>,
    /// Dependencies that could not be resolved to sentence tokens.
    pub skipped: usize,
}

fn attr_usize(ann: &Annotation, key: &str) -> Option<usize> {
    ann.attributes.get(key)?.parse().ok()
}

/// Dependency annotations store head and dependent token spans in the
/// `head_start`/`head_end`/`dependent_start`/`dependent_end` attributes
/// and the relation label as value.
fn dependency_ends(dep: &Annotation) -> Option<(Interval, Interval)> {
    let head = Interval::new(attr_usize(dep, "head_start")?, attr_usize(dep, "head_end")?).ok()?;
    let dependent = Interval::new(attr_usize(dep, "dependent_start")?, attr_usize(dep, "dependent_end")?).ok()?;
    Some((head, dependent))
}

/// Builds the concept graph of one sentence. Each concept covering at
/// least one sentence token becomes a node labeled with its value and
/// absorbs the tokens it covers (a token under several concepts joins the
/// longest, then the first in canonical order). Remaining tokens become
/// nodes labeled with their lowercased text. Dependencies become
/// head-to-dependent edges between the resulting nodes; merged self-loops
/// and duplicates disappear.
pub fn build_dependency_graph(
    doc: &Document,
    sentence: &Annotation,
    dependencies: &[&Annotation],
    concepts: &[&Annotation],
) -> SentenceGraph {
    let tokens: Vec<&Annotation> = doc.annotations_within(sentence.span, TOKEN);
    let mut concepts: Vec<&Annotation> = concepts
        .iter()
        .copied()
        .filter(|c| tokens.iter().any(|t| c.span.covers(&t.span)))
        .collect();
    concepts.sort_by(|a, b| a.span.cmp(&b.span).then(a.id.cmp(&b.id)));

    // owner of each token: Some(concept index) or None
    let owner: Vec<Option<usize>> = tokens
        .iter()
        .map(|t| {
            concepts
                .iter()
                .enumerate()
                .filter(|(_, c)| c.span.covers(&t.span))
                .max_by(|(i, a), (j, b)| a.span.len().cmp(&b.span.len()).then(j.cmp(i)))
                .map(|(i, _)| i)
        })
        .collect();

    // nodes in order of position: concepts and free tokens
    enum Unit {
        Concept(usize),
        Token(usize),
    }
    let mut units: Vec<(Interval, u8, usize, Unit)> = concepts
        .iter()
        .enumerate()
        .map(|(i, c)| (c.span, 0, i, Unit::Concept(i)))
        .collect();
    units.extend(
        tokens
            .iter()
            .enumerate()
            .filter(|(i, _)| owner[*i].is_none())
            .map(|(i, t)| (t.span, 1, i, Unit::Token(i))),
    );
    units.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));

    let mut graph = LabeledGraph::new(format!("{}#{}", doc.name(), sentence.id.0), "dependency", true);
    let mut concept_node = vec![0; concepts.len()];
    let mut token_nodes = vec![0; tokens.len()];
    for (_, _, _, unit) in &units {
        match *unit {
            Unit::Concept(i) => concept_node[i] = graph.add_node(concepts[i].value.clone()),
            Unit::Token(i) => token_nodes[i] = graph.add_node(doc.text(tokens[i].span).to_lowercase()),
        }
    }
    for (i, o) in owner.iter().enumerate() {
        if let Some(c) = o {
            token_nodes[i] = concept_node[*c];
        }
    }

    let node_of = |span: Interval| tokens.iter().position(|t| t.span == span).map(|i| token_nodes[i]);
    let mut skipped = 0;
    let mut edges = BTreeSet::new();
    for dep in dependencies {
        let resolved = dependency_ends(dep).and_then(|(h, d)| Some((node_of(h)?, node_of(d)?)));
        match resolved {
            Some((h, d)) if h != d => {
                if edges.insert((h, d, dep.value.clone())) {
                    graph.add_edge(h, d, dep.value.clone()).expect("nodes exist and differ");
                }
            }
            Some(_) => {}
            None => skipped += 1,
        }
    }
    SentenceGraph {
        graph,
        token_nodes,
        skipped,
    }
}

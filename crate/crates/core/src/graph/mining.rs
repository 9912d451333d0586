//! Frequent connected subgraph mining by breadth-first edge growth.
//!
//! Level 0 holds the single-node patterns. Each later level adds one edge
//! to a frequent pattern, either between two pattern nodes or towards a new
//! node, using the embeddings of the pattern in the graphs that contain it.
//! Support only shrinks as a pattern grows, so growing frequent patterns
//! alone reaches every frequent one.

use std::collections::{BTreeMap, BTreeSet};

use super::matching::{canonical_code, find_subgraph_occurrences, occurs_in, CanonicalCode};
use super::LabeledGraph;

pub const DEFAULT_MAX_NODES: usize = 4;

#[derive(Debug, Clone)]
pub struct FrequentPattern {
    pub pattern: LabeledGraph,
    pub code: CanonicalCode,
    /// Number of input graphs containing the pattern.
    pub support: usize,
    /// Ids of those graphs, in input order.
    pub graph_ids: Vec<i64>,
    members: Vec<usize>,
}

impl FrequentPattern {
    /// Positions of the supporting graphs in the mined slice.
    pub fn members(&self) -> &[usize] {
        &self.members
    }
}

fn extensions(pattern: &LabeledGraph, g: &LabeledGraph, max_nodes: usize, out: &mut BTreeMap<CanonicalCode, LabeledGraph>) {
    for m in find_subgraph_occurrences(g, pattern) {
        let mut inverse = vec![None; g.node_count()];
        for (p, &gn) in m.node_map.iter().enumerate() {
            inverse[gn] = Some(p);
        }
        for e in g.edges() {
            let mut grown = pattern.clone();
            let added = match (inverse[e.src], inverse[e.dst]) {
                (Some(s), Some(d)) => !pattern.has_edge(s, d, &e.label) && grown.add_edge(s, d, e.label.clone()).is_ok(),
                (Some(s), None) if pattern.node_count() < max_nodes => {
                    let d = grown.add_node(g.label(e.dst));
                    grown.add_edge(s, d, e.label.clone()).is_ok()
                }
                (None, Some(d)) if pattern.node_count() < max_nodes => {
                    let s = grown.add_node(g.label(e.src));
                    grown.add_edge(s, d, e.label.clone()).is_ok()
                }
                _ => false,
            };
            if added {
                let code = canonical_code(&grown);
                out.entry(code).or_insert(grown);
            }
        }
    }
}

/// All connected patterns with at most `max_nodes` nodes found in at least
/// `min_support` of `graphs`, deduplicated up to isomorphism and ordered by
/// node count, then canonical code. Patterns are directed unless some
/// input graph is undirected.
pub fn mine_frequent_subgraphs(graphs: &[LabeledGraph], min_support: usize, max_nodes: usize) -> Vec<FrequentPattern> {
    let min_support = min_support.max(1);
    if graphs.is_empty() || max_nodes == 0 {
        return Vec::new();
    }
    let directed = graphs.iter().all(|g| g.directed);
    let make = |code: CanonicalCode, members: Vec<usize>| {
        let mut pattern = code.to_graph();
        pattern.name = "pattern".into();
        FrequentPattern {
            pattern,
            support: members.len(),
            graph_ids: members.iter().map(|&i| graphs[i].id).collect(),
            code,
            members,
        }
    };

    let mut by_label: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
    for (i, g) in graphs.iter().enumerate() {
        for l in g.labels() {
            by_label.entry(l).or_default().insert(i);
        }
    }
    let mut level: Vec<FrequentPattern> = by_label
        .into_iter()
        .filter(|(_, members)| members.len() >= min_support)
        .map(|(label, members)| {
            let mut single = LabeledGraph::new("", "subgraph", directed);
            single.add_node(label);
            make(canonical_code(&single), members.into_iter().collect())
        })
        .collect();

    let mut seen: BTreeSet<CanonicalCode> = level.iter().map(|p| p.code.clone()).collect();
    let mut result = Vec::new();
    while !level.is_empty() {
        // candidate code -> (pattern, graphs that may contain it)
        let mut candidates: BTreeMap<CanonicalCode, (LabeledGraph, BTreeSet<usize>)> = BTreeMap::new();
        for p in &level {
            for &gi in &p.members {
                let mut grown = BTreeMap::new();
                extensions(&p.pattern, &graphs[gi], max_nodes, &mut grown);
                for (code, g) in grown {
                    if !seen.contains(&code) {
                        candidates
                            .entry(code)
                            .or_insert_with(|| (g, p.members.iter().copied().collect()));
                    }
                }
            }
        }
        result.append(&mut level);
        for (code, (pattern, domain)) in candidates {
            seen.insert(code.clone());
            let members: Vec<usize> = domain.into_iter().filter(|&gi| occurs_in(&graphs[gi], &pattern)).collect();
            if members.len() >= min_support {
                level.push(make(code, members));
            }
        }
    }
    result.sort_by(|a, b| {
        (a.pattern.node_count(), &a.code).cmp(&(b.pattern.node_count(), &b.code))
    });
    result
}

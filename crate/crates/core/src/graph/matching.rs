//! Label-preserving subgraph matching and canonical codes.

use std::collections::HashSet;

use super::LabeledGraph;

/// An embedding of a pattern: `node_map[p]` is the graph node that pattern
/// node `p` maps to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SubgraphMapping {
    pub graph_id: i64,
    pub subgraph_id: i64,
    pub node_map: Vec<usize>,
}

struct EdgeIndex<'g> {
    directed: bool,
    edges: HashSet<(usize, usize, &'g str)>,
}

impl<'g> EdgeIndex<'g> {
    fn new(g: &'g LabeledGraph) -> Self {
        Self {
            directed: g.directed,
            edges: g.edges.iter().map(|e| (e.src, e.dst, e.label.as_str())).collect(),
        }
    }

    fn has(&self, src: usize, dst: usize, label: &str) -> bool {
        self.edges.contains(&(src, dst, label)) || (!self.directed && self.edges.contains(&(dst, src, label)))
    }
}

/// Pattern nodes ordered so that, where possible, each one touches an
/// earlier one; this lets edge checks prune early.
fn search_order(p: &LabeledGraph) -> Vec<usize> {
    let n = p.node_count();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let next = (0..n)
            .filter(|&v| !placed[v])
            .find(|&v| {
                p.edges.iter().any(|e| (e.src == v && placed[e.dst]) || (e.dst == v && placed[e.src]))
            })
            .or_else(|| (0..n).find(|&v| !placed[v]))
            .expect("an unplaced node remains");
        placed[next] = true;
        order.push(next);
    }
    order
}

struct Matcher<'a> {
    g: &'a LabeledGraph,
    p: &'a LabeledGraph,
    index: EdgeIndex<'a>,
    order: Vec<usize>,
    map: Vec<Option<usize>>,
    used: Vec<bool>,
}

impl<'a> Matcher<'a> {
    fn new(g: &'a LabeledGraph, p: &'a LabeledGraph) -> Self {
        Self {
            g,
            p,
            index: EdgeIndex::new(g),
            order: search_order(p),
            map: vec![None; p.node_count()],
            used: vec![false; g.node_count()],
        }
    }

    fn edge_ok(&self, src: usize, dst: usize, label: &str) -> bool {
        self.index.has(src, dst, label) || (!self.p.directed && self.index.has(dst, src, label))
    }

    fn consistent(&self, pn: usize, gn: usize) -> bool {
        self.p.edges.iter().all(|e| {
            let (s, d) = match (e.src == pn, e.dst == pn) {
                (true, _) => (Some(gn), self.map[e.dst]),
                (_, true) => (self.map[e.src], Some(gn)),
                _ => return true,
            };
            match (s, d) {
                (Some(s), Some(d)) => self.edge_ok(s, d, &e.label),
                _ => true,
            }
        })
    }

    /// Depth-first search; `visit` returns `false` to stop.
    fn run(&mut self, depth: usize, visit: &mut dyn FnMut(&[usize]) -> bool) -> bool {
        if depth == self.order.len() {
            let full: Vec<usize> = self.map.iter().map(|m| m.expect("all nodes mapped")).collect();
            return visit(&full);
        }
        let pn = self.order[depth];
        for gn in 0..self.g.node_count() {
            if self.used[gn] || self.g.labels[gn] != self.p.labels[pn] || !self.consistent(pn, gn) {
                continue;
            }
            self.map[pn] = Some(gn);
            self.used[gn] = true;
            let go_on = self.run(depth + 1, visit);
            self.used[gn] = false;
            self.map[pn] = None;
            if !go_on {
                return false;
            }
        }
        true
    }
}

/// Every injective mapping of `pattern` into `g` that keeps node labels and
/// carries each pattern edge onto a graph edge with the same label and
/// direction. Extra graph edges between mapped nodes are allowed. Sorted
/// by node map.
pub fn find_subgraph_occurrences(g: &LabeledGraph, pattern: &LabeledGraph) -> Vec<SubgraphMapping> {
    let mut out = Vec::new();
    if pattern.node_count() == 0 || pattern.node_count() > g.node_count() {
        return out;
    }
    Matcher::new(g, pattern).run(0, &mut |m| {
        out.push(SubgraphMapping {
            graph_id: g.id,
            subgraph_id: pattern.id,
            node_map: m.to_vec(),
        });
        true
    });
    out.sort();
    out
}

/// Whether `pattern` has at least one occurrence in `g`.
pub fn occurs_in(g: &LabeledGraph, pattern: &LabeledGraph) -> bool {
    if pattern.node_count() == 0 || pattern.node_count() > g.node_count() {
        return false;
    }
    let mut found = false;
    Matcher::new(g, pattern).run(0, &mut |_| {
        found = true;
        false
    });
    found
}

/// Lexicographically smallest (labels, sorted edges) encoding over all
/// node orderings. Only orderings with sorted labels can be minimal, so
/// only those are tried; the cost is still factorial in the size of the
/// largest group of equally labeled nodes, which suits small patterns.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalCode {
    pub directed: bool,
    pub labels: Vec<String>,
    pub edges: Vec<(usize, usize, String)>,
}

impl CanonicalCode {
    /// The pattern graph whose node order is the canonical one.
    pub fn to_graph(&self) -> LabeledGraph {
        let mut g = LabeledGraph::new("", "subgraph", self.directed);
        for l in &self.labels {
            g.add_node(l.clone());
        }
        for (s, d, l) in &self.edges {
            g.add_edge(*s, *d, l.clone()).expect("codes come from valid graphs");
        }
        g
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "directed": self.directed,
            "labels": self.labels,
            "edges": self.edges,
        })
        .to_string()
    }
}

pub fn canonical_code(g: &LabeledGraph) -> CanonicalCode {
    let n = g.node_count();
    let mut sorted: Vec<&str> = g.labels.iter().map(String::as_str).collect();
    sorted.sort_unstable();
    let mut best: Option<Vec<(usize, usize, String)>> = None;
    let mut position = vec![usize::MAX; n];
    let mut used = vec![false; n];

    fn encode(g: &LabeledGraph, position: &[usize]) -> Vec<(usize, usize, String)> {
        let mut edges: Vec<(usize, usize, String)> = g
            .edges
            .iter()
            .map(|e| {
                let (s, d) = (position[e.src], position[e.dst]);
                let (s, d) = if g.directed { (s, d) } else { (s.min(d), s.max(d)) };
                (s, d, e.label.clone())
            })
            .collect();
        edges.sort();
        edges
    }

    fn assign(
        g: &LabeledGraph,
        sorted: &[&str],
        k: usize,
        position: &mut [usize],
        used: &mut [bool],
        best: &mut Option<Vec<(usize, usize, String)>>,
    ) {
        if k == sorted.len() {
            let code = encode(g, position);
            if best.as_ref().is_none_or(|b| code < *b) {
                *best = Some(code);
            }
            return;
        }
        for v in 0..sorted.len() {
            if !used[v] && g.labels[v] == sorted[k] {
                used[v] = true;
                position[v] = k;
                assign(g, sorted, k + 1, position, used, best);
                used[v] = false;
            }
        }
    }

    assign(g, &sorted, 0, &mut position, &mut used, &mut best);
    CanonicalCode {
        directed: g.directed,
        labels: sorted.into_iter().map(String::from).collect(),
        edges: best.unwrap_or_default(),
    }
}

pub fn is_isomorphic(a: &LabeledGraph, b: &LabeledGraph) -> bool {
    a.node_count() == b.node_count() && a.edges.len() == b.edges.len() && canonical_code(a) == canonical_code(b)
}

//! Augmented red-black interval tree.
//!
//! Keys are intervals in canonical order. Each node keeps the payloads that
//! share its exact interval (sorted), plus the minimum and maximum end position over
//! its whole subtree. Relation queries use those bounds, together with the
//! start ordering of the keys, to skip subtrees that cannot hold an answer.
//!
//! Nodes live in an arena; index 0 is the black NIL sentinel.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

use crate::interval::{AllenRelation, Interval, Window};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("entry already present under {0}")]
    Duplicate(Interval),
    #[error("no such entry under {0}")]
    NotFound(Interval),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Color {
    Red,
    Black,
}

const NIL: usize = 0;

#[derive(Debug, Clone)]
struct Node<P> {
    key: Interval,
    payloads: Vec<P>,
    color: Color,
    left: usize,
    right: usize,
    parent: usize,
    min_end: usize,
    max_end: usize,
}

#[derive(Clone)]
pub struct IntervalTree<P> {
    nodes: Vec<Node<P>>,
    free: Vec<usize>,
    root: usize,
    size: usize,
    node_count: usize,
}

impl<P> Default for IntervalTree<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P: fmt::Debug> fmt::Debug for IntervalTree<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.iter()).finish()
    }
}

impl<P> IntervalTree<P> {
    pub fn new() -> Self {
        let sentinel = Node {
            key: Interval { start: 0, end: 0 },
            payloads: Vec::new(),
            color: Color::Black,
            left: NIL,
            right: NIL,
            parent: NIL,
            min_end: usize::MAX,
            max_end: 0,
        };
        Self {
            nodes: vec![sentinel],
            free: Vec::new(),
            root: NIL,
            size: 0,
            node_count: 0,
        }
    }

    /// Total number of entries (payloads) in the tree.
    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    /// Number of distinct intervals, i.e. tree nodes.
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Subtree end bounds at the root, `None` for an empty tree.
    pub fn root_end_bounds(&self) -> Option<(usize, usize)> {
        (self.root != NIL).then(|| {
            let r = &self.nodes[self.root];
            (r.min_end, r.max_end)
        })
    }

    /// All entries in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (Interval, &P)> + '_ {
        let mut out = Vec::with_capacity(self.size);
        self.collect_in_order(self.root, &mut out);
        out.into_iter()
    }

    fn collect_in_order<'a>(&'a self, x: usize, out: &mut Vec<(Interval, &'a P)>) {
        if x == NIL {
            return;
        }
        let node = &self.nodes[x];
        self.collect_in_order(node.left, out);
        out.extend(node.payloads.iter().map(|p| (node.key, p)));
        self.collect_in_order(node.right, out);
    }

    /// Visits entries starting at or after `min_start` in canonical order,
    /// stopping as soon as `visit` returns `false`.
    pub fn scan_from<'a, F>(&'a self, min_start: usize, mut visit: F)
    where
        F: FnMut(Interval, &'a P) -> bool,
    {
        self.scan_node(self.root, min_start, &mut visit);
    }

    fn scan_node<'a, F>(&'a self, x: usize, min_start: usize, visit: &mut F) -> bool
    where
        F: FnMut(Interval, &'a P) -> bool,
    {
        if x == NIL {
            return true;
        }
        let node = &self.nodes[x];
        if node.key.start >= min_start {
            if !self.scan_node(node.left, min_start, visit) {
                return false;
            }
            for p in &node.payloads {
                if !visit(node.key, p) {
                    return false;
                }
            }
        }
        self.scan_node(node.right, min_start, visit)
    }

    fn find_node(&self, key: &Interval) -> usize {
        let mut x = self.root;
        while x != NIL {
            match key.cmp(&self.nodes[x].key) {
                Ordering::Less => x = self.nodes[x].left,
                Ordering::Greater => x = self.nodes[x].right,
                Ordering::Equal => return x,
            }
        }
        NIL
    }

    /// Payloads stored under exactly `key`.
    pub fn get(&self, key: &Interval) -> &[P] {
        match self.find_node(key) {
            NIL => &[],
            x => &self.nodes[x].payloads,
        }
    }

    /// Entries `i` with `rel` holding for `i` against `b`, in canonical order.
    pub fn query(&self, rel: AllenRelation, b: &Interval) -> Vec<(Interval, &P)> {
        let mut out = Vec::new();
        self.search(rel, b, |key, payloads| {
            out.extend(payloads.iter().map(|p| (key, p)));
        });
        out
    }

    /// Number of nodes the search for `(rel, b)` examines. Deterministic for
    /// a given tree shape; never exceeds [`node_count`](Self::node_count).
    pub fn visited_nodes(&self, rel: AllenRelation, b: &Interval) -> usize {
        self.search(rel, b, |_, _| {})
    }

    fn search<'a, F>(&'a self, rel: AllenRelation, b: &Interval, mut emit: F) -> usize
    where
        F: FnMut(Interval, &'a [P]),
    {
        let Some(window) = Window::for_relation(rel, b) else {
            return 0;
        };
        let mut visited = 0;
        if self.admits(self.root, &window) {
            self.search_node(self.root, rel, b, &window, &mut emit, &mut visited);
        }
        visited
    }

    fn admits(&self, x: usize, window: &Window) -> bool {
        x != NIL && window.admits_ends(self.nodes[x].min_end, self.nodes[x].max_end)
    }

    fn search_node<'a, F>(
        &'a self,
        x: usize,
        rel: AllenRelation,
        b: &Interval,
        window: &Window,
        emit: &mut F,
        visited: &mut usize,
    ) where
        F: FnMut(Interval, &'a [P]),
    {
        *visited += 1;
        let node = &self.nodes[x];
        let start = node.key.start;
        // left keys start at or before this one, right keys at or after
        if start >= window.start_lo && self.admits(node.left, window) {
            self.search_node(node.left, rel, b, window, emit, visited);
        }
        if start >= window.start_lo && start <= window.start_hi && rel.holds(&node.key, b) {
            emit(node.key, &node.payloads);
        }
        if start <= window.start_hi && self.admits(node.right, window) {
            self.search_node(node.right, rel, b, window, emit, visited);
        }
    }

    fn alloc(&mut self, key: Interval, payload: P) -> usize {
        let node = Node {
            key,
            payloads: vec![payload],
            color: Color::Red,
            left: NIL,
            right: NIL,
            parent: NIL,
            min_end: key.end,
            max_end: key.end,
        };
        self.node_count += 1;
        match self.free.pop() {
            Some(idx) => {
                self.nodes[idx] = node;
                idx
            }
            None => {
                self.nodes.push(node);
                self.nodes.len() - 1
            }
        }
    }

    fn pull(&mut self, x: usize) {
        let (l, r) = (self.nodes[x].left, self.nodes[x].right);
        let end = self.nodes[x].key.end;
        let min_end = end.min(self.nodes[l].min_end).min(self.nodes[r].min_end);
        let max_end = end.max(self.nodes[l].max_end).max(self.nodes[r].max_end);
        let node = &mut self.nodes[x];
        node.min_end = min_end;
        node.max_end = max_end;
    }

    fn pull_to_root(&mut self, mut x: usize) {
        while x != NIL {
            self.pull(x);
            x = self.nodes[x].parent;
        }
    }

    fn rotate_left(&mut self, x: usize) {
        let y = self.nodes[x].right;
        let y_left = self.nodes[y].left;
        self.nodes[x].right = y_left;
        if y_left != NIL {
            self.nodes[y_left].parent = x;
        }
        self.replace_child(x, y);
        self.nodes[y].left = x;
        self.nodes[x].parent = y;
        self.pull(x);
        self.pull(y);
    }

    fn rotate_right(&mut self, x: usize) {
        let y = self.nodes[x].left;
        let y_right = self.nodes[y].right;
        self.nodes[x].left = y_right;
        if y_right != NIL {
            self.nodes[y_right].parent = x;
        }
        self.replace_child(x, y);
        self.nodes[y].right = x;
        self.nodes[x].parent = y;
        self.pull(x);
        self.pull(y);
    }

    /// Puts `v` where `u` hangs from its parent (or at the root).
    fn replace_child(&mut self, u: usize, v: usize) {
        let p = self.nodes[u].parent;
        if p == NIL {
            self.root = v;
        } else if self.nodes[p].left == u {
            self.nodes[p].left = v;
        } else {
            self.nodes[p].right = v;
        }
        self.nodes[v].parent = p;
    }

    fn insert_fixup(&mut self, mut z: usize) {
        while self.nodes[self.nodes[z].parent].color == Color::Red {
            let p = self.nodes[z].parent;
            let g = self.nodes[p].parent;
            if p == self.nodes[g].left {
                let uncle = self.nodes[g].right;
                if self.nodes[uncle].color == Color::Red {
                    self.nodes[p].color = Color::Black;
                    self.nodes[uncle].color = Color::Black;
                    self.nodes[g].color = Color::Red;
                    z = g;
                } else {
                    if z == self.nodes[p].right {
                        z = p;
                        self.rotate_left(z);
                    }
                    let p = self.nodes[z].parent;
                    let g = self.nodes[p].parent;
                    self.nodes[p].color = Color::Black;
                    self.nodes[g].color = Color::Red;
                    self.rotate_right(g);
                }
            } else {
                let uncle = self.nodes[g].left;
                if self.nodes[uncle].color == Color::Red {
                    self.nodes[p].color = Color::Black;
                    self.nodes[uncle].color = Color::Black;
                    self.nodes[g].color = Color::Red;
                    z = g;
                } else {
                    if z == self.nodes[p].left {
                        z = p;
                        self.rotate_right(z);
                    }
                    let p = self.nodes[z].parent;
                    let g = self.nodes[p].parent;
                    self.nodes[p].color = Color::Black;
                    self.nodes[g].color = Color::Red;
                    self.rotate_left(g);
                }
            }
        }
        let root = self.root;
        self.nodes[root].color = Color::Black;
    }

    fn minimum(&self, mut x: usize) -> usize {
        while self.nodes[x].left != NIL {
            x = self.nodes[x].left;
        }
        x
    }

    fn delete_node(&mut self, z: usize) {
        let mut y_color = self.nodes[z].color;
        let x;
        if self.nodes[z].left == NIL {
            x = self.nodes[z].right;
            self.replace_child(z, x);
        } else if self.nodes[z].right == NIL {
            x = self.nodes[z].left;
            self.replace_child(z, x);
        } else {
            let y = self.minimum(self.nodes[z].right);
            y_color = self.nodes[y].color;
            x = self.nodes[y].right;
            if self.nodes[y].parent == z {
                self.nodes[x].parent = y;
            } else {
                self.replace_child(y, x);
                self.nodes[y].right = self.nodes[z].right;
                let yr = self.nodes[y].right;
                self.nodes[yr].parent = y;
            }
            self.replace_child(z, y);
            self.nodes[y].left = self.nodes[z].left;
            let yl = self.nodes[y].left;
            self.nodes[yl].parent = y;
            self.nodes[y].color = self.nodes[z].color;
        }
        // x.parent marks the lowest node whose subtree changed (x may be NIL)
        self.pull_to_root(self.nodes[x].parent);
        if y_color == Color::Black {
            self.delete_fixup(x);
        }
        // the sentinel's parent is scratch space; reset it
        self.nodes[NIL].parent = NIL;
        self.nodes[z].payloads = Vec::new();
        self.free.push(z);
        self.node_count -= 1;
    }

    fn delete_fixup(&mut self, mut x: usize) {
        while x != self.root && self.nodes[x].color == Color::Black {
            let p = self.nodes[x].parent;
            if x == self.nodes[p].left {
                let mut w = self.nodes[p].right;
                if self.nodes[w].color == Color::Red {
                    self.nodes[w].color = Color::Black;
                    self.nodes[p].color = Color::Red;
                    self.rotate_left(p);
                    w = self.nodes[p].right;
                }
                let (wl, wr) = (self.nodes[w].left, self.nodes[w].right);
                if self.nodes[wl].color == Color::Black && self.nodes[wr].color == Color::Black {
                    self.nodes[w].color = Color::Red;
                    x = p;
                } else {
                    if self.nodes[wr].color == Color::Black {
                        self.nodes[wl].color = Color::Black;
                        self.nodes[w].color = Color::Red;
                        self.rotate_right(w);
                        w = self.nodes[p].right;
                    }
                    self.nodes[w].color = self.nodes[p].color;
                    self.nodes[p].color = Color::Black;
                    let wr = self.nodes[w].right;
                    self.nodes[wr].color = Color::Black;
                    self.rotate_left(p);
                    x = self.root;
                }
            } else {
                let mut w = self.nodes[p].left;
                if self.nodes[w].color == Color::Red {
                    self.nodes[w].color = Color::Black;
                    self.nodes[p].color = Color::Red;
                    self.rotate_right(p);
                    w = self.nodes[p].left;
                }
                let (wl, wr) = (self.nodes[w].left, self.nodes[w].right);
                if self.nodes[wl].color == Color::Black && self.nodes[wr].color == Color::Black {
                    self.nodes[w].color = Color::Red;
                    x = p;
                } else {
                    if self.nodes[wl].color == Color::Black {
                        self.nodes[wr].color = Color::Black;
                        self.nodes[w].color = Color::Red;
                        self.rotate_left(w);
                        w = self.nodes[p].left;
                    }
                    self.nodes[w].color = self.nodes[p].color;
                    self.nodes[p].color = Color::Black;
                    let wl = self.nodes[w].left;
                    self.nodes[wl].color = Color::Black;
                    self.rotate_right(p);
                    x = self.root;
                }
            }
        }
        self.nodes[x].color = Color::Black;
    }

    /// Checks every structural invariant node by node: parent links, strict
    /// canonical key order, red-black coloring, equal black height, end
    /// bounds, non-empty payload lists and the entry count.
    pub fn audit(&self) -> Result<(), String> {
        if self.nodes[NIL].color != Color::Black {
            return Err("sentinel is not black".into());
        }
        if self.root != NIL {
            if self.nodes[self.root].color != Color::Black {
                return Err("root is red".into());
            }
            if self.nodes[self.root].parent != NIL {
                return Err("root has a parent".into());
            }
        }
        let mut counts = (0, 0);
        self.audit_node(self.root, None, None, &mut counts)?;
        if counts.0 != self.node_count {
            return Err(format!("node count {} != {}", counts.0, self.node_count));
        }
        if counts.1 != self.size {
            return Err(format!("entry count {} != {}", counts.1, self.size));
        }
        Ok(())
    }

    /// Returns (black height, min end, max end) of the subtree at `x`.
    fn audit_node(
        &self,
        x: usize,
        lower: Option<Interval>,
        upper: Option<Interval>,
        counts: &mut (usize, usize),
    ) -> Result<(usize, usize, usize), String> {
        if x == NIL {
            return Ok((1, usize::MAX, 0));
        }
        let node = &self.nodes[x];
        if lower.is_some_and(|lo| node.key <= lo) || upper.is_some_and(|hi| node.key >= hi) {
            return Err(format!("key {} out of order", node.key));
        }
        if node.payloads.is_empty() {
            return Err(format!("node {} has no payloads", node.key));
        }
        for child in [node.left, node.right] {
            if child != NIL && self.nodes[child].parent != x {
                return Err(format!("broken parent link under {}", node.key));
            }
            if node.color == Color::Red && self.nodes[child].color == Color::Red {
                return Err(format!("red node {} has a red child", node.key));
            }
        }
        counts.0 += 1;
        counts.1 += node.payloads.len();
        let (lh, lmin, lmax) = self.audit_node(node.left, lower, Some(node.key), counts)?;
        let (rh, rmin, rmax) = self.audit_node(node.right, Some(node.key), upper, counts)?;
        if lh != rh {
            return Err(format!("black height mismatch at {}", node.key));
        }
        let min_end = node.key.end.min(lmin).min(rmin);
        let max_end = node.key.end.max(lmax).max(rmax);
        if node.min_end != min_end || node.max_end != max_end {
            return Err(format!(
                "bounds at {}: stored ({}, {}), actual ({min_end}, {max_end})",
                node.key, node.min_end, node.max_end
            ));
        }
        let height = lh + usize::from(node.color == Color::Black);
        Ok((height, min_end, max_end))
    }
}

impl<P: Ord> IntervalTree<P> {
    pub fn insert(&mut self, key: Interval, payload: P) -> Result<(), TreeError> {
        let mut parent = NIL;
        let mut x = self.root;
        let mut went_left = false;
        while x != NIL {
            parent = x;
            match key.cmp(&self.nodes[x].key) {
                Ordering::Less => {
                    x = self.nodes[x].left;
                    went_left = true;
                }
                Ordering::Greater => {
                    x = self.nodes[x].right;
                    went_left = false;
                }
                Ordering::Equal => {
                    let payloads = &mut self.nodes[x].payloads;
                    match payloads.binary_search(&payload) {
                        Ok(_) => return Err(TreeError::Duplicate(key)),
                        Err(pos) => payloads.insert(pos, payload),
                    }
                    self.size += 1;
                    return Ok(());
                }
            }
        }
        let z = self.alloc(key, payload);
        self.nodes[z].parent = parent;
        if parent == NIL {
            self.root = z;
        } else if went_left {
            self.nodes[parent].left = z;
        } else {
            self.nodes[parent].right = z;
        }
        self.size += 1;
        self.pull_to_root(parent);
        self.insert_fixup(z);
        Ok(())
    }

    /// Removes one entry. The node goes away only with its last payload.
    pub fn remove(&mut self, key: &Interval, payload: &P) -> Result<P, TreeError> {
        let z = self.find_node(key);
        if z == NIL {
            return Err(TreeError::NotFound(*key));
        }
        let payloads = &mut self.nodes[z].payloads;
        let pos = payloads
            .binary_search(payload)
            .map_err(|_| TreeError::NotFound(*key))?;
        let removed = payloads.remove(pos);
        self.size -= 1;
        if self.nodes[z].payloads.is_empty() {
            self.delete_node(z);
        }
        Ok(removed)
    }
}

impl<P: Ord> FromIterator<(Interval, P)> for IntervalTree<P> {
    /// Builds a tree, silently skipping duplicate entries.
    fn from_iter<T: IntoIterator<Item = (Interval, P)>>(iter: T) -> Self {
        let mut tree = IntervalTree::new();
        for (key, payload) in iter {
            let _ = tree.insert(key, payload);
        }
        tree
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::collections::BTreeSet;

    fn iv(s: usize, e: usize) -> Interval {
        Interval::new(s, e).unwrap()
    }

    #[test]
    fn single_insert() {
        let mut tree = IntervalTree::new();
        tree.insert(iv(2, 7), 1u32).unwrap();
        assert_eq!(tree.len(), 1);
        assert_eq!(tree.root_end_bounds(), Some((7, 7)));
        assert_eq!(tree.nodes[tree.root].color, Color::Black);
        tree.audit().unwrap();
    }

    #[test]
    fn root_bounds_track_subtree() {
        let mut tree = IntervalTree::new();
        tree.insert(iv(1, 9), 1u32).unwrap();
        tree.insert(iv(2, 3), 2).unwrap();
        // full-scan oracle
        let ends: Vec<usize> = tree.iter().map(|(k, _)| k.end).collect();
        let expected = (*ends.iter().min().unwrap(), *ends.iter().max().unwrap());
        assert_eq!(expected, (3, 9));
        assert_eq!(tree.root_end_bounds(), Some(expected));
    }

    #[test]
    fn duplicate_and_missing_entries() {
        let mut tree = IntervalTree::new();
        tree.insert(iv(1, 2), 5u32).unwrap();
        assert_eq!(tree.insert(iv(1, 2), 5), Err(TreeError::Duplicate(iv(1, 2))));
        assert_eq!(tree.remove(&iv(1, 3), &5), Err(TreeError::NotFound(iv(1, 3))));
        assert_eq!(tree.remove(&iv(1, 2), &6), Err(TreeError::NotFound(iv(1, 2))));
    }

    #[test]
    fn shared_interval_payloads() {
        let mut tree = IntervalTree::new();
        tree.insert(iv(4, 8), 1u32).unwrap();
        tree.insert(iv(4, 8), 2).unwrap();
        tree.insert(iv(0, 1), 3).unwrap();
        assert_eq!(tree.node_count(), 2);
        tree.remove(&iv(4, 8), &1).unwrap();
        assert_eq!(tree.node_count(), 2);
        assert_eq!(tree.len(), 2);
        tree.remove(&iv(4, 8), &2).unwrap();
        assert_eq!(tree.node_count(), 1);
        tree.audit().unwrap();
    }

    #[test]
    fn empty_and_single_node_queries() {
        let mut tree: IntervalTree<u32> = IntervalTree::new();
        for rel in AllenRelation::ALL {
            assert!(tree.query(rel, &iv(0, 5)).is_empty());
            assert_eq!(tree.visited_nodes(rel, &iv(0, 5)), 0);
        }
        tree.insert(iv(1, 3), 0).unwrap();
        assert_eq!(tree.visited_nodes(AllenRelation::Meets, &iv(3, 5)), 1);
    }

    #[test]
    fn meets_query() {
        let tree: IntervalTree<u32> = [(iv(1, 3), 0), (iv(3, 5), 1), (iv(2, 8), 2)]
            .into_iter()
            .collect();
        let hits: Vec<_> = tree.query(AllenRelation::Meets, &iv(3, 5));
        assert_eq!(hits, vec![(iv(1, 3), &0)]);
    }

    #[test]
    fn random_mutations_match_rebuild() {
        let mut rng = StdRng::seed_from_u64(7);
        let mut tree = IntervalTree::new();
        let mut live: BTreeSet<(Interval, u32)> = BTreeSet::new();
        for step in 0..1000u32 {
            if live.is_empty() || rng.gen_bool(0.6) {
                let s = rng.gen_range(0..40);
                let key = iv(s, s + rng.gen_range(0..6));
                let payload = rng.gen_range(0..4);
                let fresh = live.insert((key, payload));
                assert_eq!(tree.insert(key, payload).is_ok(), fresh);
            } else {
                let idx = rng.gen_range(0..live.len());
                let (key, payload) = *live.iter().nth(idx).unwrap();
                live.remove(&(key, payload));
                tree.remove(&key, &payload).unwrap();
            }
            if step % 50 == 0 {
                tree.audit().unwrap();
            }
        }
        tree.audit().unwrap();
        let rebuilt: IntervalTree<u32> = live.iter().copied().collect();
        let mut got: Vec<_> = tree.iter().map(|(k, p)| (k, *p)).collect();
        let mut want: Vec<_> = rebuilt.iter().map(|(k, p)| (k, *p)).collect();
        got.sort();
        want.sort();
        assert_eq!(got, want);
        assert_eq!(tree.node_count(), rebuilt.node_count());
    }
}

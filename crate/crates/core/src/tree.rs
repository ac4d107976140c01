//! Rooted binary ultrametric trees.
//!
//! Ages are measured as depth from the root: the root sits at age 0 and
//! every leaf at age 1. Leaf `i` of a tree with `V` leaves is always node
//! `i` and carries taxon label `taxa[i]`; internal nodes occupy indices
//! `V..2V-1`. Branch lengths are derived from ages.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::error::{Error, Result};

/// Age every leaf must carry.
pub const LEAF_AGE: f64 = 1.0;

/// The first invariant a candidate tree violates.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("a tree needs at least 2 leaves, found {0}")]
    TooFewLeaves(usize),
    #[error("parent table and age table have different lengths ({parents} vs {ages})")]
    TableLength { parents: usize, ages: usize },
    #[error("node {node} has out-of-range parent {parent}")]
    BadParent { node: usize, parent: usize },
    #[error("non-binary node {node} with {children} children")]
    NonBinary { node: usize, children: usize },
    #[error("leaf slot {node} has children")]
    LeafWithChildren { node: usize },
    #[error("expected {expected} nodes for {leaves} leaves, found {found}")]
    NodeCount { leaves: usize, expected: usize, found: usize },
    #[error("expected exactly one root, found {0}")]
    RootCount(usize),
    #[error("node {0} is not connected to the root")]
    Disconnected(usize),
    #[error("node {node} has a non-finite age")]
    NonFiniteAge { node: usize },
    #[error("root age must be 0, found {0}")]
    RootAge(f64),
    #[error("leaf age ≠ 1 at node {node} (age {age})")]
    LeafAge { node: usize, age: f64 },
    #[error("non-positive branch above node {node} (parent age {parent_age}, age {age})")]
    NonPositiveBranch { node: usize, parent_age: f64, age: f64 },
    #[error("duplicate leaf label `{0}`")]
    DuplicateLabel(String),
}

/// One entry of the node table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub parent: Option<usize>,
    pub children: Option<[usize; 2]>,
    pub age: f64,
}

/// Set of leaf indices, stored as a bitset over the tree's taxon order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Split {
    bits: Box<[u64]>,
}

impl Split {
    pub fn empty(n_leaves: usize) -> Self {
        Split { bits: vec![0; n_leaves.div_ceil(64)].into_boxed_slice() }
    }

    pub fn from_leaves(n_leaves: usize, leaves: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Split::empty(n_leaves);
        for leaf in leaves {
            s.insert(leaf);
        }
        s
    }

    pub fn insert(&mut self, leaf: usize) {
        self.bits[leaf / 64] |= 1 << (leaf % 64);
    }

    pub fn contains(&self, leaf: usize) -> bool {
        self.bits[leaf / 64] & (1 << (leaf % 64)) != 0
    }

    pub fn len(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    pub fn union_with(&mut self, other: &Split) {
        for (a, b) in self.bits.iter_mut().zip(other.bits.iter()) {
            *a |= b;
        }
    }

    pub fn is_subset(&self, other: &Split) -> bool {
        self.bits.iter().zip(other.bits.iter()).all(|(a, b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &Split) -> bool {
        self.bits.iter().zip(other.bits.iter()).all(|(a, b)| a & b == 0)
    }

    /// Two clades are compatible when nested or disjoint.
    pub fn compatible(&self, other: &Split) -> bool {
        self.is_subset(other) || other.is_subset(self) || self.is_disjoint(other)
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().flat_map(|(w, &word)| {
            (0..64).filter(move |b| word & (1 << b) != 0).map(move |b| w * 64 + b)
        })
    }

    /// Smallest leaf index, used to order siblings deterministically.
    pub fn first(&self) -> Option<usize> {
        self.leaves().next()
    }

    pub fn labels<'a>(&self, taxa: &'a [String]) -> Vec<&'a str> {
        self.leaves().map(|i| taxa[i].as_str()).collect()
    }

    /// Re-express the split over another taxon order; `map[i]` is the new
    /// index of old leaf `i`.
    pub fn remap(&self, map: &[usize]) -> Split {
        Split::from_leaves(map.len(), self.leaves().map(|i| map[i]))
    }
}

#[derive(Debug, Clone)]
pub struct PhyloTree {
    taxa: Arc<[String]>,
    nodes: Vec<Node>,
    root: usize,
}

impl PartialEq for PhyloTree {
    /// Structural equality up to child order.
    fn eq(&self, other: &Self) -> bool {
        if self.taxa != other.taxa {
            return false;
        }
        let mut a = self.splits_with_ages();
        let mut b = other.splits_with_ages();
        a.sort_by(|x, y| x.0.cmp(&y.0));
        b.sort_by(|x, y| x.0.cmp(&y.0));
        a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x.0 == y.0 && x.1 == y.1)
    }
}

/// Check a parent/age table against every tree invariant, returning the
/// derived children table on success.
fn check_table(
    taxa: &[String],
    parents: &[Option<usize>],
    ages: &[f64],
) -> Result<(Vec<Option<[usize; 2]>>, usize), Violation> {
    let v = taxa.len();
    if v < 2 {
        return Err(Violation::TooFewLeaves(v));
    }
    if parents.len() != ages.len() {
        return Err(Violation::TableLength { parents: parents.len(), ages: ages.len() });
    }
    let n = parents.len();
    for (node, p) in parents.iter().enumerate() {
        if let Some(p) = *p {
            if p >= n || p == node {
                return Err(Violation::BadParent { node, parent: p });
            }
        }
    }
    let mut kids: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (node, p) in parents.iter().enumerate() {
        if let Some(p) = *p {
            kids[p].push(node);
        }
    }
    for (node, k) in kids.iter().enumerate() {
        if node < v {
            if !k.is_empty() {
                return Err(Violation::LeafWithChildren { node });
            }
        } else if k.len() != 2 {
            return Err(Violation::NonBinary { node, children: k.len() });
        }
    }
    if n != 2 * v - 1 {
        return Err(Violation::NodeCount { leaves: v, expected: 2 * v - 1, found: n });
    }
    let roots: Vec<usize> = (0..n).filter(|&i| parents[i].is_none()).collect();
    if roots.len() != 1 {
        return Err(Violation::RootCount(roots.len()));
    }
    let root = roots[0];
    for start in 0..n {
        let mut cur = start;
        let mut steps = 0;
        while let Some(p) = parents[cur] {
            cur = p;
            steps += 1;
            if steps > n {
                return Err(Violation::Disconnected(start));
            }
        }
    }
    for (node, age) in ages.iter().enumerate() {
        if !age.is_finite() {
            return Err(Violation::NonFiniteAge { node });
        }
    }
    if ages[root] != 0.0 {
        return Err(Violation::RootAge(ages[root]));
    }
    for (node, &age) in ages.iter().enumerate().take(v) {
        if age != LEAF_AGE {
            return Err(Violation::LeafAge { node, age });
        }
    }
    for (node, p) in parents.iter().enumerate() {
        if let Some(p) = *p {
            if ages[p] >= ages[node] {
                return Err(Violation::NonPositiveBranch { node, parent_age: ages[p], age: ages[node] });
            }
        }
    }
    let mut seen = std::collections::HashSet::new();
    for label in taxa {
        if !seen.insert(label.as_str()) {
            return Err(Violation::DuplicateLabel(label.clone()));
        }
    }
    let children = kids
        .into_iter()
        .map(|k| if k.is_empty() { None } else { Some([k[0], k[1]]) })
        .collect();
    Ok((children, root))
}

/// Validate a raw parent/age table. Leaf `i` must be node `i`.
pub fn validate_table(taxa: &[String], parents: &[Option<usize>], ages: &[f64]) -> Result<(), Violation> {
    check_table(taxa, parents, ages).map(|_| ())
}

impl PhyloTree {
    /// Build a tree from a parent table and an age table.
    pub fn from_parent_table(
        taxa: impl Into<Arc<[String]>>,
        parents: &[Option<usize>],
        ages: &[f64],
    ) -> Result<Self, Violation> {
        let taxa = taxa.into();
        let (children, root) = check_table(&taxa, parents, ages)?;
        let nodes = parents
            .iter()
            .zip(children)
            .zip(ages)
            .map(|((&parent, children), &age)| Node { parent, children, age })
            .collect();
        Ok(PhyloTree { taxa, nodes, root })
    }

    /// Re-check every invariant of this tree.
    pub fn validate(&self) -> Result<(), Violation> {
        let parents: Vec<_> = self.nodes.iter().map(|n| n.parent).collect();
        let ages: Vec<_> = self.nodes.iter().map(|n| n.age).collect();
        let (children, root) = check_table(&self.taxa, &parents, &ages)?;
        if root != self.root {
            return Err(Violation::RootCount(2));
        }
        for (i, (node, kids)) in self.nodes.iter().zip(children.iter()).enumerate() {
            let same = match (node.children, kids) {
                (None, None) => true,
                (Some([a, b]), Some([c, d])) => (a == *c && b == *d) || (a == *d && b == *c),
                _ => false,
            };
            if !same {
                return Err(Violation::NonBinary { node: i, children: kids.map_or(0, |_| 2) });
            }
        }
        Ok(())
    }

    pub fn n_leaves(&self) -> usize {
        self.taxa.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn taxa(&self) -> &[String] {
        &self.taxa
    }

    pub fn taxa_arc(&self) -> &Arc<[String]> {
        &self.taxa
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub(crate) fn nodes_mut(&mut self) -> &mut [Node] {
        &mut self.nodes
    }

    pub(crate) fn set_root(&mut self, root: usize) {
        self.root = root;
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn age(&self, i: usize) -> f64 {
        self.nodes[i].age
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.nodes[i].parent
    }

    pub fn children(&self, i: usize) -> Option<[usize; 2]> {
        self.nodes[i].children
    }

    pub fn is_leaf(&self, i: usize) -> bool {
        i < self.taxa.len()
    }

    pub fn sibling(&self, i: usize) -> Option<usize> {
        let p = self.nodes[i].parent?;
        let [a, b] = self.nodes[p].children?;
        Some(if a == i { b } else { a })
    }

    /// Length of the branch above node `i` (0 for the root).
    pub fn branch_length(&self, i: usize) -> f64 {
        match self.nodes[i].parent {
            Some(p) => self.nodes[i].age - self.nodes[p].age,
            None => 0.0,
        }
    }

    pub fn total_branch_length(&self) -> f64 {
        (0..self.nodes.len()).map(|i| self.branch_length(i)).sum()
    }

    /// Internal node indices, root included.
    pub fn internal_nodes(&self) -> std::ops::Range<usize> {
        self.taxa.len()..self.nodes.len()
    }

    pub fn is_ancestor(&self, anc: usize, mut node: usize) -> bool {
        while let Some(p) = self.nodes[node].parent {
            if p == anc {
                return true;
            }
            node = p;
        }
        false
    }

    /// Nodes ordered children-before-parents, children visited in stored order.
    pub fn postorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(self.root, false)];
        while let Some((n, expanded)) = stack.pop() {
            match (self.nodes[n].children, expanded) {
                (Some([a, b]), false) => {
                    stack.push((n, true));
                    stack.push((b, false));
                    stack.push((a, false));
                }
                _ => out.push(n),
            }
        }
        out
    }

    /// Leaves in left-to-right order of the stored child order.
    pub fn leaf_order(&self) -> Vec<usize> {
        self.postorder().into_iter().filter(|&n| self.is_leaf(n)).collect()
    }

    /// Clade below every node, indexed by node.
    pub fn clades(&self) -> Vec<Split> {
        let v = self.n_leaves();
        let mut out = vec![Split::empty(v); self.nodes.len()];
        for n in self.postorder() {
            match self.nodes[n].children {
                None => out[n].insert(n),
                Some([a, b]) => {
                    let mut s = out[a].clone();
                    s.union_with(&out[b]);
                    out[n] = s;
                }
            }
        }
        out
    }

    /// One split per non-root internal node.
    pub fn splits(&self) -> BTreeSet<Split> {
        self.splits_with_ages().into_iter().map(|(s, _)| s).collect()
    }

    /// Non-root internal clades paired with the age of the node defining them.
    pub fn splits_with_ages(&self) -> Vec<(Split, f64)> {
        let clades = self.clades();
        self.internal_nodes()
            .filter(|&n| n != self.root)
            .map(|n| (clades[n].clone(), self.nodes[n].age))
            .collect()
    }

    /// `[Σ]_vu` = age of the most recent common ancestor of leaves `v`, `u`.
    pub fn correlation_matrix(&self) -> DMatrix<f64> {
        let v = self.n_leaves();
        let mut sigma = DMatrix::zeros(v, v);
        let mut below: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for n in self.postorder() {
            match self.nodes[n].children {
                None => below[n].push(n),
                Some([a, b]) => {
                    let age = self.nodes[n].age;
                    let left = std::mem::take(&mut below[a]);
                    let right = std::mem::take(&mut below[b]);
                    for &i in &left {
                        for &j in &right {
                            sigma[(i, j)] = age;
                            sigma[(j, i)] = age;
                        }
                    }
                    let mut all = left;
                    all.extend(right);
                    below[n] = all;
                }
            }
        }
        for i in 0..v {
            sigma[(i, i)] = LEAF_AGE;
        }
        sigma
    }

    /// Age of the most recent common ancestor of two nodes.
    pub fn mrca_age(&self, a: usize, b: usize) -> f64 {
        let mut anc = vec![false; self.nodes.len()];
        let mut cur = Some(a);
        while let Some(c) = cur {
            anc[c] = true;
            cur = self.nodes[c].parent;
        }
        let mut cur = b;
        loop {
            if anc[cur] {
                return self.nodes[cur].age;
            }
            cur = self.nodes[cur].parent.expect("nodes share a root");
        }
    }

    /// The same tree with leaves renumbered so that leaf `i` carries `order[i]`.
    pub fn with_taxon_order(&self, order: &[String]) -> Result<PhyloTree> {
        if order == &*self.taxa {
            return Ok(self.clone());
        }
        let map = taxon_map(&self.taxa, order)?;
        let v = self.n_leaves();
        let relabel = |i: usize| if i < v { map[i] } else { i };
        let mut nodes = self.nodes.clone();
        for (i, node) in self.nodes.iter().enumerate() {
            let mut n = *node;
            n.parent = node.parent.map(relabel);
            n.children = node.children.map(|[a, b]| [relabel(a), relabel(b)]);
            nodes[relabel(i)] = n;
        }
        Ok(PhyloTree { taxa: Arc::from(order.to_vec()), nodes, root: relabel(self.root) })
    }
}

/// `map[i]` = position in `target` of `source[i]`; errors unless the two
/// label lists are permutations of each other.
pub fn taxon_map(source: &[String], target: &[String]) -> Result<Vec<usize>> {
    if source.len() != target.len() {
        return Err(Error::LeafSetMismatch(format!(
            "{} leaves vs {} leaves",
            source.len(),
            target.len()
        )));
    }
    let index: HashMap<&str, usize> = target.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    source
        .iter()
        .map(|s| {
            index
                .get(s.as_str())
                .copied()
                .ok_or_else(|| Error::LeafSetMismatch(format!("leaf `{s}` missing from the other tree")))
        })
        .collect()
}

/// Robinson–Foulds distance: size of the symmetric difference of the two
/// split sets, optionally divided by `2(V-2)`.
pub fn rf_distance(t1: &PhyloTree, t2: &PhyloTree, normalized: bool) -> Result<f64> {
    let t2 = t2.with_taxon_order(t1.taxa())?;
    let s1 = t1.splits();
    let s2 = t2.splits();
    let raw = s1.symmetric_difference(&s2).count() as f64;
    Ok(if normalized { normalize_rf(raw, t1.n_leaves()) } else { raw })
}

pub(crate) fn normalize_rf(raw: f64, n_leaves: usize) -> f64 {
    if n_leaves <= 2 {
        0.0
    } else {
        raw / (2.0 * (n_leaves - 2) as f64)
    }
}

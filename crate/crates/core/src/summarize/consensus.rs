use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::newick::{format_label, format_length};
use crate::tree::{normalize_rf, PhyloTree, Split};

/// Node of a possibly multifurcating consensus tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusNode {
    pub clade: Split,
    /// Fraction of samples containing the clade; 1 for the root and leaves.
    pub support: f64,
    /// Mean age over the supporting samples.
    pub age: f64,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// Majority-threshold consensus. Node 0 is the root, nodes `1..=V` are the
/// leaves in taxon order, the rest are the retained clades.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusTree {
    taxa: Arc<[String]>,
    nodes: Vec<ConsensusNode>,
    threshold: f64,
    n_samples: usize,
}

/// Bring every sample onto the taxon order of the first.
pub(crate) fn aligned(samples: &[PhyloTree]) -> Result<Vec<PhyloTree>> {
    let first = samples.first().ok_or_else(|| Error::Summary("no tree samples".into()))?;
    samples.iter().map(|t| t.with_taxon_order(first.taxa())).collect()
}

/// Frequency and summed age of every non-root clade over the samples.
pub fn split_counts(samples: &[PhyloTree]) -> Result<HashMap<Split, (usize, f64)>> {
    let samples = aligned(samples)?;
    let mut counts: HashMap<Split, (usize, f64)> = HashMap::new();
    for tree in &samples {
        for (split, age) in tree.splits_with_ages() {
            let e = counts.entry(split).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += age;
        }
    }
    Ok(counts)
}

/// Keep the clades found in more than a fraction `threshold` of the samples
/// and assemble them into a tree.
pub fn consensus(samples: &[PhyloTree], threshold: f64) -> Result<ConsensusTree> {
    if !(0.5..1.0).contains(&threshold) {
        return Err(Error::InvalidParameter(format!("consensus threshold must lie in [0.5, 1), got {threshold}")));
    }
    let counts = split_counts(samples)?;
    let taxa = samples[0].taxa_arc().clone();
    let v = taxa.len();
    let n = samples.len();

    let mut retained: Vec<(Split, f64, f64)> = counts
        .into_iter()
        .filter(|(_, (c, _))| *c as f64 > threshold * n as f64)
        .map(|(s, (c, sum))| (s, c as f64 / n as f64, sum / c as f64))
        .collect();
    // Larger clades first so every parent exists before its children; ties
    // broken by content for a deterministic layout.
    retained.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
    for (i, (a, ..)) in retained.iter().enumerate() {
        for (b, ..) in &retained[..i] {
            if !a.compatible(b) {
                return Err(Error::Summary("retained clades are incompatible".into()));
            }
        }
    }

    let root_clade = Split::from_leaves(v, 0..v);
    let mut nodes = vec![ConsensusNode { clade: root_clade, support: 1.0, age: 0.0, parent: None, children: vec![] }];
    for leaf in 0..v {
        nodes.push(ConsensusNode {
            clade: Split::from_leaves(v, [leaf]),
            support: 1.0,
            age: 1.0,
            parent: None,
            children: vec![],
        });
    }
    let internal_start = nodes.len();
    for (clade, support, age) in retained {
        // the smallest already-placed clade containing this one
        let parent = (internal_start..nodes.len())
            .rev()
            .find(|&j| clade.is_subset(&nodes[j].clade))
            .unwrap_or(0);
        nodes.push(ConsensusNode { clade, support, age, parent: Some(parent), children: vec![] });
    }
    for leaf in 0..v {
        let parent = (internal_start..nodes.len())
            .rev()
            .find(|&j| nodes[j].clade.contains(leaf))
            .unwrap_or(0);
        nodes[1 + leaf].parent = Some(parent);
    }
    for i in 1..nodes.len() {
        let p = nodes[i].parent.expect("non-root node has a parent");
        nodes[p].children.push(i);
    }
    for i in 0..nodes.len() {
        let mut children = std::mem::take(&mut nodes[i].children);
        children.sort_by_key(|&c| nodes[c].clade.first());
        nodes[i].children = children;
    }
    Ok(ConsensusTree { taxa, nodes, threshold, n_samples: n })
}

impl ConsensusTree {
    pub fn taxa(&self) -> &[String] {
        &self.taxa
    }

    pub fn nodes(&self) -> &[ConsensusNode] {
        &self.nodes
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_leaves(&self) -> usize {
        self.taxa.len()
    }

    /// Node index of leaf `i`.
    pub fn leaf_node(&self, leaf: usize) -> usize {
        1 + leaf
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        (1..=self.n_leaves()).contains(&node)
    }

    /// Retained clades with their supports.
    pub fn splits(&self) -> Vec<(&Split, f64)> {
        self.nodes[1 + self.n_leaves()..].iter().map(|n| (&n.clade, n.support)).collect()
    }

    pub fn is_binary(&self) -> bool {
        self.nodes.len() == 2 * self.n_leaves() - 1
    }

    /// Leaf indices in left-to-right drawing order.
    pub fn leaf_order(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_leaves());
        let mut stack = vec![0];
        while let Some(n) = stack.pop() {
            if self.is_leaf(n) {
                out.push(n - 1);
            }
            stack.extend(self.nodes[n].children.iter().rev());
        }
        out
    }

    /// Robinson–Foulds distance between the retained clades and the splits of
    /// `tree`, normalized by `2(V-2)` when asked.
    pub fn rf_distance(&self, tree: &PhyloTree, normalized: bool) -> Result<f64> {
        let tree = tree.with_taxon_order(&self.taxa)?;
        let mine: BTreeSet<Split> = self.splits().into_iter().map(|(s, _)| s.clone()).collect();
        let raw = mine.symmetric_difference(&tree.splits()).count() as f64;
        Ok(if normalized { normalize_rf(raw, self.n_leaves()) } else { raw })
    }

    /// Newick with mean branch lengths and `[&support=...]` comments on the
    /// retained clades. Lengths are clamped at zero where averaging over
    /// different sample subsets puts a child above its parent.
    pub fn to_newick(&self) -> String {
        let mut out = String::new();
        self.write_node(0, &mut out);
        out.push(';');
        out
    }

    fn write_node(&self, n: usize, out: &mut String) {
        let node = &self.nodes[n];
        if self.is_leaf(n) {
            out.push_str(&format_label(&self.taxa[n - 1]));
        } else {
            out.push('(');
            for (i, &c) in node.children.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                self.write_node(c, out);
            }
            out.push(')');
            if n != 0 {
                out.push_str(&format!("[&support={}]", format_length(node.support)));
            }
        }
        if let Some(p) = node.parent {
            let length = (node.age - self.nodes[p].age).max(0.0);
            out.push(':');
            out.push_str(&format_length(length));
        }
    }

    /// The consensus as a binary tree, when it is fully resolved.
    pub fn to_tree(&self) -> Option<PhyloTree> {
        if !self.is_binary() {
            return None;
        }
        let v = self.n_leaves();
        // consensus node -> tree node: leaves keep their index, internal
        // nodes follow after them
        let index = |n: usize| if self.is_leaf(n) { n - 1 } else if n == 0 { v } else { n };
        let mut parents = vec![None; 2 * v - 1];
        let mut ages = vec![0.0; 2 * v - 1];
        for (n, node) in self.nodes.iter().enumerate() {
            parents[index(n)] = node.parent.map(index);
            ages[index(n)] = node.age;
        }
        PhyloTree::from_parent_table(self.taxa.to_vec(), &parents, &ages).ok()
    }
}

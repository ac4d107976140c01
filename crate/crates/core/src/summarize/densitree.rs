use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::newick::to_newick_ordered;
use crate::tree::PhyloTree;

/// One node of one tree in the overlay layout.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutRow {
    pub tree: usize,
    pub node: usize,
    /// Leaf label, empty for internal nodes.
    pub label: String,
    pub parent: Option<usize>,
    /// Node age.
    pub x: f64,
    /// Leaf rank in the shared order; internal nodes sit at the mean of
    /// their children.
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensiTree {
    pub order: Vec<String>,
    pub newick: Vec<String>,
    pub layout: Vec<LayoutRow>,
}

/// Lay out every sample against the shared leaf `order` (labels, left to
/// right) so the trees can be drawn on top of each other.
pub fn densitree_export(samples: &[PhyloTree], order: &[String]) -> Result<DensiTree> {
    let first = samples.first().ok_or_else(|| Error::Summary("no tree samples".into()))?;
    let rank_of = crate::tree::taxon_map(first.taxa(), order)?;
    let mut newick = Vec::with_capacity(samples.len());
    let mut layout = Vec::new();
    for (t, sample) in samples.iter().enumerate() {
        let tree = sample.with_taxon_order(first.taxa())?;
        let mut y = vec![0.0; tree.n_nodes()];
        let mut key = vec![usize::MAX; tree.n_nodes()];
        for n in tree.postorder() {
            match tree.children(n) {
                None => {
                    y[n] = rank_of[n] as f64;
                    key[n] = rank_of[n];
                }
                Some([a, b]) => {
                    y[n] = 0.5 * (y[a] + y[b]);
                    key[n] = key[a].min(key[b]);
                }
            }
        }
        newick.push(to_newick_ordered(&tree, |_, [a, b]| if key[a] <= key[b] { [a, b] } else { [b, a] }));
        for n in 0..tree.n_nodes() {
            layout.push(LayoutRow {
                tree: t,
                node: n,
                label: if tree.is_leaf(n) { tree.taxa()[n].clone() } else { String::new() },
                parent: tree.parent(n),
                x: tree.age(n),
                y: y[n],
            });
        }
    }
    Ok(DensiTree { order: order.to_vec(), newick, layout })
}

impl DensiTree {
    /// One Newick per line.
    pub fn newick_text(&self) -> String {
        let mut out = String::new();
        for line in &self.newick {
            out.push_str(line);
            out.push('\n');
        }
        out
    }

    /// Tab-separated `tree node label parent x y`, parent `-1` at the root.
    pub fn layout_tsv(&self) -> String {
        let mut out = String::from("tree\tnode\tlabel\tparent\tx\ty\n");
        for r in &self.layout {
            let parent = r.parent.map_or("-1".to_string(), |p| p.to_string());
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}", r.tree, r.node, r.label, parent, r.x, r.y);
        }
        out
    }
}

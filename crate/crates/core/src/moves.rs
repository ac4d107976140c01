//! Symmetric proposal kernels on ultrametric trees.
//!
//! Every kernel draws its random choices from candidate sets whose size is
//! the same before and after the move, so `q(t -> t') = q(t' -> t)`.
//! Draws that cannot produce a valid tree come back with `feasible = false`
//! and should be treated as a rejected no-op.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tree::{Node, PhyloTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    TipsInterchange,
    SubtreeExchange,
    NodeAgeMove,
    Spr,
    LocalSpr,
}

impl MoveKind {
    pub const ALL: [MoveKind; 5] =
        [MoveKind::TipsInterchange, MoveKind::SubtreeExchange, MoveKind::NodeAgeMove, MoveKind::Spr, MoveKind::LocalSpr];

    pub fn name(self) -> &'static str {
        match self {
            MoveKind::TipsInterchange => "tips_interchange",
            MoveKind::SubtreeExchange => "subtree_exchange",
            MoveKind::NodeAgeMove => "node_age_move",
            MoveKind::Spr => "spr",
            MoveKind::LocalSpr => "local_spr",
        }
    }
}

#[derive(Debug, Clone)]
pub struct MoveOutcome {
    pub proposed: PhyloTree,
    pub feasible: bool,
}

impl MoveOutcome {
    fn infeasible(tree: &PhyloTree) -> Self {
        MoveOutcome { proposed: tree.clone(), feasible: false }
    }

    fn ok(tree: PhyloTree) -> Self {
        debug_assert!(tree.validate().is_ok(), "move produced an invalid tree: {:?}", tree.validate());
        MoveOutcome { proposed: tree, feasible: true }
    }
}

fn replace_child(nodes: &mut [Node], parent: usize, old: usize, new: usize) {
    let kids = nodes[parent].children.as_mut().expect("parent is internal");
    if kids[0] == old {
        kids[0] = new;
    } else {
        debug_assert_eq!(kids[1], old);
        kids[1] = new;
    }
}

/// Uniform draw of an ordered pair of distinct indices below `n`.
fn distinct_pair(n: usize, rng: &mut impl Rng) -> (usize, usize) {
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

/// Uniform draw among the `2V-2` non-root nodes.
fn non_root_node(tree: &PhyloTree, rng: &mut impl Rng) -> usize {
    let n = rng.random_range(0..tree.n_nodes() - 1);
    if n >= tree.root() {
        n + 1
    } else {
        n
    }
}

/// Put `a` where `b` hangs and `b` where `a` hangs. Nodes must not be nested.
fn swap_positions(nodes: &mut [Node], a: usize, b: usize) {
    let pa = nodes[a].parent.expect("non-root");
    let pb = nodes[b].parent.expect("non-root");
    if pa == pb {
        let kids = nodes[pa].children.as_mut().unwrap();
        kids.swap(0, 1);
    } else {
        replace_child(nodes, pa, a, b);
        replace_child(nodes, pb, b, a);
        nodes[a].parent = Some(pb);
        nodes[b].parent = Some(pa);
    }
}

fn tips_interchange(tree: &PhyloTree, rng: &mut impl Rng) -> MoveOutcome {
    let (i, j) = distinct_pair(tree.n_leaves(), rng);
    let mut t = tree.clone();
    swap_positions(t.nodes_mut(), i, j);
    MoveOutcome::ok(t)
}

fn subtree_exchange(tree: &PhyloTree, rng: &mut impl Rng) -> MoveOutcome {
    let n = tree.n_nodes() - 1;
    let (i, j) = distinct_pair(n, rng);
    let pick = |k: usize| if k >= tree.root() { k + 1 } else { k };
    let (x, y) = (pick(i), pick(j));
    if tree.is_ancestor(x, y) || tree.is_ancestor(y, x) {
        return MoveOutcome::infeasible(tree);
    }
    let px = tree.parent(x).unwrap();
    let py = tree.parent(y).unwrap();
    if tree.age(px) >= tree.age(y) || tree.age(py) >= tree.age(x) {
        return MoveOutcome::infeasible(tree);
    }
    let mut t = tree.clone();
    swap_positions(t.nodes_mut(), x, y);
    MoveOutcome::ok(t)
}

/// Fold `x` into `(lo, hi)` by repeated reflection at the boundaries.
pub fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    let mut y = (x - lo).rem_euclid(2.0 * width);
    if y > width {
        y = 2.0 * width - y;
    }
    lo + y
}

fn node_age_move(tree: &PhyloTree, rng: &mut impl Rng, age_window: f64) -> MoveOutcome {
    let v = tree.n_leaves();
    if v < 3 {
        return MoveOutcome::infeasible(tree);
    }
    let k = rng.random_range(0..v - 2);
    let node = {
        let n = v + k;
        if n >= tree.root() {
            n + 1
        } else {
            n
        }
    };
    let lo = tree.age(tree.parent(node).unwrap());
    let [a, b] = tree.children(node).unwrap();
    let hi = tree.age(a).min(tree.age(b));
    let step = rng.random_range(-age_window..age_window);
    let age = reflect(tree.age(node) + step, lo, hi);
    if !(age > lo && age < hi) {
        return MoveOutcome::infeasible(tree);
    }
    let mut t = tree.clone();
    t.nodes_mut()[node].age = age;
    MoveOutcome::ok(t)
}

/// A tree with `x` and its parent node lifted out. `p` keeps `x` as one
/// child; its other slot is rewired when regrafting.
struct Pruned {
    tree: PhyloTree,
    x: usize,
    p: usize,
    /// Slot of `x` among the children of `p`.
    slot: usize,
    sibling: usize,
    grandparent: Option<usize>,
}

fn prune(tree: &PhyloTree, x: usize) -> Pruned {
    let p = tree.parent(x).expect("non-root");
    let s = tree.sibling(x).unwrap();
    let g = tree.parent(p);
    let slot = if tree.children(p).unwrap()[0] == x { 0 } else { 1 };
    let mut t = tree.clone();
    {
        let nodes = t.nodes_mut();
        nodes[s].parent = g;
        if let Some(g) = g {
            replace_child(nodes, g, p, s);
        }
        nodes[p].parent = None;
    }
    if g.is_none() {
        t.set_root(s);
    }
    Pruned { tree: t, x, p, slot, sibling: s, grandparent: g }
}

impl Pruned {
    /// Nodes of the remaining tree whose branch spans age `tau`; the branch
    /// above the remaining root spans everything younger than that root.
    fn crossing_edges(&self, tau: f64) -> Vec<usize> {
        let t = &self.tree;
        let mut out = Vec::new();
        let mut stack = vec![t.root()];
        while let Some(c) = stack.pop() {
            let above = t.parent(c).map_or(f64::NEG_INFINITY, |q| t.age(q));
            if above < tau && tau < t.age(c) {
                out.push(c);
            } else if let Some([a, b]) = t.children(c) {
                stack.push(b);
                stack.push(a);
            }
        }
        out
    }

    fn regraft(mut self, c: usize) -> PhyloTree {
        let q = self.tree.parent(c);
        let (x, p, slot) = (self.x, self.p, self.slot);
        {
            let nodes = self.tree.nodes_mut();
            let mut kids = [c, c];
            kids[slot] = x;
            nodes[p].children = Some(kids);
            nodes[p].parent = q;
            nodes[c].parent = Some(p);
            if let Some(q) = q {
                replace_child(nodes, q, c, p);
            }
        }
        if q.is_none() {
            self.tree.set_root(p);
        }
        self.tree
    }
}

fn spr(tree: &PhyloTree, rng: &mut impl Rng) -> MoveOutcome {
    let x = non_root_node(tree, rng);
    let pruned = prune(tree, x);
    let tau = tree.age(pruned.p);
    let candidates = pruned.crossing_edges(tau);
    if candidates.is_empty() {
        return MoveOutcome::infeasible(tree);
    }
    let c = candidates[rng.random_range(0..candidates.len())];
    MoveOutcome::ok(pruned.regraft(c))
}

/// SPR restricted to the branches hanging directly from the former
/// grandparent of the pruned subtree: its old sibling, or the sibling's
/// sibling when that branch spans the attachment age.
fn local_spr(tree: &PhyloTree, rng: &mut impl Rng) -> MoveOutcome {
    let x = non_root_node(tree, rng);
    let pruned = prune(tree, x);
    let Some(g) = pruned.grandparent else {
        return MoveOutcome::infeasible(tree);
    };
    let tau = tree.age(pruned.p);
    let [a, b] = pruned.tree.children(g).unwrap();
    let uncle = if a == pruned.sibling { b } else { a };
    let mut candidates = vec![pruned.sibling];
    if pruned.tree.age(uncle) > tau {
        candidates.push(uncle);
    }
    let c = candidates[rng.random_range(0..candidates.len())];
    MoveOutcome::ok(pruned.regraft(c))
}

/// Apply one kernel of the given kind.
pub fn propose(tree: &PhyloTree, kind: MoveKind, rng: &mut impl Rng, age_window: f64) -> Result<MoveOutcome> {
    tree.validate()?;
    Ok(propose_unchecked(tree, kind, rng, age_window))
}

/// [`propose`] without re-validating the input; for trees already known to
/// be valid.
pub fn propose_unchecked(tree: &PhyloTree, kind: MoveKind, rng: &mut impl Rng, age_window: f64) -> MoveOutcome {
    match kind {
        MoveKind::TipsInterchange => tips_interchange(tree, rng),
        MoveKind::SubtreeExchange => subtree_exchange(tree, rng),
        MoveKind::NodeAgeMove => node_age_move(tree, rng, age_window),
        MoveKind::Spr => spr(tree, rng),
        MoveKind::LocalSpr => local_spr(tree, rng),
    }
}

/// Draw a kind uniformly and apply it.
pub fn propose_random(tree: &PhyloTree, rng: &mut impl Rng, age_window: f64) -> Result<(MoveKind, MoveOutcome)> {
    let kind = MoveKind::ALL[rng.random_range(0..MoveKind::ALL.len())];
    Ok((kind, propose(tree, kind, rng, age_window)?))
}

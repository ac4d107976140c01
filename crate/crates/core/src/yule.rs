//! Pure-birth (Yule) tree prior on trees of height 1.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::tree::{PhyloTree, LEAF_AGE};

/// Which pure-birth density the tree prior uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YuleForm {
    /// Pure-birth process conditioned on `V` tips and crown age 1: the
    /// `V-2` non-root split ages are i.i.d. with density
    /// `b e^{bt} / (e^b - 1)` on `(0, 1)`, and ranked labelled histories are
    /// uniform. Integrates to one for every `b`.
    #[default]
    Conditioned,
    /// The unnormalized kernel `b^(V-2) exp(-b L)`.
    Kernel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YuleParams {
    b: f64,
}

impl YuleParams {
    pub fn new(b: f64) -> Result<Self> {
        if b > 0.0 && b.is_finite() {
            Ok(YuleParams { b })
        } else {
            Err(Error::InvalidParameter(format!("birth rate must be positive, got {b}")))
        }
    }

    pub fn b(&self) -> f64 {
        self.b
    }
}

fn check_rate(b: f64) -> Result<()> {
    YuleParams::new(b).map(|_| ())
}

/// `(V-2) log b - b L(tree)` with `L` the total branch length.
pub fn yule_log_density(tree: &PhyloTree, b: f64) -> Result<f64> {
    check_rate(b)?;
    let v = tree.n_leaves() as f64;
    Ok((v - 2.0) * b.ln() - b * tree.total_branch_length())
}

/// `log(e^b - 1)` without overflow.
fn log_expm1(b: f64) -> f64 {
    if b > 1.0 {
        b + (-(-b).exp()).ln_1p()
    } else {
        b.exp_m1().ln()
    }
}

/// Log number of ranked labelled histories, `V!(V-1)!/2^(V-1)`.
pub fn ln_ranked_histories(n_leaves: usize) -> f64 {
    let v = n_leaves as f64;
    ln_gamma(v + 1.0) + ln_gamma(v) - (v - 1.0) * std::f64::consts::LN_2
}

/// Log of the integral of the kernel over all trees with `n_leaves` tips
/// and height 1: `log H_V - log (V-2)! - 2b + (V-2) log(1 - e^{-b})`.
pub fn yule_log_normalizer(n_leaves: usize, b: f64) -> Result<f64> {
    check_rate(b)?;
    if n_leaves < 2 {
        return Err(Error::InvalidParameter("need at least 2 leaves".into()));
    }
    let k = (n_leaves - 2) as f64;
    Ok(ln_ranked_histories(n_leaves) - ln_gamma(k + 1.0) - 2.0 * b + k * (-(-b).exp()).ln_1p())
}

/// Tree prior log density in the requested form.
pub fn tree_log_prior(tree: &PhyloTree, b: f64, form: YuleForm) -> Result<f64> {
    match form {
        YuleForm::Kernel => yule_log_density(tree, b),
        YuleForm::Conditioned => {
            check_rate(b)?;
            let k = (tree.n_leaves() - 2) as f64;
            let sum_ages: f64 = tree.internal_nodes().map(|n| tree.age(n)).sum();
            Ok(k * (b.ln() - log_expm1(b)) + b * sum_ages + ln_gamma(k + 1.0)
                - ln_ranked_histories(tree.n_leaves()))
        }
    }
}

/// Draw a non-root split age from `b e^{bt}/(e^b - 1)` on `(0,1)`.
fn draw_split_age(b: f64, rng: &mut impl Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        // time before present x has density proportional to e^{-bx} on (0,1)
        let x = -(-u * -(-b).exp_m1()).ln_1p() / b;
        let t = LEAF_AGE - x;
        if t > 0.0 && t < LEAF_AGE {
            return t;
        }
    }
}

/// Sample a tree with `n_leaves` labelled tips from the crown-age-conditioned
/// pure-birth process: split ages i.i.d. as in [`YuleForm::Conditioned`],
/// lineages split uniformly at random in age order, and taxa are attached to
/// the final lineages by a uniform random permutation.
pub fn sample_yule_tree(taxa: impl Into<Arc<[String]>>, b: f64, rng: &mut impl Rng) -> Result<PhyloTree> {
    check_rate(b)?;
    let taxa: Arc<[String]> = taxa.into();
    let v = taxa.len();
    if v < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 leaves, got {v}")));
    }
    let mut split_ages: Vec<f64> = (0..v - 2).map(|_| draw_split_age(b, rng)).collect();
    split_ages.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let n = 2 * v - 1;
    let mut parents = vec![None; n];
    let mut ages = vec![LEAF_AGE; n];
    // Lineages are identified by the internal node they descend from; the
    // pending entries are split into leaves at the end.
    let root = v;
    ages[root] = 0.0;
    let mut lineages: Vec<usize> = vec![root, root];
    for (i, &age) in split_ages.iter().enumerate() {
        let node = v + 1 + i;
        let pick = rng.random_range(0..lineages.len());
        parents[node] = Some(lineages[pick]);
        ages[node] = age;
        lineages[pick] = node;
        lineages.push(node);
    }
    let mut leaves: Vec<usize> = (0..v).collect();
    leaves.shuffle(rng);
    for (leaf, parent) in leaves.into_iter().zip(lineages) {
        parents[leaf] = Some(parent);
    }
    Ok(PhyloTree::from_parent_table(taxa, &parents, &ages)?)
}

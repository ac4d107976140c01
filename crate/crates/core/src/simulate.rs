//! Forward simulation from the model and preset scenarios.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::TreeCovariance;
use crate::model::{distance_matrix, expit, LatentFeatures, NetworkData};
use crate::newick::from_newick;
use crate::tree::PhyloTree;
use crate::yule::sample_yule_tree;

/// `v1, ..., vV`.
pub fn default_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("v{i}")).collect()
}

/// Draw every row of every `Z^(m)` from `N_V(mu_k 1, sigma2 Σ)`, keeping the
/// centers already stored in `features`.
pub fn draw_features(features: &mut LatentFeatures, sigma2: f64, cov: &TreeCovariance, rng: &mut impl Rng) {
    let v = features.n_nodes();
    let l = cov.factor();
    let sd = sigma2.sqrt();
    let mut eps = vec![0.0; v];
    for m in 0..features.n_networks() {
        for k in 0..features.dim() {
            for e in eps.iter_mut() {
                *e = StandardNormal.sample(rng);
            }
            let mu = features.mu(m)[k];
            for i in 0..v {
                let x: f64 = (0..=i).map(|j| l[(i, j)] * eps[j]).sum();
                features.set(m, k, i, mu + sd * x);
            }
        }
    }
}

/// One adjacency matrix per network with edges drawn independently with
/// probability `expit(a - d_vu)`.
pub fn sample_networks(labels: Vec<String>, a: f64, features: &LatentFeatures, rng: &mut impl Rng) -> Result<NetworkData> {
    let v = features.n_nodes();
    if labels.len() != v {
        return Err(Error::DimensionMismatch(format!("{} labels for {v} nodes", labels.len())));
    }
    let adjacency = (0..features.n_networks())
        .map(|m| {
            let d = distance_matrix(features.z(m), features.dim());
            let mut adj = vec![0u8; v * v];
            for i in 0..v {
                for j in i + 1..v {
                    let edge = rng.random::<f64>() < expit(a - d[(i, j)]);
                    adj[i * v + j] = u8::from(edge);
                    adj[j * v + i] = u8::from(edge);
                }
            }
            adj
        })
        .collect();
    NetworkData::new(labels, adjacency)
}

/// Networks, features and tree drawn from the model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerativeSpec {
    pub n_nodes: usize,
    pub k: usize,
    pub n_networks: usize,
    /// Yule rate used when no tree is given.
    pub b: f64,
    /// Fixed truth tree in Newick; its leaf labels become the node labels.
    pub tree: Option<String>,
    pub sigma2: f64,
    pub a: f64,
    /// Centers per network; zero when absent.
    pub mu: Option<Vec<Vec<f64>>>,
}

impl Default for GenerativeSpec {
    fn default() -> Self {
        scenario_two()
    }
}

/// The larger simulation study: `V = 60`, `M = 30`, `K = 3`, `b = 0.6`,
/// `sigma2 = 0.6`, `a = 2.6` and zero centers.
pub fn scenario_two() -> GenerativeSpec {
    GenerativeSpec { n_nodes: 60, k: 3, n_networks: 30, b: 0.6, tree: None, sigma2: 0.6, a: 2.6, mu: None }
}

/// [`scenario_two`] on a different number of nodes and networks.
pub fn scenario_two_scaled(n_nodes: usize, n_networks: usize) -> GenerativeSpec {
    GenerativeSpec { n_nodes, n_networks, ..scenario_two() }
}

impl GenerativeSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_nodes < 2 || self.k == 0 || self.n_networks == 0 {
            return bad("need n_nodes >= 2, k >= 1 and n_networks >= 1".into());
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return bad(format!("sigma2 must be positive, got {}", self.sigma2));
        }
        if self.tree.is_none() && !(self.b > 0.0 && self.b.is_finite()) {
            return bad(format!("b must be positive, got {}", self.b));
        }
        if self.a.is_nan() {
            return bad("a is NaN".into());
        }
        if let Some(mu) = &self.mu {
            if mu.len() != self.n_networks || mu.iter().any(|r| r.len() != self.k || r.iter().any(|x| !x.is_finite())) {
                return bad(format!("mu must be {} rows of {} finite values", self.n_networks, self.k));
            }
        }
        Ok(())
    }
}

/// Edge probabilities shared by all networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbabilitySpec {
    pub n_networks: usize,
    /// Symmetric `V x V` matrix with zero diagonal.
    pub probabilities: Vec<Vec<f64>>,
}

impl ProbabilitySpec {
    pub fn validate(&self) -> Result<()> {
        let p = &self.probabilities;
        let v = p.len();
        if self.n_networks == 0 || v < 2 {
            return Err(Error::InvalidParameter("need at least one network and two nodes".into()));
        }
        for (i, row) in p.iter().enumerate() {
            if row.len() != v {
                return Err(Error::DimensionMismatch(format!("row {i} has {} entries, expected {v}", row.len())));
            }
            for (j, &x) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&x) {
                    return Err(Error::InvalidParameter(format!("probability ({i},{j}) = {x} outside [0,1]")));
                }
                if i == j && x != 0.0 {
                    return Err(Error::InvalidParameter(format!("diagonal probability ({i},{i}) must be 0")));
                }
                if x != p[j][i] {
                    return Err(Error::InvalidParameter(format!("probability matrix is not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(())
    }
}

/// `V = n_blocks * block_size` nodes in equal consecutive communities.
///
/// The defaults (five blocks, 0.6 within, 0.1 between) are illustrative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlockSpec {
    pub n_blocks: usize,
    pub block_size: usize,
    pub within: f64,
    pub between: f64,
    pub n_networks: usize,
}

impl Default for BlockSpec {
    fn default() -> Self {
        BlockSpec { n_blocks: 5, block_size: 8, within: 0.6, between: 0.1, n_networks: 10 }
    }
}

impl BlockSpec {
    pub fn block_of(&self, node: usize) -> usize {
        node / self.block_size
    }

    pub fn to_probability_spec(&self) -> ProbabilitySpec {
        let v = self.n_blocks * self.block_size;
        let probabilities = (0..v)
            .map(|i| {
                (0..v)
                    .map(|j| {
                        if i == j {
                            0.0
                        } else if self.block_of(i) == self.block_of(j) {
                            self.within
                        } else {
                            self.between
                        }
                    })
                    .collect()
            })
            .collect();
        ProbabilitySpec { n_networks: self.n_networks, probabilities }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioSpec {
    Generative(GenerativeSpec),
    ProbabilityMatrix(ProbabilitySpec),
    Blocks(BlockSpec),
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec::Generative(GenerativeSpec::default())
    }
}

/// Output of a generative run with every layer kept as ground truth.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub tree: PhyloTree,
    pub features: LatentFeatures,
    pub data: NetworkData,
}

pub fn simulate_generative(spec: &GenerativeSpec, rng: &mut impl Rng) -> Result<Simulation> {
    spec.validate()?;
    let tree = match &spec.tree {
        Some(newick) => {
            let tree = from_newick(newick, None)?;
            if tree.n_leaves() != spec.n_nodes {
                return Err(Error::DimensionMismatch(format!(
                    "truth tree has {} leaves, spec asks for {}",
                    tree.n_leaves(),
                    spec.n_nodes
                )));
            }
            tree
        }
        None => sample_yule_tree(Arc::<[String]>::from(default_labels(spec.n_nodes)), spec.b, rng)?,
    };
    let cov = TreeCovariance::new(&tree)?;
    let mut features = LatentFeatures::zeros(spec.k, spec.n_nodes, spec.n_networks);
    if let Some(mu) = &spec.mu {
        for (m, row) in mu.iter().enumerate() {
            features.mu_mut(m).copy_from_slice(row);
        }
    }
    draw_features(&mut features, spec.sigma2, &cov, rng);
    let data = sample_networks(tree.taxa().to_vec(), spec.a, &features, rng)?;
    Ok(Simulation { tree, features, data })
}

pub fn simulate_from_probability_matrix(spec: &ProbabilitySpec, rng: &mut impl Rng) -> Result<NetworkData> {
    spec.validate()?;
    let p = &spec.probabilities;
    let v = p.len();
    let adjacency = (0..spec.n_networks)
        .map(|_| {
            let mut adj = vec![0u8; v * v];
            for i in 0..v {
                for j in i + 1..v {
                    let edge = u8::from(rng.random::<f64>() < p[i][j]);
                    adj[i * v + j] = edge;
                    adj[j * v + i] = edge;
                }
            }
            adj
        })
        .collect();
    NetworkData::new(default_labels(v), adjacency)
}

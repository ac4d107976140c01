//! Densities of the model: the logistic latent space likelihood, the
//! branching Brownian motion prior on features and the parameter priors.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::TreeCovariance;
use crate::tree::PhyloTree;
use crate::yule::{tree_log_prior, YuleForm};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `M` symmetric binary adjacency matrices over the same `V` labelled nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkData {
    labels: Vec<String>,
    adjacency: Vec<Vec<u8>>,
}

impl NetworkData {
    /// `adjacency[m]` is the row-major `V x V` matrix of network `m`.
    pub fn new(labels: Vec<String>, adjacency: Vec<Vec<u8>>) -> Result<Self> {
        let v = labels.len();
        if adjacency.is_empty() {
            return Err(Error::DimensionMismatch("no networks".into()));
        }
        for (m, adj) in adjacency.iter().enumerate() {
            if adj.len() != v * v {
                return Err(Error::DimensionMismatch(format!(
                    "network {m} has {} entries, expected {v}x{v}",
                    adj.len()
                )));
            }
            for i in 0..v {
                if adj[i * v + i] != 0 {
                    return Err(Error::SelfLoop { network: m, v: i });
                }
                for j in 0..v {
                    let x = adj[i * v + j];
                    if x > 1 {
                        return Err(Error::NonBinary { network: m, v: i, u: j, value: x.to_string() });
                    }
                    if j > i && x != adj[j * v + i] {
                        return Err(Error::Asymmetric { network: m, v: i, u: j });
                    }
                }
            }
        }
        Ok(NetworkData { labels, adjacency })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn n_networks(&self) -> usize {
        self.adjacency.len()
    }

    pub fn adjacency(&self, m: usize) -> &[u8] {
        &self.adjacency[m]
    }

    pub fn edge(&self, m: usize, v: usize, u: usize) -> bool {
        self.adjacency[m][v * self.n_nodes() + u] == 1
    }

    /// Fraction of node pairs joined by an edge in network `m`.
    pub fn density(&self, m: usize) -> f64 {
        let v = self.n_nodes();
        let pairs = v * (v - 1) / 2;
        let edges: usize = self.adjacency[m].iter().map(|&x| x as usize).sum::<usize>() / 2;
        if pairs == 0 {
            0.0
        } else {
            edges as f64 / pairs as f64
        }
    }

    /// Edge density pooled over all networks.
    pub fn overall_density(&self) -> f64 {
        (0..self.n_networks()).map(|m| self.density(m)).sum::<f64>() / self.n_networks() as f64
    }
}

/// Per-network `K x V` feature matrices and `K`-vectors of centers.
///
/// Column `v` of network `m` is stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentFeatures {
    dim: usize,
    n_nodes: usize,
    z: Vec<Vec<f64>>,
    mu: Vec<Vec<f64>>,
}

impl LatentFeatures {
    pub fn zeros(dim: usize, n_nodes: usize, n_networks: usize) -> Self {
        LatentFeatures {
            dim,
            n_nodes,
            z: vec![vec![0.0; dim * n_nodes]; n_networks],
            mu: vec![vec![0.0; dim]; n_networks],
        }
    }

    /// `z[m]` holds the columns of `Z^(m)` back to back.
    pub fn from_parts(dim: usize, n_nodes: usize, z: Vec<Vec<f64>>, mu: Vec<Vec<f64>>) -> Result<Self> {
        if z.len() != mu.len() {
            return Err(Error::DimensionMismatch(format!("{} feature matrices, {} center vectors", z.len(), mu.len())));
        }
        for (zm, mm) in z.iter().zip(&mu) {
            if zm.len() != dim * n_nodes || mm.len() != dim {
                return Err(Error::DimensionMismatch("feature block has the wrong size".into()));
            }
            if zm.iter().chain(mm).any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter("non-finite latent feature".into()));
            }
        }
        Ok(LatentFeatures { dim, n_nodes, z, mu })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_networks(&self) -> usize {
        self.z.len()
    }

    pub fn z(&self, m: usize) -> &[f64] {
        &self.z[m]
    }

    pub fn z_mut(&mut self, m: usize) -> &mut [f64] {
        &mut self.z[m]
    }

    pub fn mu(&self, m: usize) -> &[f64] {
        &self.mu[m]
    }

    pub fn mu_mut(&mut self, m: usize) -> &mut [f64] {
        &mut self.mu[m]
    }

    /// Feature vector `z_v^(m)`.
    pub fn column(&self, m: usize, v: usize) -> &[f64] {
        &self.z[m][v * self.dim..(v + 1) * self.dim]
    }

    pub fn column_mut(&mut self, m: usize, v: usize) -> &mut [f64] {
        let k = self.dim;
        &mut self.z[m][v * k..(v + 1) * k]
    }

    /// Row `k` of `Z^(m)` minus `mu_k^(m)`.
    pub fn centered_row(&self, m: usize, k: usize) -> Vec<f64> {
        let mu = self.mu[m][k];
        (0..self.n_nodes).map(|v| self.z[m][v * self.dim + k] - mu).collect()
    }

    pub fn row(&self, m: usize, k: usize) -> Vec<f64> {
        (0..self.n_nodes).map(|v| self.z[m][v * self.dim + k]).collect()
    }

    pub fn set(&mut self, m: usize, k: usize, v: usize, value: f64) {
        self.z[m][v * self.dim + k] = value;
    }

    /// Multiply every feature and center by `h`.
    pub fn scale(&mut self, h: f64) {
        for x in self.z.iter_mut().flatten().chain(self.mu.iter_mut().flatten()) {
            *x *= h;
        }
    }
}

/// Fixed prior settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    /// Latent dimension `K`.
    pub k: usize,
    pub alpha_sigma: f64,
    pub beta_sigma: f64,
    pub alpha_b: f64,
    pub beta_b: f64,
    /// Prior variance of `a`.
    pub sigma_a2: f64,
    /// Prior variance of each center `mu_k^(m)`.
    pub sigma_mu2: f64,
    /// Initial variance of the log-scale step of the joint rescale move.
    pub sigma_h2: f64,
    /// Acceptance rate the adaptive proposals aim for.
    pub target_accept: f64,
    pub yule_form: YuleForm,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            k: 3,
            alpha_sigma: 1.0,
            beta_sigma: 1.0,
            alpha_b: 1.0,
            beta_b: 1.0,
            sigma_a2: 100.0,
            sigma_mu2: 1000.0,
            sigma_h2: 0.01,
            target_accept: 0.23,
            yule_form: YuleForm::Conditioned,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha_sigma", self.alpha_sigma),
            ("beta_sigma", self.beta_sigma),
            ("alpha_b", self.alpha_b),
            ("beta_b", self.beta_b),
            ("sigma_a2", self.sigma_a2),
            ("sigma_mu2", self.sigma_mu2),
            ("sigma_h2", self.sigma_h2),
        ];
        for (name, x) in positive {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {x}")));
            }
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be positive".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidParameter(format!("target_accept must lie in (0,1), got {}", self.target_accept)));
        }
        Ok(())
    }
}

/// The full parameter state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub a: f64,
    pub sigma2: f64,
    pub b: f64,
    pub tree: PhyloTree,
    pub features: LatentFeatures,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::InvalidParameter(format!("b must be positive, got {}", self.b)));
        }
        if !self.a.is_finite() {
            return Err(Error::InvalidParameter("a is not finite".into()));
        }
        self.tree.validate()?;
        if self.features.n_nodes() != self.tree.n_leaves() {
            return Err(Error::DimensionMismatch("features and tree disagree on V".into()));
        }
        Ok(())
    }
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Bernoulli log-pmf at logit `s`.
#[inline]
pub fn bernoulli_log_pmf(edge: bool, s: f64) -> f64 {
    if edge {
        -softplus(-s)
    } else {
        -softplus(s)
    }
}

pub fn expit(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn euclidean(zv: &[f64], zu: &[f64]) -> f64 {
    zv.iter().zip(zu).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// `a - ||z_v - z_u||`.
#[inline]
pub fn edge_logit(a: f64, zv: &[f64], zu: &[f64]) -> f64 {
    a - euclidean(zv, zu)
}

pub fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln()) - (x - mean) * (x - mean) / (2.0 * var)
}

pub fn log_inv_gamma(x: f64, shape: f64, scale: f64) -> f64 {
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

/// Pairwise Euclidean distances between the columns of a `K x V` matrix
/// stored column after column.
pub fn distance_matrix(z: &[f64], dim: usize) -> DMatrix<f64> {
    let v = z.len() / dim;
    let mut d = DMatrix::zeros(v, v);
    for i in 0..v {
        for j in 0..i {
            let x = euclidean(&z[i * dim..(i + 1) * dim], &z[j * dim..(j + 1) * dim]);
            d[(i, j)] = x;
            d[(j, i)] = x;
        }
    }
    d
}

fn check_dims(data: &NetworkData, features: &LatentFeatures) -> Result<()> {
    if data.n_networks() != features.n_networks() || data.n_nodes() != features.n_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "data has {} networks on {} nodes, features have {} on {}",
            data.n_networks(),
            data.n_nodes(),
            features.n_networks(),
            features.n_nodes()
        )));
    }
    Ok(())
}

/// Log-likelihood of network `m` given its distance matrix.
pub fn loglik_network(data: &NetworkData, m: usize, a: f64, dist: &DMatrix<f64>) -> f64 {
    let v = data.n_nodes();
    let adj = data.adjacency(m);
    let mut total = 0.0;
    for i in 0..v {
        for j in 0..i {
            total += bernoulli_log_pmf(adj[i * v + j] == 1, a - dist[(i, j)]);
        }
    }
    total
}

/// Bernoulli log-likelihood summed over networks and unordered pairs.
pub fn loglik_networks(data: &NetworkData, a: f64, features: &LatentFeatures) -> Result<f64> {
    check_dims(data, features)?;
    Ok((0..data.n_networks())
        .map(|m| loglik_network(data, m, a, &distance_matrix(features.z(m), features.dim())))
        .sum())
}

/// Gaussian log density of every centered row under `N_V(0, sigma2 Σ)`.
pub fn bbm_log_prior_with(features: &LatentFeatures, sigma2: f64, cov: &TreeCovariance) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma2 must be positive, got {sigma2}")));
    }
    if cov.dim() != features.n_nodes() {
        return Err(Error::DimensionMismatch("tree and features disagree on V".into()));
    }
    let v = features.n_nodes() as f64;
    let rows = (features.n_networks() * features.dim()) as f64;
    let mut quad = 0.0;
    for m in 0..features.n_networks() {
        for k in 0..features.dim() {
            quad += cov.quad(&features.centered_row(m, k));
        }
    }
    Ok(-0.5 * rows * (v * (LN_2PI + sigma2.ln()) + cov.log_det()) - quad / (2.0 * sigma2))
}

pub fn bbm_log_prior(features: &LatentFeatures, sigma2: f64, tree: &PhyloTree) -> Result<f64> {
    bbm_log_prior_with(features, sigma2, &TreeCovariance::new(tree)?)
}

/// Priors of `a`, `sigma2`, the centers, the tree given `b`, and `b`.
pub fn log_priors(params: &ModelParams, hyper: &Hyperparams) -> Result<f64> {
    params.validate()?;
    let f = &params.features;
    let mu: f64 = (0..f.n_networks())
        .flat_map(|m| f.mu(m).iter().copied())
        .map(|x| log_normal(x, 0.0, hyper.sigma_mu2))
        .sum();
    Ok(log_normal(params.a, 0.0, hyper.sigma_a2)
        + log_inv_gamma(params.sigma2, hyper.alpha_sigma, hyper.beta_sigma)
        + mu
        + tree_log_prior(&params.tree, params.b, hyper.yule_form)?
        + log_inv_gamma(params.b, hyper.alpha_b, hyper.beta_b))
}

/// Unnormalized joint log posterior.
pub fn log_posterior(data: &NetworkData, params: &ModelParams, hyper: &Hyperparams) -> Result<f64> {
    Ok(loglik_networks(data, params.a, &params.features)?
        + bbm_log_prior(&params.features, params.sigma2, &params.tree)?
        + log_priors(params, hyper)?)
}

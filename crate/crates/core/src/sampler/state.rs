use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::adapt::AdaptiveScale;
use super::{BlockStats, MoveCounts, SamplerConfig};
use crate::error::{Error, Result};
use crate::linalg::TreeCovariance;
use crate::model::{
    bernoulli_log_pmf, distance_matrix, euclidean, log_inv_gamma, log_normal, loglik_network, Hyperparams,
    LatentFeatures, ModelParams, NetworkData,
};
use crate::moves::{propose_unchecked, MoveKind};
use crate::simulate::draw_features;
use crate::tree::PhyloTree;
use crate::yule::{sample_yule_tree, tree_log_prior};

/// The seven blocks of one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    A,
    Z,
    Sigma2,
    Mu,
    Rescale,
    Tree,
    B,
}

impl Block {
    pub const ALL: [Block; 7] = [Block::A, Block::Z, Block::Sigma2, Block::Mu, Block::Rescale, Block::Tree, Block::B];
}

/// Acceptance bookkeeping per block.
#[derive(Debug, Clone, Default)]
pub struct ChainStats {
    pub a: BlockStats,
    pub z: Vec<BlockStats>,
    pub rescale: BlockStats,
    pub b: BlockStats,
    pub tree: [BlockStats; 5],
}

/// Parameters of one chain plus everything cached to make updates cheap.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub params: ModelParams,
    cov: TreeCovariance,
    dist: Vec<DMatrix<f64>>,
    loglik: Vec<f64>,
    use_likelihood: bool,
    pub scale_a: AdaptiveScale,
    pub scale_z: Vec<AdaptiveScale>,
    pub scale_rescale: AdaptiveScale,
    pub scale_b: AdaptiveScale,
    pub stats: ChainStats,
}

fn std_normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn draw_inv_gamma(shape: f64, scale: f64, rng: &mut impl Rng) -> f64 {
    let g: f64 = Gamma::new(shape, 1.0 / scale).expect("positive gamma parameters").sample(rng);
    1.0 / g
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl ChainState {
    /// Wrap a given parameter state.
    pub fn from_params(
        data: &NetworkData,
        hyper: &Hyperparams,
        params: ModelParams,
        use_likelihood: bool,
    ) -> Result<Self> {
        params.validate()?;
        if data.n_nodes() != params.features.n_nodes() || data.n_networks() != params.features.n_networks() {
            return Err(Error::DimensionMismatch("data and features disagree".into()));
        }
        let cov = TreeCovariance::new(&params.tree)?;
        let dim = params.features.dim();
        let dist: Vec<_> =
            (0..data.n_networks()).map(|m| distance_matrix(params.features.z(m), dim)).collect();
        let loglik = dist
            .iter()
            .enumerate()
            .map(|(m, d)| if use_likelihood { loglik_network(data, m, params.a, d) } else { 0.0 })
            .collect();
        let target = hyper.target_accept;
        let n_networks = data.n_networks();
        Ok(ChainState {
            params,
            cov,
            dist,
            loglik,
            use_likelihood,
            scale_a: AdaptiveScale::new(0.1, target),
            scale_z: vec![AdaptiveScale::new(0.1, target); n_networks],
            scale_rescale: AdaptiveScale::new(hyper.sigma_h2.sqrt(), target),
            scale_b: AdaptiveScale::new(0.5, target),
            stats: ChainStats { z: vec![BlockStats::default(); n_networks], ..Default::default() },
        })
    }

    /// Draw every parameter from its prior, then set `a` from the observed
    /// density: `logit(density) + mean pairwise distance of the initial Z`.
    pub fn initialize(
        data: &NetworkData,
        hyper: &Hyperparams,
        use_likelihood: bool,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        const ATTEMPTS: usize = 100;
        let (v, m_count, k) = (data.n_nodes(), data.n_networks(), hyper.k);
        let pairs = (v * (v - 1) / 2 * m_count) as f64;
        let density = data.overall_density().clamp(0.5 / pairs, 1.0 - 0.5 / pairs);
        for _ in 0..ATTEMPTS {
            let b = draw_inv_gamma(hyper.alpha_b, hyper.beta_b, rng);
            let Ok(tree) = sample_yule_tree(data.labels().to_vec(), b, rng) else { continue };
            let sigma2 = draw_inv_gamma(hyper.alpha_sigma, hyper.beta_sigma, rng);
            let Ok(cov) = TreeCovariance::new(&tree) else { continue };
            let mut features = LatentFeatures::zeros(k, v, m_count);
            for m in 0..m_count {
                for c in features.mu_mut(m) {
                    *c = hyper.sigma_mu2.sqrt() * std_normal(rng);
                }
            }
            draw_features(&mut features, sigma2, &cov, rng);
            let mut mean_dist = 0.0;
            for m in 0..m_count {
                let d = distance_matrix(features.z(m), k);
                mean_dist += (0..v).flat_map(|i| (0..i).map(move |j| (i, j))).map(|(i, j)| d[(i, j)]).sum::<f64>();
            }
            mean_dist /= pairs;
            let a = logit(density) + mean_dist;
            let params = ModelParams { a, sigma2, b, tree, features };
            let Ok(state) = ChainState::from_params(data, hyper, params, use_likelihood) else { continue };
            if state.log_posterior(hyper).is_ok_and(f64::is_finite) {
                return Ok(state);
            }
        }
        Err(Error::Initialization { attempts: ATTEMPTS })
    }

    pub fn covariance(&self) -> &TreeCovariance {
        &self.cov
    }

    pub fn uses_likelihood(&self) -> bool {
        self.use_likelihood
    }

    /// Cached log-likelihood (0 with the likelihood switched off).
    pub fn loglik(&self) -> f64 {
        self.loglik.iter().sum()
    }

    fn loglik_at(&self, data: &NetworkData, a: f64) -> f64 {
        if !self.use_likelihood {
            return 0.0;
        }
        (0..data.n_networks()).map(|m| loglik_network(data, m, a, &self.dist[m])).sum()
    }

    fn centered_quad(&self) -> f64 {
        let f = &self.params.features;
        let mut q = 0.0;
        for m in 0..f.n_networks() {
            for k in 0..f.dim() {
                q += self.cov.quad(&f.centered_row(m, k));
            }
        }
        q
    }

    fn bbm_log_prior(&self) -> f64 {
        let f = &self.params.features;
        let rows = (f.n_networks() * f.dim()) as f64;
        let v = f.n_nodes() as f64;
        let s2 = self.params.sigma2;
        -0.5 * rows * (v * (std::f64::consts::TAU.ln() + s2.ln()) + self.cov.log_det()) - self.centered_quad() / (2.0 * s2)
    }

    fn mu_log_prior(&self, hyper: &Hyperparams) -> f64 {
        let f = &self.params.features;
        (0..f.n_networks()).flat_map(|m| f.mu(m).iter()).map(|&x| log_normal(x, 0.0, hyper.sigma_mu2)).sum()
    }

    /// Joint log posterior from the cached pieces.
    pub fn log_posterior(&self, hyper: &Hyperparams) -> Result<f64> {
        let p = &self.params;
        Ok(self.loglik()
            + self.bbm_log_prior()
            + log_normal(p.a, 0.0, hyper.sigma_a2)
            + log_inv_gamma(p.sigma2, hyper.alpha_sigma, hyper.beta_sigma)
            + self.mu_log_prior(hyper)
            + tree_log_prior(&p.tree, p.b, hyper.yule_form)?
            + log_inv_gamma(p.b, hyper.alpha_b, hyper.beta_b))
    }

    pub fn update_a(&mut self, data: &NetworkData, hyper: &Hyperparams, rng: &mut impl Rng) {
        let step = self.scale_a.eta() * std_normal(rng);
        self.update_a_with_step(data, hyper, step, rng);
    }

    pub(crate) fn update_a_with_step(&mut self, data: &NetworkData, hyper: &Hyperparams, step: f64, rng: &mut impl Rng) {
        let a = self.params.a;
        let proposed = a + step;
        let ll_new = self.loglik_at(data, proposed);
        let delta = ll_new - self.loglik() + log_normal(proposed, 0.0, hyper.sigma_a2) - log_normal(a, 0.0, hyper.sigma_a2);
        let p = accept_prob(delta);
        let accepted = rng.random::<f64>() < p;
        if accepted {
            self.params.a = proposed;
            if self.use_likelihood {
                for m in 0..data.n_networks() {
                    self.loglik[m] = loglik_network(data, m, proposed, &self.dist[m]);
                }
            }
        }
        self.stats.a.record(p, accepted);
        self.scale_a.adapt(p);
    }

    /// Random-walk update of `z_v^(m)` for every node of every network, nodes
    /// visited in a fresh random order per network.
    pub fn update_z(&mut self, data: &NetworkData, rng: &mut impl Rng) {
        let v_count = data.n_nodes();
        let mut order: Vec<usize> = (0..v_count).collect();
        for m in 0..data.n_networks() {
            order.shuffle(rng);
            let eta = self.scale_z[m].eta();
            let mut sum_p = 0.0;
            for &v in &order {
                let step: Vec<f64> = (0..self.params.features.dim()).map(|_| eta * std_normal(rng)).collect();
                let (p, accepted) = self.update_z_node(data, m, v, &step, rng);
                sum_p += p;
                self.stats.z[m].record(p, accepted);
            }
            self.scale_z[m].adapt(sum_p / v_count as f64);
        }
    }

    pub(crate) fn update_z_node(
        &mut self,
        data: &NetworkData,
        m: usize,
        v: usize,
        step: &[f64],
        rng: &mut impl Rng,
    ) -> (f64, bool) {
        let f = &self.params.features;
        let dim = f.dim();
        let n = f.n_nodes();
        let z = f.z(m);
        let mu = f.mu(m);
        let prec = self.cov.precision();
        let s2 = self.params.sigma2;

        // Change in sum_k r_kᵀ P r_k when column v moves by `step`.
        let mut dq = 0.0;
        for k in 0..dim {
            let mut pr = 0.0;
            let col = prec.column(v);
            for u in 0..n {
                pr += col[u] * (z[u * dim + k] - mu[k]);
            }
            dq += 2.0 * step[k] * pr + step[k] * step[k] * prec[(v, v)];
        }
        let mut delta = -dq / (2.0 * s2);

        let new_col: Vec<f64> = z[v * dim..(v + 1) * dim].iter().zip(step).map(|(x, d)| x + d).collect();
        let mut new_dist = vec![0.0; n];
        let mut dll = 0.0;
        if self.use_likelihood {
            let adj = data.adjacency(m);
            let a = self.params.a;
            let d = &self.dist[m];
            for u in 0..n {
                if u == v {
                    continue;
                }
                let du = euclidean(&new_col, &z[u * dim..(u + 1) * dim]);
                new_dist[u] = du;
                let y = adj[v * n + u] == 1;
                dll += bernoulli_log_pmf(y, a - du) - bernoulli_log_pmf(y, a - d[(v, u)]);
            }
            delta += dll;
        }
        let p = accept_prob(delta);
        let accepted = rng.random::<f64>() < p;
        if accepted {
            self.params.features.column_mut(m, v).copy_from_slice(&new_col);
            if self.use_likelihood {
                let d = &mut self.dist[m];
                for u in 0..n {
                    d[(v, u)] = new_dist[u];
                    d[(u, v)] = new_dist[u];
                }
                self.loglik[m] += dll;
            } else {
                let z = self.params.features.z(m);
                let d = &mut self.dist[m];
                for u in 0..n {
                    let du = if u == v { 0.0 } else { euclidean(&new_col, &z[u * dim..(u + 1) * dim]) };
                    d[(v, u)] = du;
                    d[(u, v)] = du;
                }
            }
        }
        (p, accepted)
    }

    /// Shape and scale of the inverse-gamma full conditional of `sigma2`.
    pub fn sigma2_conditional(&self, hyper: &Hyperparams) -> (f64, f64) {
        let f = &self.params.features;
        let n = (f.n_nodes() * f.dim() * f.n_networks()) as f64;
        (hyper.alpha_sigma + n / 2.0, hyper.beta_sigma + self.centered_quad() / 2.0)
    }

    pub fn gibbs_sigma2(&mut self, hyper: &Hyperparams, rng: &mut impl Rng) {
        let (shape, scale) = self.sigma2_conditional(hyper);
        self.params.sigma2 = draw_inv_gamma(shape, scale, rng);
    }

    /// Mean and variance of the Gaussian full conditional of `mu_k^(m)`.
    pub fn mu_conditional(&self, hyper: &Hyperparams, m: usize, k: usize) -> (f64, f64) {
        let s2 = self.params.sigma2;
        let precision = 1.0 / hyper.sigma_mu2 + self.cov.ones_precision_ones() / s2;
        let row = self.params.features.row(m, k);
        let w = self.cov.precision_ones();
        let lin: f64 = row.iter().zip(w.iter()).map(|(z, w)| z * w).sum::<f64>() / s2;
        (lin / precision, 1.0 / precision)
    }

    pub fn gibbs_mu(&mut self, hyper: &Hyperparams, rng: &mut impl Rng) {
        for m in 0..self.params.features.n_networks() {
            for k in 0..self.params.features.dim() {
                let (mean, var) = self.mu_conditional(hyper, m, k);
                self.params.features.mu_mut(m)[k] = mean + var.sqrt() * std_normal(rng);
            }
        }
    }

    /// Log acceptance ratio of rescaling `(Z, mu, sigma2)` to
    /// `(hZ, h mu, h² sigma2)` with `h = e^g`, Jacobian included.
    pub fn rescale_log_ratio(&self, data: &NetworkData, hyper: &Hyperparams, g: f64) -> f64 {
        let h = g.exp();
        let f = &self.params.features;
        let (v, k, m_count) = (f.n_nodes() as f64, f.dim() as f64, f.n_networks() as f64);
        let s2 = self.params.sigma2;
        let dll = if self.use_likelihood {
            let a = self.params.a;
            let mut total = 0.0;
            for (m, d) in self.dist.iter().enumerate() {
                let adj = data.adjacency(m);
                let n = data.n_nodes();
                let mut ll = 0.0;
                for i in 0..n {
                    for j in 0..i {
                        ll += bernoulli_log_pmf(adj[i * n + j] == 1, a - h * d[(i, j)]);
                    }
                }
                total += ll - self.loglik[m];
            }
            total
        } else {
            0.0
        };
        // The centered quadratic form over sigma2 is scale free, so the
        // feature prior only changes through its normalizer.
        let dbbm = -m_count * k * v * g;
        let dmu: f64 = (0..f.n_networks())
            .flat_map(|m| f.mu(m).iter())
            .map(|&x| log_normal(h * x, 0.0, hyper.sigma_mu2) - log_normal(x, 0.0, hyper.sigma_mu2))
            .sum();
        let dsigma = log_inv_gamma(h * h * s2, hyper.alpha_sigma, hyper.beta_sigma)
            - log_inv_gamma(s2, hyper.alpha_sigma, hyper.beta_sigma);
        let jacobian = (m_count * k * v + m_count * k + 2.0) * g;
        dll + dbbm + dmu + dsigma + jacobian
    }

    pub fn rescale_move(&mut self, data: &NetworkData, hyper: &Hyperparams, rng: &mut impl Rng) {
        let g = self.scale_rescale.eta() * std_normal(rng);
        self.rescale_with(data, hyper, g, rng);
    }

    pub(crate) fn rescale_with(&mut self, data: &NetworkData, hyper: &Hyperparams, g: f64, rng: &mut impl Rng) {
        let p = accept_prob(self.rescale_log_ratio(data, hyper, g));
        let accepted = rng.random::<f64>() < p;
        if accepted {
            let h = g.exp();
            self.apply_rescale(data, h);
        }
        self.stats.rescale.record(p, accepted);
        self.scale_rescale.adapt(p);
    }

    pub(crate) fn apply_rescale(&mut self, data: &NetworkData, h: f64) {
        self.params.features.scale(h);
        self.params.sigma2 *= h * h;
        for (m, d) in self.dist.iter_mut().enumerate() {
            *d *= h;
            if self.use_likelihood {
                self.loglik[m] = loglik_network(data, m, self.params.a, d);
            }
        }
    }

    /// Scatter matrix `sum_{m,k} r rᵀ` of the centered rows.
    fn scatter(&self) -> DMatrix<f64> {
        let f = &self.params.features;
        let n = f.n_nodes();
        let mut s = DMatrix::zeros(n, n);
        for m in 0..f.n_networks() {
            for k in 0..f.dim() {
                let r = f.centered_row(m, k);
                for j in 0..n {
                    for i in 0..n {
                        s[(i, j)] += r[i] * r[j];
                    }
                }
            }
        }
        s
    }

    /// Tree-dependent part of the log posterior: feature prior normalizer
    /// and quadratic form plus the tree prior.
    fn tree_target(&self, cov: &TreeCovariance, tree: &PhyloTree, scatter: &DMatrix<f64>, hyper: &Hyperparams) -> Result<f64> {
        let f = &self.params.features;
        let rows = (f.n_networks() * f.dim()) as f64;
        Ok(-0.5 * rows * cov.log_det() - cov.trace_product(scatter) / (2.0 * self.params.sigma2)
            + tree_log_prior(tree, self.params.b, hyper.yule_form)?)
    }

    /// Metropolis–Hastings over trees with the symmetric kernels, each kind
    /// attempted `counts` times per call.
    pub fn update_tree(
        &mut self,
        hyper: &Hyperparams,
        counts: &MoveCounts,
        age_window: f64,
        rng: &mut impl Rng,
    ) -> Result<()> {
        let scatter = self.scatter();
        let mut current = self.tree_target(&self.cov, &self.params.tree, &scatter, hyper)?;
        for (slot, kind) in MoveKind::ALL.into_iter().enumerate() {
            for _ in 0..counts.get(kind) {
                let out = propose_unchecked(&self.params.tree, kind, rng, age_window);
                if !out.feasible {
                    self.stats.tree[slot].record_infeasible();
                    continue;
                }
                let Ok(cov) = TreeCovariance::new(&out.proposed) else {
                    self.stats.tree[slot].record(0.0, false);
                    continue;
                };
                let proposed = self.tree_target(&cov, &out.proposed, &scatter, hyper)?;
                let p = accept_prob(proposed - current);
                let accepted = rng.random::<f64>() < p;
                if accepted {
                    self.params.tree = out.proposed;
                    self.cov = cov;
                    current = proposed;
                }
                self.stats.tree[slot].record(p, accepted);
            }
        }
        Ok(())
    }

    /// Random walk on `log b`.
    pub fn update_b(&mut self, hyper: &Hyperparams, rng: &mut impl Rng) -> Result<()> {
        let step = self.scale_b.eta() * std_normal(rng);
        self.update_b_with_step(hyper, step, rng)
    }

    pub(crate) fn update_b_with_step(&mut self, hyper: &Hyperparams, step: f64, rng: &mut impl Rng) -> Result<()> {
        let b = self.params.b;
        let proposed = b * step.exp();
        let target = |x: f64| -> Result<f64> {
            Ok(log_inv_gamma(x, hyper.alpha_b, hyper.beta_b) + tree_log_prior(&self.params.tree, x, hyper.yule_form)?)
        };
        let p = if proposed > 0.0 && proposed.is_finite() {
            accept_prob(target(proposed)? - target(b)? + step)
        } else {
            0.0
        };
        let accepted = rng.random::<f64>() < p;
        if accepted {
            self.params.b = proposed;
        }
        self.stats.b.record(p, accepted);
        self.scale_b.adapt(p);
        Ok(())
    }

    /// One sweep: all seven blocks in a freshly shuffled order. Returns the
    /// order used.
    pub fn sweep(
        &mut self,
        data: &NetworkData,
        hyper: &Hyperparams,
        config: &SamplerConfig,
        rng: &mut impl Rng,
    ) -> Result<[Block; 7]> {
        let mut order = Block::ALL;
        order.shuffle(rng);
        for block in order {
            match block {
                Block::A => self.update_a(data, hyper, rng),
                Block::Z => self.update_z(data, rng),
                Block::Sigma2 => self.gibbs_sigma2(hyper, rng),
                Block::Mu => self.gibbs_mu(hyper, rng),
                Block::Rescale => self.rescale_move(data, hyper, rng),
                Block::Tree => self.update_tree(hyper, &config.tree_moves_per_sweep, config.age_window, rng)?,
                Block::B => self.update_b(hyper, rng)?,
            }
        }
        Ok(order)
    }
}

/// `min(1, exp(delta))`, with NaN treated as rejection.
fn accept_prob(delta: f64) -> f64 {
    if delta.is_nan() {
        0.0
    } else if delta >= 0.0 {
        1.0
    } else {
        delta.exp()
    }
}

//! Three nodes, one latent dimension, two networks: the posterior marginals
//! of `a` and `sigma2` by direct numerical integration, against the chain.
//!
//! The likelihood sees `Z` only through the differences
//! `w = (z2 - z1, z3 - z1) ~ N(0, sigma2 C)`, so `mu` drops out. Writing
//! `w = s L (cos th, sin th)` with `L L' = C`, `w` is integrated in polar
//! form. The three distances are piecewise linear in `s` and change slope
//! only at six angles, which split the angular rule.

use phylnet::sampler::SamplerConfig;
use phylnet::{run_chains, Hyperparams, NetworkData};
use statrs::distribution::{Continuous, InverseGamma, Normal};

use crate::support::{linspace, piecewise_gauss_legendre, GridDensity};
use crate::Outcome;

const W1_TOL: f64 = 0.05;
const CHERRY_TOL: f64 = 0.02;
const N_ITER: usize = 50_000;
const CHERRIES: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

pub fn hyper() -> Hyperparams {
    Hyperparams { k: 1, alpha_sigma: 4.0, beta_sigma: 3.0, sigma_a2: 1.0, ..Hyperparams::default() }
}

/// Network 1 links A-B; network 2 links A-B and B-C.
pub fn data() -> NetworkData {
    let labels = vec!["A".to_string(), "B".to_string(), "C".to_string()];
    let adj1 = vec![0, 1, 0, 1, 0, 0, 0, 0, 0];
    let adj2 = vec![0, 1, 0, 1, 0, 1, 0, 1, 0];
    NetworkData::new(labels, vec![adj1, adj2]).unwrap()
}

/// Marginal prior density of the single non-root age, per topology: the
/// conditioned split density averaged over `b ~ IG(alpha_b, beta_b)`,
/// divided among the three labelled topologies.
fn age_density(t: f64, alpha_b: f64, beta_b: f64) -> f64 {
    let prior = InverseGamma::new(alpha_b, beta_b).unwrap();
    // substitute b = e^u
    let rule = piecewise_gauss_legendre(16, &linspace(-8.0, 12.0, 41));
    let total: f64 = rule
        .iter()
        .map(|&(u, w)| {
            let b = u.exp();
            let split = b * (-b * (1.0 - t)).exp() / -(-b).exp_m1();
            w * b * prior.pdf(b) * split
        })
        .sum();
    total / 3.0
}

struct Direction {
    weight: f64,
    /// Distances `|z1-z2|, |z1-z3|, |z2-z3|` per unit radius.
    g: [f64; 3],
}

/// Angular rule for the covariance of `w` when leaves `cherry` are joined at
/// age `t` and the third leaf hangs from the root.
fn directions(cherry: (usize, usize), t: f64, n: usize) -> Vec<Direction> {
    let mut sigma = [[0.0; 3]; 3];
    for (i, row) in sigma.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    sigma[cherry.0][cherry.1] = t;
    sigma[cherry.1][cherry.0] = t;
    // C = A Sigma A' with rows of A picking z2 - z1 and z3 - z1
    let diff = |i: usize, j: usize| sigma[i][j] - sigma[i][0] - sigma[0][j] + sigma[0][0];
    let (c11, c21, c22) = (diff(1, 1), diff(2, 1), diff(2, 2));
    let l11 = c11.sqrt();
    let l21 = c21 / l11;
    let l22 = (c22 - l21 * l21).sqrt();

    // each distance is |p cos th + q sin th|
    let forms = [(l11, 0.0), (l21, l22), (l21 - l11, l22)];
    let tau = std::f64::consts::TAU;
    let mut breaks = vec![0.0, tau];
    for &(p, q) in &forms {
        let z = (-p).atan2(q).rem_euclid(std::f64::consts::PI);
        breaks.extend([z, z + std::f64::consts::PI]);
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    piecewise_gauss_legendre(n, &breaks)
        .into_iter()
        .map(|(th, w)| {
            let (s, c) = th.sin_cos();
            Direction { weight: w / tau, g: forms.map(|(p, q)| (p * c + q * s).abs()) }
        })
        .collect()
}

fn edge_prob(y: bool, eta: f64) -> f64 {
    let p = 1.0 / (1.0 + (-eta).exp());
    if y {
        p
    } else {
        1.0 - p
    }
}

/// Unnormalized joint posterior density of `(a, sigma2)` on the grid, per
/// cherry.
fn joint_density(data: &NetworkData, hyper: &Hyperparams, a_grid: &[f64], s2_grid: &[f64]) -> [Vec<Vec<f64>>; 3] {
    let prior_a = Normal::new(0.0, hyper.sigma_a2.sqrt()).unwrap();
    let prior_s2 = InverseGamma::new(hyper.alpha_sigma, hyper.beta_sigma).unwrap();
    let pairs = [(0, 1), (0, 2), (1, 2)];
    let edges: Vec<[bool; 3]> = (0..data.n_networks()).map(|m| pairs.map(|(i, j)| data.edge(m, i, j))).collect();

    let t_rule = piecewise_gauss_legendre(8, &[0.0, 0.5, 0.9, 0.99, 0.999, 1.0]);
    let s_rule = piecewise_gauss_legendre(12, &[0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 26.0]);
    // radial kernel s / sigma2 * exp(-s^2 / (2 sigma2)) times the rule weight
    let kernel: Vec<Vec<f64>> = s2_grid
        .iter()
        .map(|&s2| s_rule.iter().map(|&(s, w)| w * s / s2 * (-s * s / (2.0 * s2)).exp()).collect())
        .collect();

    let mut joint: [Vec<Vec<f64>>; 3] = std::array::from_fn(|_| vec![vec![0.0; s2_grid.len()]; a_grid.len()]);
    for (ic, &cherry) in CHERRIES.iter().enumerate() {
        for &(t, wt) in &t_rule {
            let weight_t = wt * age_density(t, hyper.alpha_b, hyper.beta_b);
            let dirs = directions(cherry, t, 8);
            for (ia, &a) in a_grid.iter().enumerate() {
                // angular average of each network's likelihood at every radius
                let lbar: Vec<Vec<f64>> = edges
                    .iter()
                    .map(|y| {
                        s_rule
                            .iter()
                            .map(|&(s, _)| {
                                dirs.iter()
                                    .map(|d| (0..3).map(|p| edge_prob(y[p], a - s * d.g[p])).product::<f64>() * d.weight)
                                    .sum()
                            })
                            .collect()
                    })
                    .collect();
                for (is2, k) in kernel.iter().enumerate() {
                    let per_network: f64 = lbar
                        .iter()
                        .map(|l| l.iter().zip(k).map(|(x, y)| x * y).sum::<f64>())
                        .product();
                    joint[ic][ia][is2] += weight_t * per_network;
                }
            }
        }
    }
    for (ia, &a) in a_grid.iter().enumerate() {
        for (is2, &s2) in s2_grid.iter().enumerate() {
            let prior = prior_a.pdf(a) * prior_s2.pdf(s2);
            joint.iter_mut().for_each(|j| j[ia][is2] *= prior);
        }
    }
    joint
}

pub struct Oracle {
    pub a: GridDensity,
    pub sigma2: GridDensity,
    /// Posterior probability of each cherry in `CHERRIES` order.
    pub cherry: [f64; 3],
}

pub fn oracle(data: &NetworkData, hyper: &Hyperparams) -> Oracle {
    let a_grid = linspace(-5.0, 7.0, 121);
    let s2_grid = linspace(0.04, 14.0, 300);
    let per_cherry = joint_density(data, hyper, &a_grid, &s2_grid);
    let trapezoid = |grid: &[f64], f: &dyn Fn(usize) -> f64| {
        (1..grid.len()).map(|i| 0.5 * (f(i) + f(i - 1)) * (grid[i] - grid[i - 1])).sum::<f64>()
    };
    let mass = |j: &Vec<Vec<f64>>| trapezoid(&a_grid, &|i| trapezoid(&s2_grid, &|k| j[i][k]));
    let masses = per_cherry.each_ref().map(mass);
    let total: f64 = masses.iter().sum();
    let cherry = masses.map(|m| m / total);
    let joint: Vec<Vec<f64>> = (0..a_grid.len())
        .map(|i| (0..s2_grid.len()).map(|k| per_cherry.iter().map(|j| j[i][k]).sum()).collect())
        .collect();
    let a_marg: Vec<f64> = joint.iter().map(|row| trapezoid(&s2_grid, &|j| row[j])).collect();
    let s2_marg: Vec<f64> = (0..s2_grid.len()).map(|j| trapezoid(&a_grid, &|i| joint[i][j])).collect();
    Oracle { a: GridDensity::new(a_grid, &a_marg), sigma2: GridDensity::new(s2_grid, &s2_marg), cherry }
}

pub fn run(seed: u64) -> Outcome {
    let data = data();
    let hyper = hyper();
    let oracle = oracle(&data, &hyper);

    let config = SamplerConfig { n_iter: N_ITER, burn_in: 5_000, thin: 5, n_chains: 4, seed, ..Default::default() };
    let chains = run_chains(&data, &hyper, &config).unwrap();
    let a: Vec<f64> = chains.iter().flat_map(|c| c.samples.iter().map(|s| s.a)).collect();
    let s2: Vec<f64> = chains.iter().flat_map(|c| c.samples.iter().map(|s| s.sigma2)).collect();
    let w_a = oracle.a.wasserstein1(&a);
    let w_s2 = oracle.sigma2.wasserstein1(&s2);
    let mut counts = [0usize; 3];
    for s in chains.iter().flat_map(|c| &c.samples) {
        let (l, r) = s.tree.children(s.tree.root()).unwrap().into();
        let inner = if s.tree.is_leaf(l) { r } else { l };
        let [x, y] = s.tree.children(inner).unwrap();
        let pair = (x.min(y), x.max(y));
        counts[CHERRIES.iter().position(|&c| c == pair).unwrap()] += 1;
    }
    let freq = counts.map(|c| c as f64 / a.len() as f64);
    let cherry_err = (0..3).map(|i| (freq[i] - oracle.cherry[i]).abs()).fold(0.0, f64::max);
    // the grids must hold essentially all of the oracle mass
    let edges = oracle.a.edge_mass().max(oracle.sigma2.edge_mass());
    Outcome::check(
        w_a < W1_TOL && w_s2 < W1_TOL && cherry_err < CHERRY_TOL && edges < 1e-3,
        format!(
            "W1(a) = {w_a:.4}, W1(sigma2) = {w_s2:.4} (tol {W1_TOL}); cherry probabilities {:.3?} vs oracle {:.3?} (tol {CHERRY_TOL}); grid edge mass {edges:.1e}; oracle means a {:.3}, sigma2 {:.3}; chain means a {:.3}, sigma2 {:.3}",
            freq,
            oracle.cherry,
            oracle.a.mean(),
            oracle.sigma2.mean(),
            crate::support::mean(&a),
            crate::support::mean(&s2)
        ),
    )
}

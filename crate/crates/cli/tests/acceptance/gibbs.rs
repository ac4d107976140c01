//! The two conjugate steps against their closed-form conditionals, with the
//! conditionals recomputed here from the MRCA ages by dense linear algebra.

use nalgebra::{DMatrix, DVector};
use phylnet::simulate::{simulate_generative, GenerativeSpec};
use phylnet::{ChainState, Hyperparams, PhyloTree};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{ContinuousCDF, InverseGamma, Normal};

use crate::support::ks_test;
use crate::Outcome;

const DRAWS: usize = 10_000;
const P_MIN: f64 = 0.001;

fn mrca_matrix(tree: &PhyloTree) -> DMatrix<f64> {
    let v = tree.n_leaves();
    DMatrix::from_fn(v, v, |i, j| if i == j { 1.0 } else { tree.mrca_age(i, j) })
}

pub fn run(seed: u64) -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let spec = GenerativeSpec { n_nodes: 8, k: 2, n_networks: 3, ..GenerativeSpec::default() };
    let sim = simulate_generative(&spec, &mut rng).unwrap();
    let hyper = Hyperparams { k: 2, alpha_sigma: 2.0, beta_sigma: 1.5, sigma_mu2: 4.0, ..Hyperparams::default() };
    let mut params = phylnet::ModelParams {
        a: spec.a,
        sigma2: spec.sigma2,
        b: spec.b,
        tree: sim.tree.clone(),
        features: sim.features.clone(),
    };
    // move the centers off zero so the conditional mean is not trivial
    for m in 0..spec.n_networks {
        params.features.mu_mut(m).iter_mut().enumerate().for_each(|(k, c)| *c = k as f64 - 0.5);
    }
    let base = ChainState::from_params(&sim.data, &hyper, params, true).unwrap();

    let (v, k_dim, m_count) = (spec.n_nodes, spec.k, spec.n_networks);
    let precision = mrca_matrix(&base.params.tree).try_inverse().unwrap();
    let ones = DVector::from_element(v, 1.0);
    let row = |m: usize, k: usize| DVector::from_fn(v, |i, _| base.params.features.z(m)[i * k_dim + k]);

    // sigma2 | rest ~ IG(alpha + MKV/2, beta + sum of centered quadratic forms / 2)
    let mut quad = 0.0;
    for m in 0..m_count {
        for k in 0..k_dim {
            let r = row(m, k) - &ones * base.params.features.mu(m)[k];
            quad += (r.transpose() * &precision * &r)[(0, 0)];
        }
    }
    let shape = hyper.alpha_sigma + (m_count * k_dim * v) as f64 / 2.0;
    let scale = hyper.beta_sigma + quad / 2.0;
    let mut state = base.clone();
    let draws: Vec<f64> = (0..DRAWS)
        .map(|_| {
            state.gibbs_sigma2(&hyper, &mut rng);
            state.params.sigma2
        })
        .collect();
    let ig = InverseGamma::new(shape, scale).unwrap();
    let (d_s2, p_s2) = ks_test(&draws, |x| ig.cdf(x));

    // mu_k^(m) | rest ~ N(b / q, 1 / q), q = 1/sigma_mu2 + 1'P1/sigma2, b = 1'P z / sigma2
    let (m, k) = (1, 1);
    let s2 = base.params.sigma2;
    let q = 1.0 / hyper.sigma_mu2 + (ones.transpose() * &precision * &ones)[(0, 0)] / s2;
    let lin = (ones.transpose() * &precision * row(m, k))[(0, 0)] / s2;
    let normal = Normal::new(lin / q, (1.0 / q).sqrt()).unwrap();
    let mut state = base.clone();
    let draws: Vec<f64> = (0..DRAWS)
        .map(|_| {
            state.gibbs_mu(&hyper, &mut rng);
            state.params.features.mu(m)[k]
        })
        .collect();
    let (d_mu, p_mu) = ks_test(&draws, |x| normal.cdf(x));

    Outcome::check(
        p_s2 > P_MIN && p_mu > P_MIN,
        format!(
            "{DRAWS} draws each; sigma2 vs IG({shape:.1}, {scale:.3}): D = {d_s2:.4}, p = {p_s2:.3}; \
             mu vs N({:.3}, {:.4}): D = {d_mu:.4}, p = {p_mu:.3} (p > {P_MIN})",
            lin / q,
            1.0 / q
        ),
    )
}

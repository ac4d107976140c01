//! Simulate-and-fit round trips at `V = 20`, `K = 3` with the default
//! sampler settings. Replicate `r` simulates `M = 20` networks from seed
//! `base + r`; the smaller fits reuse its first `M` networks, so all three
//! share the truth tree.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use phylnet::sampler::SamplerConfig;
use phylnet::simulate::{scenario_two_scaled, simulate_generative, GenerativeSpec, Simulation};
use phylnet::summarize::credible_radius;
use phylnet::summarize::diagnostics::central_interval;
use phylnet::{rf_distance, run_chains, Hyperparams, NetworkData, PhyloTree};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::Outcome;

pub const REPLICATES: u64 = 10;
const V: usize = 20;
const M: usize = 20;

const MEAN_RF_MAX: f64 = 0.35;
const CONSENSUS_RF_MAX: f64 = 0.30;
const CONSENSUS_P: f64 = 0.8;
const LEVEL: f64 = 0.9;
const COVERAGE_MIN: usize = 8;
const TREND_MIN: usize = 9;

pub struct Fit {
    pub trees: Vec<PhyloTree>,
    pub a: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub b: Vec<f64>,
}

fn spec() -> GenerativeSpec {
    scenario_two_scaled(V, M)
}

fn simulation(seed: u64) -> Simulation {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    simulate_generative(&spec(), &mut rng).unwrap()
}

fn first_networks(data: &NetworkData, m: usize) -> NetworkData {
    NetworkData::new(data.labels().to_vec(), (0..m).map(|i| data.adjacency(i).to_vec()).collect()).unwrap()
}

type Cache = Mutex<HashMap<(u64, usize), &'static Fit>>;

/// Fits are shared between criteria and kept for the whole run.
fn fit(seed: u64, m: usize) -> &'static Fit {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(f) = cache.lock().unwrap().get(&(seed, m)) {
        return f;
    }
    let sim = simulation(seed);
    let data = first_networks(&sim.data, m);
    let config = SamplerConfig { seed, ..SamplerConfig::default() };
    let chains = run_chains(&data, &Hyperparams::default(), &config).unwrap();
    let samples: Vec<_> = chains.into_iter().flat_map(|c| c.samples).collect();
    let fit: &'static Fit = Box::leak(Box::new(Fit {
        a: samples.iter().map(|s| s.a).collect(),
        sigma2: samples.iter().map(|s| s.sigma2).collect(),
        b: samples.iter().map(|s| s.b).collect(),
        trees: samples.into_iter().map(|s| s.tree).collect(),
    }));
    cache.lock().unwrap().insert((seed, m), fit);
    fit
}

pub fn tree_recovery(seed: u64) -> Outcome {
    let truth = simulation(seed).tree;
    let f = fit(seed, M);
    let mean_rf = f.trees.iter().map(|t| rf_distance(t, &truth, true).unwrap()).sum::<f64>() / f.trees.len() as f64;
    let cons = phylnet::summarize::consensus(&f.trees, CONSENSUS_P).unwrap();
    let cons_rf = cons.rf_distance(&truth, true).unwrap();
    let prior_rf = prior_reference_rf(&truth, seed);
    Outcome::check(
        mean_rf <= MEAN_RF_MAX && cons_rf <= CONSENSUS_RF_MAX,
        format!(
            "mean normalized RF to truth {mean_rf:.3} (max {MEAN_RF_MAX}); consensus (p = {CONSENSUS_P}) RF {cons_rf:.3} \
             with {} of {} clades resolved (max {CONSENSUS_RF_MAX}); prior trees average RF {prior_rf:.3}",
            cons.splits().len(),
            V - 2
        ),
    )
}

/// Mean RF from the truth to trees drawn from the Yule prior, for scale.
fn prior_reference_rf(truth: &PhyloTree, seed: u64) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5eed);
    let n = 500;
    (0..n)
        .map(|_| {
            let t = phylnet::sample_yule_tree(truth.taxa().to_vec(), spec().b, &mut rng).unwrap();
            rf_distance(&t, truth, true).unwrap()
        })
        .sum::<f64>()
        / n as f64
}

pub fn coverage(seed: u64) -> Outcome {
    let s = spec();
    let mut covered = [0usize; 3];
    let mut misses = Vec::new();
    for r in 0..REPLICATES {
        let f = fit(seed + r, M);
        for (i, (draws, truth)) in [(&f.a, s.a), (&f.sigma2, s.sigma2), (&f.b, s.b)].into_iter().enumerate() {
            let (lo, hi) = central_interval(draws, LEVEL);
            if lo <= truth && truth <= hi {
                covered[i] += 1;
            } else {
                misses.push(format!("{}#{r} ({lo:.2}, {hi:.2})", ["a", "sigma2", "b"][i]));
            }
        }
    }
    let misses = if misses.is_empty() { String::new() } else { format!("; missed: {}", misses.join(", ")) };
    Outcome::check(
        covered.iter().all(|&c| c >= COVERAGE_MIN),
        format!(
            "{:.0}% intervals cover a {}/{REPLICATES}, sigma2 {}/{REPLICATES}, b {}/{REPLICATES} (min {COVERAGE_MIN}){misses}",
            LEVEL * 100.0,
            covered[0],
            covered[1],
            covered[2]
        ),
    )
}

pub fn concentration(seed: u64) -> Outcome {
    let mut ok = 0;
    let mut rows = Vec::new();
    for r in 0..REPLICATES {
        let truth = simulation(seed + r).tree;
        let radius = [1, 10, M].map(|m| credible_radius(&fit(seed + r, m).trees, &truth, LEVEL).unwrap());
        if radius[0] > radius[1] && radius[1] > radius[2] {
            ok += 1;
        }
        rows.push(format!("{:.2}>{:.2}>{:.2}", radius[0], radius[1], radius[2]));
    }
    Outcome::check(
        ok >= TREND_MIN,
        format!(
            "radius at M = 1, 10, 20 strictly decreasing in {ok}/{REPLICATES} replicates (min {TREND_MIN}): {}",
            rows.join(" ")
        ),
    )
}

//! Adaptive Metropolis-within-Gibbs sampler.
//!
//! A sweep applies seven blocks in a freshly shuffled order: the intercept
//! `a`, the latent features `Z`, Gibbs draws of `sigma2` and `mu`, a joint
//! rescale of `(Z, mu, sigma2)`, tree moves and the Yule rate `b`.
//!
//! Chain `c` of a run seeded with `s` draws from
//! `ChaCha20Rng::seed_from_u64(s)` switched to stream `c`, so each chain's
//! output depends only on `(s, c)` and never on scheduling.

mod adapt;
mod state;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use adapt::{AdaptiveScale, ADAPTATION_EXPONENT};
pub use state::{Block, ChainState, ChainStats};

use crate::error::{Error, Result};
use crate::model::{Hyperparams, NetworkData};
use crate::moves::MoveKind;
use crate::tree::PhyloTree;

/// Proposal attempts per sweep for each tree move kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoveCounts {
    pub tips_interchange: usize,
    pub subtree_exchange: usize,
    pub node_age: usize,
    pub spr: usize,
    pub local_spr: usize,
}

impl MoveCounts {
    pub fn uniform(n: usize) -> Self {
        MoveCounts { tips_interchange: n, subtree_exchange: n, node_age: n, spr: n, local_spr: n }
    }

    pub fn get(&self, kind: MoveKind) -> usize {
        match kind {
            MoveKind::TipsInterchange => self.tips_interchange,
            MoveKind::SubtreeExchange => self.subtree_exchange,
            MoveKind::NodeAgeMove => self.node_age,
            MoveKind::Spr => self.spr,
            MoveKind::LocalSpr => self.local_spr,
        }
    }
}

impl Default for MoveCounts {
    fn default() -> Self {
        MoveCounts::uniform(5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub n_chains: usize,
    pub seed: u64,
    pub tree_moves_per_sweep: MoveCounts,
    pub age_window: f64,
    /// Keep latent feature snapshots in the retained samples.
    pub store_z: bool,
    /// Switching this off samples from the prior.
    pub likelihood: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_iter: 20_000,
            burn_in: 15_000,
            thin: 10,
            n_chains: 4,
            seed: 1,
            tree_moves_per_sweep: MoveCounts::default(),
            age_window: 0.1,
            store_z: false,
            likelihood: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.n_iter == 0 || self.thin == 0 || self.n_chains == 0 {
            return bad("n_iter, thin and n_chains must be positive");
        }
        if self.burn_in >= self.n_iter {
            return bad("burn_in must be smaller than n_iter");
        }
        if !(self.age_window > 0.0 && self.age_window.is_finite()) {
            return bad("age_window must be positive");
        }
        if MoveKind::ALL.iter().all(|&k| self.tree_moves_per_sweep.get(k) == 0) {
            return bad("at least one tree move per sweep is required");
        }
        Ok(())
    }

    /// Number of samples a chain retains.
    pub fn n_retained(&self) -> usize {
        (self.n_iter - self.burn_in) / self.thin
    }

    /// Whether sweep `iter` (counted from 1) is retained.
    pub fn keeps(&self, iter: usize) -> bool {
        iter > self.burn_in && (iter - self.burn_in).is_multiple_of(self.thin)
    }
}

/// Acceptance counters for one block.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockStats {
    pub attempts: u64,
    pub accepted: u64,
    /// Tree proposals that could not be built and were rejected outright.
    pub infeasible: u64,
    pub sum_accept_prob: f64,
}

impl BlockStats {
    pub fn record(&mut self, p: f64, accepted: bool) {
        self.attempts += 1;
        self.accepted += u64::from(accepted);
        self.sum_accept_prob += p;
    }

    pub fn record_infeasible(&mut self) {
        self.attempts += 1;
        self.infeasible += 1;
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.attempts == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.attempts as f64
        }
    }

    pub fn mean_accept_prob(&self) -> f64 {
        if self.attempts == 0 {
            f64::NAN
        } else {
            self.sum_accept_prob / self.attempts as f64
        }
    }

    pub fn merge(&mut self, other: &BlockStats) {
        self.attempts += other.attempts;
        self.accepted += other.accepted;
        self.infeasible += other.infeasible;
        self.sum_accept_prob += other.sum_accept_prob;
    }
}

/// One retained draw.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSample {
    pub chain: usize,
    pub iter: usize,
    pub a: f64,
    pub sigma2: f64,
    pub b: f64,
    pub tree: PhyloTree,
    /// Per network, column-major `K x V` features.
    pub z: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub chain: usize,
    pub samples: Vec<PosteriorSample>,
    pub stats: ChainStats,
    pub final_state: ChainState,
}

/// Random stream for chain `chain` under `seed`.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

fn snapshot(state: &ChainState, chain: usize, iter: usize, store_z: bool) -> PosteriorSample {
    let p = &state.params;
    PosteriorSample {
        chain,
        iter,
        a: p.a,
        sigma2: p.sigma2,
        b: p.b,
        tree: p.tree.clone(),
        z: store_z.then(|| (0..p.features.n_networks()).map(|m| p.features.z(m).to_vec()).collect()),
    }
}

/// Run chain `chain`, handing each retained sample to `sink` as it is drawn.
pub fn run_chain_with<F>(
    data: &NetworkData,
    hyper: &Hyperparams,
    config: &SamplerConfig,
    chain: usize,
    mut sink: F,
) -> Result<(ChainStats, ChainState)>
where
    F: FnMut(&PosteriorSample) -> Result<()>,
{
    hyper.validate()?;
    config.validate()?;
    let mut rng = chain_rng(config.seed, chain);
    let mut state = ChainState::initialize(data, hyper, config.likelihood, &mut rng)?;
    for iter in 1..=config.n_iter {
        state.sweep(data, hyper, config, &mut rng)?;
        if config.keeps(iter) {
            sink(&snapshot(&state, chain, iter, config.store_z))?;
        }
    }
    Ok((state.stats.clone(), state))
}

pub fn run_chain(data: &NetworkData, hyper: &Hyperparams, config: &SamplerConfig, chain: usize) -> Result<ChainOutput> {
    let mut samples = Vec::with_capacity(config.n_retained());
    let (stats, final_state) = run_chain_with(data, hyper, config, chain, |s| {
        samples.push(s.clone());
        Ok(())
    })?;
    Ok(ChainOutput { chain, samples, stats, final_state })
}

/// Run `config.n_chains` chains on the current rayon pool. Output is ordered
/// by chain index.
pub fn run_chains(data: &NetworkData, hyper: &Hyperparams, config: &SamplerConfig) -> Result<Vec<ChainOutput>> {
    (0..config.n_chains).into_par_iter().map(|c| run_chain(data, hyper, config, c)).collect()
}

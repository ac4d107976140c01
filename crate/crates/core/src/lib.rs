//! Phylogenetic latent space models for one or many networks observed on a
//! shared node set.
//!
//! Node features evolve as a branching Brownian motion along a rooted
//! ultrametric tree, and edges follow a logistic latent space likelihood.
//! The crate simulates from the model, fits it by Metropolis-within-Gibbs and
//! summarizes posterior tree samples.

pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod moves;
pub mod newick;
pub mod sampler;
pub mod simulate;
pub mod summarize;
pub mod tree;
pub mod yule;

pub use error::{Error, Result};
pub use linalg::TreeCovariance;
pub use model::{Hyperparams, LatentFeatures, ModelParams, NetworkData};
pub use moves::{MoveKind, MoveOutcome};
pub use newick::{from_newick, to_newick};
pub use tree::{rf_distance, PhyloTree, Split, Violation};
pub use yule::{sample_yule_tree, yule_log_density, YuleForm};
pub use sampler::{run_chain, run_chains, ChainState, PosteriorSample, SamplerConfig};

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use phylnet::sampler::SamplerConfig;
use phylnet::simulate::ScenarioSpec;
use phylnet::summarize::{TreeMetric, DEFAULT_THRESHOLD};
use phylnet::Hyperparams;
use serde::{Deserialize, Serialize};

/// Everything a run needs. Every key is optional; unknown keys are errors.
///
/// ```toml
/// seed = 7
/// data = ["nets/"]
///
/// [model]
/// k = 3
///
/// [sampler]
/// n_iter = 20000
///
/// [scenario]
/// kind = "generative"
/// n_nodes = 20
/// n_networks = 10
///
/// [summary]
/// threshold = 0.8
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// The single seed behind every random draw of a run.
    pub seed: u64,
    pub model: Hyperparams,
    pub sampler: SamplerConfig,
    pub scenario: ScenarioSpec,
    pub summary: SummaryConfig,
    /// Adjacency CSV files, or directories of them, for `fit`.
    pub data: Vec<PathBuf>,
    /// Sample logs, or directories of them, for `summarize`.
    pub logs: Vec<PathBuf>,
    pub truth: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: SamplerConfig::default().seed,
            model: Hyperparams::default(),
            sampler: SamplerConfig::default(),
            scenario: ScenarioSpec::default(),
            summary: SummaryConfig::default(),
            data: Vec::new(),
            logs: Vec::new(),
            truth: None,
            out: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SummaryConfig {
    /// Consensus support threshold.
    pub threshold: f64,
    /// Credible-set level for the radius around the truth.
    pub level: f64,
    /// Central interval levels reported for scalar parameters.
    pub intervals: Vec<f64>,
    pub metric: TreeMetric,
}

impl Default for SummaryConfig {
    fn default() -> Self {
        SummaryConfig { threshold: DEFAULT_THRESHOLD, level: 0.9, intervals: vec![0.5, 0.9, 0.95], metric: TreeMetric::default() }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(RunConfig::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if config.sampler.seed != SamplerConfig::default().seed {
            bail!("{}: set the seed with the top-level `seed` key, not `sampler.seed`", path.display());
        }
        Ok(config)
    }

    /// Apply command-line overrides and check everything before any work.
    pub fn finish(mut self, seed: Option<u64>) -> Result<Self> {
        if let Some(s) = seed {
            self.seed = s;
        }
        self.sampler.seed = self.seed;
        self.model.validate()?;
        self.sampler.validate()?;
        let s = &self.summary;
        if !(0.5..1.0).contains(&s.threshold) {
            bail!("summary.threshold must lie in [0.5, 1), got {}", s.threshold);
        }
        if !(s.level > 0.0 && s.level <= 1.0) {
            bail!("summary.level must lie in (0, 1], got {}", s.level);
        }
        if s.intervals.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            bail!("summary.intervals must lie in (0, 1)");
        }
        Ok(self)
    }
}

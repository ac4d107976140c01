//! Summaries of posterior tree samples and scalar traces.

mod consensus;
mod densitree;
pub mod diagnostics;

use serde::{Deserialize, Serialize};

pub use consensus::{consensus, split_counts, ConsensusNode, ConsensusTree};
pub use densitree::{densitree_export, DensiTree, LayoutRow};
pub use diagnostics::{parameter_report, ParameterReport, ScalarSummary};

use crate::error::{Error, Result};
use crate::tree::{rf_distance, PhyloTree};

/// Default consensus threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.8;

/// Distance used for credible sets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeMetric {
    #[default]
    NormalizedRf,
    Rf,
}

impl TreeMetric {
    pub fn distance(self, a: &PhyloTree, b: &PhyloTree) -> Result<f64> {
        rf_distance(a, b, self == TreeMetric::NormalizedRf)
    }
}

/// Radius of the smallest ball around `reference` that holds a fraction
/// `level` of the samples: the distance at rank `ceil(level * n)`.
pub fn credible_radius(samples: &[PhyloTree], reference: &PhyloTree, level: f64) -> Result<f64> {
    credible_radius_with(samples, reference, level, TreeMetric::NormalizedRf)
}

pub fn credible_radius_with(samples: &[PhyloTree], reference: &PhyloTree, level: f64, metric: TreeMetric) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Summary("no tree samples".into()));
    }
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::InvalidParameter(format!("level must lie in (0, 1], got {level}")));
    }
    let mut d = samples.iter().map(|s| metric.distance(reference, s)).collect::<Result<Vec<_>>>()?;
    d.sort_by(f64::total_cmp);
    Ok(radius_of_sorted(&d, level))
}

pub(crate) fn radius_of_sorted(sorted: &[f64], level: f64) -> f64 {
    // a hair of slack keeps 0.9 * 10 at rank 9 under rounding
    let rank = ((level * sorted.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

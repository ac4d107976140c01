use serde::Serialize;

use crate::error::{Error, Result};

/// Linear-interpolation quantile of sorted data (the usual "type 7" rule).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Central interval holding a fraction `level` of the draws.
pub fn central_interval(x: &[f64], level: f64) -> (f64, f64) {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    (quantile_sorted(&s, tail), quantile_sorted(&s, 1.0 - tail))
}

/// Effective sample size by overlapping batch means with batches of
/// `floor(sqrt(n))` draws.
pub fn ess_batch_means(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let size = (n as f64).sqrt().floor() as usize;
    let var = variance(x);
    if var == 0.0 {
        return n as f64;
    }
    let m = mean(x);
    let mut window: f64 = x[..size].iter().sum();
    let mut ss = 0.0;
    let count = n - size + 1;
    for i in 0..count {
        if i > 0 {
            window += x[i + size - 1] - x[i - 1];
        }
        let d = window / size as f64 - m;
        ss += d * d;
    }
    let sigma2 = n as f64 * size as f64 * ss / ((n - size) as f64 * count as f64);
    if sigma2 == 0.0 {
        return n as f64;
    }
    n as f64 * var / sigma2
}

/// Split-chain potential scale reduction: each chain is cut in half and the
/// halves compared.
pub fn split_rhat(chains: &[&[f64]]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::Summary("the reduction statistic needs at least 2 chains".into()));
    }
    let half = chains.iter().map(|c| c.len() / 2).min().unwrap_or(0);
    if half < 2 {
        return Err(Error::Summary("chains are too short for the reduction statistic".into()));
    }
    let pieces: Vec<&[f64]> = chains.iter().flat_map(|c| [&c[..half], &c[half..2 * half]]).collect();
    let n = half as f64;
    let means: Vec<f64> = pieces.iter().map(|p| mean(p)).collect();
    let w = mean(&pieces.iter().map(|p| variance(p)).collect::<Vec<_>>());
    let b = n * variance(&means);
    if w == 0.0 {
        return Ok(if b == 0.0 { 1.0 } else { f64::INFINITY });
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    Ok((var_plus / w).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Interval {
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarSummary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub intervals: Vec<Interval>,
    pub ess: f64,
}

pub fn summarize_scalar(x: &[f64], levels: &[f64]) -> ScalarSummary {
    let intervals = levels
        .iter()
        .map(|&level| {
            let (lower, upper) = central_interval(x, level);
            Interval { level, lower, upper }
        })
        .collect();
    ScalarSummary {
        n: x.len(),
        mean: mean(x),
        sd: if x.len() > 1 { variance(x).sqrt() } else { 0.0 },
        intervals,
        ess: ess_batch_means(x),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterReport {
    pub name: String,
    pub chains: Vec<ScalarSummary>,
    pub pooled: ScalarSummary,
    /// Absent with a single chain.
    pub rhat: Option<f64>,
}

/// Per-chain and pooled summaries of one scalar parameter.
pub fn parameter_report(name: &str, chains: &[Vec<f64>], levels: &[f64]) -> Result<ParameterReport> {
    if chains.is_empty() || chains.iter().any(|c| c.is_empty()) {
        return Err(Error::Summary(format!("no draws of {name}")));
    }
    let per_chain = chains.iter().map(|c| summarize_scalar(c, levels)).collect();
    let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    let slices: Vec<&[f64]> = chains.iter().map(Vec::as_slice).collect();
    let rhat = if chains.len() >= 2 { split_rhat(&slices).ok() } else { None };
    let mut pooled = summarize_scalar(&pooled, levels);
    pooled.ess = chains.iter().map(|c| ess_batch_means(c)).sum();
    Ok(ParameterReport { name: name.to_string(), chains: per_chain, pooled, rhat })
}

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use phylnet::io::{csv_files_in, read_networks, write_text, SampleLogWriter};
use phylnet::sampler::{run_chain_with, BlockStats, ChainStats};
use phylnet::summarize::parameter_report;
use phylnet::MoveKind;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::RunConfig;

/// Files as given, directories expanded to their sorted `*.csv` entries.
pub fn expand_paths(paths: &[PathBuf], what: &str, list_dir: impl Fn(&Path) -> Result<Vec<PathBuf>>) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let found = list_dir(p)?;
            if found.is_empty() {
                bail!("{}: no {what} files in directory", p.display());
            }
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        bail!("no {what} files given");
    }
    Ok(out)
}

pub fn chain_log_name(chain: usize) -> String {
    format!("chain_{chain}.log")
}

fn rate(s: &BlockStats) -> Value {
    let r = s.acceptance_rate();
    if r.is_finite() {
        json!(r)
    } else {
        Value::Null
    }
}

fn stats_json(chain: usize, st: &ChainStats) -> Value {
    let tree: serde_json::Map<String, Value> =
        MoveKind::ALL.iter().zip(&st.tree).map(|(k, s)| (k.name().to_string(), rate(s))).collect();
    let infeasible: serde_json::Map<String, Value> =
        MoveKind::ALL.iter().zip(&st.tree).map(|(k, s)| (k.name().to_string(), json!(s.infeasible))).collect();
    json!({
        "chain": chain,
        "acceptance": {
            "a": rate(&st.a),
            "z": st.z.iter().map(rate).collect::<Vec<_>>(),
            "rescale": rate(&st.rescale),
            "b": rate(&st.b),
            "tree": tree,
        },
        "infeasible_tree_proposals": infeasible,
    })
}

struct ChainResult {
    stats: ChainStats,
    a: Vec<f64>,
    sigma2: Vec<f64>,
    b: Vec<f64>,
}

pub fn run(config: &RunConfig, jobs: Option<usize>, out: &Path) -> Result<()> {
    let paths = expand_paths(&config.data, "adjacency CSV", |d| Ok(csv_files_in(d)?))?;
    let data = read_networks(&paths)?;
    let sampler = &config.sampler;
    let hyper = &config.model;
    let comments = vec![
        format!("seed {}", config.seed),
        format!("nodes {} networks {} k {}", data.n_nodes(), data.n_networks(), hyper.k),
        format!("n_iter {} burn_in {} thin {}", sampler.n_iter, sampler.burn_in, sampler.thin),
    ];

    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build()?;
    let results: Vec<ChainResult> = pool.install(|| {
        (0..sampler.n_chains)
            .into_par_iter()
            .map(|chain| -> Result<ChainResult> {
                let path = out.join(chain_log_name(chain));
                let mut chain_comments = comments.clone();
                chain_comments.push(format!("chain {chain}"));
                let mut log = SampleLogWriter::create(&path, sampler.store_z, &chain_comments)?;
                let (mut a, mut sigma2, mut b) = (Vec::new(), Vec::new(), Vec::new());
                let (stats, _) = run_chain_with(&data, hyper, sampler, chain, |s| {
                    a.push(s.a);
                    sigma2.push(s.sigma2);
                    b.push(s.b);
                    log.write(s)
                })
                .with_context(|| format!("chain {chain}"))?;
                Ok(ChainResult { stats, a, sigma2, b })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let levels = &config.summary.intervals;
    let mut reports = Vec::new();
    for (name, pick) in [("a", 0), ("sigma2", 1), ("b", 2)] {
        let traces: Vec<Vec<f64>> =
            results.iter().map(|r| [&r.a, &r.sigma2, &r.b][pick].clone()).collect();
        reports.push(parameter_report(name, &traces, levels)?);
    }
    let diagnostics = json!({
        "seed": config.seed,
        "n_nodes": data.n_nodes(),
        "n_networks": data.n_networks(),
        "inputs": paths.iter().map(|p| crate::file_name(p)).collect::<Vec<_>>(),
        "sampler": sampler,
        "model": hyper,
        "chains": results.iter().enumerate().map(|(c, r)| stats_json(c, &r.stats)).collect::<Vec<_>>(),
        "parameters": reports,
    });
    let text = serde_json::to_string_pretty(&diagnostics)? + "\n";
    write_text(&out.join("diagnostics.json"), &text)?;

    for (c, r) in results.iter().enumerate() {
        println!(
            "chain {c}: {} samples, acceptance a {:.2} rescale {:.2} b {:.2}",
            r.a.len(),
            r.stats.a.acceptance_rate(),
            r.stats.rescale.acceptance_rate(),
            r.stats.b.acceptance_rate()
        );
    }
    for rep in &reports {
        let widest = rep.pooled.intervals.last();
        let interval = widest.map_or(String::new(), |i| format!(" {:.0}% ({:.4}, {:.4})", i.level * 100.0, i.lower, i.upper));
        let rhat = rep.rhat.map_or(String::new(), |r| format!(" rhat {r:.3}"));
        println!("{}: mean {:.4}{interval} ess {:.0}{rhat}", rep.name, rep.pooled.mean, rep.pooled.ess);
    }
    Ok(())
}

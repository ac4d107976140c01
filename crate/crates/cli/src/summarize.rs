use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use phylnet::io::{read_sample_log, write_text};
use phylnet::summarize::{consensus, credible_radius_with, densitree_export, parameter_report};
use serde_json::json;

use crate::config::RunConfig;
use crate::fit::expand_paths;

fn log_files_in(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let p = entry?.path();
        if p.extension().is_some_and(|e| e == "log") {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

pub fn run(config: &RunConfig, out: &Path) -> Result<()> {
    let paths = expand_paths(&config.logs, "sample log", log_files_in)?;
    let mut samples = Vec::new();
    for p in &paths {
        samples.extend(read_sample_log(p)?);
    }
    if samples.is_empty() {
        bail!("the sample logs hold no draws");
    }
    let taxa = samples[0].tree.taxa().to_vec();
    let trees: Vec<_> = samples.iter().map(|s| s.tree.clone()).collect();
    let summary = &config.summary;

    let cons = consensus(&trees, summary.threshold)?;
    let cons_text = cons.to_newick();
    write_text(&out.join("consensus.nwk"), &format!("{cons_text}\n"))?;
    let order: Vec<String> = cons.leaf_order().into_iter().map(|i| taxa[i].clone()).collect();
    let dt = densitree_export(&trees, &order)?;
    write_text(&out.join("densitree.nwk"), &dt.newick_text())?;
    write_text(&out.join("densitree.tsv"), &dt.layout_tsv())?;

    let mut by_chain: BTreeMap<usize, [Vec<f64>; 3]> = BTreeMap::new();
    for s in &samples {
        let e = by_chain.entry(s.chain).or_default();
        e[0].push(s.a);
        e[1].push(s.sigma2);
        e[2].push(s.b);
    }
    let mut reports = Vec::new();
    for (i, name) in ["a", "sigma2", "b"].into_iter().enumerate() {
        let traces: Vec<Vec<f64>> = by_chain.values().map(|t| t[i].clone()).collect();
        reports.push(parameter_report(name, &traces, &summary.intervals)?);
    }

    let mut report = json!({
        "logs": paths.iter().map(|p| crate::file_name(p)).collect::<Vec<_>>(),
        "n_samples": samples.len(),
        "n_chains": by_chain.len(),
        "consensus": {
            "threshold": summary.threshold,
            "newick": cons_text,
            "leaf_order": order,
            "clades": cons.splits().iter().map(|(s, p)| json!({"leaves": s.labels(&taxa), "support": p})).collect::<Vec<_>>(),
        },
        "parameters": reports,
    });

    println!("{cons_text}");
    if let Some(truth_path) = &config.truth {
        let truth = crate::read_newick_file(truth_path, Some(&taxa))?;
        let radius = credible_radius_with(&trees, &truth, summary.level, summary.metric)?;
        let mean = trees.iter().map(|t| summary.metric.distance(t, &truth)).sum::<phylnet::Result<f64>>()? / trees.len() as f64;
        let cons_rf = cons.rf_distance(&truth, true)?;
        report["truth"] = json!({
            "path": crate::file_name(truth_path),
            "metric": summary.metric,
            "level": summary.level,
            "radius": radius,
            "mean_distance": mean,
            "consensus_rf": cons_rf,
        });
        println!("radius at level {}: {radius}", summary.level);
        write_text(&out.join("radius.txt"), &format!("{radius}\n"))?;
    }
    write_text(&out.join("summary.json"), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(())
}

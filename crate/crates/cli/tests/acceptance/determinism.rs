use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use tempfile::TempDir;

use crate::Outcome;

const CONFIG: &str = "[scenario]\nkind = \"generative\"\nn_nodes = 12\nn_networks = 6\n\
                      [sampler]\nn_iter = 600\nburn_in = 200\nthin = 4\nn_chains = 4\n";

fn phylnet(cwd: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_phylnet"))
        .args(args)
        .current_dir(cwd)
        .env_remove("PHYLNET_SEED")
        .env_remove("PHYLNET_JOBS")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("phylnet {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

/// Every output file of one full pipeline run, keyed by relative path.
fn pipeline(seed: u64, jobs: &str) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let root = dir.path();
    std::fs::write(root.join("run.toml"), CONFIG).map_err(|e| e.to_string())?;
    let seed = seed.to_string();
    phylnet(root, &["simulate", "--config", "run.toml", "--seed", &seed, "--out", "sim"])?;
    phylnet(root, &["fit", "--config", "run.toml", "--seed", &seed, "--jobs", jobs, "--out", "fit", "sim"])?;
    phylnet(root, &["summarize", "--config", "run.toml", "--truth", "sim/truth.nwk", "--out", "sum", "fit"])?;
    let mut files = BTreeMap::new();
    for sub in ["sim", "fit", "sum"] {
        for entry in std::fs::read_dir(root.join(sub)).map_err(|e| e.to_string())? {
            let p = entry.map_err(|e| e.to_string())?.path();
            let bytes = std::fs::read(&p).map_err(|e| e.to_string())?;
            files.insert(format!("{sub}/{}", p.file_name().unwrap().to_string_lossy()), bytes);
        }
    }
    Ok(files)
}

pub fn run(seed: u64) -> Outcome {
    let runs = pipeline(seed, "1").and_then(|a| pipeline(seed, "4").map(|b| (a, b)));
    let (a, b) = match runs {
        Ok(r) => r,
        Err(e) => return Outcome::check(false, e),
    };
    let differing: Vec<&String> = a.keys().filter(|k| b.get(*k) != a.get(*k)).collect();
    let same_names = a.keys().eq(b.keys());
    Outcome::check(
        same_names && differing.is_empty() && !a.is_empty(),
        format!("{} files compared across --jobs 1 and 4, differing {differing:?}", a.len()),
    )
}

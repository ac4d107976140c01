use std::path::Path;

use anyhow::{Context, Result};
use phylnet::io::{adjacency_csv, write_text, TruthManifest, TruthParameters};
use phylnet::simulate::{simulate_from_probability_matrix, simulate_generative, ScenarioSpec};
use phylnet::to_newick;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::config::RunConfig;

pub fn network_file_name(m: usize, total: usize) -> String {
    let width = total.to_string().len();
    format!("network_{:0width$}.csv", m + 1)
}

pub fn run(config: &RunConfig, out: &Path) -> Result<()> {
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let (data, model) = match &config.scenario {
        ScenarioSpec::Generative(spec) => {
            let sim = simulate_generative(spec, &mut rng)?;
            let tree = to_newick(&sim.tree);
            write_text(&out.join("truth.nwk"), &format!("{tree}\n"))?;
            let b = spec.tree.is_none().then_some(spec.b);
            (sim.data, Some(TruthParameters { k: spec.k, a: spec.a, sigma2: spec.sigma2, b, tree }))
        }
        ScenarioSpec::ProbabilityMatrix(spec) => (simulate_from_probability_matrix(spec, &mut rng)?, None),
        ScenarioSpec::Blocks(spec) => (simulate_from_probability_matrix(&spec.to_probability_spec(), &mut rng)?, None),
    };

    let total = data.n_networks();
    let mut names = Vec::with_capacity(total);
    for m in 0..total {
        let name = network_file_name(m, total);
        write_text(&out.join(&name), &adjacency_csv(&data, m))?;
        println!("{name}\tV={}\tdensity={:.4}", data.n_nodes(), data.density(m));
        names.push(name);
    }
    let manifest = TruthManifest { seed: config.seed, n_nodes: data.n_nodes(), n_networks: total, model, networks: names };
    let text = toml::to_string(&manifest).context("serializing the truth manifest")?;
    write_text(&out.join("truth.toml"), &text)?;
    Ok(())
}

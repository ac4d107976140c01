//! Exhaustive structural suites on random trees.

use std::collections::{BTreeSet, HashMap};

use phylnet::moves::{propose_unchecked, MoveKind};
use phylnet::summarize::{consensus, split_counts};
use phylnet::{from_newick, rf_distance, sample_yule_tree, to_newick, PhyloTree, Split, TreeCovariance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::support::chi_square_test;
use crate::Outcome;

const N_TREES: usize = 1_000;
const P_MIN: f64 = 0.001;
const AGE_TOL: f64 = 1e-9;

fn taxa(v: usize) -> Vec<String> {
    (0..v).map(|i| format!("t{i}")).collect()
}

fn random_tree(rng: &mut ChaCha20Rng, v: usize) -> PhyloTree {
    let b = rng.random_range(0.1..5.0);
    sample_yule_tree(taxa(v), b, rng).unwrap()
}

/// Three-point condition and positive definiteness of the MRCA-age matrix.
fn ultrametric(rng: &mut ChaCha20Rng) -> Result<String, String> {
    let mut worst_eig = f64::INFINITY;
    for n in 0..N_TREES {
        let v = rng.random_range(3..=30);
        let tree = random_tree(rng, v);
        let m = tree.correlation_matrix();
        for i in 0..v {
            for j in 0..i {
                for k in 0..j {
                    let mut t = [m[(i, j)], m[(i, k)], m[(j, k)]];
                    t.sort_by(f64::total_cmp);
                    if (t[0] - t[1]).abs() > 1e-12 {
                        return Err(format!("tree {n}: three-point condition fails at ({i},{j},{k}): {t:?}"));
                    }
                }
            }
        }
        TreeCovariance::new(&tree).map_err(|e| format!("tree {n}: {e}"))?;
        let eig = m.symmetric_eigenvalues().min();
        if eig <= 0.0 {
            return Err(format!("tree {n}: smallest eigenvalue {eig}"));
        }
        worst_eig = worst_eig.min(eig);
    }
    Ok(format!("smallest eigenvalue {worst_eig:.2e}"))
}

/// Topology and MRCA ages survive writing and reading back. The text itself
/// may differ: lengths are printed to 12 significant digits.
fn newick_round_trips(rng: &mut ChaCha20Rng) -> Result<String, String> {
    for n in 0..N_TREES {
        let v = rng.random_range(2..=40);
        let tree = random_tree(rng, v);
        let text = to_newick(&tree);
        let back = from_newick(&text, Some(tree.taxa())).map_err(|e| format!("tree {n}: {e}"))?;
        if rf_distance(&tree, &back, false).unwrap() != 0.0 {
            return Err(format!("tree {n}: {text} changes topology"));
        }
        for i in 0..v {
            for j in 0..i {
                if (tree.mrca_age(i, j) - back.mrca_age(i, j)).abs() > AGE_TOL {
                    return Err(format!("tree {n}: MRCA age of ({i},{j}) moved"));
                }
            }
        }
    }
    Ok(String::new())
}

fn rf_axioms(rng: &mut ChaCha20Rng) -> Result<String, String> {
    for n in 0..N_TREES {
        let v = rng.random_range(4..=12);
        let [x, y, z] = [0; 3].map(|_| random_tree(rng, v));
        let d = |a: &PhyloTree, b: &PhyloTree| rf_distance(a, b, true).unwrap();
        let (xy, yx, yz, xz) = (d(&x, &y), d(&y, &x), d(&y, &z), d(&x, &z));
        let same = x.splits() == y.splits();
        if d(&x, &x) != 0.0 || xy != yx || xz > xy + yz + 1e-12 || !(0.0..=1.0).contains(&xy) || (xy == 0.0) != same {
            return Err(format!("triple {n}: d(x,y)={xy} d(y,x)={yx} d(y,z)={yz} d(x,z)={xz}"));
        }
    }
    Ok(String::new())
}

/// Apply `steps` random feasible moves to `base`.
fn perturb(base: &PhyloTree, steps: usize, rng: &mut ChaCha20Rng) -> PhyloTree {
    let mut t = base.clone();
    for _ in 0..steps {
        let kind = MoveKind::ALL[rng.random_range(0..5)];
        let out = propose_unchecked(&t, kind, rng, 0.1);
        if out.feasible {
            t = out.proposed;
        }
    }
    t
}

/// Retained clades nest or are disjoint, all beat the threshold, and every
/// clade that beats it is retained.
fn consensus_laminar(rng: &mut ChaCha20Rng) -> Result<String, String> {
    let thresholds = [0.5, 0.6, 0.8, 0.95];
    for n in 0..N_TREES / 4 {
        let v = rng.random_range(4..=15);
        let base = random_tree(rng, v);
        let size = rng.random_range(1..=40);
        let spread = rng.random_range(0..6);
        let samples: Vec<PhyloTree> = (0..size).map(|_| perturb(&base, spread, rng)).collect();
        let counts = split_counts(&samples).unwrap();
        for &p in &thresholds {
            let c = consensus(&samples, p).map_err(|e| format!("set {n}, p = {p}: {e}"))?;
            let kept: Vec<(&Split, f64)> = c.splits();
            for (i, (a, sa)) in kept.iter().enumerate() {
                if *sa <= p {
                    return Err(format!("set {n}, p = {p}: clade with support {sa} retained"));
                }
                for (b, _) in &kept[..i] {
                    if !(a.is_subset(b) || b.is_subset(a) || a.is_disjoint(b)) {
                        return Err(format!("set {n}, p = {p}: overlapping clades"));
                    }
                }
            }
            let expected = counts.values().filter(|(k, _)| *k as f64 > p * size as f64).count();
            if expected != kept.len() {
                return Err(format!("set {n}, p = {p}: {} clades kept, {expected} beat the threshold", kept.len()));
            }
        }
    }
    Ok(String::new())
}

/// Internal clades listed from the root down, by age.
fn ranked_history(tree: &PhyloTree) -> Vec<Split> {
    let mut s = tree.splits_with_ages();
    s.sort_by(|a, b| a.1.total_cmp(&b.1));
    s.into_iter().map(|(c, _)| c).collect()
}

fn ranked_history_count(v: usize) -> usize {
    (2..=v).map(|k| k * (k - 1) / 2).product()
}

/// Accepting every feasible proposal targets the flat measure, under which
/// all ranked labelled histories are equally likely. Also checks, per move
/// kind, that transitions between histories balance in both directions.
fn occupancy(v: usize, rng: &mut ChaCha20Rng) -> Result<String, String> {
    let cells = ranked_history_count(v);
    let records = 200 * cells;
    let gap = 20;
    let mut tree = random_tree(rng, v);
    let mut visits: HashMap<Vec<Split>, u64> = HashMap::new();
    let mut flows: Vec<HashMap<(Vec<Split>, Vec<Split>), u64>> = vec![HashMap::new(); 5];
    for step in 0..records * gap {
        let k = rng.random_range(0..5);
        let out = propose_unchecked(&tree, MoveKind::ALL[k], rng, 0.2);
        if out.feasible {
            let (from, to) = (ranked_history(&tree), ranked_history(&out.proposed));
            if from != to {
                *flows[k].entry((from, to)).or_default() += 1;
            }
            tree = out.proposed;
        }
        if step % gap == gap - 1 {
            *visits.entry(ranked_history(&tree)).or_default() += 1;
        }
    }
    if visits.len() != cells {
        return Err(format!("V={v}: {} of {cells} ranked histories visited", visits.len()));
    }
    let observed: Vec<u64> = visits.values().copied().collect();
    let (chi2, p) = chi_square_test(&observed, &vec![1.0 / cells as f64; cells]);
    if p <= P_MIN {
        return Err(format!("V={v}: occupancy chi2 = {chi2:.1}, p = {p:.2e}"));
    }
    let mut worst = 1.0f64;
    for (k, flow) in flows.iter().enumerate() {
        let mut stat = 0.0;
        let mut df = 0usize;
        let mut seen: BTreeSet<(Vec<Split>, Vec<Split>)> = BTreeSet::new();
        for ((a, b), &n_ab) in flow {
            if seen.contains(&(b.clone(), a.clone())) {
                continue;
            }
            seen.insert((a.clone(), b.clone()));
            let n_ba = flow.get(&(b.clone(), a.clone())).copied().unwrap_or(0);
            stat += (n_ab as f64 - n_ba as f64).powi(2) / (n_ab + n_ba) as f64;
            df += 1;
        }
        if df == 0 {
            continue;
        }
        let p_flow = ChiSquared::new(df as f64).unwrap().sf(stat);
        if p_flow <= P_MIN {
            return Err(format!("V={v}: {} transitions unbalanced, p = {p_flow:.2e}", MoveKind::ALL[k].name()));
        }
        worst = worst.min(p_flow);
    }
    Ok(format!("V={v}: {cells} histories, p = {p:.3}, min balance p = {worst:.3}"))
}

pub fn run(seed: u64) -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let suites: [(&str, fn(&mut ChaCha20Rng) -> Result<String, String>); 6] = [
        ("ultrametric/PSD", ultrametric),
        ("occupancy", |r| occupancy(4, r)),
        ("occupancy", |r| occupancy(5, r)),
        ("newick", newick_round_trips),
        ("consensus", consensus_laminar),
        ("rf axioms", rf_axioms),
    ];
    let mut notes = Vec::new();
    let mut pass = true;
    for (name, suite) in suites {
        match suite(&mut rng) {
            Ok(note) if note.is_empty() => notes.push(format!("{name} ok")),
            Ok(note) => notes.push(format!("{name} ok ({note})")),
            Err(e) => {
                pass = false;
                notes.push(format!("{name} FAILED: {e}"));
            }
        }
    }
    Outcome::check(pass, notes.join("; "))
}

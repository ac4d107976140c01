//! File formats: CSV adjacency matrices, sample logs and truth manifests.
//!
//! A sample log is plain text. Lines starting with `#` are comments, the
//! first other line is the column header and every further line is one
//! retained draw:
//!
//! ```text
//! # phylnet sample log
//! chain	iter	a	sigma2	b	newick
//! 0	15010	2.61	0.58	0.71	((v1:0.3,v2:0.3):0.7,v3:1.0);
//! ```
//!
//! With feature snapshots enabled a final `z` column holds, per network
//! separated by `;`, the column-major `K x V` features separated by `,`.

#![allow(clippy::tabs_in_doc_comments)]

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NetworkData;
use crate::newick::{from_newick, to_newick};
use crate::sampler::PosteriorSample;
use crate::simulate::default_labels;

/// One adjacency matrix read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyFile {
    pub labels: Option<Vec<String>>,
    pub n: usize,
    pub entries: Vec<u8>,
}

fn parse_entry(cell: &str) -> Option<u8> {
    let x = cell.parse::<f64>().ok()?;
    if x == 0.0 {
        Some(0)
    } else if x == 1.0 {
        Some(1)
    } else {
        None
    }
}

/// Read a square 0/1 matrix, with an optional first row of node labels.
pub fn read_adjacency_csv(path: &Path) -> Result<AdjacencyFile> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let mut rows: Vec<Vec<String>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    if rows.is_empty() {
        return Err(Error::format(path, "empty adjacency file"));
    }
    let labels = if rows[0].iter().any(|c| c.parse::<f64>().is_err()) { Some(rows.remove(0)) } else { None };
    let n = rows.len();
    if let Some(l) = &labels {
        if l.len() != n {
            return Err(Error::format(path, format!("{} labels for a matrix with {n} rows", l.len())));
        }
    }
    let mut entries = vec![0u8; n * n];
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::format(path, format!("row {} has {} entries, expected {n}", i + 1, row.len())));
        }
        for (j, cell) in row.iter().enumerate() {
            entries[i * n + j] = parse_entry(cell).ok_or_else(|| {
                Error::format(path, format!("entry ({},{}) is `{cell}`, expected 0 or 1", i + 1, j + 1))
            })?;
        }
    }
    for i in 0..n {
        if entries[i * n + i] != 0 {
            return Err(Error::format(path, format!("diagonal entry ({0},{0}) must be 0", i + 1)));
        }
        for j in i + 1..n {
            if entries[i * n + j] != entries[j * n + i] {
                return Err(Error::format(
                    path,
                    format!(
                        "matrix is not symmetric: entry ({},{}) is {} but ({},{}) is {}",
                        i + 1,
                        j + 1,
                        entries[i * n + j],
                        j + 1,
                        i + 1,
                        entries[j * n + i]
                    ),
                ));
            }
        }
    }
    Ok(AdjacencyFile { labels, n, entries })
}

/// Read several networks over one node set. Labels come from the header rows,
/// which must agree, or default to `v1..vV`.
pub fn read_networks(paths: &[PathBuf]) -> Result<NetworkData> {
    if paths.is_empty() {
        return Err(Error::InvalidParameter("no adjacency files given".into()));
    }
    let mut labels: Option<Vec<String>> = None;
    let mut n = None;
    let mut adjacency = Vec::with_capacity(paths.len());
    for path in paths {
        let file = read_adjacency_csv(path)?;
        match n {
            None => n = Some(file.n),
            Some(n0) if n0 != file.n => {
                return Err(Error::format(path, format!("has {} nodes, earlier files have {n0}", file.n)));
            }
            _ => {}
        }
        if let Some(l) = file.labels {
            match &labels {
                None => labels = Some(l),
                Some(l0) if *l0 != l => return Err(Error::format(path, "node labels differ from earlier files")),
                _ => {}
            }
        }
        adjacency.push(file.entries);
    }
    let n = n.expect("at least one file");
    NetworkData::new(labels.unwrap_or_else(|| default_labels(n)), adjacency)
}

/// `*.csv` files in a directory, sorted by name.
pub fn csv_files_in(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Adjacency matrix of network `m` as CSV text with a label header row.
pub fn adjacency_csv(data: &NetworkData, m: usize) -> String {
    let n = data.n_nodes();
    let adj = data.adjacency(m);
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(data.labels()).expect("in-memory write");
    for i in 0..n {
        w.write_record(adj[i * n..(i + 1) * n].iter().map(|x| x.to_string())).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("csv output is utf-8")
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub const SAMPLE_LOG_COLUMNS: [&str; 6] = ["chain", "iter", "a", "sigma2", "b", "newick"];

/// Header of a sample log, comment lines included.
pub fn sample_log_header(with_z: bool, comments: &[String]) -> String {
    let mut out = String::from("# phylnet sample log\n");
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    out.push_str(&SAMPLE_LOG_COLUMNS.join("\t"));
    if with_z {
        out.push_str("\tz");
    }
    out.push('\n');
    out
}

pub fn sample_log_line(s: &PosteriorSample) -> String {
    let mut line = format!("{}\t{}\t{}\t{}\t{}\t{}", s.chain, s.iter, s.a, s.sigma2, s.b, to_newick(&s.tree));
    if let Some(z) = &s.z {
        line.push('\t');
        let parts: Vec<String> =
            z.iter().map(|zm| zm.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")).collect();
        line.push_str(&parts.join(";"));
    }
    line.push('\n');
    line
}

/// Appends one line per sample and flushes it, so partial runs can be read.
pub struct SampleLogWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl SampleLogWriter {
    pub fn create(path: &Path, with_z: bool, comments: &[String]) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = SampleLogWriter { path: path.to_path_buf(), out: BufWriter::new(file) };
        w.write_raw(&sample_log_header(with_z, comments))?;
        Ok(w)
    }

    fn write_raw(&mut self, text: &str) -> Result<()> {
        self.out.write_all(text.as_bytes()).and_then(|_| self.out.flush()).map_err(|e| Error::io(&self.path, e))
    }

    pub fn write(&mut self, sample: &PosteriorSample) -> Result<()> {
        self.write_raw(&sample_log_line(sample))
    }
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| Error::format(path, format!("line {line}: bad {name} `{raw}`")))
}

/// Parse a sample log written by [`SampleLogWriter`].
pub fn read_sample_log(path: &Path) -> Result<Vec<PosteriorSample>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut samples = Vec::new();
    let mut header: Option<Vec<String>> = None;
    let mut taxa: Option<Vec<String>> = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = i + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let Some(h) = &header else {
            if cols[..cols.len().min(6)] != SAMPLE_LOG_COLUMNS {
                return Err(Error::format(path, format!("line {lineno}: expected the column header")));
            }
            header = Some(cols.iter().map(|s| s.to_string()).collect());
            continue;
        };
        if cols.len() != h.len() {
            return Err(Error::format(path, format!("line {lineno}: {} fields, expected {}", cols.len(), h.len())));
        }
        let tree = from_newick(cols[5], taxa.as_deref())
            .map_err(|e| Error::format(path, format!("line {lineno}: {e}")))?;
        if taxa.is_none() {
            taxa = Some(tree.taxa().to_vec());
        }
        let z = if h.len() > 6 {
            let nets = cols[6]
                .split(';')
                .map(|part| part.split(',').map(|x| field(path, lineno, "z", x)).collect::<Result<Vec<f64>>>())
                .collect::<Result<Vec<_>>>()?;
            Some(nets)
        } else {
            None
        };
        samples.push(PosteriorSample {
            chain: field(path, lineno, "chain", cols[0])?,
            iter: field(path, lineno, "iter", cols[1])?,
            a: field(path, lineno, "a", cols[2])?,
            sigma2: field(path, lineno, "sigma2", cols[3])?,
            b: field(path, lineno, "b", cols[4])?,
            tree,
            z,
        });
    }
    if header.is_none() {
        return Err(Error::format(path, "not a sample log: no column header"));
    }
    Ok(samples)
}

/// Ground truth written next to simulated networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthManifest {
    pub seed: u64,
    pub n_nodes: usize,
    pub n_networks: usize,
    /// Absent for probability-matrix scenarios.
    pub model: Option<TruthParameters>,
    pub networks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthParameters {
    pub k: usize,
    pub a: f64,
    pub sigma2: f64,
    /// Absent when the tree was given rather than drawn.
    pub b: Option<f64>,
    pub tree: String,
}

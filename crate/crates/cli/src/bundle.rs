//! On-disk dataset bundles: dense CSV panels, edge lists, truth and a
//! JSON manifest.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use gmnar_core::model::{GroupAssignment, MatrixSeries, NetworkPair, ParameterSet, ParameterSpec};
use gmnar_core::netgen::{read_edge_list, write_edge_list};
use gmnar_core::simulate::{SimConfig, SimMetadata, Simulation};
use gmnar_core::{GmnarError, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleFiles {
    pub y: String,
    pub x: String,
    pub z: String,
    pub row_edges: String,
    pub col_edges: String,
    #[serde(default)]
    pub truth: Option<String>,
}

impl Default for BundleFiles {
    fn default() -> Self {
        Self {
            y: "y.csv".into(),
            x: "x.csv".into(),
            z: "z.csv".into(),
            row_edges: "row_edges.csv".into(),
            col_edges: "col_edges.csv".into(),
            truth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub library_version: String,
    pub n1: usize,
    pub n2: usize,
    /// Number of transitions; `y` holds `t + 1` slices.
    pub t: usize,
    pub p1: usize,
    pub p2: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub config_hash: Option<String>,
    #[serde(default)]
    pub config: Option<serde_json::Value>,
    #[serde(default)]
    pub simulation: Option<SimMetadata>,
    #[serde(default)]
    pub files: BundleFiles,
}

/// True memberships and parameters of a simulated bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub row_labels: Vec<usize>,
    pub col_labels: Vec<usize>,
    pub params: ParameterSpec,
}

impl Truth {
    pub fn resolve(&self) -> Result<(ParameterSet, GroupAssignment)> {
        let params = self.params.to_params()?;
        let assign = GroupAssignment::new(params.row_groups(), params.col_groups(), self.row_labels.clone(), self.col_labels.clone())?;
        Ok((params, assign))
    }
}

/// A loaded bundle.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: Manifest,
    pub data: MatrixSeries,
    pub nets: NetworkPair,
    pub truth: Option<Truth>,
}

/// SHA-256 of the canonical JSON of a config.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// 17 significant digits: parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Write `t,i,j,value` for every `t` in `0..=T`, then `i`, then `j`.
pub fn write_panel<W: Write>(data: &MatrixSeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "i", "j", "value"])?;
    for (t, y) in data.y_slices().iter().enumerate() {
        for i in 0..data.n1() {
            for j in 0..data.n2() {
                w.write_record([t.to_string(), i.to_string(), j.to_string(), fmt_f64(y[(i, j)])])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Write covariates as `t,<node>,k,value` with `t` in `1..=T`.
pub fn write_covariates<W: Write>(slices: &[DMatrix<f64>], node: &str, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", node, "k", "value"])?;
    for (s, m) in slices.iter().enumerate() {
        for i in 0..m.nrows() {
            for k in 0..m.ncols() {
                w.write_record([(s + 1).to_string(), i.to_string(), k.to_string(), fmt_f64(m[(i, k)])])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a dense `t,a,b,value` file into `slices` matrices of `rows x cols`,
/// with `t` starting at `t0`. Every entry must appear exactly once.
fn read_dense(path: &Path, header: [&str; 4], t0: usize, slices: usize, rows: usize, cols: usize) -> Result<Vec<DMatrix<f64>>> {
    let mut rdr = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let h = rdr.headers()?.clone();
    if h.iter().collect::<Vec<_>>() != header {
        return Err(GmnarError::Parse(format!("{}: header must be `{}`, got {:?}", path.display(), header.join(","), h)));
    }
    let mut out = vec![DMatrix::zeros(rows, cols); slices];
    let mut seen = vec![false; slices * rows * cols];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(GmnarError::Parse(format!("{} row {}: expected 4 fields", path.display(), line + 1)));
        }
        let idx = |k: usize| -> Result<usize> {
            rec[k].trim().parse::<usize>().map_err(|e| GmnarError::Parse(format!("{} row {}: {e}", path.display(), line + 1)))
        };
        let (t, a, b) = (idx(0)?, idx(1)?, idx(2)?);
        let v: f64 = rec[3].trim().parse().map_err(|e| GmnarError::Parse(format!("{} row {}: {e}", path.display(), line + 1)))?;
        if t < t0 || t >= t0 + slices || a >= rows || b >= cols {
            return Err(GmnarError::Dimension(format!("{} row {}: index ({t}, {a}, {b}) outside the manifest dimensions", path.display(), line + 1)));
        }
        let s = t - t0;
        let key = (s * rows + a) * cols + b;
        if seen[key] {
            return Err(GmnarError::Parse(format!("{} row {}: duplicate entry ({t}, {a}, {b})", path.display(), line + 1)));
        }
        seen[key] = true;
        out[s][(a, b)] = v;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        let (s, rest) = (missing / (rows * cols), missing % (rows * cols));
        return Err(GmnarError::Dimension(format!("{}: missing entry ({}, {}, {})", path.display(), s + t0, rest / cols, rest % cols)));
    }
    Ok(out)
}

/// Write a simulated dataset with its truth and manifest into `dir`.
pub fn write_simulation(dir: &Path, sim: &Simulation, cfg: &SimConfig) -> Result<Manifest> {
    std::fs::create_dir_all(dir)?;
    let files = BundleFiles { truth: Some("truth.json".into()), ..BundleFiles::default() };
    write_panel(&sim.data, create(&dir.join(&files.y))?)?;
    write_covariates(sim.data.x_slices(), "i", create(&dir.join(&files.x))?)?;
    write_covariates(sim.data.z_slices(), "j", create(&dir.join(&files.z))?)?;
    write_edge_list(sim.nets.a1(), create(&dir.join(&files.row_edges))?)?;
    write_edge_list(sim.nets.a2(), create(&dir.join(&files.col_edges))?)?;
    let truth = Truth { row_labels: sim.assign.rows().to_vec(), col_labels: sim.assign.cols().to_vec(), params: ParameterSpec::from(&sim.params) };
    write_json(&dir.join("truth.json"), &truth)?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        library_version: env!("CARGO_PKG_VERSION").into(),
        n1: sim.data.n1(),
        n2: sim.data.n2(),
        t: sim.data.t_len(),
        p1: sim.data.p1(),
        p2: sim.data.p2(),
        seed: Some(cfg.seed),
        config_hash: Some(config_hash(cfg)?),
        config: Some(serde_json::to_value(cfg)?),
        simulation: Some(sim.metadata.clone()),
        files,
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn resolve(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

/// Load a bundle and check every file against the manifest dimensions.
pub fn load(dir: &Path) -> Result<Dataset> {
    let manifest: Manifest = serde_json::from_reader(BufReader::new(File::open(dir.join(MANIFEST))?))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(GmnarError::Parse(format!("unsupported bundle format version {}", manifest.format_version)));
    }
    let Manifest { n1, n2, t, p1, p2, .. } = manifest;
    let files = &manifest.files;
    let y = read_dense(&resolve(dir, &files.y), ["t", "i", "j", "value"], 0, t + 1, n1, n2)?;
    let x = read_dense(&resolve(dir, &files.x), ["t", "i", "k", "value"], 1, t, n1, p1)?;
    let z = read_dense(&resolve(dir, &files.z), ["t", "j", "k", "value"], 1, t, n2, p2)?;
    let data = MatrixSeries::new(y, x, z)?;
    let a1 = read_edge_list(BufReader::new(File::open(resolve(dir, &files.row_edges))?), n1)?;
    let a2 = read_edge_list(BufReader::new(File::open(resolve(dir, &files.col_edges))?), n2)?;
    let nets = NetworkPair::from_adjacency(a1, a2)?;
    let truth = match &files.truth {
        Some(name) => {
            let truth: Truth = serde_json::from_reader(BufReader::new(File::open(resolve(dir, name))?))?;
            let (params, assign) = truth.resolve()?;
            assign.check_against(&data)?;
            if params.p1() != p1 || params.p2() != p2 {
                return Err(GmnarError::Dimension("truth parameters do not match the covariate counts".into()));
            }
            Some(truth)
        }
        None => None,
    };
    Ok(Dataset { manifest, data, nets, truth })
}

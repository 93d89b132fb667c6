//! Benchmark network generators and edge-list I/O.
//!
//! Both generators are directed. Node `i` draws from its own random stream
//! (see [`crate::rng`]), so rows can be generated in parallel and the result
//! is identical for any thread count.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::model::{normalize, Normalization};

use crate::error::{GmnarError, Result};
use crate::rng::{domain, stream};

/// Default number of blocks for the stochastic block model.
pub const DEFAULT_SBM_BLOCKS: usize = 5;

/// Power-law exponent for the latent degree distribution.
pub const POWERLAW_EXPONENT: f64 = 2.5;

/// Each latent degree is multiplied by this factor.
pub const POWERLAW_DEGREE_FACTOR: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NetworkKind {
    Sbm {
        #[serde(default = "default_blocks")]
        blocks: usize,
    },
    Powerlaw,
}

fn default_blocks() -> usize {
    DEFAULT_SBM_BLOCKS
}

impl NetworkKind {
    pub fn sbm() -> Self {
        Self::Sbm { blocks: DEFAULT_SBM_BLOCKS }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sbm { .. } => "sbm",
            Self::Powerlaw => "powerlaw",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub kind: NetworkKind,
    pub nodes: usize,
    pub seed: u64,
}

impl NetworkSpec {
    pub fn generate(&self) -> Result<DMatrix<u8>> {
        match self.kind {
            NetworkKind::Sbm { blocks } => gen_sbm(self.nodes, blocks, self.seed),
            NetworkKind::Powerlaw => gen_powerlaw(self.nodes, self.seed),
        }
    }
}

/// Stochastic block model: uniform block labels over `blocks`, then each
/// ordered pair `i != j` is an edge with probability `min(20/N, 1)` inside a
/// block and `min(2/N, 1)` across blocks.
pub fn gen_sbm(nodes: usize, blocks: usize, seed: u64) -> Result<DMatrix<u8>> {
    if nodes < 2 {
        return Err(GmnarError::InvalidArgument(format!("SBM needs at least 2 nodes, got {nodes}")));
    }
    if blocks == 0 {
        return Err(GmnarError::InvalidArgument("SBM needs at least one block".into()));
    }
    let mut label_rng = stream(seed, domain::SBM_BLOCKS, 0);
    let labels: Vec<usize> = (0..nodes).map(|_| label_rng.random_range(0..blocks)).collect();
    let p_in = (20.0 / nodes as f64).min(1.0);
    let p_out = (2.0 / nodes as f64).min(1.0);

    let rows: Vec<Vec<u8>> = (0..nodes)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, domain::SBM_EDGES, i as u64);
            (0..nodes)
                .map(|j| {
                    if i == j {
                        return 0;
                    }
                    let p = if labels[i] == labels[j] { p_in } else { p_out };
                    // one uniform per ordered pair keeps the stream layout fixed
                    let u: f64 = rng.random();
                    u8::from(u < p)
                })
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(nodes, nodes, |i, j| rows[i][j]))
}

/// Latent-degree support cap `K_max = max(1, floor((N - 1) / 4))`.
pub fn powerlaw_support_max(nodes: usize) -> usize {
    ((nodes.saturating_sub(1)) / POWERLAW_DEGREE_FACTOR).max(1)
}

/// Per-node draws behind a power-law network.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLawDraw {
    pub adjacency: DMatrix<u8>,
    /// Latent degrees `d~_i`.
    pub latent_degrees: Vec<usize>,
    /// Nodes whose in-degree `4 d~_i` had to be capped at `N - 1`.
    pub capped: usize,
}

/// Power-law in-degree network: `d~_i` has `P(k) ∝ k^{-2.5}` on
/// `1..=K_max`, the in-degree is `d_i = min(4 d~_i, N - 1)`, and `d_i`
/// distinct followers `j != i` are sampled uniformly (`a_ji = 1`).
pub fn gen_powerlaw(nodes: usize, seed: u64) -> Result<DMatrix<u8>> {
    gen_powerlaw_detailed(nodes, seed).map(|d| d.adjacency)
}

pub fn gen_powerlaw_detailed(nodes: usize, seed: u64) -> Result<PowerLawDraw> {
    if nodes < 5 {
        return Err(GmnarError::InvalidArgument(format!("power-law network needs at least 5 nodes, got {nodes}")));
    }
    let k_max = powerlaw_support_max(nodes);
    let weights: Vec<f64> = (1..=k_max).map(|k| (k as f64).powf(-POWERLAW_EXPONENT)).collect();
    let latent = WeightedIndex::new(&weights).map_err(|e| GmnarError::InvalidArgument(e.to_string()))?;

    let draws: Vec<(usize, Vec<usize>)> = (0..nodes)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, domain::POWERLAW, i as u64);
            let latent_degree = latent.sample(&mut rng) + 1;
            let degree = (POWERLAW_DEGREE_FACTOR * latent_degree).min(nodes - 1);
            let followers = rand::seq::index::sample(&mut rng, nodes - 1, degree)
                .into_iter()
                .map(|k| if k >= i { k + 1 } else { k })
                .collect();
            (latent_degree, followers)
        })
        .collect();

    let mut adjacency = DMatrix::<u8>::zeros(nodes, nodes);
    let mut capped = 0;
    let mut latent_degrees = Vec::with_capacity(nodes);
    for (i, (d, followers)) in draws.into_iter().enumerate() {
        if POWERLAW_DEGREE_FACTOR * d > nodes - 1 {
            capped += 1;
        }
        latent_degrees.push(d);
        for j in followers {
            adjacency[(j, i)] = 1;
        }
    }
    Ok(PowerLawDraw { adjacency, latent_degrees, capped })
}

/// Write `src,dst` rows, one per directed edge `a_ij = 1`, 0-based ids.
pub fn write_edge_list<W: Write>(adjacency: &DMatrix<u8>, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["src", "dst"])?;
    for i in 0..adjacency.nrows() {
        for j in 0..adjacency.ncols() {
            if adjacency[(i, j)] != 0 {
                wtr.write_record([i.to_string(), j.to_string()])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Read an edge list over `nodes` nodes. Duplicate edges collapse; self
/// loops and out-of-range ids are rejected.
pub fn read_edge_list<R: Read>(input: R, nodes: usize) -> Result<DMatrix<u8>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "src" || &headers[1] != "dst" {
        return Err(GmnarError::Parse(format!("edge list header must be `src,dst`, got {headers:?}")));
    }
    let mut adjacency = DMatrix::<u8>::zeros(nodes, nodes);
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let parse = |k: usize| -> Result<usize> {
            record[k]
                .trim()
                .parse::<usize>()
                .map_err(|e| GmnarError::Parse(format!("edge row {}: {e}", line + 1)))
        };
        let (src, dst) = (parse(0)?, parse(1)?);
        if src >= nodes || dst >= nodes {
            return Err(GmnarError::Dimension(format!("edge ({src}, {dst}) outside {nodes} nodes")));
        }
        if src == dst {
            return Err(GmnarError::Parse(format!("self loop at node {src}")));
        }
        adjacency[(src, dst)] = 1;
    }
    Ok(adjacency)
}

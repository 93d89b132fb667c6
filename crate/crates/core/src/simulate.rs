//! Simulation of GMNAR panels, including the three benchmark scenarios.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GmnarError, Result};
use crate::model::{check_stationarity, conditional_mean, GroupAssignment, MatrixSeries, NetworkPair, ParameterSet, ParameterSpec};
use crate::netgen::{NetworkKind, NetworkSpec};
use crate::rng::{derive_seed, domain, stream, StreamRng};

pub const DEFAULT_BURN_IN: usize = 100;

/// Label draws are retried this many times before giving up on a
/// configuration that keeps leaving a group empty.
const MAX_LABEL_ATTEMPTS: u64 = 10_000;

/// Boundary slack for the stationarity refusal.
const KAPPA_SLACK: f64 = 1e-9;

/// True parameters of benchmark scenario `id` (1, 2 or 3) and its group
/// counts `(G0, H0)`. All scenarios use three row and three column covariates.
pub fn scenario_preset(id: u8) -> Result<(ParameterSet, usize, usize)> {
    let zeta3 = [[0.2, 0.25, -0.3], [0.15, 0.35, -0.35], [0.24, 0.3, -0.32]];
    let delta3 = [[0.25, -0.3, 0.35], [0.2, -0.25, 0.32], [0.1, -0.2, 0.2]];
    let spec = match id {
        1 => ParameterSpec {
            lambda: vec![0.15, 0.2],
            gamma: vec![0.25, 0.4],
            alpha: vec![vec![-0.2, 0.3], vec![-0.18, 0.35]],
            zeta: zeta3[..2].iter().map(|r| r.to_vec()).collect(),
            delta: delta3[..2].iter().map(|r| r.to_vec()).collect(),
        },
        2 => ParameterSpec {
            lambda: vec![0.15, 0.2, 0.3],
            gamma: vec![0.25, 0.3],
            alpha: vec![vec![-0.2, 0.3], vec![-0.18, 0.35], vec![-0.15, 0.28]],
            zeta: zeta3.iter().map(|r| r.to_vec()).collect(),
            delta: delta3[..2].iter().map(|r| r.to_vec()).collect(),
        },
        3 => ParameterSpec {
            lambda: vec![0.15, 0.2, 0.3],
            gamma: vec![0.25, 0.3, 0.4],
            alpha: vec![vec![-0.2, 0.3, 0.4], vec![-0.18, 0.35, 0.4], vec![-0.15, 0.28, 0.2]],
            zeta: zeta3.iter().map(|r| r.to_vec()).collect(),
            delta: delta3.iter().map(|r| r.to_vec()).collect(),
        },
        other => return Err(GmnarError::InvalidArgument(format!("unknown scenario {other}, expected 1, 2 or 3"))),
    };
    let params = spec.to_params()?;
    let (g, h) = (params.row_groups(), params.col_groups());
    Ok((params, g, h))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// One of the benchmark scenarios, with uniform group probabilities.
    Preset(u8),
    /// Explicit parameters; group probabilities default to uniform.
    Custom {
        params: ParameterSpec,
        #[serde(default)]
        row_probs: Option<Vec<f64>>,
        #[serde(default)]
        col_probs: Option<Vec<f64>>,
    },
}

impl Scenario {
    /// Parameters and membership probabilities `(pi_1, pi_2)`.
    pub fn resolve(&self) -> Result<(ParameterSet, Vec<f64>, Vec<f64>)> {
        match self {
            Self::Preset(id) => {
                let (params, g, h) = scenario_preset(*id)?;
                Ok((params, uniform(g), uniform(h)))
            }
            Self::Custom { params, row_probs, col_probs } => {
                let params = params.to_params()?;
                let pr = row_probs.clone().unwrap_or_else(|| uniform(params.row_groups()));
                let pc = col_probs.clone().unwrap_or_else(|| uniform(params.col_groups()));
                check_probs(&pr, params.row_groups(), "row")?;
                check_probs(&pc, params.col_groups(), "column")?;
                Ok((params, pr, pc))
            }
        }
    }
}

fn uniform(k: usize) -> Vec<f64> {
    vec![1.0 / k as f64; k]
}

fn check_probs(p: &[f64], k: usize, what: &str) -> Result<()> {
    if p.len() != k {
        return Err(GmnarError::Dimension(format!("{what} probabilities have {} entries for {k} groups", p.len())));
    }
    if p.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(GmnarError::InvalidArgument(format!("{what} probabilities must be positive")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(GmnarError::InvalidArgument(format!("{what} probabilities sum to {total}, not 1")));
    }
    Ok(())
}

fn default_noise_sd() -> f64 {
    1.0
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

fn default_network() -> NetworkKind {
    NetworkKind::sbm()
}

/// Simulation settings. Serializes to the JSON document accepted by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n1: usize,
    pub n2: usize,
    pub t: usize,
    pub scenario: Scenario,
    #[serde(default = "default_network")]
    pub row_network: NetworkKind,
    #[serde(default = "default_network")]
    pub col_network: NetworkKind,
    /// Noise standard deviation; 0 gives noiseless dynamics.
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default)]
    pub seed: u64,
}

impl SimConfig {
    pub fn preset(id: u8, n1: usize, n2: usize, t: usize, network: NetworkKind, seed: u64) -> Self {
        Self {
            n1,
            n2,
            t,
            scenario: Scenario::Preset(id),
            row_network: network,
            col_network: network,
            noise_sd: 1.0,
            burn_in: DEFAULT_BURN_IN,
            seed,
        }
    }

    pub fn with_noise_sd(mut self, sd: f64) -> Self {
        self.noise_sd = sd;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 < 2 || self.n2 < 2 {
            return Err(GmnarError::InvalidArgument(format!("need at least 2 rows and 2 columns, got {}x{}", self.n1, self.n2)));
        }
        if self.t == 0 {
            return Err(GmnarError::InvalidArgument("T must be at least 1".into()));
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return Err(GmnarError::InvalidArgument(format!("noise_sd must be finite and nonnegative, got {}", self.noise_sd)));
        }
        if let NetworkKind::Sbm { blocks: 0 } = self.row_network {
            return Err(GmnarError::InvalidArgument("row SBM needs at least one block".into()));
        }
        if let NetworkKind::Sbm { blocks: 0 } = self.col_network {
            return Err(GmnarError::InvalidArgument("column SBM needs at least one block".into()));
        }
        Ok(())
    }

    pub fn row_network_spec(&self) -> NetworkSpec {
        NetworkSpec { kind: self.row_network, nodes: self.n1, seed: derive_seed(self.seed, domain::ROW_NETWORK, 0) }
    }

    pub fn col_network_spec(&self) -> NetworkSpec {
        NetworkSpec { kind: self.col_network, nodes: self.n2, seed: derive_seed(self.seed, domain::COL_NETWORK, 0) }
    }
}

/// Provenance recorded alongside a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetadata {
    pub burn_in: usize,
    pub initial_state: String,
    pub kappa: f64,
    pub warnings: Vec<String>,
    pub row_probs: Vec<f64>,
    pub col_probs: Vec<f64>,
    pub label_attempts: (u64, u64),
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub data: MatrixSeries,
    pub nets: NetworkPair,
    pub assign: GroupAssignment,
    pub params: ParameterSet,
    pub metadata: SimMetadata,
}

fn draw_labels(n: usize, probs: &[f64], seed: u64, dom: u64) -> Result<(Vec<usize>, u64)> {
    if n < probs.len() {
        return Err(GmnarError::InvalidArgument(format!("{n} nodes cannot fill {} nonempty groups", probs.len())));
    }
    let dist = WeightedIndex::new(probs).map_err(|e| GmnarError::InvalidArgument(e.to_string()))?;
    for attempt in 0..MAX_LABEL_ATTEMPTS {
        let mut rng = stream(seed, dom, attempt);
        let labels: Vec<usize> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        let mut seen = vec![false; probs.len()];
        labels.iter().for_each(|&l| seen[l] = true);
        if seen.iter().all(|&s| s) {
            return Ok((labels, attempt + 1));
        }
    }
    Err(GmnarError::InvalidArgument("could not draw labels with every group nonempty".into()))
}

fn normal_matrix(rows: usize, cols: usize, rng: &mut StreamRng) -> DMatrix<f64> {
    // row-major fill keeps the draw order independent of storage layout
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for k in 0..cols {
            m[(i, k)] = StandardNormal.sample(rng);
        }
    }
    m
}

/// Simulate a panel: draw memberships and networks, then iterate the model
/// from a zero state for `burn_in + T` steps with fresh i.i.d. standard
/// normal covariates and noise at every step. The last burn-in slice becomes
/// `Y_0` of the output.
pub fn simulate_gmnar(cfg: &SimConfig) -> Result<Simulation> {
    cfg.validate()?;
    let (params, row_probs, col_probs) = cfg.scenario.resolve()?;
    let stationarity = check_stationarity(&params);
    let mut warnings = Vec::new();
    if stationarity.kappa > 1.0 + KAPPA_SLACK {
        return Err(GmnarError::NonStationary { kappa: stationarity.kappa });
    }
    if !stationarity.stationary {
        warnings.push(format!("kappa = {:.6} sits on the stationarity boundary", stationarity.kappa));
    }

    let a1 = cfg.row_network_spec().generate()?;
    let a2 = cfg.col_network_spec().generate()?;
    let nets = NetworkPair::from_adjacency(a1, a2)?;

    let (rows, row_attempts) = draw_labels(cfg.n1, &row_probs, cfg.seed, domain::ROW_LABELS)?;
    let (cols, col_attempts) = draw_labels(cfg.n2, &col_probs, cfg.seed, domain::COL_LABELS)?;
    let assign = GroupAssignment::new(params.row_groups(), params.col_groups(), rows, cols)?;

    let (p1, p2) = (params.p1(), params.p2());
    let steps = cfg.burn_in + cfg.t;
    let mut y = Vec::with_capacity(cfg.t + 1);
    let mut xs = Vec::with_capacity(cfg.t);
    let mut zs = Vec::with_capacity(cfg.t);
    let mut state = DMatrix::<f64>::zeros(cfg.n1, cfg.n2);
    if cfg.burn_in == 0 {
        y.push(state.clone());
    }
    for step in 1..=steps {
        let x = normal_matrix(cfg.n1, p1, &mut stream(cfg.seed, domain::ROW_COVARIATES, step as u64));
        let z = normal_matrix(cfg.n2, p2, &mut stream(cfg.seed, domain::COL_COVARIATES, step as u64));
        let row_net = nets.w1() * &state;
        let col_net = &state * nets.w2();
        let mut next = conditional_mean(&params, &assign, &state, &row_net, &col_net, &x, &z);
        if cfg.noise_sd > 0.0 {
            let noise = normal_matrix(cfg.n1, cfg.n2, &mut stream(cfg.seed, domain::NOISE, step as u64));
            next += noise * cfg.noise_sd;
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(GmnarError::NonFinite(format!("simulated state diverged at step {step}")));
        }
        state = next;
        if step == cfg.burn_in {
            y.push(state.clone());
        } else if step > cfg.burn_in {
            y.push(state.clone());
            xs.push(x);
            zs.push(z);
        }
    }

    let data = MatrixSeries::new(y, xs, zs)?;
    Ok(Simulation {
        data,
        nets,
        assign,
        params,
        metadata: SimMetadata {
            burn_in: cfg.burn_in,
            initial_state: "zero".into(),
            kappa: stationarity.kappa,
            warnings,
            row_probs,
            col_probs,
            label_attempts: (row_attempts, col_attempts),
        },
    })
}

/// Residuals `Y_t - E[Y_t | past]` at the given parameters, one matrix per `t`.
pub fn residuals(params: &ParameterSet, assign: &GroupAssignment, data: &MatrixSeries, nets: &NetworkPair) -> Result<Vec<DMatrix<f64>>> {
    (1..=data.t_len())
        .map(|t| crate::model::one_step_mean(params, assign, data, nets, t).map(|m| data.y(t) - m))
        .collect()
}

/// Empirical group proportions of a label vector.
pub fn group_proportions(labels: &[usize], groups: usize) -> DVector<f64> {
    let mut out = DVector::zeros(groups);
    for &l in labels {
        out[l] += 1.0;
    }
    out / labels.len() as f64
}

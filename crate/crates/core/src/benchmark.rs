//! Monte Carlo replication harness: simulate, fit (or select), infer, and
//! compare with the truth and with the oracle fit at the true memberships.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GmnarError, Result};
use crate::estimate::{Estimator, FitOptions, FitResult};
use crate::inference::covariance;
use crate::metrics::{align_to_truth, misclustering_majority, misclustering_permutation, nodewise_squared_errors, pseudo_distance, ReplicateRecord, ReplicationSummary};
use crate::netgen::NetworkKind;
use crate::rng::{derive_seed, domain};
use crate::select::select_on_cells;
use crate::simulate::{simulate_gmnar, Scenario, SimConfig, DEFAULT_BURN_IN};

/// How the group numbers are handled in each replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum GroupMode {
    /// Fit at the true `(G0, H0)`.
    Fixed,
    /// Choose `(G, H)` by QIC on a grid, or only on its diagonal `G = H`
    /// when `diagonal` is set.
    Select {
        gmin: usize,
        gmax: usize,
        hmin: usize,
        hmax: usize,
        #[serde(default)]
        diagonal: bool,
    },
    /// Fit at given group numbers, which may differ from the truth.
    Given { g: usize, h: usize },
}

fn default_mode() -> GroupMode {
    GroupMode::Fixed
}

fn default_level() -> f64 {
    0.95
}

fn default_noise_sd() -> f64 {
    1.0
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub scenario: Scenario,
    pub network: NetworkKind,
    /// `(N1, N2)` pairs.
    pub sizes: Vec<(usize, usize)>,
    pub t_list: Vec<usize>,
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: GroupMode,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

impl BenchmarkConfig {
    pub fn new(scenario: Scenario, network: NetworkKind, sizes: Vec<(usize, usize)>, t_list: Vec<usize>, reps: usize, seed: u64) -> Self {
        Self {
            scenario,
            network,
            sizes,
            t_list,
            reps,
            seed,
            mode: GroupMode::Fixed,
            fit: FitOptions::default(),
            level: 0.95,
            noise_sd: 1.0,
            burn_in: DEFAULT_BURN_IN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.t_list.is_empty() || self.reps == 0 {
            return Err(GmnarError::InvalidArgument("benchmark needs at least one size, one T and one replicate".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(GmnarError::InvalidArgument(format!("level must lie in (0, 1), got {}", self.level)));
        }
        self.fit.validate()?;
        self.scenario.resolve()?;
        Ok(())
    }

    /// Simulation settings of replicate `rep`. The replicate seed does not
    /// depend on the setting, so settings are paired.
    pub fn sim_config(&self, n1: usize, n2: usize, t: usize, rep: usize) -> SimConfig {
        SimConfig {
            n1,
            n2,
            t,
            scenario: self.scenario.clone(),
            row_network: self.network,
            col_network: self.network,
            noise_sd: self.noise_sd,
            burn_in: self.burn_in,
            seed: derive_seed(self.seed, domain::REPLICATE, rep as u64),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SettingResult {
    pub n1: usize,
    pub n2: usize,
    pub t: usize,
    pub summary: ReplicationSummary,
    pub records: Vec<ReplicateRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    pub settings: Vec<SettingResult>,
}

/// Run one replicate; errors are recorded, not propagated.
pub fn run_replicate(cfg: &BenchmarkConfig, n1: usize, n2: usize, t: usize, rep: usize) -> ReplicateRecord {
    let sim_cfg = cfg.sim_config(n1, n2, t, rep);
    let seed = sim_cfg.seed;
    replicate_inner(cfg, &sim_cfg, rep).unwrap_or_else(|e| ReplicateRecord::failed(rep, seed, e.to_string()))
}

fn replicate_inner(cfg: &BenchmarkConfig, sim_cfg: &SimConfig, rep: usize) -> Result<ReplicateRecord> {
    let sim = simulate_gmnar(sim_cfg)?;
    let (g0, h0) = (sim.params.row_groups(), sim.params.col_groups());
    let opts = FitOptions { seed: sim_cfg.seed, ..cfg.fit.clone() };
    let fit: FitResult = match cfg.mode {
        GroupMode::Fixed => Estimator::new(&sim.data, &sim.nets)?.fit(g0, h0, &opts)?,
        GroupMode::Given { g, h } => Estimator::new(&sim.data, &sim.nets)?.fit(g, h, &opts)?,
        GroupMode::Select { gmin, gmax, hmin, hmax, diagonal } => {
            let cells: Vec<(usize, usize)> = (gmin..=gmax).flat_map(|g| (hmin..=hmax).map(move |h| (g, h))).filter(|&(g, h)| !diagonal || g == h).collect();
            let mut sel = select_on_cells(&sim.data, &sim.nets, &cells, &opts)?;
            let k = sel.grid.iter().position(|c| (c.row_groups, c.col_groups) == sel.chosen).expect("chosen cell");
            sel.fits.swap_remove(k)
        }
    };
    let chosen = (fit.assign.row_groups(), fit.assign.col_groups());

    let mut rec = ReplicateRecord::failed(rep, sim_cfg.seed, String::new());
    rec.error = None;
    rec.chosen = chosen;
    rec.sigma2_hat = fit.sigma2_hat;
    rec.converged = fit.converged || fit.cycle_detected;
    rec.xi1 = misclustering_majority(fit.assign.rows(), chosen.0, sim.assign.rows(), g0)?;
    rec.xi2 = misclustering_majority(fit.assign.cols(), chosen.1, sim.assign.cols(), h0)?;
    rec.nodewise_sq = nodewise_squared_errors((&fit.params, &fit.assign), (&sim.params, &sim.assign))?;
    rec.pseudo_distance = pseudo_distance((&fit.params, &fit.assign), (&sim.params, &sim.assign))?;

    if chosen == (g0, h0) {
        rec.eta1 = misclustering_permutation(fit.assign.rows(), sim.assign.rows(), g0)?;
        rec.eta2 = misclustering_permutation(fit.assign.cols(), sim.assign.cols(), h0)?;
        let (aligned, rp, cp) = align_to_truth(&fit.params, &fit.assign, &sim.assign)?;
        let mut inf = covariance(&fit, &sim.data, &sim.nets)?;
        crate::inference::confidence_intervals(&mut inf, cfg.level)?;
        let layout = aligned.layout();
        let permute = |v: &nalgebra::DVector<f64>| -> Result<Vec<f64>> {
            Ok(crate::model::ParameterSet::unflatten(layout, v.as_slice())?.permuted(&rp, &cp).flatten().as_slice().to_vec())
        };
        rec.estimate = aligned.flatten().as_slice().to_vec();
        rec.se = permute(&inf.se)?;
        rec.ci_lower = permute(&inf.ci_lower)?;
        rec.ci_upper = permute(&inf.ci_upper)?;
    }

    let oracle = Estimator::new(&sim.data, &sim.nets)?.fit_fixed(&sim.assign, &opts)?;
    let mut oinf = covariance(&oracle, &sim.data, &sim.nets)?;
    crate::inference::confidence_intervals(&mut oinf, cfg.level)?;
    rec.oracle_estimate = oracle.params.flatten().as_slice().to_vec();
    rec.oracle_ci_lower = oinf.ci_lower.as_slice().to_vec();
    rec.oracle_ci_upper = oinf.ci_upper.as_slice().to_vec();
    Ok(rec)
}

/// Run every setting with `reps` replicates each. Replicates run in
/// parallel; records are kept in replicate order so the aggregates do not
/// depend on scheduling.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let (truth_params, _, _) = cfg.scenario.resolve()?;
    let mut settings = Vec::new();
    for &(n1, n2) in &cfg.sizes {
        for &t in &cfg.t_list {
            let records: Vec<ReplicateRecord> = (0..cfg.reps).into_par_iter().map(|r| run_replicate(cfg, n1, n2, t, r)).collect();
            let summary = ReplicationSummary::from_records(&records, &truth_params, n1, n2)?;
            settings.push(SettingResult { n1, n2, t, summary, records });
        }
    }
    Ok(BenchmarkReport { config: cfg.clone(), settings })
}

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v}")
    }
}

impl BenchmarkReport {
    /// One row per metric and setting.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["network", "n1", "n2", "t", "metric", "value"])?;
        for s in &self.settings {
            for (metric, value) in s.summary.metric_rows() {
                w.write_record([self.config.network.name(), &s.n1.to_string(), &s.n2.to_string(), &s.t.to_string(), &metric, &fmt_value(value)])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Table with RMSE x 100 and the coverage in parentheses.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<9} {:>4} {:>4} {:>3} | {:>14} {:>14} {:>14} {:>14} {:>14} | {:>14} {:>14} {:>14} {:>14} {:>14} | {:>7} {:>7}",
            "network", "N1", "N2", "T", "lambda", "gamma", "zeta", "delta", "alpha", "lambda_or", "gamma_or", "zeta_or", "delta_or", "alpha_or", "eta1", "eta2"
        );
        for r in &self.settings {
            let m = &r.summary;
            let cell = |rmse: f64, cp: f64| format!("{:.1} ({:.3})", rmse * 100.0, cp);
            let _ = write!(s, "{:<9} {:>4} {:>4} {:>3} |", self.config.network.name(), r.n1, r.n2, r.t);
            for (a, b) in m.rmse.values().iter().zip(m.cp.values()) {
                let _ = write!(s, " {:>14}", cell(*a, b));
            }
            let _ = write!(s, " |");
            for (a, b) in m.rmse_oracle.values().iter().zip(m.cp_oracle.values()) {
                let _ = write!(s, " {:>14}", cell(*a, b));
            }
            let _ = writeln!(s, " | {:>7.4} {:>7.4}", m.eta1, m.eta2);
            let _ = writeln!(
                s,
                "{:<23} node-wise RMSE x100: {:.1} {:.1} {:.1} {:.1} {:.1}; xi1 {:.4}, xi2 {:.4}; rho(G) {:?}, rho(H) {:?}; failures {}",
                "",
                m.rmse_all.lambda * 100.0,
                m.rmse_all.gamma * 100.0,
                m.rmse_all.zeta * 100.0,
                m.rmse_all.delta * 100.0,
                m.rmse_all.alpha * 100.0,
                m.xi1,
                m.xi2,
                m.rho_g,
                m.rho_h,
                m.failures
            );
        }
        s
    }
}

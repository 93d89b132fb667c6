//! Alternating estimation: solve for the parameters given memberships, then
//! reassign rows and columns given the parameters, until the memberships
//! settle.

use std::collections::HashSet;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::design::assemble_with_terms;
use super::init::{init_from_profiles, split_group, NodeProfiles};
use super::membership::{col_sse, row_sse, update_cols, update_rows};
use super::solve::solve_theta;
use crate::error::{GmnarError, Result};
use crate::model::{objective_with_terms, GroupAssignment, MatrixSeries, NetworkPair, NetworkTerms, ParamLayout, ParameterSet};
use crate::rng::{derive_seed, domain};

fn default_max_iter() -> usize {
    100
}

fn default_param_tol() -> f64 {
    1e-8
}

fn default_n_init() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Max-abs change in the flat parameter vector between successive solves.
    #[serde(default = "default_param_tol")]
    pub param_tol: f64,
    /// Number of initialization restarts.
    #[serde(default = "default_n_init")]
    pub n_init: usize,
    #[serde(default)]
    pub enforce_intercept_constraint: bool,
    #[serde(default)]
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: default_max_iter(),
            param_tol: default_param_tol(),
            n_init: default_n_init(),
            enforce_intercept_constraint: false,
            seed: 0,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 || self.n_init == 0 {
            return Err(GmnarError::InvalidArgument("max_iter and n_init must be at least 1".into()));
        }
        if !(self.param_tol >= 0.0) {
            return Err(GmnarError::InvalidArgument("param_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Which kind of step produced a `q_trace` entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Solve,
    RowUpdate,
    ColUpdate,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: ParameterSet,
    pub assign: GroupAssignment,
    pub q_value: f64,
    /// Objective after every half step of the winning restart.
    pub q_trace: Vec<f64>,
    pub steps: Vec<Step>,
    /// `Q / (N1 N2 T - q)`, clamped at zero.
    pub sigma2_hat: f64,
    pub iterations: usize,
    pub converged: bool,
    pub cycle_detected: bool,
    /// Some parameter solve hit a singular `M` and used the min-norm fallback.
    pub degenerate: bool,
    pub min_rcond: f64,
    /// Number of nonempty row and column groups.
    pub effective_groups: (usize, usize),
    /// Empty groups reseeded along the way.
    pub reseeds: usize,
    pub restart: usize,
    pub restarts_run: usize,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn layout(&self) -> ParamLayout {
        self.params.layout()
    }

    pub fn summary(&self) -> FitSummary {
        FitSummary {
            q_value: self.q_value,
            sigma2_hat: self.sigma2_hat,
            iterations: self.iterations,
            converged: self.converged,
            cycle_detected: self.cycle_detected,
            degenerate: self.degenerate,
            effective_groups: self.effective_groups,
            restarts_run: self.restarts_run,
            warnings: self.warnings.clone(),
        }
    }
}

/// The scalar diagnostics of a [`FitResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub q_value: f64,
    pub sigma2_hat: f64,
    pub iterations: usize,
    pub converged: bool,
    pub cycle_detected: bool,
    pub degenerate: bool,
    pub effective_groups: (usize, usize),
    pub restarts_run: usize,
    pub warnings: Vec<String>,
}

/// Noise variance estimate with the `N1 N2 T - q` degrees-of-freedom correction.
pub fn sigma2_estimate(q_value: f64, n_obs: usize, dim: usize) -> f64 {
    if n_obs <= dim {
        return 0.0;
    }
    (q_value / (n_obs - dim) as f64).max(0.0)
}

/// Estimation context for one dataset: caches the network terms and node
/// profiles so repeated fits (restarts, grid cells) do not recompute them.
pub struct Estimator<'a> {
    data: &'a MatrixSeries,
    terms: NetworkTerms,
    profiles: NodeProfiles,
}

impl<'a> Estimator<'a> {
    pub fn new(data: &'a MatrixSeries, nets: &NetworkPair) -> Result<Self> {
        let terms = NetworkTerms::new(data, nets)?;
        let profiles = NodeProfiles::new(data, &terms);
        Ok(Self { data, terms, profiles })
    }

    pub fn data(&self) -> &MatrixSeries {
        self.data
    }

    pub fn terms(&self) -> &NetworkTerms {
        &self.terms
    }

    pub fn profiles(&self) -> &NodeProfiles {
        &self.profiles
    }

    pub fn objective(&self, params: &ParameterSet, assign: &GroupAssignment) -> f64 {
        objective_with_terms(params, assign, self.data, &self.terms)
    }

    /// Parameter solve for fixed memberships (the oracle estimator when the
    /// memberships are the true ones).
    pub fn fit_fixed(&self, assign: &GroupAssignment, opts: &FitOptions) -> Result<FitResult> {
        assign.check_against(self.data)?;
        let ne = assemble_with_terms(self.data, &self.terms, assign);
        let sol = solve_theta(&ne, opts.enforce_intercept_constraint)?;
        let q = self.objective(&sol.params, assign);
        Ok(self.finish(sol.params, assign.clone(), vec![q], vec![Step::Solve], 0, true, false, sol.degenerate, sol.rcond, 0, 0, 1))
    }

    /// Starting labels for restart `restart`: the first restart keeps the
    /// best of `n_init` k-means runs, later ones use a single seeded run.
    pub fn initial_labels(&self, row_groups: usize, col_groups: usize, opts: &FitOptions, restart: usize) -> Result<GroupAssignment> {
        let seed = derive_seed(opts.seed, domain::FIT_RESTART, restart as u64);
        let runs = if restart == 0 { opts.n_init } else { 1 };
        init_from_profiles(&self.profiles, self.data.n1(), self.data.n2(), row_groups, col_groups, runs, seed)
    }

    pub fn fit(&self, row_groups: usize, col_groups: usize, opts: &FitOptions) -> Result<FitResult> {
        self.fit_with_starts(row_groups, col_groups, opts, &[])
    }

    /// Fit from the `n_init` profile-based starts plus `extra` starting
    /// memberships; returns the restart with the smallest final objective.
    pub fn fit_with_starts(&self, row_groups: usize, col_groups: usize, opts: &FitOptions, extra: &[GroupAssignment]) -> Result<FitResult> {
        opts.validate()?;
        if self.data.t_len() == 0 {
            return Err(GmnarError::InvalidArgument("T must be at least 1".into()));
        }
        let mut starts: Vec<GroupAssignment> = Vec::new();
        for r in 0..opts.n_init {
            starts.push(self.initial_labels(row_groups, col_groups, opts, r)?);
        }
        for s in extra {
            if s.row_groups() != row_groups || s.col_groups() != col_groups {
                return Err(GmnarError::Dimension("extra start has the wrong group counts".into()));
            }
            s.check_against(self.data)?;
            starts.push(s.clone());
        }
        let mut seen = HashSet::new();
        let mut best: Option<FitResult> = None;
        let mut run = 0;
        for (r, start) in starts.into_iter().enumerate() {
            if !seen.insert(start.clone()) {
                continue;
            }
            run += 1;
            let mut res = self.run_from(start, opts)?;
            res.restart = r;
            if best.as_ref().is_none_or(|b| res.q_value < b.q_value) {
                best = Some(res);
            }
        }
        let mut best = best.expect("at least one start");
        best.restarts_run = run;
        Ok(best)
    }

    /// One run of the alternating algorithm from `start`.
    pub fn run_from(&self, start: GroupAssignment, opts: &FitOptions) -> Result<FitResult> {
        let data = self.data;
        let mut labels = start;
        let mut trace = Vec::new();
        let mut steps = Vec::new();
        let mut visited = HashSet::new();
        visited.insert(labels.clone());

        let sol = solve_theta(&assemble_with_terms(data, &self.terms, &labels), opts.enforce_intercept_constraint)?;
        let mut degenerate = sol.degenerate;
        let mut min_rcond = sol.rcond;
        let mut theta = sol.params.flatten();
        let mut params = sol.params;
        trace.push(self.objective(&params, &labels));
        steps.push(Step::Solve);

        let mut converged = false;
        let mut cycle = false;
        let mut reseeds = 0;
        let mut iterations = 0;
        let mut last_delta = f64::INFINITY;
        while iterations < opts.max_iter {
            iterations += 1;
            let before = labels.clone();

            let rows = update_rows(&params, &labels, data, &self.terms);
            labels.set_rows(rows.labels);
            trace.push(rows.node_sse.iter().sum());
            steps.push(Step::RowUpdate);

            let cols = update_cols(&params, &labels, data, &self.terms);
            labels.set_cols(cols.labels);
            trace.push(cols.node_sse.iter().sum());
            steps.push(Step::ColUpdate);

            reseeds += self.reseed_empty(&mut params, &mut labels);

            if labels == before {
                // Unchanged labels reproduce the last solve exactly, so the
                // parameter change of the implied next step is zero.
                converged = true;
                last_delta = 0.0;
                break;
            }
            if !visited.insert(labels.clone()) {
                cycle = true;
            }

            let sol = solve_theta(&assemble_with_terms(data, &self.terms, &labels), opts.enforce_intercept_constraint)?;
            degenerate |= sol.degenerate;
            min_rcond = min_rcond.min(sol.rcond);
            let next_theta: DVector<f64> = sol.params.flatten();
            last_delta = (&next_theta - &theta).amax();
            theta = next_theta;
            params = sol.params;
            trace.push(self.objective(&params, &labels));
            steps.push(Step::Solve);
            if cycle {
                break;
            }
        }

        if !converged && !cycle && steps.last() != Some(&Step::Solve) {
            // max_iter hit right after an update: refit so params match labels
            let sol = solve_theta(&assemble_with_terms(data, &self.terms, &labels), opts.enforce_intercept_constraint)?;
            degenerate |= sol.degenerate;
            min_rcond = min_rcond.min(sol.rcond);
            params = sol.params;
            trace.push(self.objective(&params, &labels));
            steps.push(Step::Solve);
        }
        converged &= last_delta < opts.param_tol.max(f64::MIN_POSITIVE);
        Ok(self.finish(params, labels, trace, steps, iterations, converged, cycle, degenerate, min_rcond, reseeds, 0, 1))
    }

    /// Refill empty groups with the worst-fitting node of a group that can
    /// spare one. The new group inherits the donor group's parameters, so the
    /// objective is unchanged and the next solve can only lower it.
    fn reseed_empty(&self, params: &mut ParameterSet, labels: &mut GroupAssignment) -> usize {
        let mut moved = 0;
        loop {
            let sizes = labels.row_sizes();
            let Some(empty) = sizes.iter().position(|&s| s == 0) else { break };
            let sse = row_sse(params, labels, self.data, &self.terms);
            let Some(node) = worst_movable(&sse, labels.rows(), &sizes) else { break };
            let donor = labels.rows()[node];
            params.lambda[empty] = params.lambda[donor];
            let donor_zeta = params.zeta.column(donor).clone_owned();
            params.zeta.set_column(empty, &donor_zeta);
            let donor_alpha = params.alpha.row(donor).clone_owned();
            params.alpha.set_row(empty, &donor_alpha);
            let mut rows = labels.rows().to_vec();
            rows[node] = empty;
            labels.set_rows(rows);
            moved += 1;
        }
        loop {
            let sizes = labels.col_sizes();
            let Some(empty) = sizes.iter().position(|&s| s == 0) else { break };
            let sse = col_sse(params, labels, self.data, &self.terms);
            let Some(node) = worst_movable(&sse, labels.cols(), &sizes) else { break };
            let donor = labels.cols()[node];
            params.gamma[empty] = params.gamma[donor];
            let donor_delta = params.delta.column(donor).clone_owned();
            params.delta.set_column(empty, &donor_delta);
            let donor_alpha = params.alpha.column(donor).clone_owned();
            params.alpha.set_column(empty, &donor_alpha);
            let mut cols = labels.cols().to_vec();
            cols[node] = empty;
            labels.set_cols(cols);
            moved += 1;
        }
        moved
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        params: ParameterSet,
        assign: GroupAssignment,
        q_trace: Vec<f64>,
        steps: Vec<Step>,
        iterations: usize,
        converged: bool,
        cycle_detected: bool,
        degenerate: bool,
        min_rcond: f64,
        reseeds: usize,
        restart: usize,
        restarts_run: usize,
    ) -> FitResult {
        let q_value = *q_trace.last().expect("trace is never empty");
        let dim = params.layout().dim();
        let effective_groups = (
            assign.row_sizes().iter().filter(|&&s| s > 0).count(),
            assign.col_sizes().iter().filter(|&&s| s > 0).count(),
        );
        let mut warnings = Vec::new();
        if degenerate {
            warnings.push(format!("singular normal equations (min rcond {min_rcond:.3e}); minimum-norm solution used"));
        }
        if effective_groups != (assign.row_groups(), assign.col_groups()) {
            warnings.push(format!(
                "only {}x{} of {}x{} groups are occupied",
                effective_groups.0,
                effective_groups.1,
                assign.row_groups(),
                assign.col_groups()
            ));
        }
        if !converged && !cycle_detected {
            warnings.push(format!("stopped at max_iter = {iterations} without convergence"));
        }
        FitResult {
            sigma2_hat: sigma2_estimate(q_value, self.data.n_obs(), dim),
            params,
            assign,
            q_value,
            q_trace,
            steps,
            iterations,
            converged,
            cycle_detected,
            degenerate,
            min_rcond,
            effective_groups,
            reseeds,
            restart,
            restarts_run,
            warnings,
        }
    }

    /// Labels for a `(G + 1, H)` start obtained by splitting the largest row
    /// group of `coarse`.
    pub fn split_rows(&self, coarse: &GroupAssignment, seed: u64) -> Result<GroupAssignment> {
        let sizes = coarse.row_sizes();
        let target = largest(&sizes);
        let rows = split_group(coarse.rows(), target, coarse.row_groups(), self.profiles.rows.as_ref(), seed);
        GroupAssignment::new(coarse.row_groups() + 1, coarse.col_groups(), rows, coarse.cols().to_vec())
    }

    /// Labels for a `(G, H + 1)` start obtained by splitting the largest
    /// column group of `coarse`.
    pub fn split_cols(&self, coarse: &GroupAssignment, seed: u64) -> Result<GroupAssignment> {
        let sizes = coarse.col_sizes();
        let target = largest(&sizes);
        let cols = split_group(coarse.cols(), target, coarse.col_groups(), self.profiles.cols.as_ref(), seed);
        GroupAssignment::new(coarse.row_groups(), coarse.col_groups() + 1, coarse.rows().to_vec(), cols)
    }
}

fn largest(sizes: &[usize]) -> usize {
    let mut best = 0;
    for (k, &s) in sizes.iter().enumerate() {
        if s > sizes[best] {
            best = k;
        }
    }
    best
}

fn worst_movable(sse: &[f64], labels: &[usize], sizes: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &l) in labels.iter().enumerate() {
        if sizes[l] < 2 {
            continue;
        }
        if best.is_none_or(|b| sse[i] > sse[b]) {
            best = Some(i);
        }
    }
    best
}

/// Fit with `G` row groups and `H` column groups.
pub fn fit(data: &MatrixSeries, nets: &NetworkPair, row_groups: usize, col_groups: usize, opts: &FitOptions) -> Result<FitResult> {
    if row_groups == 0 || row_groups > data.n1() || col_groups == 0 || col_groups > data.n2() {
        return Err(GmnarError::InvalidArgument(format!(
            "need 1 <= G <= {} and 1 <= H <= {}, got ({row_groups}, {col_groups})",
            data.n1(),
            data.n2()
        )));
    }
    Estimator::new(data, nets)?.fit(row_groups, col_groups, opts)
}

/// Least-squares parameters for fixed memberships.
pub fn fit_fixed(data: &MatrixSeries, nets: &NetworkPair, assign: &GroupAssignment, opts: &FitOptions) -> Result<FitResult> {
    Estimator::new(data, nets)?.fit_fixed(assign, opts)
}

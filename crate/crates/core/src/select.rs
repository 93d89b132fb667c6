//! Choosing the numbers of row and column groups by QIC.

use std::collections::HashMap;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GmnarError, Result};
use crate::estimate::{Estimator, FitOptions, FitResult, FitSummary};
use crate::model::{GroupAssignment, MatrixSeries, NetworkPair, ParameterSet};
use crate::rng::{derive_seed, domain};

/// `eta = 1 / (40 ln(T) T^(1/8))`.
pub fn penalty_eta(t_len: f64) -> Result<f64> {
    if !(t_len >= 2.0) {
        return Err(GmnarError::InvalidArgument(format!("penalty needs T >= 2, got {t_len}")));
    }
    Ok(1.0 / (40.0 * t_len.ln() * t_len.powf(0.125)))
}

/// Objectives at or below this fraction of `sum_t ||Y_t||^2` are rounding
/// residue of an exact fit and count as zero.
pub const PERFECT_FIT_REL: f64 = 1e-24;

/// `ln(Q / n_obs) + eta (G + H)`; `-inf` for a perfect fit.
pub fn qic(q_value: f64, n_obs: usize, row_groups: usize, col_groups: usize, eta: f64) -> f64 {
    if q_value <= 0.0 {
        return f64::NEG_INFINITY;
    }
    (q_value / n_obs as f64).ln() + eta * (row_groups + col_groups) as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct GridCell {
    pub row_groups: usize,
    pub col_groups: usize,
    pub qic: f64,
    /// `ln(Q) + eta (G + H)` without the `N1 N2 T` normalization.
    pub qic_unnormalized: f64,
    pub q_value: f64,
    pub fit: FitSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionResult {
    pub grid: Vec<GridCell>,
    pub chosen: (usize, usize),
    pub eta: f64,
    pub warnings: Vec<String>,
    /// Full fits in grid order.
    #[serde(skip)]
    pub fits: Vec<FitResult>,
}

impl SelectionResult {
    pub fn cell(&self, row_groups: usize, col_groups: usize) -> Option<&GridCell> {
        self.grid.iter().find(|c| c.row_groups == row_groups && c.col_groups == col_groups)
    }

    pub fn chosen_fit(&self) -> &FitResult {
        let k = self.grid.iter().position(|c| (c.row_groups, c.col_groups) == self.chosen).expect("chosen cell is in the grid");
        &self.fits[k]
    }
}

fn better(a: &GridCell, b: &GridCell) -> bool {
    if a.qic != b.qic {
        return a.qic < b.qic;
    }
    (a.row_groups + a.col_groups, a.row_groups) < (b.row_groups + b.col_groups, b.row_groups)
}

/// Fit every `(G, H)` in `[1, gmax] x [1, hmax]` and pick the QIC minimizer.
pub fn select_group_numbers(data: &MatrixSeries, nets: &NetworkPair, gmax: usize, hmax: usize, opts: &FitOptions) -> Result<SelectionResult> {
    select_on_grid(data, nets, 1..=gmax, 1..=hmax, opts)
}

/// Grid search over the rectangle `rows x cols`.
pub fn select_on_grid(
    data: &MatrixSeries,
    nets: &NetworkPair,
    rows: RangeInclusive<usize>,
    cols: RangeInclusive<usize>,
    opts: &FitOptions,
) -> Result<SelectionResult> {
    let cells: Vec<(usize, usize)> = rows.flat_map(|g| cols.clone().map(move |h| (g, h))).collect();
    select_on_cells(data, nets, &cells, opts)
}

/// Search over an arbitrary set of `(G, H)` candidates (for instance the
/// diagonal `G = H`). Cells are fitted in order of `G + H`; each cell also
/// starts from splits of the `(G - 1, H)`, `(G, H - 1)` and `(G - 1, H - 1)`
/// solutions when those are candidates.
pub fn select_on_cells(data: &MatrixSeries, nets: &NetworkPair, cells: &[(usize, usize)], opts: &FitOptions) -> Result<SelectionResult> {
    let mut cells = cells.to_vec();
    cells.sort_unstable();
    cells.dedup();
    if cells.is_empty() {
        return Err(GmnarError::InvalidArgument("no candidate group numbers".into()));
    }
    for &(g, h) in &cells {
        if g == 0 || g > data.n1() || h == 0 || h > data.n2() {
            return Err(GmnarError::InvalidArgument(format!("candidate ({g}, {h}) is outside N1 = {}, N2 = {}", data.n1(), data.n2())));
        }
    }
    opts.validate()?;
    let eta = penalty_eta(data.t_len() as f64)?;
    let est = Estimator::new(data, nets)?;

    let mut done: HashMap<(usize, usize), FitResult> = HashMap::new();
    let levels: Vec<usize> = {
        let mut l: Vec<usize> = cells.iter().map(|&(g, h)| g + h).collect();
        l.sort_unstable();
        l.dedup();
        l
    };
    for level in levels {
        let wave: Vec<(usize, usize)> = cells.iter().copied().filter(|&(g, h)| g + h == level).collect();
        let fitted: Vec<Result<FitResult>> = wave
            .par_iter()
            .map(|&(g, h)| {
                let cell_seed = derive_seed(opts.seed, domain::GRID_CELL, ((g as u64) << 32) | h as u64);
                let cell_opts = FitOptions { seed: cell_seed, ..opts.clone() };
                let row_seed = derive_seed(cell_seed, domain::ROW_LABELS, 0);
                let col_seed = derive_seed(cell_seed, domain::COL_LABELS, 0);
                let mut extra: Vec<GroupAssignment> = Vec::new();
                if let Some(coarse) = done.get(&(g - 1, h)) {
                    extra.push(est.split_rows(&coarse.assign, row_seed)?);
                }
                if let Some(coarse) = done.get(&(g, h - 1)) {
                    extra.push(est.split_cols(&coarse.assign, col_seed)?);
                }
                if let Some(coarse) = done.get(&(g - 1, h - 1)) {
                    extra.push(est.split_cols(&est.split_rows(&coarse.assign, row_seed)?, col_seed)?);
                }
                est.fit_with_starts(g, h, &cell_opts, &extra)
            })
            .collect();
        for (&cell, res) in wave.iter().zip(fitted) {
            done.insert(cell, res?);
        }
    }

    let n_obs = data.n_obs();
    let floor = PERFECT_FIT_REL * (1..=data.t_len()).map(|t| data.y(t).norm_squared()).sum::<f64>();
    let mut grid = Vec::new();
    let mut fits = Vec::new();
    let mut warnings = Vec::new();
    for &(g, h) in &cells {
        let fit = done.remove(&(g, h)).expect("every cell fitted");
        for w in &fit.warnings {
            warnings.push(format!("({g}, {h}): {w}"));
        }
        let q_eff = if fit.q_value <= floor { 0.0 } else { fit.q_value };
        if q_eff == 0.0 {
            warnings.push(format!("({g}, {h}): perfect fit, QIC is -inf"));
        }
        grid.push(GridCell {
            row_groups: g,
            col_groups: h,
            qic: qic(q_eff, n_obs, g, h, eta),
            qic_unnormalized: if q_eff > 0.0 { q_eff.ln() + eta * (g + h) as f64 } else { f64::NEG_INFINITY },
            q_value: fit.q_value,
            fit: fit.summary(),
        });
        fits.push(fit);
    }
    let mut best = 0;
    for k in 1..grid.len() {
        if better(&grid[k], &grid[best]) {
            best = k;
        }
    }
    let chosen = (grid[best].row_groups, grid[best].col_groups);
    Ok(SelectionResult { grid, chosen, eta, warnings, fits })
}

/// Population constants bounding the admissible penalty: the smallest
/// group gap and the smallest group proportion. Needs the true parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PenaltyWindow {
    pub c_gap: f64,
    pub c_pi: f64,
    /// `c_gap c_pi^2 / (G H)`, the upper end of the window up to constants.
    pub upper: f64,
}

pub fn penalty_window(params: &ParameterSet, assign: &GroupAssignment) -> PenaltyWindow {
    let (gn, hn) = (params.row_groups(), params.col_groups());
    let mut c_gap = f64::INFINITY;
    for g1 in 0..gn {
        for g2 in (g1 + 1)..gn {
            let mut d = (params.lambda[g1] - params.lambda[g2]).powi(2);
            d += (params.zeta.column(g1) - params.zeta.column(g2)).norm_squared();
            let a = (0..hn).map(|h| (params.alpha[(g1, h)] - params.alpha[(g2, h)]).powi(2)).fold(0.0, f64::max);
            c_gap = c_gap.min(d + a);
        }
    }
    for h1 in 0..hn {
        for h2 in (h1 + 1)..hn {
            let mut d = (params.gamma[h1] - params.gamma[h2]).powi(2);
            d += (params.delta.column(h1) - params.delta.column(h2)).norm_squared();
            let a = (0..gn).map(|g| (params.alpha[(g, h1)] - params.alpha[(g, h2)]).powi(2)).fold(0.0, f64::max);
            c_gap = c_gap.min(d + a);
        }
    }
    let n1 = assign.rows().len() as f64;
    let n2 = assign.cols().len() as f64;
    let rmin = assign.row_sizes().into_iter().min().unwrap_or(0) as f64 / n1;
    let cmin = assign.col_sizes().into_iter().min().unwrap_or(0) as f64 / n2;
    let c_pi = rmin.min(cmin);
    let upper = if c_gap.is_finite() { c_gap * c_pi * c_pi / (gn * hn) as f64 } else { f64::INFINITY };
    PenaltyWindow { c_gap, c_pi, upper }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_values() {
        let e = std::f64::consts::E;
        assert!((penalty_eta(e).unwrap() - 1.0 / (40.0 * e.powf(0.125))).abs() < 1e-15);
        assert!((penalty_eta(e).unwrap() - 0.02206).abs() < 5e-6);
        let e20 = penalty_eta(20.0).unwrap();
        assert!((e20 - 1.0 / (40.0 * 20f64.ln() * 20f64.powf(0.125))).abs() < 1e-18);
        assert!((e20 - 0.00574).abs() < 5e-6);
        assert!(penalty_eta(40.0).unwrap() < penalty_eta(20.0).unwrap());
        assert!(penalty_eta(1.0).is_err());
        assert!(penalty_eta(f64::NAN).is_err());
    }

    #[test]
    fn qic_tie_prefers_smaller_model() {
        assert!(qic(10.0, 100, 1, 1, 0.01) < qic(10.0, 100, 2, 1, 0.01));
        assert_eq!(qic(0.0, 100, 2, 2, 0.01), f64::NEG_INFINITY);
        let cell = |g, h, v| GridCell {
            row_groups: g,
            col_groups: h,
            qic: v,
            qic_unnormalized: v,
            q_value: 0.0,
            fit: FitSummary {
                q_value: 0.0,
                sigma2_hat: 0.0,
                iterations: 0,
                converged: true,
                cycle_detected: false,
                degenerate: false,
                effective_groups: (g, h),
                restarts_run: 1,
                warnings: vec![],
            },
        };
        assert!(better(&cell(2, 2, f64::NEG_INFINITY), &cell(3, 2, f64::NEG_INFINITY)));
        assert!(better(&cell(1, 3, 1.0), &cell(3, 1, 1.0)));
        assert!(!better(&cell(2, 2, 1.0), &cell(2, 2, 1.0)));
    }

    #[test]
    fn penalty_window_on_presets() {
        let (params, _, _) = crate::simulate::scenario_preset(1).unwrap();
        let assign = GroupAssignment::new(2, 2, vec![0, 0, 1, 1], vec![0, 1, 1, 1]).unwrap();
        let w = penalty_window(&params, &assign);
        assert!(w.c_gap > 0.0);
        assert_eq!(w.c_pi, 0.25);
    }
}

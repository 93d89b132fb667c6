//! Standard errors and confidence intervals from the asymptotic normal law
//! `theta_hat ~ N(theta, sigma^2 M^-1)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{GmnarError, Result};
use crate::estimate::{assemble_normal_equations, symmetric_pseudo_inverse, FitResult, RCOND_TOL};
use crate::model::{MatrixSeries, NetworkPair, ParamLayout};

#[derive(Debug, Clone)]
pub struct InferenceResult {
    pub theta_hat: DVector<f64>,
    pub se: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub ci_lower: DVector<f64>,
    pub ci_upper: DVector<f64>,
    pub level: f64,
    pub sigma2_hat: f64,
    pub layout: ParamLayout,
    pub names: Vec<String>,
    /// Coordinates touching a null direction of `M`; their SEs are not meaningful.
    pub degenerate: Vec<bool>,
    /// Largest over smallest group size, rows and columns.
    pub balance_ratio: (f64, f64),
    pub warnings: Vec<String>,
}

/// Standard normal quantile `z_{(1 + level) / 2}`.
pub fn normal_multiplier(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(GmnarError::InvalidArgument(format!("confidence level must lie in (0, 1), got {level}")));
    }
    Ok(Normal::standard().inverse_cdf((1.0 + level) / 2.0))
}

fn balance(sizes: &[usize]) -> f64 {
    let max = sizes.iter().copied().max().unwrap_or(0) as f64;
    let min = sizes.iter().copied().min().unwrap_or(0) as f64;
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `sigma2_hat M^-1` with `M` assembled at the fitted memberships, using the
/// pseudo-inverse when `M` is singular. Intervals are at level 0.95.
pub fn covariance(fit: &FitResult, data: &MatrixSeries, nets: &NetworkPair) -> Result<InferenceResult> {
    let ne = assemble_normal_equations(data, nets, &fit.assign)?;
    let q = ne.layout.dim();
    let mut warnings = Vec::new();

    let (inv, dropped) = match ne.m.clone().cholesky() {
        Some(chol) if rcond(&ne.m) >= RCOND_TOL => (chol.inverse(), 0),
        _ => symmetric_pseudo_inverse(&ne.m),
    };
    let mut degenerate = vec![false; q];
    if dropped > 0 {
        warnings.push(format!("normal matrix is singular ({dropped} null directions); pseudo-inverse used"));
        let null = DMatrix::identity(q, q) - &inv * &ne.m;
        for (k, flag) in degenerate.iter_mut().enumerate() {
            *flag = null[(k, k)].abs() > 1e-8;
        }
    }

    let mut cov = &inv * fit.sigma2_hat;
    cov = (&cov + cov.transpose()) * 0.5;
    let se = DVector::from_fn(q, |k, _| cov[(k, k)].max(0.0).sqrt());
    let theta_hat = fit.params.flatten();
    let balance_ratio = (balance(&fit.assign.row_sizes()), balance(&fit.assign.col_sizes()));
    let mut out = InferenceResult {
        ci_lower: theta_hat.clone(),
        ci_upper: theta_hat.clone(),
        theta_hat,
        se,
        cov,
        level: 0.95,
        sigma2_hat: fit.sigma2_hat,
        layout: ne.layout,
        names: ne.layout.names(),
        degenerate,
        balance_ratio,
        warnings,
    };
    confidence_intervals(&mut out, 0.95)?;
    Ok(out)
}

fn rcond(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigenvalues();
    let max = eig.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
    if max == 0.0 {
        return 0.0;
    }
    (eig.min() / max).max(0.0)
}

/// Recompute the interval bounds `theta_hat -/+ z se` at `level`.
pub fn confidence_intervals(inf: &mut InferenceResult, level: f64) -> Result<()> {
    let z = normal_multiplier(level)?;
    inf.ci_lower = &inf.theta_hat - &inf.se * z;
    inf.ci_upper = &inf.theta_hat + &inf.se * z;
    inf.level = level;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ParameterRow {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    /// Two-sided normal p-value for a zero coefficient.
    pub p_value: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct InferenceReport {
    pub level: f64,
    pub sigma2_hat: f64,
    pub row_groups: usize,
    pub col_groups: usize,
    pub balance_ratio: (f64, f64),
    pub parameters: Vec<ParameterRow>,
    pub warnings: Vec<String>,
}

impl InferenceResult {
    pub fn p_values(&self) -> DVector<f64> {
        let n = Normal::standard();
        DVector::from_fn(self.se.len(), |k, _| {
            let (est, se) = (self.theta_hat[k], self.se[k]);
            if se > 0.0 {
                2.0 * n.sf((est / se).abs())
            } else if est == 0.0 {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn report(&self) -> InferenceReport {
        let p = self.p_values();
        let parameters = (0..self.theta_hat.len())
            .map(|k| ParameterRow {
                name: self.names[k].clone(),
                estimate: self.theta_hat[k],
                se: self.se[k],
                ci_lower: self.ci_lower[k],
                ci_upper: self.ci_upper[k],
                p_value: p[k],
                degenerate: self.degenerate[k],
            })
            .collect();
        InferenceReport {
            level: self.level,
            sigma2_hat: self.sigma2_hat,
            row_groups: self.layout.row_groups,
            col_groups: self.layout.col_groups,
            balance_ratio: self.balance_ratio,
            parameters,
            warnings: self.warnings.clone(),
        }
    }

    /// Does the interval for coordinate `k` contain `value`?
    pub fn covers(&self, k: usize, value: f64) -> bool {
        self.ci_lower[k] <= value && value <= self.ci_upper[k]
    }
}

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::design::NormalEquations;
use crate::error::{GmnarError, Result};
use crate::model::ParameterSet;

/// Reciprocal condition number below which `M` is treated as singular.
pub const RCOND_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ThetaSolution {
    pub params: ParameterSet,
    /// `lambda_min(M) / lambda_max(M)`, 0 for a zero matrix.
    pub rcond: f64,
    /// Set when the minimum-norm fallback was used.
    pub degenerate: bool,
}

/// Solve `M theta = b` by Cholesky; fall back to the minimum-norm
/// least-squares solution when `rcond(M) < 1e-12`.
pub fn solve_theta(ne: &NormalEquations, enforce_intercept: bool) -> Result<ThetaSolution> {
    if ne.m.iter().chain(ne.b.iter()).any(|v| !v.is_finite()) {
        return Err(GmnarError::NonFinite("normal equations".into()));
    }
    let (theta, rcond, degenerate) = solve_symmetric(&ne.m, &ne.b);
    let mut params = ParameterSet::unflatten(ne.layout, theta.as_slice())?;
    if enforce_intercept {
        params.recenter_intercepts()?;
    }
    Ok(ThetaSolution { params, rcond, degenerate })
}

pub(crate) fn solve_symmetric(m: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64, bool) {
    let q = m.nrows();
    if q == 0 {
        return (DVector::zeros(0), 1.0, false);
    }
    let eig = SymmetricEigen::new(m.clone());
    let rcond = reciprocal_condition(&eig.eigenvalues);
    if rcond >= RCOND_TOL {
        if let Some(chol) = m.clone().cholesky() {
            return (chol.solve(b), rcond, false);
        }
    }
    let pinv = pseudo_inverse_from(&eig);
    (pinv * b, rcond, true)
}

fn reciprocal_condition(eigenvalues: &DVector<f64>) -> f64 {
    let max = eigenvalues.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
    if max == 0.0 {
        return 0.0;
    }
    let min = eigenvalues.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    (min / max).max(0.0)
}

/// Moore-Penrose inverse of a symmetric matrix, dropping eigenvalues below
/// `RCOND_TOL * lambda_max`.
pub fn symmetric_pseudo_inverse(m: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let eig = SymmetricEigen::new(m.clone());
    let dropped = dropped_directions(&eig.eigenvalues);
    (pseudo_inverse_from(&eig), dropped)
}

fn dropped_directions(eigenvalues: &DVector<f64>) -> usize {
    let max = eigenvalues.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
    eigenvalues.iter().filter(|&&v| v <= RCOND_TOL * max || max == 0.0).count()
}

fn pseudo_inverse_from(eig: &SymmetricEigen<f64, nalgebra::Dyn>) -> DMatrix<f64> {
    let q = eig.eigenvalues.len();
    let max = eig.eigenvalues.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
    let mut out = DMatrix::zeros(q, q);
    if max == 0.0 {
        return out;
    }
    for k in 0..q {
        let lam = eig.eigenvalues[k];
        if lam > RCOND_TOL * max {
            let v = eig.eigenvectors.column(k);
            out += (v * v.transpose()) / lam;
        }
    }
    out
}

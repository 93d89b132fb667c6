//! Membership updates given parameters.
//!
//! Row `i`'s share of the objective depends only on `g_i` once the
//! parameters and column labels are fixed, so every row picks its own
//! argmin independently (likewise for columns). Ties go to the smallest
//! group index.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::Result;
use crate::model::{GroupAssignment, MatrixSeries, NetworkPair, NetworkTerms, ParameterSet};

/// Result of one membership sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipUpdate {
    pub labels: Vec<usize>,
    /// Each node's sum of squared residuals under its new label.
    pub node_sse: Vec<f64>,
}

impl MembershipUpdate {
    pub fn total(&self) -> f64 {
        self.node_sse.iter().sum()
    }
}

fn check(params: &ParameterSet, assign: &GroupAssignment, data: &MatrixSeries, nets: &NetworkPair) -> Result<()> {
    nets.check_against(data)?;
    assign.check_against(data)?;
    params.check_against(assign, data)
}

/// New row labels `g_i = argmin_g sum_{j,t} (Y_ijt - X_ijt' Theta_{g h_j})^2`.
pub fn update_row_memberships(params: &ParameterSet, assign: &GroupAssignment, data: &MatrixSeries, nets: &NetworkPair) -> Result<Vec<usize>> {
    check(params, assign, data, nets)?;
    let terms = NetworkTerms::new(data, nets)?;
    Ok(update_rows(params, assign, data, &terms).labels)
}

/// New column labels, the mirror of [`update_row_memberships`].
pub fn update_col_memberships(params: &ParameterSet, assign: &GroupAssignment, data: &MatrixSeries, nets: &NetworkPair) -> Result<Vec<usize>> {
    check(params, assign, data, nets)?;
    let terms = NetworkTerms::new(data, nets)?;
    Ok(update_cols(params, assign, data, &terms).labels)
}

/// Response minus the column-side fit: `Y_t - gamma_{h_j} (Y W2)_ij - z_jt' delta_{h_j}`.
fn row_side_targets(params: &ParameterSet, cols: &[usize], data: &MatrixSeries, terms: &NetworkTerms) -> Vec<DMatrix<f64>> {
    (1..=data.t_len())
        .map(|t| {
            let z = data.z(t);
            let zd: Vec<f64> = (0..data.n2()).map(|j| z.row(j).dot(&params.delta.column(cols[j]).transpose())).collect();
            let cn = terms.col_net(t);
            DMatrix::from_fn(data.n1(), data.n2(), |i, j| data.y(t)[(i, j)] - params.gamma[cols[j]] * cn[(i, j)] - zd[j])
        })
        .collect()
}

/// Response minus the row-side fit: `Y_t - lambda_{g_i} (W1 Y)_ij - x_it' zeta_{g_i}`.
fn col_side_targets(params: &ParameterSet, rows: &[usize], data: &MatrixSeries, terms: &NetworkTerms) -> Vec<DMatrix<f64>> {
    (1..=data.t_len())
        .map(|t| {
            let x = data.x(t);
            let xz: Vec<f64> = (0..data.n1()).map(|i| x.row(i).dot(&params.zeta.column(rows[i]).transpose())).collect();
            let rn = terms.row_net(t);
            DMatrix::from_fn(data.n1(), data.n2(), |i, j| data.y(t)[(i, j)] - params.lambda[rows[i]] * rn[(i, j)] - xz[i])
        })
        .collect()
}

/// SSE of row `i` for every candidate row group.
fn row_candidate_sse(params: &ParameterSet, cols: &[usize], data: &MatrixSeries, terms: &NetworkTerms, targets: &[DMatrix<f64>], i: usize) -> Vec<f64> {
    let gn = params.row_groups();
    let mut sse = vec![0.0; gn];
    for t in 1..=data.t_len() {
        let base = &targets[t - 1];
        let rn = terms.row_net(t);
        let prev = data.y(t - 1);
        let x = data.x(t);
        for (g, acc) in sse.iter_mut().enumerate() {
            let lambda = params.lambda[g];
            let xz = x.row(i).dot(&params.zeta.column(g).transpose());
            let mut s = 0.0;
            for j in 0..data.n2() {
                let e = base[(i, j)] - lambda * rn[(i, j)] - params.alpha[(g, cols[j])] * prev[(i, j)] - xz;
                s += e * e;
            }
            *acc += s;
        }
    }
    sse
}

fn col_candidate_sse(params: &ParameterSet, rows: &[usize], data: &MatrixSeries, terms: &NetworkTerms, targets: &[DMatrix<f64>], j: usize) -> Vec<f64> {
    let hn = params.col_groups();
    let mut sse = vec![0.0; hn];
    for t in 1..=data.t_len() {
        let base = &targets[t - 1];
        let cn = terms.col_net(t);
        let prev = data.y(t - 1);
        let z = data.z(t);
        for (h, acc) in sse.iter_mut().enumerate() {
            let gamma = params.gamma[h];
            let zd = z.row(j).dot(&params.delta.column(h).transpose());
            let mut s = 0.0;
            for i in 0..data.n1() {
                let e = base[(i, j)] - gamma * cn[(i, j)] - params.alpha[(rows[i], h)] * prev[(i, j)] - zd;
                s += e * e;
            }
            *acc += s;
        }
    }
    sse
}

fn argmin(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v < best.1 {
            best = (k, v);
        }
    }
    best
}

pub(crate) fn update_rows(params: &ParameterSet, assign: &GroupAssignment, data: &MatrixSeries, terms: &NetworkTerms) -> MembershipUpdate {
    let targets = row_side_targets(params, assign.cols(), data, terms);
    let (labels, node_sse) = (0..data.n1())
        .into_par_iter()
        .map(|i| argmin(&row_candidate_sse(params, assign.cols(), data, terms, &targets, i)))
        .unzip();
    MembershipUpdate { labels, node_sse }
}

pub(crate) fn update_cols(params: &ParameterSet, assign: &GroupAssignment, data: &MatrixSeries, terms: &NetworkTerms) -> MembershipUpdate {
    let targets = col_side_targets(params, assign.rows(), data, terms);
    let (labels, node_sse) = (0..data.n2())
        .into_par_iter()
        .map(|j| argmin(&col_candidate_sse(params, assign.rows(), data, terms, &targets, j)))
        .unzip();
    MembershipUpdate { labels, node_sse }
}

/// Per-row SSE under the current labels.
pub(crate) fn row_sse(params: &ParameterSet, assign: &GroupAssignment, data: &MatrixSeries, terms: &NetworkTerms) -> Vec<f64> {
    let targets = row_side_targets(params, assign.cols(), data, terms);
    (0..data.n1())
        .into_par_iter()
        .map(|i| row_candidate_sse(params, assign.cols(), data, terms, &targets, i)[assign.rows()[i]])
        .collect()
}

/// Per-column SSE under the current labels.
pub(crate) fn col_sse(params: &ParameterSet, assign: &GroupAssignment, data: &MatrixSeries, terms: &NetworkTerms) -> Vec<f64> {
    let targets = col_side_targets(params, assign.rows(), data, terms);
    (0..data.n2())
        .into_par_iter()
        .map(|j| col_candidate_sse(params, assign.rows(), data, terms, &targets, j)[assign.cols()[j]])
        .collect()
}

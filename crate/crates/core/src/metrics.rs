//! Evaluation statistics for estimated parameters and memberships.

use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{GmnarError, Result};
use crate::model::{GroupAssignment, ParamLayout, ParameterSet};

/// `d(Theta_hat, Theta) = (N1 N2)^-1 sum_ij ||Theta_hat_ij - Theta_ij||^2`
/// with node-level coefficients `Theta_ij = (theta^r_{g_i}, theta^c_{h_j}, alpha_{g_i h_j})`.
pub fn pseudo_distance(est: (&ParameterSet, &GroupAssignment), truth: (&ParameterSet, &GroupAssignment)) -> Result<f64> {
    let (ep, ea) = est;
    let (tp, ta) = truth;
    if ea.rows().len() != ta.rows().len() || ea.cols().len() != ta.cols().len() {
        return Err(GmnarError::Dimension("estimate and truth cover different nodes".into()));
    }
    if ep.p1() != tp.p1() || ep.p2() != tp.p2() {
        return Err(GmnarError::Dimension("estimate and truth have different covariate counts".into()));
    }
    check_params(ep, ea)?;
    check_params(tp, ta)?;
    let (n1, n2) = (ea.rows().len() as f64, ea.cols().len() as f64);
    let mut row = 0.0;
    for (&g, &g0) in ea.rows().iter().zip(ta.rows()) {
        row += (ep.lambda[g] - tp.lambda[g0]).powi(2) + (ep.zeta.column(g) - tp.zeta.column(g0)).norm_squared();
    }
    let mut col = 0.0;
    for (&h, &h0) in ea.cols().iter().zip(ta.cols()) {
        col += (ep.gamma[h] - tp.gamma[h0]).powi(2) + (ep.delta.column(h) - tp.delta.column(h0)).norm_squared();
    }
    let mut alpha = 0.0;
    for (&g, &g0) in ea.rows().iter().zip(ta.rows()) {
        for (&h, &h0) in ea.cols().iter().zip(ta.cols()) {
            alpha += (ep.alpha[(g, h)] - tp.alpha[(g0, h0)]).powi(2);
        }
    }
    Ok(row / n1 + col / n2 + alpha / (n1 * n2))
}

fn check_params(params: &ParameterSet, assign: &GroupAssignment) -> Result<()> {
    if params.row_groups() != assign.row_groups() || params.col_groups() != assign.col_groups() {
        return Err(GmnarError::Dimension("parameters and labels disagree on group counts".into()));
    }
    Ok(())
}

fn confusion(est: &[usize], truth: &[usize], k: usize) -> Result<Vec<Vec<usize>>> {
    if est.len() != truth.len() {
        return Err(GmnarError::Dimension(format!("label vectors of length {} and {}", est.len(), truth.len())));
    }
    let mut c = vec![vec![0; k]; k];
    for (&a, &b) in est.iter().zip(truth) {
        if a >= k || b >= k {
            return Err(GmnarError::Index(format!("label out of range for {k} groups")));
        }
        c[a][b] += 1;
    }
    Ok(c)
}

/// Largest group count for which the matching is found by enumerating all
/// permutations.
pub const EXACT_MATCHING_MAX: usize = 8;

/// The permutation `pi` (estimated label `k` maps to true label `pi[k]`)
/// maximizing agreement, and the number of agreeing nodes.
pub fn best_permutation(est: &[usize], truth: &[usize], groups: usize) -> Result<(Vec<usize>, usize)> {
    let c = confusion(est, truth, groups)?;
    if groups <= EXACT_MATCHING_MAX {
        Ok(exact_matching(&c))
    } else {
        Ok(hungarian_matching(&c))
    }
}

fn exact_matching(c: &[Vec<usize>]) -> (Vec<usize>, usize) {
    let k = c.len();
    let mut perm: Vec<usize> = (0..k).collect();
    let score = |p: &[usize]| p.iter().enumerate().map(|(a, &b)| c[a][b]).sum::<usize>();
    let mut best = (perm.clone(), score(&perm));
    while next_permutation(&mut perm) {
        let s = score(&perm);
        if s > best.1 {
            best = (perm.clone(), s);
        }
    }
    best
}

fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Maximum-weight perfect matching on a square count matrix (Hungarian
/// method with potentials, O(k^3)).
pub fn hungarian_matching(c: &[Vec<usize>]) -> (Vec<usize>, usize) {
    let n = c.len();
    if n == 0 {
        return (vec![], 0);
    }
    let max = c.iter().flatten().copied().max().unwrap_or(0) as i64;
    let cost = |i: usize, j: usize| max - c[i][j] as i64;
    // 1-based arrays; column 0 is a sentinel
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    let score = perm.iter().enumerate().map(|(a, &b)| c[a][b]).sum();
    (perm, score)
}

/// Fraction of nodes mislabeled under the best relabeling of `est`.
pub fn misclustering_permutation(est: &[usize], truth: &[usize], groups: usize) -> Result<f64> {
    if est.is_empty() {
        return Ok(0.0);
    }
    let (_, agree) = best_permutation(est, truth, groups)?;
    Ok(1.0 - agree as f64 / est.len() as f64)
}

/// Map each estimated group to the true label holding most of its members
/// (ties to the smallest label).
pub fn majority_map(est: &[usize], est_groups: usize, truth: &[usize], true_groups: usize) -> Result<Vec<usize>> {
    if est.len() != truth.len() {
        return Err(GmnarError::Dimension(format!("label vectors of length {} and {}", est.len(), truth.len())));
    }
    let mut counts = vec![vec![0usize; true_groups]; est_groups];
    for (&a, &b) in est.iter().zip(truth) {
        if a >= est_groups || b >= true_groups {
            return Err(GmnarError::Index("label out of range".into()));
        }
        counts[a][b] += 1;
    }
    Ok(counts
        .iter()
        .map(|row| {
            let mut best = 0;
            for (k, &n) in row.iter().enumerate() {
                if n > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect())
}

/// Fraction of nodes whose true label differs from the majority label of
/// their estimated group. The group counts may differ.
pub fn misclustering_majority(est: &[usize], est_groups: usize, truth: &[usize], true_groups: usize) -> Result<f64> {
    let chi = majority_map(est, est_groups, truth, true_groups)?;
    if est.is_empty() {
        return Ok(0.0);
    }
    let wrong = est.iter().zip(truth).filter(|&(&a, &b)| chi[a] != b).count();
    Ok(wrong as f64 / est.len() as f64)
}

/// Per-block values for `(lambda, gamma, zeta, delta, alpha)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Blocks {
    pub lambda: f64,
    pub gamma: f64,
    pub zeta: f64,
    pub delta: f64,
    pub alpha: f64,
}

impl Blocks {
    pub const NAMES: [&'static str; 5] = ["lambda", "gamma", "zeta", "delta", "alpha"];

    pub fn values(&self) -> [f64; 5] {
        [self.lambda, self.gamma, self.zeta, self.delta, self.alpha]
    }

    fn from_fn(mut f: impl FnMut(usize) -> f64) -> Self {
        Self { lambda: f(0), gamma: f(1), zeta: f(2), delta: f(3), alpha: f(4) }
    }
}

/// Block index of every coordinate of the flat layout.
pub fn block_of(layout: ParamLayout) -> Vec<usize> {
    let mut out = vec![0; layout.dim()];
    for g in 0..layout.row_groups {
        let o = layout.row_block(g);
        out[o] = 0;
        for k in 0..layout.p1 {
            out[o + 1 + k] = 2;
        }
    }
    for h in 0..layout.col_groups {
        let o = layout.col_block(h);
        out[o] = 1;
        for k in 0..layout.p2 {
            out[o + 1 + k] = 3;
        }
    }
    for k in layout.alpha_offset()..layout.dim() {
        out[k] = 4;
    }
    out
}

/// Squared error of each block of `est` against `truth`.
pub fn block_squared_errors(est: &ParameterSet, truth: &ParameterSet) -> Result<Blocks> {
    if est.layout() != truth.layout() {
        return Err(GmnarError::Dimension("parameter layouts differ".into()));
    }
    let d = est.flatten() - truth.flatten();
    let blocks = block_of(est.layout());
    let mut acc = [0.0; 5];
    for (k, &b) in blocks.iter().enumerate() {
        acc[b] += d[k] * d[k];
    }
    Ok(Blocks::from_fn(|b| acc[b]))
}

/// Relabel an estimate so its groups line up with the true groups, using the
/// mis-clustering-optimal permutations on rows and columns jointly.
pub fn align_to_truth(params: &ParameterSet, est: &GroupAssignment, truth: &GroupAssignment) -> Result<(ParameterSet, Vec<usize>, Vec<usize>)> {
    if est.row_groups() != truth.row_groups() || est.col_groups() != truth.col_groups() {
        return Err(GmnarError::Dimension("alignment needs matching group counts".into()));
    }
    let (rp, _) = best_permutation(est.rows(), truth.rows(), truth.row_groups())?;
    let (cp, _) = best_permutation(est.cols(), truth.cols(), truth.col_groups())?;
    Ok((params.permuted(&rp, &cp), rp, cp))
}

/// `{R^-1 sum_r ||theta_hat^(r) - theta_0||^2}^(1/2)` per block, for
/// estimates already aligned to the truth.
pub fn rmse_groupwise(aligned: &[ParameterSet], truth: &ParameterSet) -> Result<Blocks> {
    if aligned.is_empty() {
        return Ok(Blocks::from_fn(|_| f64::NAN));
    }
    let mut sum = [0.0; 5];
    for est in aligned {
        let e = block_squared_errors(est, truth)?.values();
        for b in 0..5 {
            sum[b] += e[b];
        }
    }
    let r = aligned.len() as f64;
    Ok(Blocks::from_fn(|b| (sum[b] / r).sqrt()))
}

/// Node-level squared errors summed over nodes, before averaging:
/// `lambda, zeta` over rows, `gamma, delta` over columns and `alpha` over cells.
pub fn nodewise_squared_errors(est: (&ParameterSet, &GroupAssignment), truth: (&ParameterSet, &GroupAssignment)) -> Result<Blocks> {
    let (ep, ea) = est;
    let (tp, ta) = truth;
    if ea.rows().len() != ta.rows().len() || ea.cols().len() != ta.cols().len() || ep.p1() != tp.p1() || ep.p2() != tp.p2() {
        return Err(GmnarError::Dimension("estimate and truth differ in shape".into()));
    }
    check_params(ep, ea)?;
    check_params(tp, ta)?;
    let mut s = [0.0; 5];
    for (&g, &g0) in ea.rows().iter().zip(ta.rows()) {
        s[0] += (ep.lambda[g] - tp.lambda[g0]).powi(2);
        s[2] += (ep.zeta.column(g) - tp.zeta.column(g0)).norm_squared();
    }
    for (&h, &h0) in ea.cols().iter().zip(ta.cols()) {
        s[1] += (ep.gamma[h] - tp.gamma[h0]).powi(2);
        s[3] += (ep.delta.column(h) - tp.delta.column(h0)).norm_squared();
    }
    for (&g, &g0) in ea.rows().iter().zip(ta.rows()) {
        for (&h, &h0) in ea.cols().iter().zip(ta.cols()) {
            s[4] += (ep.alpha[(g, h)] - tp.alpha[(g0, h0)]).powi(2);
        }
    }
    Ok(Blocks::from_fn(|b| s[b]))
}

/// `{(R N1)^-1 sum_r sum_i ||lambda_hat_{g_hat_i} - lambda_{g_i}||^2}^(1/2)` and
/// its analogues (`N2` for column blocks, `N1 N2` for `alpha`). Needs no
/// label alignment.
pub fn rmse_nodewise(estimates: &[(ParameterSet, GroupAssignment)], truth: (&ParameterSet, &GroupAssignment)) -> Result<Blocks> {
    if estimates.is_empty() {
        return Ok(Blocks::from_fn(|_| f64::NAN));
    }
    let (n1, n2) = (truth.1.rows().len() as f64, truth.1.cols().len() as f64);
    let mut sum = [0.0; 5];
    for (p, a) in estimates {
        let e = nodewise_squared_errors((p, a), truth)?.values();
        for b in 0..5 {
            sum[b] += e[b];
        }
    }
    let r = estimates.len() as f64;
    let denom = [n1, n2, n1, n2, n1 * n2];
    Ok(Blocks::from_fn(|b| (sum[b] / (r * denom[b])).sqrt()))
}

/// Fraction of intervals containing `truth`.
pub fn coverage_probability(intervals: &[(f64, f64)], truth: f64) -> f64 {
    if intervals.is_empty() {
        return f64::NAN;
    }
    intervals.iter().filter(|&&(lo, hi)| lo <= truth && truth <= hi).count() as f64 / intervals.len() as f64
}

/// Per-block coverage pooled over the coordinates of each block:
/// `intervals[r]` holds the aligned lower and upper bound vectors of replicate `r`.
pub fn coverage_by_block(intervals: &[(DVector<f64>, DVector<f64>)], truth: &ParameterSet) -> Result<Blocks> {
    let theta = truth.flatten();
    let blocks = block_of(truth.layout());
    let mut hit = [0usize; 5];
    let mut total = [0usize; 5];
    for (lo, hi) in intervals {
        if lo.len() != theta.len() || hi.len() != theta.len() {
            return Err(GmnarError::Dimension("interval vectors do not match the layout".into()));
        }
        for (k, &b) in blocks.iter().enumerate() {
            total[b] += 1;
            if lo[k] <= theta[k] && theta[k] <= hi[k] {
                hit[b] += 1;
            }
        }
    }
    Ok(Blocks::from_fn(|b| if total[b] == 0 { f64::NAN } else { hit[b] as f64 / total[b] as f64 }))
}

/// `R^-1 sum_r 1(chosen_r = candidate)`.
pub fn selection_rate(chosen: &[usize], candidate: usize) -> f64 {
    if chosen.is_empty() {
        return f64::NAN;
    }
    chosen.iter().filter(|&&c| c == candidate).count() as f64 / chosen.len() as f64
}

/// Frequencies of every observed value.
pub fn selection_rates(chosen: &[usize]) -> BTreeMap<usize, f64> {
    let mut out = BTreeMap::new();
    for &c in chosen {
        out.entry(c).or_insert_with(|| selection_rate(chosen, c));
    }
    out
}

/// What one replicate contributes to the summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub index: usize,
    pub seed: u64,
    pub error: Option<String>,
    pub chosen: (usize, usize),
    /// Aligned flat estimate; empty when the group counts differ from the truth.
    pub estimate: Vec<f64>,
    pub se: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub oracle_estimate: Vec<f64>,
    pub oracle_ci_lower: Vec<f64>,
    pub oracle_ci_upper: Vec<f64>,
    pub eta1: f64,
    pub eta2: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub nodewise_sq: Blocks,
    pub pseudo_distance: f64,
    pub sigma2_hat: f64,
    pub converged: bool,
}

impl ReplicateRecord {
    pub fn failed(index: usize, seed: u64, error: String) -> Self {
        Self {
            index,
            seed,
            error: Some(error),
            chosen: (0, 0),
            estimate: vec![],
            se: vec![],
            ci_lower: vec![],
            ci_upper: vec![],
            oracle_estimate: vec![],
            oracle_ci_lower: vec![],
            oracle_ci_upper: vec![],
            eta1: f64::NAN,
            eta2: f64::NAN,
            xi1: f64::NAN,
            xi2: f64::NAN,
            nodewise_sq: Blocks::default(),
            pseudo_distance: f64::NAN,
            sigma2_hat: f64::NAN,
            converged: false,
        }
    }
}

/// Aggregates over the successful replicates of one setting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub reps: usize,
    pub failures: usize,
    /// Replicates whose chosen group counts match the truth; group-wise
    /// RMSE and coverage use only these.
    pub matched: usize,
    pub rmse: Blocks,
    pub cp: Blocks,
    pub rmse_oracle: Blocks,
    pub cp_oracle: Blocks,
    pub rmse_all: Blocks,
    pub eta1: f64,
    pub eta2: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub rho_g: BTreeMap<usize, f64>,
    pub rho_h: BTreeMap<usize, f64>,
    pub mean_pseudo_distance: f64,
    pub mean_sigma2: f64,
    pub converged_rate: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

impl ReplicationSummary {
    /// Aggregate records in index order for an `N1 x N2` panel.
    pub fn from_records(records: &[ReplicateRecord], tp: &ParameterSet, n1: usize, n2: usize) -> Result<Self> {
        let ok: Vec<&ReplicateRecord> = records.iter().filter(|r| r.error.is_none()).collect();
        let layout = tp.layout();
        let matched: Vec<&ReplicateRecord> = ok.iter().copied().filter(|r| r.estimate.len() == layout.dim()).collect();

        let params = |v: &[f64]| ParameterSet::unflatten(layout, v);
        let est: Vec<ParameterSet> = matched.iter().map(|r| params(&r.estimate)).collect::<Result<_>>()?;
        let oracle: Vec<ParameterSet> =
            ok.iter().filter(|r| r.oracle_estimate.len() == layout.dim()).map(|r| params(&r.oracle_estimate)).collect::<Result<_>>()?;
        let ci = |lo: &[f64], hi: &[f64]| (DVector::from_column_slice(lo), DVector::from_column_slice(hi));
        let cis: Vec<_> = matched.iter().filter(|r| r.ci_lower.len() == layout.dim()).map(|r| ci(&r.ci_lower, &r.ci_upper)).collect();
        let ocis: Vec<_> = ok.iter().filter(|r| r.oracle_ci_lower.len() == layout.dim()).map(|r| ci(&r.oracle_ci_lower, &r.oracle_ci_upper)).collect();

        let (n1, n2) = (n1 as f64, n2 as f64);
        let r = ok.len() as f64;
        let denom = [n1, n2, n1, n2, n1 * n2];
        let mut node = [0.0; 5];
        for rec in &ok {
            let v = rec.nodewise_sq.values();
            for b in 0..5 {
                node[b] += v[b];
            }
        }
        let rmse_all = if ok.is_empty() { Blocks::from_fn(|_| f64::NAN) } else { Blocks::from_fn(|b| (node[b] / (r * denom[b])).sqrt()) };
        let chosen_g: Vec<usize> = ok.iter().map(|r| r.chosen.0).collect();
        let chosen_h: Vec<usize> = ok.iter().map(|r| r.chosen.1).collect();

        Ok(Self {
            reps: records.len(),
            failures: records.len() - ok.len(),
            matched: matched.len(),
            rmse: rmse_groupwise(&est, tp)?,
            cp: coverage_by_block(&cis, tp)?,
            rmse_oracle: rmse_groupwise(&oracle, tp)?,
            cp_oracle: coverage_by_block(&ocis, tp)?,
            rmse_all,
            eta1: mean(matched.iter().map(|r| r.eta1)),
            eta2: mean(matched.iter().map(|r| r.eta2)),
            xi1: mean(ok.iter().map(|r| r.xi1)),
            xi2: mean(ok.iter().map(|r| r.xi2)),
            rho_g: selection_rates(&chosen_g),
            rho_h: selection_rates(&chosen_h),
            mean_pseudo_distance: mean(ok.iter().map(|r| r.pseudo_distance)),
            mean_sigma2: mean(ok.iter().map(|r| r.sigma2_hat)),
            converged_rate: mean(ok.iter().map(|r| if r.converged { 1.0 } else { 0.0 })),
        })
    }

    /// `(metric, value)` rows in a fixed order.
    pub fn metric_rows(&self) -> Vec<(String, f64)> {
        let mut rows = vec![
            ("reps".to_string(), self.reps as f64),
            ("failures".to_string(), self.failures as f64),
            ("matched".to_string(), self.matched as f64),
        ];
        for (prefix, blocks) in [("rmse", &self.rmse), ("cp", &self.cp), ("rmse_oracle", &self.rmse_oracle), ("cp_oracle", &self.cp_oracle), ("rmse_all", &self.rmse_all)] {
            for (name, v) in Blocks::NAMES.iter().zip(blocks.values()) {
                rows.push((format!("{prefix}_{name}"), v));
            }
        }
        for (name, v) in [("eta1", self.eta1), ("eta2", self.eta2), ("xi1", self.xi1), ("xi2", self.xi2)] {
            rows.push((name.to_string(), v));
        }
        for (g, v) in &self.rho_g {
            rows.push((format!("rho_g_{g}"), *v));
        }
        for (h, v) in &self.rho_h {
            rows.push((format!("rho_h_{h}"), *v));
        }
        rows.push(("mean_pseudo_distance".to_string(), self.mean_pseudo_distance));
        rows.push(("mean_sigma2".to_string(), self.mean_sigma2));
        rows.push(("converged_rate".to_string(), self.converged_rate));
        rows
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_rate_ignores_relabeling() {
        let truth = [0, 0, 1, 1, 2];
        assert_eq!(misclustering_permutation(&truth, &truth, 3).unwrap(), 0.0);
        assert_eq!(misclustering_permutation(&[1, 1, 0, 0, 2], &truth, 3).unwrap(), 0.0);
        assert!((misclustering_permutation(&[0, 1, 1, 1, 2], &truth, 3).unwrap() - 0.2).abs() < 1e-15);
        assert!(misclustering_permutation(&[3, 0, 0, 0, 0], &truth, 3).is_err());
    }

    #[test]
    fn hungarian_agrees_with_enumeration() {
        let c = vec![vec![3, 1, 0, 2], vec![0, 4, 1, 1], vec![2, 2, 2, 0], vec![1, 0, 5, 1]];
        assert_eq!(hungarian_matching(&c).1, exact_matching(&c).1);
        assert_eq!(exact_matching(&c).1, 2 + 4 + 2 + 5);
        assert_eq!(exact_matching(&c).0, vec![3, 1, 0, 2]);
    }

    #[test]
    fn majority_of_refinement_is_zero() {
        let truth = [0, 0, 0, 0, 1, 1, 1, 1];
        let split = [0, 0, 1, 1, 2, 2, 3, 3];
        assert_eq!(misclustering_majority(&split, 4, &truth, 2).unwrap(), 0.0);
        assert_eq!(majority_map(&[0, 0], 2, &[1, 0], 2).unwrap(), vec![0, 0]);
    }

    #[test]
    fn rmse_pythagorean() {
        let layout = ParamLayout::new(2, 1, 0, 0);
        let truth = ParameterSet::zeros(layout);
        let mut est = truth.clone();
        est.lambda[0] = 0.03;
        est.lambda[1] = 0.04;
        let r = rmse_groupwise(&[est], &truth).unwrap();
        assert!((r.lambda - 0.05).abs() < 1e-15);
        assert_eq!(r.gamma, 0.0);
    }

    #[test]
    fn nodewise_single_wrong_node() {
        let layout = ParamLayout::new(2, 1, 0, 0);
        let mut truth = ParameterSet::zeros(layout);
        truth.lambda[1] = 0.1;
        let mut rows = vec![0; 10];
        rows[3] = 1;
        let est_assign = GroupAssignment::new(2, 1, rows, vec![0]).unwrap();
        let true_assign = GroupAssignment::new(2, 1, vec![0; 10], vec![0]).unwrap();
        let r = rmse_nodewise(&[(truth.clone(), est_assign)], (&truth, &true_assign)).unwrap();
        assert!((r.lambda - 0.1 / 10f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn coverage_and_selection() {
        assert_eq!(coverage_probability(&[(0.0, 1.0), (0.5, 0.5)], 0.5), 1.0);
        assert_eq!(coverage_probability(&[(0.0, 1.0), (2.0, 3.0)], 0.5), 0.5);
        let rates = selection_rates(&[3, 3, 2, 3]);
        assert_eq!(rates[&3], 0.75);
        assert!((rates.values().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}

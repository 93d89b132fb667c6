//! Starting memberships.
//!
//! Each row gets an unrestricted least-squares profile: the coefficients of
//! `Y_ijt` on `(row network term, x_it, Y_ij,t-1)` pooled over `(j, t)`.
//! Columns get the mirror profile on `(column network term, z_jt, lag)`.
//! The profiles are clustered with k-means.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::solve::solve_symmetric;
use crate::error::{GmnarError, Result};
use crate::model::{GroupAssignment, MatrixSeries, NetworkPair, NetworkTerms};
use crate::rng::{derive_seed, domain, stream, StreamRng};

const KMEANS_MAX_ITER: usize = 300;

/// Per-node regression profiles, or `None` when a node has fewer
/// observations than profile coefficients.
#[derive(Debug, Clone)]
pub struct NodeProfiles {
    pub rows: Option<Vec<Vec<f64>>>,
    pub cols: Option<Vec<Vec<f64>>>,
}

impl NodeProfiles {
    pub fn new(data: &MatrixSeries, terms: &NetworkTerms) -> Self {
        let t_len = data.t_len();
        let rows = (data.n2() * t_len >= data.p1() + 2).then(|| {
            (0..data.n1())
                .map(|i| {
                    let mut fit = SmallOls::new(data.p1() + 2);
                    let mut v = vec![0.0; data.p1() + 2];
                    for t in 1..=t_len {
                        let x = data.x(t);
                        for k in 0..data.p1() {
                            v[1 + k] = x[(i, k)];
                        }
                        for j in 0..data.n2() {
                            v[0] = terms.row_net(t)[(i, j)];
                            v[data.p1() + 1] = data.y(t - 1)[(i, j)];
                            fit.add(&v, data.y(t)[(i, j)]);
                        }
                    }
                    fit.solve()
                })
                .collect()
        });
        let cols = (data.n1() * t_len >= data.p2() + 2).then(|| {
            (0..data.n2())
                .map(|j| {
                    let mut fit = SmallOls::new(data.p2() + 2);
                    let mut v = vec![0.0; data.p2() + 2];
                    for t in 1..=t_len {
                        let z = data.z(t);
                        for k in 0..data.p2() {
                            v[1 + k] = z[(j, k)];
                        }
                        for i in 0..data.n1() {
                            v[0] = terms.col_net(t)[(i, j)];
                            v[data.p2() + 1] = data.y(t - 1)[(i, j)];
                            fit.add(&v, data.y(t)[(i, j)]);
                        }
                    }
                    fit.solve()
                })
                .collect()
        });
        Self { rows, cols }
    }
}

struct SmallOls {
    gram: DMatrix<f64>,
    cross: DVector<f64>,
}

impl SmallOls {
    fn new(dim: usize) -> Self {
        Self { gram: DMatrix::zeros(dim, dim), cross: DVector::zeros(dim) }
    }

    fn add(&mut self, v: &[f64], y: f64) {
        let d = v.len();
        for a in 0..d {
            self.cross[a] += v[a] * y;
            for b in 0..d {
                self.gram[(a, b)] += v[a] * v[b];
            }
        }
    }

    fn solve(&self) -> Vec<f64> {
        solve_symmetric(&self.gram, &self.cross).0.iter().copied().collect()
    }
}

/// Outcome of a k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub sse: f64,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus(points: &[Vec<f64>], k: usize, rng: &mut StreamRng) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = points.len() - 1;
            for (idx, &w) in d.iter().enumerate() {
                if u < w {
                    pick = idx;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            rng.random_range(0..points.len())
        };
        centers.push(points[next].clone());
        for (idx, p) in points.iter().enumerate() {
            d[idx] = d[idx].min(dist2(p, &centers[centers.len() - 1]));
        }
    }
    centers
}

fn assign_nearest(points: &[Vec<f64>], centers: &[Vec<f64>]) -> Vec<usize> {
    points
        .iter()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (c, center) in centers.iter().enumerate() {
                let d = dist2(p, center);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best.0
        })
        .collect()
}

fn centroids(points: &[Vec<f64>], labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        sums[l].iter_mut().zip(p).for_each(|(s, v)| *s += v);
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    sums
}

/// Move the point farthest from its centroid in the largest cluster into
/// each empty cluster.
fn repair_empty(points: &[Vec<f64>], labels: &mut [usize], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else { return };
        let largest = (0..k).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).unwrap();
        if counts[largest] < 2 {
            return;
        }
        let centers = centroids(points, labels, k);
        let far = (0..points.len())
            .filter(|&i| labels[i] == largest)
            .max_by(|&a, &b| dist2(&points[a], &centers[largest]).total_cmp(&dist2(&points[b], &centers[largest])).then(b.cmp(&a)))
            .unwrap();
        labels[far] = empty;
    }
}

fn within_sse(points: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let centers = centroids(points, labels, k);
    points.iter().zip(labels).map(|(p, &l)| dist2(p, &centers[l])).sum()
}

/// Lloyd's k-means with k-means++ seeding, best of `n_init` seeded runs.
/// Requires `1 <= k <= points.len()`. Clusters are never left empty.
pub fn kmeans(points: &[Vec<f64>], k: usize, n_init: usize, seed: u64) -> KMeansResult {
    assert!(k >= 1 && k <= points.len(), "k-means needs 1 <= k <= n");
    if k == 1 {
        return KMeansResult { labels: vec![0; points.len()], sse: within_sse(points, &vec![0; points.len()], 1) };
    }
    let mut best: Option<KMeansResult> = None;
    for run in 0..n_init.max(1) {
        let mut rng = stream(seed, domain::KMEANS, run as u64);
        let mut centers = plus_plus(points, k, &mut rng);
        let mut labels = assign_nearest(points, &centers);
        for _ in 0..KMEANS_MAX_ITER {
            repair_empty(points, &mut labels, k);
            centers = centroids(points, &labels, k);
            let next = assign_nearest(points, &centers);
            if next == labels {
                break;
            }
            labels = next;
        }
        repair_empty(points, &mut labels, k);
        let sse = within_sse(points, &labels, k);
        if best.as_ref().is_none_or(|b| sse < b.sse) {
            best = Some(KMeansResult { labels, sse });
        }
    }
    best.unwrap()
}

fn random_labels(n: usize, k: usize, rng: &mut StreamRng) -> Vec<usize> {
    // first k nodes cover every group, the rest are uniform
    let mut labels: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        labels.swap(i, j);
    }
    labels
}

fn cluster_side(profiles: Option<&Vec<Vec<f64>>>, n: usize, k: usize, n_init: usize, seed: u64) -> Vec<usize> {
    match profiles {
        _ if k == 1 => vec![0; n],
        Some(points) => kmeans(points, k, n_init, seed).labels,
        None => random_labels(n, k, &mut stream(seed, domain::KMEANS, u64::MAX)),
    }
}

/// Starting labels from clustered node profiles, falling back to random
/// labels (every group nonempty) when `T` is too short for the per-node
/// regressions.
pub fn init_memberships(data: &MatrixSeries, nets: &NetworkPair, row_groups: usize, col_groups: usize, n_init: usize, seed: u64) -> Result<GroupAssignment> {
    let terms = NetworkTerms::new(data, nets)?;
    let profiles = NodeProfiles::new(data, &terms);
    init_from_profiles(&profiles, data.n1(), data.n2(), row_groups, col_groups, n_init, seed)
}

pub(crate) fn init_from_profiles(
    profiles: &NodeProfiles,
    n1: usize,
    n2: usize,
    row_groups: usize,
    col_groups: usize,
    n_init: usize,
    seed: u64,
) -> Result<GroupAssignment> {
    if row_groups == 0 || row_groups > n1 || col_groups == 0 || col_groups > n2 {
        return Err(GmnarError::InvalidArgument(format!(
            "need 1 <= G <= {n1} and 1 <= H <= {n2}, got G = {row_groups}, H = {col_groups}"
        )));
    }
    let rows = cluster_side(profiles.rows.as_ref(), n1, row_groups, n_init, derive_seed(seed, domain::ROW_LABELS, 0));
    let cols = cluster_side(profiles.cols.as_ref(), n2, col_groups, n_init, derive_seed(seed, domain::COL_LABELS, 0));
    GroupAssignment::new(row_groups, col_groups, rows, cols)
}

/// Split group `target` of `labels` into itself and a new group `k` (the
/// current group count) by 2-means on the members' profiles. Without
/// profiles, members alternate between the two halves.
pub(crate) fn split_group(labels: &[usize], target: usize, new_label: usize, profiles: Option<&Vec<Vec<f64>>>, seed: u64) -> Vec<usize> {
    let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == target).collect();
    let mut out = labels.to_vec();
    if members.len() < 2 {
        return out;
    }
    let halves = match profiles {
        Some(points) => {
            let sub: Vec<Vec<f64>> = members.iter().map(|&i| points[i].clone()).collect();
            kmeans(&sub, 2, 3, seed).labels
        }
        None => (0..members.len()).map(|a| a % 2).collect(),
    };
    for (a, &i) in members.iter().enumerate() {
        if halves[a] == 1 {
            out[i] = new_label;
        }
    }
    out
}

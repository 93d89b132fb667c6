#![allow(dead_code)]

use gmnar_core::model::build_regressor;
use gmnar_core::{GroupAssignment, MatrixSeries, NetworkPair, ParamLayout, ParameterSet};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub struct Instance {
    pub data: MatrixSeries,
    pub nets: NetworkPair,
    pub assign: GroupAssignment,
}

fn normal(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn adjacency(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<u8> {
    DMatrix::from_fn(n, n, |i, j| u8::from(i != j && rng.random_bool(0.35)))
}

/// Labels covering every group, in random order.
pub fn labels(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).map(|i| i % k).collect();
    v.shuffle(rng);
    v
}

/// Gaussian panel with random networks and random nonempty groups.
pub fn random_instance(seed: u64, max_n1: usize, max_n2: usize, max_t: usize, max_groups: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = rng.random_range(1..=max_groups);
    let h = rng.random_range(1..=max_groups);
    let n1 = rng.random_range(g.max(3)..=max_n1);
    let n2 = rng.random_range(h.max(3)..=max_n2);
    let t = rng.random_range(2..=max_t);
    let p1 = rng.random_range(0..=2);
    let p2 = rng.random_range(0..=2);
    let y = (0..=t).map(|_| normal(&mut rng, n1, n2)).collect();
    let x = (0..t).map(|_| normal(&mut rng, n1, p1)).collect();
    let z = (0..t).map(|_| normal(&mut rng, n2, p2)).collect();
    let data = MatrixSeries::new(y, x, z).unwrap();
    let nets = NetworkPair::from_adjacency(adjacency(&mut rng, n1), adjacency(&mut rng, n2)).unwrap();
    let rows = labels(&mut rng, n1, g);
    let cols = labels(&mut rng, n2, h);
    let assign = GroupAssignment::new(g, h, rows, cols).unwrap();
    Instance { data, nets, assign }
}

pub fn random_params(seed: u64, layout: ParamLayout) -> ParameterSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta: Vec<f64> = (0..layout.dim()).map(|_| rng.random_range(-0.5..0.5)).collect();
    ParameterSet::unflatten(layout, &theta).unwrap()
}

/// Row of the stacked design for cell `(i, j, t)`: the node regressor placed
/// into the slots of its groups.
pub fn stacked_row(inst: &Instance, layout: ParamLayout, i: usize, j: usize, t: usize) -> Vec<f64> {
    let reg = build_regressor(&inst.data, &inst.nets, i, j, t).unwrap();
    let (g, h) = (inst.assign.rows()[i], inst.assign.cols()[j]);
    let mut row = vec![0.0; layout.dim()];
    let rb = layout.row_block(g);
    row[rb] = reg.row_network();
    row[rb + 1..rb + 1 + layout.p1].copy_from_slice(reg.x());
    let cb = layout.col_block(h);
    row[cb] = reg.col_network();
    row[cb + 1..cb + 1 + layout.p2].copy_from_slice(reg.z());
    row[layout.alpha_index(g, h)] = reg.lag();
    row
}

/// Explicit `(X, y)` of the pooled regression with every observation as a row.
pub fn stacked_design(inst: &Instance) -> (DMatrix<f64>, DVector<f64>) {
    let d = &inst.data;
    let layout = ParamLayout::new(inst.assign.row_groups(), inst.assign.col_groups(), d.p1(), d.p2());
    let mut rows = Vec::new();
    let mut resp = Vec::new();
    for t in 1..=d.t_len() {
        for i in 0..d.n1() {
            for j in 0..d.n2() {
                rows.extend(stacked_row(inst, layout, i, j, t));
                resp.push(d.y(t)[(i, j)]);
            }
        }
    }
    (DMatrix::from_row_slice(resp.len(), layout.dim(), &rows), DVector::from_vec(resp))
}

/// Objective by direct summation over cells.
pub fn naive_objective(params: &ParameterSet, assign: &GroupAssignment, data: &MatrixSeries, nets: &NetworkPair) -> f64 {
    let mut q = 0.0;
    for t in 1..=data.t_len() {
        for i in 0..data.n1() {
            for j in 0..data.n2() {
                let reg = build_regressor(data, nets, i, j, t).unwrap();
                let coef = params.node_coefficients(assign.rows()[i], assign.cols()[j]);
                q += (data.y(t)[(i, j)] - reg.dot(&coef)).powi(2);
            }
        }
    }
    q
}

/// All permutations of `0..k` in lexicographic order.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                go(prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

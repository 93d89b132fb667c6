mod common;

use common::{naive_objective, permutations, random_instance, random_params, stacked_design, Instance};
use gmnar_core::estimate::{assemble_design_blocks, assemble_normal_equations, solve_theta, update_col_memberships, update_row_memberships};
use gmnar_core::metrics::{best_permutation, hungarian_matching, misclustering_permutation, pseudo_distance};
use gmnar_core::model::build_regressor;
use gmnar_core::netgen::NetworkKind;
use gmnar_core::{fit, fit_fixed, objective_q, simulate_gmnar, FitOptions, GroupAssignment, ParamLayout, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn layout_of(inst: &Instance) -> ParamLayout {
    ParamLayout::new(inst.assign.row_groups(), inst.assign.col_groups(), inst.data.p1(), inst.data.p2())
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn normal_equations_equal_stacked_gram() {
    for seed in 0..25 {
        let inst = random_instance(seed, 10, 8, 6, 3);
        let ne = assemble_normal_equations(&inst.data, &inst.nets, &inst.assign).unwrap();
        let (x, y) = stacked_design(&inst);
        let gram = x.transpose() * &x;
        let cross = x.transpose() * &y;
        let scale = gram.amax().max(1.0);
        assert!(max_abs_diff(ne.m.as_slice(), gram.as_slice()) < 1e-10 * scale, "seed {seed}");
        assert!(max_abs_diff(ne.b.as_slice(), cross.as_slice()) < 1e-10 * scale, "seed {seed}");
        assert!((ne.yy - y.norm_squared()).abs() < 1e-10 * y.norm_squared());
    }
}

#[test]
fn solve_equals_dense_least_squares() {
    // sparse random graphs leave some groups without network signal, so both
    // the Cholesky path and the minimum-norm fallback get exercised
    let mut paths = [0, 0];
    for seed in 100..130 {
        let inst = random_instance(seed, 10, 8, 6, 3);
        let ne = assemble_normal_equations(&inst.data, &inst.nets, &inst.assign).unwrap();
        let sol = solve_theta(&ne, false).unwrap();
        let (x, y) = stacked_design(&inst);
        let dense = x.svd(true, true).solve(&y, 1e-13).unwrap();
        paths[usize::from(sol.degenerate)] += 1;
        assert!(max_abs_diff(sol.params.flatten().as_slice(), dense.as_slice()) < 1e-8, "seed {seed}");
    }
    assert!(paths[0] > 0 && paths[1] > 0, "{paths:?}");
}

#[test]
fn objective_matches_cellwise_sum() {
    for seed in 200..215 {
        let inst = random_instance(seed, 9, 7, 5, 3);
        let params = random_params(seed, layout_of(&inst));
        let q = objective_q(&params, &inst.assign, &inst.data, &inst.nets).unwrap();
        let naive = naive_objective(&params, &inst.assign, &inst.data, &inst.nets);
        assert!((q - naive).abs() < 1e-10 * naive.max(1.0), "seed {seed}");
        let ne = assemble_normal_equations(&inst.data, &inst.nets, &inst.assign).unwrap();
        assert!((ne.objective(&params.flatten()) - naive).abs() < 1e-8 * naive.max(1.0));
    }
}

#[test]
fn design_blocks_agree_with_node_regressors() {
    let inst = random_instance(300, 8, 7, 4, 2);
    let d = &inst.data;
    for t in 1..=d.t_len() {
        for g in 0..inst.assign.row_groups() {
            for h in 0..inst.assign.col_groups() {
                let blocks = assemble_design_blocks(d, &inst.nets, &inst.assign, g, h, t).unwrap();
                let rows = inst.assign.row_members(g);
                let cols = inst.assign.col_members(h);
                for (b, &j) in cols.iter().enumerate() {
                    for (a, &i) in rows.iter().enumerate() {
                        let r = a + b * rows.len();
                        let reg = build_regressor(d, &inst.nets, i, j, t).unwrap();
                        assert_eq!(blocks.x[(r, 0)], reg.row_network());
                        assert_eq!(blocks.z[(r, 0)], reg.col_network());
                        assert_eq!(blocks.y_lag[r], reg.lag());
                        assert_eq!(blocks.y[r], d.y(t)[(i, j)]);
                        for k in 0..d.p1() {
                            assert_eq!(blocks.x[(r, k + 1)], reg.x()[k]);
                        }
                        for k in 0..d.p2() {
                            assert_eq!(blocks.z[(r, k + 1)], reg.z()[k]);
                        }
                    }
                }
            }
        }
    }
}

fn relabeled(assign: &GroupAssignment, rows: Option<(usize, usize)>, cols: Option<(usize, usize)>) -> GroupAssignment {
    let mut r = assign.rows().to_vec();
    let mut c = assign.cols().to_vec();
    if let Some((i, g)) = rows {
        r[i] = g;
    }
    if let Some((j, h)) = cols {
        c[j] = h;
    }
    GroupAssignment::new(assign.row_groups(), assign.col_groups(), r, c).unwrap()
}

#[test]
fn membership_updates_match_enumeration() {
    for seed in 400..410 {
        let inst = random_instance(seed, 8, 7, 4, 3);
        let params = random_params(seed + 1, layout_of(&inst));
        let (d, nets, assign) = (&inst.data, &inst.nets, &inst.assign);
        let rows = update_row_memberships(&params, assign, d, nets).unwrap();
        for (i, &got) in rows.iter().enumerate() {
            let q: Vec<f64> = (0..assign.row_groups()).map(|g| naive_objective(&params, &relabeled(assign, Some((i, g)), None), d, nets)).collect();
            let best = (0..q.len()).fold(0, |b, g| if q[g] < q[b] { g } else { b });
            assert_eq!(got, best, "seed {seed} row {i}: {q:?}");
        }
        let cols = update_col_memberships(&params, assign, d, nets).unwrap();
        for (j, &got) in cols.iter().enumerate() {
            let q: Vec<f64> = (0..assign.col_groups()).map(|h| naive_objective(&params, &relabeled(assign, None, Some((j, h))), d, nets)).collect();
            let best = (0..q.len()).fold(0, |b, h| if q[h] < q[b] { h } else { b });
            assert_eq!(got, best, "seed {seed} col {j}: {q:?}");
        }
    }
}

#[test]
fn permutation_matching_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let k = rng.random_range(1..=6);
        let n = rng.random_range(k..=40);
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let est: Vec<usize> = truth.iter().map(|&t| if rng.random_bool(0.3) { rng.random_range(0..k) } else { (t + 1) % k }).collect();
        let brute = permutations(k)
            .into_iter()
            .map(|p| est.iter().zip(&truth).filter(|&(&e, &t)| p[e] == t).count())
            .max()
            .unwrap();
        let (perm, agree) = best_permutation(&est, &truth, k).unwrap();
        assert_eq!(agree, brute);
        assert_eq!(est.iter().zip(&truth).filter(|&(&e, &t)| perm[e] == t).count(), brute);
        let rate = misclustering_permutation(&est, &truth, k).unwrap();
        assert!((rate - (n - brute) as f64 / n as f64).abs() < 1e-15);

        let mut c = vec![vec![0usize; k]; k];
        for (&e, &t) in est.iter().zip(&truth) {
            c[e][t] += 1;
        }
        assert_eq!(hungarian_matching(&c).1, brute);
    }
}

#[test]
fn hungarian_handles_large_groups() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let k = rng.random_range(9..=12);
        let n = 300;
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let shift = rng.random_range(0..k);
        let est: Vec<usize> = truth.iter().map(|&t| if rng.random_bool(0.1) { rng.random_range(0..k) } else { (t + shift) % k }).collect();
        let (perm, agree) = best_permutation(&est, &truth, k).unwrap();
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..k).collect::<Vec<_>>());
        let undone = est.iter().zip(&truth).filter(|&(&e, &t)| (e + k - shift) % k == t).count();
        assert!(agree >= undone);
    }
}

#[test]
fn pseudo_distance_matches_cellwise_definition() {
    for seed in 500..510 {
        let inst = random_instance(seed, 9, 8, 3, 3);
        let layout = layout_of(&inst);
        let truth = random_params(seed, layout);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = rng.random_range(1..=4);
        let h = rng.random_range(1..=4);
        let est_assign = GroupAssignment::new(g, h, common::labels(&mut rng, inst.data.n1(), g), common::labels(&mut rng, inst.data.n2(), h)).unwrap();
        let est = random_params(seed + 99, ParamLayout::new(g, h, layout.p1, layout.p2));
        let (n1, n2) = (inst.data.n1(), inst.data.n2());
        let mut total = 0.0;
        for i in 0..n1 {
            for j in 0..n2 {
                let a = est.node_coefficients(est_assign.rows()[i], est_assign.cols()[j]);
                let b = truth.node_coefficients(inst.assign.rows()[i], inst.assign.cols()[j]);
                total += a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
            }
        }
        let naive = total / (n1 * n2) as f64;
        let d = pseudo_distance((&est, &est_assign), (&truth, &inst.assign)).unwrap();
        assert!((d - naive).abs() < 1e-12 * naive.max(1.0), "seed {seed}: {d} vs {naive}");
        assert_eq!(pseudo_distance((&truth, &inst.assign), (&truth, &inst.assign)).unwrap(), 0.0);
    }
}

#[test]
fn single_group_fit_is_pooled_least_squares() {
    for seed in 600..605 {
        let mut inst = random_instance(seed, 10, 8, 5, 1);
        inst.assign = GroupAssignment::single(inst.data.n1(), inst.data.n2());
        let res = fit(&inst.data, &inst.nets, 1, 1, &FitOptions::default()).unwrap();
        let (x, y) = stacked_design(&inst);
        let dense = x.clone().svd(true, true).solve(&y, 1e-13).unwrap();
        assert!(max_abs_diff(res.params.flatten().as_slice(), dense.as_slice()) < 1e-9);
        assert!((res.q_value - (y - x * dense).norm_squared()).abs() < 1e-9 * res.q_value);
        assert!(res.converged);
    }
}

#[test]
fn noiseless_data_is_recovered() {
    for network in [NetworkKind::sbm(), NetworkKind::Powerlaw] {
        let sim = simulate_gmnar(&SimConfig::preset(1, 40, 30, 12, network, 17).with_noise_sd(0.0)).unwrap();
        let oracle = fit_fixed(&sim.data, &sim.nets, &sim.assign, &FitOptions::default()).unwrap();
        assert!(max_abs_diff(oracle.params.flatten().as_slice(), sim.params.flatten().as_slice()) < 1e-9);
        let res = fit(&sim.data, &sim.nets, 2, 2, &FitOptions::default()).unwrap();
        assert_eq!(misclustering_permutation(res.assign.rows(), sim.assign.rows(), 2).unwrap(), 0.0);
        assert_eq!(misclustering_permutation(res.assign.cols(), sim.assign.cols(), 2).unwrap(), 0.0);
        assert!(pseudo_distance((&res.params, &res.assign), (&sim.params, &sim.assign)).unwrap() < 1e-16);
        assert!(res.converged);
    }
}

#[test]
fn covariance_is_sigma2_times_inverse_gram() {
    let sim = simulate_gmnar(&SimConfig::preset(1, 30, 24, 10, NetworkKind::sbm(), 3)).unwrap();
    let res = fit_fixed(&sim.data, &sim.nets, &sim.assign, &FitOptions::default()).unwrap();
    let inf = gmnar_core::covariance(&res, &sim.data, &sim.nets).unwrap();
    let ne = assemble_normal_equations(&sim.data, &sim.nets, &sim.assign).unwrap();
    let back = &inf.cov * &ne.m / inf.sigma2_hat;
    let eye = nalgebra::DMatrix::<f64>::identity(back.nrows(), back.ncols());
    assert!((back - eye).amax() < 1e-8);
    let q = ne.m.nrows();
    let expected = res.q_value / (sim.data.n_obs() - q) as f64;
    assert!((inf.sigma2_hat - expected).abs() < 1e-12 * expected);
}

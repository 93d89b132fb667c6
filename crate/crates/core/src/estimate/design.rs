//! Grouped design blocks and the block normal equations `M theta = b`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{GmnarError, Result};
use crate::model::{GroupAssignment, MatrixSeries, NetworkPair, NetworkTerms, ParamLayout};

/// Design blocks of one `(g, h, t)` cell. Rows follow column-major
/// vectorization of the `R_g x C_h` sub-panel: row `a + b * N_1g` is cell
/// `(R_g[a], C_h[b])`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignBlocks {
    /// `(vec(W1[R_g, .] Y_{t-1}[., C_h]), 1 ⊗ X_t[R_g, .])`.
    pub x: DMatrix<f64>,
    /// `(vec(Y_{t-1}[R_g, .] W2[., C_h]), Z_t[C_h, .] ⊗ 1)`.
    pub z: DMatrix<f64>,
    /// `vec(Y_t[R_g, C_h])`.
    pub y: DVector<f64>,
    /// `vec(Y_{t-1}[R_g, C_h])`.
    pub y_lag: DVector<f64>,
}

pub fn assemble_design_blocks(
    data: &MatrixSeries,
    nets: &NetworkPair,
    assign: &GroupAssignment,
    g: usize,
    h: usize,
    t: usize,
) -> Result<DesignBlocks> {
    nets.check_against(data)?;
    assign.check_against(data)?;
    if t == 0 || t > data.t_len() {
        return Err(GmnarError::Index(format!("time {t} outside 1..={}", data.t_len())));
    }
    if g >= assign.row_groups() || h >= assign.col_groups() {
        return Err(GmnarError::Index(format!("group ({g}, {h}) out of range")));
    }
    let rows = assign.row_members(g);
    let cols = assign.col_members(h);
    if rows.is_empty() || cols.is_empty() {
        return Err(GmnarError::EmptyGroup(format!("cell ({g}, {h}) has no members")));
    }
    let prev = data.y(t - 1);
    let row_net = nets.w1() * prev;
    let col_net = prev * nets.w2();
    let (n1g, n2h) = (rows.len(), cols.len());
    let n = n1g * n2h;
    let (p1, p2) = (data.p1(), data.p2());
    let xt = data.x(t);
    let zt = data.z(t);
    let mut x = DMatrix::zeros(n, p1 + 1);
    let mut z = DMatrix::zeros(n, p2 + 1);
    let mut y = DVector::zeros(n);
    let mut y_lag = DVector::zeros(n);
    for (b, &j) in cols.iter().enumerate() {
        for (a, &i) in rows.iter().enumerate() {
            let r = a + b * n1g;
            x[(r, 0)] = row_net[(i, j)];
            for k in 0..p1 {
                x[(r, k + 1)] = xt[(i, k)];
            }
            z[(r, 0)] = col_net[(i, j)];
            for k in 0..p2 {
                z[(r, k + 1)] = zt[(j, k)];
            }
            y[r] = data.y(t)[(i, j)];
            y_lag[r] = prev[(i, j)];
        }
    }
    Ok(DesignBlocks { x, z, y, y_lag })
}

/// Normal equations for fixed memberships.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    pub m: DMatrix<f64>,
    pub b: DVector<f64>,
    pub layout: ParamLayout,
    /// `sum y^2` over all modeled cells, so `Q(theta) = yy - 2 theta'b + theta'M theta`.
    pub yy: f64,
    pub empty_row_groups: Vec<usize>,
    pub empty_col_groups: Vec<usize>,
}

impl NormalEquations {
    pub fn has_empty_groups(&self) -> bool {
        !self.empty_row_groups.is_empty() || !self.empty_col_groups.is_empty()
    }

    /// Objective value implied by the normal equations.
    pub fn objective(&self, theta: &DVector<f64>) -> f64 {
        self.yy - 2.0 * theta.dot(&self.b) + theta.dot(&(&self.m * theta))
    }
}

/// Build `M` and `b` for the given memberships. Empty groups leave their
/// blocks zero and are listed in the result.
pub fn assemble_normal_equations(data: &MatrixSeries, nets: &NetworkPair, assign: &GroupAssignment) -> Result<NormalEquations> {
    nets.check_against(data)?;
    assign.check_against(data)?;
    let terms = NetworkTerms::new(data, nets)?;
    Ok(assemble_with_terms(data, &terms, assign))
}

/// Per `(g, h)` cell sums of `v v'` and `v y` over `t` and the member cells,
/// where `v` is the regressor in the order `(row net, x, col net, z, lag)`.
struct CellMoments {
    dim: usize,
    gram: Vec<f64>,
    cross: Vec<f64>,
}

impl CellMoments {
    fn new(dim: usize) -> Self {
        Self { dim, gram: vec![0.0; dim * dim], cross: vec![0.0; dim] }
    }

    fn add(&mut self, v: &[f64], y: f64) {
        let d = self.dim;
        for a in 0..d {
            let va = v[a];
            self.cross[a] += va * y;
            let row = &mut self.gram[a * d..a * d + d];
            for b in a..d {
                row[b] += va * v[b];
            }
        }
    }

    fn merge(&mut self, other: &Self) {
        self.gram.iter_mut().zip(&other.gram).for_each(|(a, b)| *a += b);
        self.cross.iter_mut().zip(&other.cross).for_each(|(a, b)| *a += b);
    }

    fn get(&self, a: usize, b: usize) -> f64 {
        if a <= b {
            self.gram[a * self.dim + b]
        } else {
            self.gram[b * self.dim + a]
        }
    }
}

pub(crate) fn assemble_with_terms(data: &MatrixSeries, terms: &NetworkTerms, assign: &GroupAssignment) -> NormalEquations {
    let (gn, hn) = (assign.row_groups(), assign.col_groups());
    let (p1, p2) = (data.p1(), data.p2());
    let layout = ParamLayout::new(gn, hn, p1, p2);
    let dim = p1 + p2 + 3;
    let rows = assign.rows();
    let cols = assign.cols();

    // One partial per row node; the ordered sequential merge below makes the
    // result independent of how rayon schedules the rows.
    let partials: Vec<(Vec<CellMoments>, f64)> = (0..data.n1())
        .into_par_iter()
        .map(|i| {
            let mut cells: Vec<CellMoments> = (0..hn).map(|_| CellMoments::new(dim)).collect();
            let mut yy = 0.0;
            let mut v = vec![0.0; dim];
            for t in 1..=data.t_len() {
                let y = data.y(t);
                let prev = data.y(t - 1);
                let rn = terms.row_net(t);
                let cn = terms.col_net(t);
                let x = data.x(t);
                let z = data.z(t);
                for k in 0..p1 {
                    v[1 + k] = x[(i, k)];
                }
                for j in 0..data.n2() {
                    v[0] = rn[(i, j)];
                    v[p1 + 1] = cn[(i, j)];
                    for k in 0..p2 {
                        v[p1 + 2 + k] = z[(j, k)];
                    }
                    v[dim - 1] = prev[(i, j)];
                    let target = y[(i, j)];
                    cells[cols[j]].add(&v, target);
                    yy += target * target;
                }
            }
            (cells, yy)
        })
        .collect();

    let mut moments: Vec<CellMoments> = (0..gn * hn).map(|_| CellMoments::new(dim)).collect();
    let mut yy = 0.0;
    for (i, (cells, part_yy)) in partials.iter().enumerate() {
        let g = rows[i];
        for (h, cell) in cells.iter().enumerate() {
            moments[g * hn + h].merge(cell);
        }
        yy += part_yy;
    }

    let q = layout.dim();
    let mut m = DMatrix::zeros(q, q);
    let mut b = DVector::zeros(q);
    let r_idx: Vec<usize> = (0..=p1).collect();
    let c_idx: Vec<usize> = (p1 + 1..=p1 + p2 + 1).collect();
    let lag = dim - 1;
    for g in 0..gn {
        let ro = layout.row_block(g);
        for h in 0..hn {
            let cell = &moments[g * hn + h];
            let co = layout.col_block(h);
            let ai = layout.alpha_index(g, h);
            // M^r_g and b^r_g accumulate over h
            for (a, &ra) in r_idx.iter().enumerate() {
                b[ro + a] += cell.cross[ra];
                for (bb, &rb) in r_idx.iter().enumerate() {
                    m[(ro + a, ro + bb)] += cell.get(ra, rb);
                }
                // M^{rc}_{gh}
                for (bb, &cb) in c_idx.iter().enumerate() {
                    m[(ro + a, co + bb)] += cell.get(ra, cb);
                }
                // M^{r alpha}: only the (g, I_gh) entries are nonzero
                m[(ro + a, ai)] += cell.get(ra, lag);
            }
            // M^c_h and b^c_h accumulate over g
            for (a, &ca) in c_idx.iter().enumerate() {
                b[co + a] += cell.cross[ca];
                for (bb, &cb) in c_idx.iter().enumerate() {
                    m[(co + a, co + bb)] += cell.get(ca, cb);
                }
                m[(co + a, ai)] += cell.get(ca, lag);
            }
            // diagonal M^alpha
            m[(ai, ai)] += cell.get(lag, lag);
            b[ai] += cell.cross[lag];
        }
    }
    // mirror the upper off-diagonal blocks
    let off = layout.row_block(gn);
    let alpha_off = layout.alpha_offset();
    for a in 0..q {
        for bb in 0..q {
            let upper_block = (a < off && bb >= off) || (a < alpha_off && bb >= alpha_off);
            if upper_block {
                m[(bb, a)] = m[(a, bb)];
            }
        }
    }

    let empty_row_groups = assign.row_sizes().iter().enumerate().filter(|(_, &s)| s == 0).map(|(g, _)| g).collect();
    let empty_col_groups = assign.col_sizes().iter().enumerate().filter(|(_, &s)| s == 0).map(|(h, _)| h).collect();
    NormalEquations { m, b, layout, yy, empty_row_groups, empty_col_groups }
}

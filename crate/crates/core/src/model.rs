//! Domain types and forward evaluation of the group matrix network
//! autoregression
//!
//! ```text
//! Y_t = L W1 Y_{t-1} + Y_{t-1} W2 G + A o Y_{t-1} + b_X,t 1' + 1 b_Z,t' + E_t
//! ```
//!
//! where `L = diag(lambda_{g_i})`, `G = diag(gamma_{h_j})`,
//! `A = (alpha_{g_i h_j})`, `b_X,t = (x_it' zeta_{g_i})_i` and
//! `b_Z,t = (z_jt' delta_{h_j})_j`.
//!
//! Group labels are 0-based throughout the crate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GmnarError, Result};

/// Observed panel `Y_0..Y_T` together with the row covariates `X_1..X_T`
/// (each `N1 x p1`) and column covariates `Z_1..Z_T` (each `N2 x p2`).
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSeries {
    n1: usize,
    n2: usize,
    p1: usize,
    p2: usize,
    y: Vec<DMatrix<f64>>,
    x: Vec<DMatrix<f64>>,
    z: Vec<DMatrix<f64>>,
}

impl MatrixSeries {
    /// `y` holds `T + 1` slices (index 0 is the initial state); `x` and `z`
    /// hold `T` slices, where `x[t - 1]` accompanies the transition into `y[t]`.
    pub fn new(y: Vec<DMatrix<f64>>, x: Vec<DMatrix<f64>>, z: Vec<DMatrix<f64>>) -> Result<Self> {
        if y.len() < 2 {
            return Err(GmnarError::Dimension(format!(
                "need at least two response slices, got {}",
                y.len()
            )));
        }
        let t_len = y.len() - 1;
        let (n1, n2) = y[0].shape();
        if n1 == 0 || n2 == 0 {
            return Err(GmnarError::Dimension("empty response matrix".into()));
        }
        if x.len() != t_len || z.len() != t_len {
            return Err(GmnarError::Dimension(format!(
                "expected {t_len} covariate slices, got {} row and {} column slices",
                x.len(),
                z.len()
            )));
        }
        let p1 = x[0].ncols();
        let p2 = z[0].ncols();
        for (t, slice) in y.iter().enumerate() {
            if slice.shape() != (n1, n2) {
                return Err(GmnarError::Dimension(format!(
                    "response slice {t} has shape {:?}, expected {:?}",
                    slice.shape(),
                    (n1, n2)
                )));
            }
            if slice.iter().any(|v| !v.is_finite()) {
                return Err(GmnarError::NonFinite(format!("response slice {t}")));
            }
        }
        for (s, slice) in x.iter().enumerate() {
            if slice.shape() != (n1, p1) {
                return Err(GmnarError::Dimension(format!(
                    "row covariate slice {} has shape {:?}, expected {:?}",
                    s + 1,
                    slice.shape(),
                    (n1, p1)
                )));
            }
            if slice.iter().any(|v| !v.is_finite()) {
                return Err(GmnarError::NonFinite(format!("row covariate slice {}", s + 1)));
            }
        }
        for (s, slice) in z.iter().enumerate() {
            if slice.shape() != (n2, p2) {
                return Err(GmnarError::Dimension(format!(
                    "column covariate slice {} has shape {:?}, expected {:?}",
                    s + 1,
                    slice.shape(),
                    (n2, p2)
                )));
            }
            if slice.iter().any(|v| !v.is_finite()) {
                return Err(GmnarError::NonFinite(format!("column covariate slice {}", s + 1)));
            }
        }
        Ok(Self { n1, n2, p1, p2, y, x, z })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    /// Number of modeled transitions `T`.
    pub fn t_len(&self) -> usize {
        self.y.len() - 1
    }

    pub fn p1(&self) -> usize {
        self.p1
    }

    pub fn p2(&self) -> usize {
        self.p2
    }

    /// Response slice `Y_t`, `t` in `0..=T`.
    pub fn y(&self, t: usize) -> &DMatrix<f64> {
        &self.y[t]
    }

    /// Row covariates `X_t`, `t` in `1..=T`.
    pub fn x(&self, t: usize) -> &DMatrix<f64> {
        &self.x[t - 1]
    }

    /// Column covariates `Z_t`, `t` in `1..=T`.
    pub fn z(&self, t: usize) -> &DMatrix<f64> {
        &self.z[t - 1]
    }

    pub fn y_slices(&self) -> &[DMatrix<f64>] {
        &self.y
    }

    pub fn x_slices(&self) -> &[DMatrix<f64>] {
        &self.x
    }

    pub fn z_slices(&self) -> &[DMatrix<f64>] {
        &self.z
    }

    /// Number of response cells entering the objective, `N1 * N2 * T`.
    pub fn n_obs(&self) -> usize {
        self.n1 * self.n2 * self.t_len()
    }

    /// Copy with every response and covariate multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n1: self.n1,
            n2: self.n2,
            p1: self.p1,
            p2: self.p2,
            y: self.y.iter().map(|m| m * c).collect(),
            x: self.x.iter().map(|m| m * c).collect(),
            z: self.z.iter().map(|m| m * c).collect(),
        }
    }

    fn check_time(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.t_len() {
            return Err(GmnarError::Index(format!("time {t} outside 1..={}", self.t_len())));
        }
        Ok(())
    }
}

/// Normalization direction for an adjacency matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    Row,
    Column,
}

/// Divide each row (or column) of a binary adjacency matrix by its sum.
/// Zero rows (columns) stay zero.
pub fn normalize(adjacency: &DMatrix<u8>, mode: Normalization) -> Result<DMatrix<f64>> {
    let (n, m) = adjacency.shape();
    if n != m {
        return Err(GmnarError::Dimension(format!("adjacency must be square, got {n}x{m}")));
    }
    for i in 0..n {
        if adjacency[(i, i)] != 0 {
            return Err(GmnarError::InvalidArgument(format!("nonzero diagonal at node {i}")));
        }
    }
    if let Some(v) = adjacency.iter().find(|&&v| v > 1) {
        return Err(GmnarError::InvalidArgument(format!("non-binary adjacency entry {v}")));
    }
    let mut w = DMatrix::<f64>::zeros(n, n);
    match mode {
        Normalization::Row => {
            for i in 0..n {
                let degree: u32 = (0..n).map(|k| adjacency[(i, k)] as u32).sum();
                if degree > 0 {
                    let inv = 1.0 / degree as f64;
                    for k in 0..n {
                        if adjacency[(i, k)] == 1 {
                            w[(i, k)] = inv;
                        }
                    }
                }
            }
        }
        Normalization::Column => {
            for j in 0..n {
                let degree: u32 = (0..n).map(|k| adjacency[(k, j)] as u32).sum();
                if degree > 0 {
                    let inv = 1.0 / degree as f64;
                    for k in 0..n {
                        if adjacency[(k, j)] == 1 {
                            w[(k, j)] = inv;
                        }
                    }
                }
            }
        }
    }
    Ok(w)
}

/// Row network `A1` / `W1` (row-stochastic) and column network `A2` / `W2`
/// (column-stochastic).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkPair {
    a1: DMatrix<u8>,
    a2: DMatrix<u8>,
    w1: DMatrix<f64>,
    w2: DMatrix<f64>,
}

impl NetworkPair {
    pub fn from_adjacency(a1: DMatrix<u8>, a2: DMatrix<u8>) -> Result<Self> {
        let w1 = normalize(&a1, Normalization::Row)?;
        let w2 = normalize(&a2, Normalization::Column)?;
        Ok(Self { a1, a2, w1, w2 })
    }

    pub fn a1(&self) -> &DMatrix<u8> {
        &self.a1
    }

    pub fn a2(&self) -> &DMatrix<u8> {
        &self.a2
    }

    pub fn w1(&self) -> &DMatrix<f64> {
        &self.w1
    }

    pub fn w2(&self) -> &DMatrix<f64> {
        &self.w2
    }

    pub fn n1(&self) -> usize {
        self.a1.nrows()
    }

    pub fn n2(&self) -> usize {
        self.a2.nrows()
    }

    pub fn check_against(&self, data: &MatrixSeries) -> Result<()> {
        if self.n1() != data.n1() || self.n2() != data.n2() {
            return Err(GmnarError::Dimension(format!(
                "networks are {}x{} nodes but the panel is {}x{}",
                self.n1(),
                self.n2(),
                data.n1(),
                data.n2()
            )));
        }
        Ok(())
    }
}

/// Row labels `g_i` in `0..G` and column labels `h_j` in `0..H`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupAssignment {
    row_groups: usize,
    col_groups: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

impl GroupAssignment {
    pub fn new(row_groups: usize, col_groups: usize, rows: Vec<usize>, cols: Vec<usize>) -> Result<Self> {
        if row_groups == 0 || col_groups == 0 {
            return Err(GmnarError::InvalidArgument("group counts must be positive".into()));
        }
        if let Some((i, &g)) = rows.iter().enumerate().find(|(_, &g)| g >= row_groups) {
            return Err(GmnarError::Index(format!("row {i} has label {g} >= G = {row_groups}")));
        }
        if let Some((j, &h)) = cols.iter().enumerate().find(|(_, &h)| h >= col_groups) {
            return Err(GmnarError::Index(format!("column {j} has label {h} >= H = {col_groups}")));
        }
        Ok(Self { row_groups, col_groups, rows, cols })
    }

    /// Every node in group 0.
    pub fn single(n1: usize, n2: usize) -> Self {
        Self { row_groups: 1, col_groups: 1, rows: vec![0; n1], cols: vec![0; n2] }
    }

    pub fn row_groups(&self) -> usize {
        self.row_groups
    }

    pub fn col_groups(&self) -> usize {
        self.col_groups
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    pub fn set_rows(&mut self, rows: Vec<usize>) {
        debug_assert!(rows.iter().all(|&g| g < self.row_groups));
        self.rows = rows;
    }

    pub fn set_cols(&mut self, cols: Vec<usize>) {
        debug_assert!(cols.iter().all(|&h| h < self.col_groups));
        self.cols = cols;
    }

    /// `R_g`, the rows labelled `g`, in increasing order.
    pub fn row_members(&self, g: usize) -> Vec<usize> {
        members(&self.rows, g)
    }

    /// `C_h`, the columns labelled `h`, in increasing order.
    pub fn col_members(&self, h: usize) -> Vec<usize> {
        members(&self.cols, h)
    }

    /// `N_{1g}` for every `g`.
    pub fn row_sizes(&self) -> Vec<usize> {
        sizes(&self.rows, self.row_groups)
    }

    /// `N_{2h}` for every `h`.
    pub fn col_sizes(&self) -> Vec<usize> {
        sizes(&self.cols, self.col_groups)
    }

    pub fn check_against(&self, data: &MatrixSeries) -> Result<()> {
        if self.rows.len() != data.n1() || self.cols.len() != data.n2() {
            return Err(GmnarError::Dimension(format!(
                "labels cover {}x{} nodes but the panel is {}x{}",
                self.rows.len(),
                self.cols.len(),
                data.n1(),
                data.n2()
            )));
        }
        Ok(())
    }
}

fn members(labels: &[usize], k: usize) -> Vec<usize> {
    labels.iter().enumerate().filter(|(_, &l)| l == k).map(|(i, _)| i).collect()
}

fn sizes(labels: &[usize], k: usize) -> Vec<usize> {
    let mut out = vec![0; k];
    for &l in labels {
        out[l] += 1;
    }
    out
}

/// Shape of the flat parameter vector
/// `theta = (theta_1^r, .., theta_G^r, theta_1^c, .., theta_H^c, vec(alpha))`
/// with `theta_g^r = (lambda_g, zeta_g')'`, `theta_h^c = (gamma_h, delta_h')'`
/// and `alpha_{gh}` stored at `h * G + g` inside the last block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub row_groups: usize,
    pub col_groups: usize,
    pub p1: usize,
    pub p2: usize,
}

impl ParamLayout {
    pub fn new(row_groups: usize, col_groups: usize, p1: usize, p2: usize) -> Self {
        Self { row_groups, col_groups, p1, p2 }
    }

    /// `q = G(1 + p1) + H(1 + p2) + GH`.
    pub fn dim(&self) -> usize {
        self.row_groups * (self.p1 + 1) + self.col_groups * (self.p2 + 1) + self.row_groups * self.col_groups
    }

    /// Offset of `theta_g^r`.
    pub fn row_block(&self, g: usize) -> usize {
        g * (self.p1 + 1)
    }

    /// Offset of `theta_h^c`.
    pub fn col_block(&self, h: usize) -> usize {
        self.row_groups * (self.p1 + 1) + h * (self.p2 + 1)
    }

    /// Offset of `alpha_{gh}`.
    pub fn alpha_index(&self, g: usize, h: usize) -> usize {
        self.alpha_offset() + h * self.row_groups + g
    }

    pub fn alpha_offset(&self) -> usize {
        self.row_groups * (self.p1 + 1) + self.col_groups * (self.p2 + 1)
    }

    /// Human-readable parameter names in flat order, 1-based as in the
    /// usual notation (`lambda_1`, `zeta_1_2`, `alpha_2_1`, ...).
    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.dim());
        for g in 0..self.row_groups {
            names.push(format!("lambda_{}", g + 1));
            for k in 0..self.p1 {
                names.push(format!("zeta_{}_{}", g + 1, k + 1));
            }
        }
        for h in 0..self.col_groups {
            names.push(format!("gamma_{}", h + 1));
            for k in 0..self.p2 {
                names.push(format!("delta_{}_{}", h + 1, k + 1));
            }
        }
        for h in 0..self.col_groups {
            for g in 0..self.row_groups {
                names.push(format!("alpha_{}_{}", g + 1, h + 1));
            }
        }
        names
    }
}

/// Group-wise coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    /// `lambda_g`, length `G`.
    pub lambda: DVector<f64>,
    /// `gamma_h`, length `H`.
    pub gamma: DVector<f64>,
    /// `alpha_{gh}`, `G x H`.
    pub alpha: DMatrix<f64>,
    /// Columns are `zeta_g`, `p1 x G`.
    pub zeta: DMatrix<f64>,
    /// Columns are `delta_h`, `p2 x H`.
    pub delta: DMatrix<f64>,
}

impl ParameterSet {
    pub fn zeros(layout: ParamLayout) -> Self {
        let ParamLayout { row_groups: g, col_groups: h, p1, p2 } = layout;
        Self {
            lambda: DVector::zeros(g),
            gamma: DVector::zeros(h),
            alpha: DMatrix::zeros(g, h),
            zeta: DMatrix::zeros(p1, g),
            delta: DMatrix::zeros(p2, h),
        }
    }

    /// Validating constructor.
    pub fn new(
        lambda: DVector<f64>,
        gamma: DVector<f64>,
        alpha: DMatrix<f64>,
        zeta: DMatrix<f64>,
        delta: DMatrix<f64>,
    ) -> Result<Self> {
        let g = lambda.len();
        let h = gamma.len();
        if g == 0 || h == 0 {
            return Err(GmnarError::Dimension("need at least one row and one column group".into()));
        }
        if alpha.shape() != (g, h) {
            return Err(GmnarError::Dimension(format!("alpha is {:?}, expected ({g}, {h})", alpha.shape())));
        }
        if zeta.ncols() != g || delta.ncols() != h {
            return Err(GmnarError::Dimension("covariate effect columns must match group counts".into()));
        }
        let out = Self { lambda, gamma, alpha, zeta, delta };
        if !out.is_finite() {
            return Err(GmnarError::NonFinite("parameter set".into()));
        }
        Ok(out)
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(self.lambda.len(), self.gamma.len(), self.zeta.nrows(), self.delta.nrows())
    }

    pub fn row_groups(&self) -> usize {
        self.lambda.len()
    }

    pub fn col_groups(&self) -> usize {
        self.gamma.len()
    }

    pub fn p1(&self) -> usize {
        self.zeta.nrows()
    }

    pub fn p2(&self) -> usize {
        self.delta.nrows()
    }

    pub fn is_finite(&self) -> bool {
        self.lambda.iter().chain(self.gamma.iter()).chain(self.alpha.iter()).chain(self.zeta.iter()).chain(self.delta.iter()).all(|v| v.is_finite())
    }

    pub fn flatten(&self) -> DVector<f64> {
        let layout = self.layout();
        let mut theta = DVector::zeros(layout.dim());
        for g in 0..layout.row_groups {
            let o = layout.row_block(g);
            theta[o] = self.lambda[g];
            for k in 0..layout.p1 {
                theta[o + 1 + k] = self.zeta[(k, g)];
            }
        }
        for h in 0..layout.col_groups {
            let o = layout.col_block(h);
            theta[o] = self.gamma[h];
            for k in 0..layout.p2 {
                theta[o + 1 + k] = self.delta[(k, h)];
            }
        }
        for h in 0..layout.col_groups {
            for g in 0..layout.row_groups {
                theta[layout.alpha_index(g, h)] = self.alpha[(g, h)];
            }
        }
        theta
    }

    pub fn unflatten(layout: ParamLayout, theta: &[f64]) -> Result<Self> {
        if theta.len() != layout.dim() {
            return Err(GmnarError::Dimension(format!(
                "flat parameter vector has length {}, layout needs {}",
                theta.len(),
                layout.dim()
            )));
        }
        let mut out = Self::zeros(layout);
        for g in 0..layout.row_groups {
            let o = layout.row_block(g);
            out.lambda[g] = theta[o];
            for k in 0..layout.p1 {
                out.zeta[(k, g)] = theta[o + 1 + k];
            }
        }
        for h in 0..layout.col_groups {
            let o = layout.col_block(h);
            out.gamma[h] = theta[o];
            for k in 0..layout.p2 {
                out.delta[(k, h)] = theta[o + 1 + k];
            }
        }
        for h in 0..layout.col_groups {
            for g in 0..layout.row_groups {
                out.alpha[(g, h)] = theta[layout.alpha_index(g, h)];
            }
        }
        Ok(out)
    }

    /// Coefficients `Theta_ij` for a node in row group `g` and column group
    /// `h`, ordered like [`RegressorVector`]: `(lambda, zeta, gamma, delta, alpha)`.
    pub fn node_coefficients(&self, g: usize, h: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.p1() + self.p2() + 3);
        out.push(self.lambda[g]);
        out.extend(self.zeta.column(g).iter());
        out.push(self.gamma[h]);
        out.extend(self.delta.column(h).iter());
        out.push(self.alpha[(g, h)]);
        out
    }

    /// Shift the row intercepts `zeta_{g,1}` to sum to zero, moving the mean
    /// into every column intercept `delta_{h,1}`. Fitted values are unchanged
    /// because every cell carries exactly one row and one column intercept.
    pub fn recenter_intercepts(&mut self) -> Result<()> {
        self.shift_intercepts(self.zeta.row(0).mean())
    }

    /// Subtract `c` from every `zeta_{g,1}` and add it to every `delta_{h,1}`.
    pub fn shift_intercepts(&mut self, c: f64) -> Result<()> {
        if self.p1() == 0 || self.p2() == 0 {
            return Err(GmnarError::InvalidArgument(
                "intercept identification needs at least one row and one column covariate".into(),
            ));
        }
        for g in 0..self.row_groups() {
            self.zeta[(0, g)] -= c;
        }
        for h in 0..self.col_groups() {
            self.delta[(0, h)] += c;
        }
        Ok(())
    }

    /// Apply label permutations: group `g` of `self` becomes group
    /// `row_perm[g]` of the result (likewise for columns).
    pub fn permuted(&self, row_perm: &[usize], col_perm: &[usize]) -> Self {
        let mut out = Self::zeros(self.layout());
        for g in 0..self.row_groups() {
            let ng = row_perm[g];
            out.lambda[ng] = self.lambda[g];
            out.zeta.set_column(ng, &self.zeta.column(g));
            for h in 0..self.col_groups() {
                out.alpha[(ng, col_perm[h])] = self.alpha[(g, h)];
            }
        }
        for h in 0..self.col_groups() {
            let nh = col_perm[h];
            out.gamma[nh] = self.gamma[h];
            out.delta.set_column(nh, &self.delta.column(h));
        }
        out
    }

    pub fn check_against(&self, assign: &GroupAssignment, data: &MatrixSeries) -> Result<()> {
        if self.row_groups() != assign.row_groups() || self.col_groups() != assign.col_groups() {
            return Err(GmnarError::Dimension(format!(
                "parameters have ({}, {}) groups, assignment has ({}, {})",
                self.row_groups(),
                self.col_groups(),
                assign.row_groups(),
                assign.col_groups()
            )));
        }
        if self.p1() != data.p1() || self.p2() != data.p2() {
            return Err(GmnarError::Dimension(format!(
                "parameters have covariate dims ({}, {}), data has ({}, {})",
                self.p1(),
                self.p2(),
                data.p1(),
                data.p2()
            )));
        }
        Ok(())
    }
}

/// Plain serializable form of a [`ParameterSet`], with group-major nested
/// vectors: `alpha[g][h]`, `zeta[g][k]`, `delta[h][k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub lambda: Vec<f64>,
    pub gamma: Vec<f64>,
    pub alpha: Vec<Vec<f64>>,
    #[serde(default)]
    pub zeta: Vec<Vec<f64>>,
    #[serde(default)]
    pub delta: Vec<Vec<f64>>,
}

impl ParameterSpec {
    pub fn to_params(&self) -> Result<ParameterSet> {
        let g = self.lambda.len();
        let h = self.gamma.len();
        if self.alpha.len() != g || self.alpha.iter().any(|r| r.len() != h) {
            return Err(GmnarError::Dimension(format!("alpha must be {g} rows of {h} values")));
        }
        let p1 = group_major_width(&self.zeta, g, "zeta")?;
        let p2 = group_major_width(&self.delta, h, "delta")?;
        ParameterSet::new(
            DVector::from_vec(self.lambda.clone()),
            DVector::from_vec(self.gamma.clone()),
            DMatrix::from_fn(g, h, |a, b| self.alpha[a][b]),
            DMatrix::from_fn(p1, g, |k, a| self.zeta[a][k]),
            DMatrix::from_fn(p2, h, |k, b| self.delta[b][k]),
        )
    }
}

fn group_major_width(rows: &[Vec<f64>], groups: usize, what: &str) -> Result<usize> {
    if rows.is_empty() {
        return Ok(0);
    }
    if rows.len() != groups {
        return Err(GmnarError::Dimension(format!("{what} must have one row per group ({groups})")));
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(GmnarError::Dimension(format!("{what} rows must share one length")));
    }
    Ok(width)
}

impl From<&ParameterSet> for ParameterSpec {
    fn from(p: &ParameterSet) -> Self {
        Self {
            lambda: p.lambda.iter().copied().collect(),
            gamma: p.gamma.iter().copied().collect(),
            alpha: (0..p.row_groups()).map(|g| p.alpha.row(g).iter().copied().collect()).collect(),
            zeta: if p.p1() == 0 { Vec::new() } else { (0..p.row_groups()).map(|g| p.zeta.column(g).iter().copied().collect()).collect() },
            delta: if p.p2() == 0 { Vec::new() } else { (0..p.col_groups()).map(|h| p.delta.column(h).iter().copied().collect()).collect() },
        }
    }
}

/// Regressor `X_ijt` ordered as
/// `(sum_k w1_ik Y_kj,t-1, x_it', sum_k Y_ik,t-1 w2_kj, z_jt', Y_ij,t-1)`,
/// matching [`ParameterSet::node_coefficients`].
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorVector {
    values: Vec<f64>,
    p1: usize,
}

impl RegressorVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn row_network(&self) -> f64 {
        self.values[0]
    }

    pub fn x(&self) -> &[f64] {
        &self.values[1..1 + self.p1]
    }

    pub fn col_network(&self) -> f64 {
        self.values[1 + self.p1]
    }

    pub fn z(&self) -> &[f64] {
        let n = self.values.len();
        &self.values[2 + self.p1..n - 1]
    }

    pub fn lag(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn dot(&self, coefficients: &[f64]) -> f64 {
        self.values.iter().zip(coefficients).map(|(a, b)| a * b).sum()
    }
}

pub fn build_regressor(data: &MatrixSeries, nets: &NetworkPair, i: usize, j: usize, t: usize) -> Result<RegressorVector> {
    nets.check_against(data)?;
    data.check_time(t)?;
    if i >= data.n1() || j >= data.n2() {
        return Err(GmnarError::Index(format!("cell ({i}, {j}) outside {}x{}", data.n1(), data.n2())));
    }
    let prev = data.y(t - 1);
    let w1 = nets.w1();
    let w2 = nets.w2();
    let row_net: f64 = (0..data.n1()).map(|k| w1[(i, k)] * prev[(k, j)]).sum();
    let col_net: f64 = (0..data.n2()).map(|k| prev[(i, k)] * w2[(k, j)]).sum();
    let mut values = Vec::with_capacity(data.p1() + data.p2() + 3);
    values.push(row_net);
    values.extend(data.x(t).row(i).iter());
    values.push(col_net);
    values.extend(data.z(t).row(j).iter());
    values.push(prev[(i, j)]);
    Ok(RegressorVector { values, p1: data.p1() })
}

/// `W1 Y_{t-1}` and `Y_{t-1} W2` for every `t`, computed once per dataset.
#[derive(Debug, Clone)]
pub struct NetworkTerms {
    row_net: Vec<DMatrix<f64>>,
    col_net: Vec<DMatrix<f64>>,
}

impl NetworkTerms {
    pub fn new(data: &MatrixSeries, nets: &NetworkPair) -> Result<Self> {
        nets.check_against(data)?;
        let t_len = data.t_len();
        let row_net = (1..=t_len).map(|t| nets.w1() * data.y(t - 1)).collect();
        let col_net = (1..=t_len).map(|t| data.y(t - 1) * nets.w2()).collect();
        Ok(Self { row_net, col_net })
    }

    /// `W1 Y_{t-1}`, `t` in `1..=T`.
    pub fn row_net(&self, t: usize) -> &DMatrix<f64> {
        &self.row_net[t - 1]
    }

    /// `Y_{t-1} W2`, `t` in `1..=T`.
    pub fn col_net(&self, t: usize) -> &DMatrix<f64> {
        &self.col_net[t - 1]
    }
}

fn check_all(params: &ParameterSet, assign: &GroupAssignment, data: &MatrixSeries, nets: &NetworkPair) -> Result<()> {
    nets.check_against(data)?;
    assign.check_against(data)?;
    params.check_against(assign, data)
}

/// Conditional mean `E[Y_t | past]` in matrix form.
pub fn one_step_mean(
    params: &ParameterSet,
    assign: &GroupAssignment,
    data: &MatrixSeries,
    nets: &NetworkPair,
    t: usize,
) -> Result<DMatrix<f64>> {
    check_all(params, assign, data, nets)?;
    data.check_time(t)?;
    let prev = data.y(t - 1);
    Ok(conditional_mean(params, assign, prev, &(nets.w1() * prev), &(prev * nets.w2()), data.x(t), data.z(t)))
}

/// Conditional mean given the lagged slice, its network transforms and the
/// current covariates. Shared by evaluation and simulation.
pub(crate) fn conditional_mean(
    params: &ParameterSet,
    assign: &GroupAssignment,
    prev: &DMatrix<f64>,
    row_net: &DMatrix<f64>,
    col_net: &DMatrix<f64>,
    x: &DMatrix<f64>,
    z: &DMatrix<f64>,
) -> DMatrix<f64> {
    let (n1, n2) = prev.shape();
    let rows = assign.rows();
    let cols = assign.cols();
    let beta_x: Vec<f64> = (0..n1).map(|i| x.row(i).dot(&params.zeta.column(rows[i]).transpose())).collect();
    let beta_z: Vec<f64> = (0..n2).map(|j| z.row(j).dot(&params.delta.column(cols[j]).transpose())).collect();
    DMatrix::from_fn(n1, n2, |i, j| {
        let g = rows[i];
        let h = cols[j];
        params.lambda[g] * row_net[(i, j)]
            + params.gamma[h] * col_net[(i, j)]
            + params.alpha[(g, h)] * prev[(i, j)]
            + beta_x[i]
            + beta_z[j]
    })
}

/// Least-squares objective `Q(theta, G, H) = sum_t ||Y_t - E[Y_t | past]||_F^2`.
pub fn objective_q(params: &ParameterSet, assign: &GroupAssignment, data: &MatrixSeries, nets: &NetworkPair) -> Result<f64> {
    check_all(params, assign, data, nets)?;
    let terms = NetworkTerms::new(data, nets)?;
    Ok(objective_with_terms(params, assign, data, &terms))
}

pub(crate) fn objective_with_terms(params: &ParameterSet, assign: &GroupAssignment, data: &MatrixSeries, terms: &NetworkTerms) -> f64 {
    (1..=data.t_len())
        .map(|t| {
            let mean = conditional_mean(params, assign, data.y(t - 1), terms.row_net(t), terms.col_net(t), data.x(t), data.z(t));
            (data.y(t) - mean).norm_squared()
        })
        .sum()
}

/// Outcome of the stationarity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stationarity {
    pub stationary: bool,
    /// `max_{g,h} |lambda_g + gamma_h + alpha_{gh}|`.
    pub kappa: f64,
}

pub fn check_stationarity(params: &ParameterSet) -> Stationarity {
    let mut kappa: f64 = 0.0;
    for g in 0..params.row_groups() {
        for h in 0..params.col_groups() {
            kappa = kappa.max((params.lambda[g] + params.gamma[h] + params.alpha[(g, h)]).abs());
        }
    }
    Stationarity { stationary: kappa < 1.0, kappa }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn scalar_series(y0: f64) -> MatrixSeries {
        MatrixSeries::new(
            vec![DMatrix::from_element(1, 1, y0), DMatrix::from_element(1, 1, 0.0)],
            vec![DMatrix::zeros(1, 0)],
            vec![DMatrix::zeros(1, 0)],
        )
        .unwrap()
    }

    #[test]
    fn single_node_regressor_has_no_network_terms() {
        let data = scalar_series(2.5);
        let nets = NetworkPair::from_adjacency(DMatrix::zeros(1, 1), DMatrix::zeros(1, 1)).unwrap();
        let x = build_regressor(&data, &nets, 0, 0, 1).unwrap();
        assert_eq!(x.as_slice(), &[0.0, 0.0, 2.5]);
        assert!(build_regressor(&data, &nets, 1, 0, 1).is_err());
        assert!(build_regressor(&data, &nets, 0, 0, 2).is_err());
        assert!(build_regressor(&data, &nets, 0, 0, 0).is_err());
    }

    #[test]
    fn row_network_term_averages_neighbours() {
        let y0 = dmatrix![0.0; 1.0; 3.0];
        let data = MatrixSeries::new(vec![y0, DMatrix::zeros(3, 1)], vec![DMatrix::zeros(3, 0)], vec![DMatrix::zeros(1, 0)]).unwrap();
        let a1 = dmatrix![0u8, 1, 1; 0, 0, 0; 0, 0, 0];
        let nets = NetworkPair::from_adjacency(a1, DMatrix::zeros(1, 1)).unwrap();
        let x = build_regressor(&data, &nets, 0, 0, 1).unwrap();
        assert_eq!(x.row_network(), 2.0);
        // isolated node
        assert_eq!(build_regressor(&data, &nets, 1, 0, 1).unwrap().row_network(), 0.0);
    }

    #[test]
    fn normalization_edge_cases() {
        let a = dmatrix![0u8, 1; 1, 0];
        assert_eq!(normalize(&a, Normalization::Row).unwrap(), dmatrix![0.0, 1.0; 1.0, 0.0]);
        let a = dmatrix![0u8, 1, 1; 0, 0, 0; 1, 0, 0];
        let w = normalize(&a, Normalization::Row).unwrap();
        assert_eq!(w.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.5, 0.5]);
        assert_eq!(w.row(1).sum(), 0.0);
        let wc = normalize(&a, Normalization::Column).unwrap();
        assert_eq!(wc[(0, 1)], 1.0);
        assert_eq!(wc[(0, 0)], 0.0);
        assert!(wc.column(0).sum() == 1.0);
        assert!(normalize(&dmatrix![1u8, 0; 0, 0], Normalization::Row).is_err());
        assert!(normalize(&dmatrix![0u8, 2; 0, 0], Normalization::Row).is_err());
    }

    #[test]
    fn scalar_case_reduces_to_ar1() {
        let data = scalar_series(2.0);
        let nets = NetworkPair::from_adjacency(DMatrix::zeros(1, 1), DMatrix::zeros(1, 1)).unwrap();
        let mut params = ParameterSet::zeros(ParamLayout::new(1, 1, 0, 0));
        params.alpha[(0, 0)] = 0.4;
        params.lambda[0] = 0.9;
        params.gamma[0] = -0.3;
        let assign = GroupAssignment::single(1, 1);
        let mean = one_step_mean(&params, &assign, &data, &nets, 1).unwrap();
        assert!((mean[(0, 0)] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_parameters_give_sum_of_squares() {
        let y = vec![dmatrix![1.0, 2.0; 3.0, 4.0], dmatrix![0.5, -1.0; 2.0, 0.0], dmatrix![1.0, 1.0; 1.0, -2.0]];
        let x = vec![DMatrix::from_element(2, 1, 1.0); 2];
        let z = vec![DMatrix::from_element(2, 2, -1.0); 2];
        let data = MatrixSeries::new(y, x, z).unwrap();
        let nets = NetworkPair::from_adjacency(dmatrix![0u8, 1; 1, 0], dmatrix![0u8, 1; 0, 0]).unwrap();
        let params = ParameterSet::zeros(ParamLayout::new(2, 1, 1, 2));
        let assign = GroupAssignment::new(2, 1, vec![1, 0], vec![0, 0]).unwrap();
        let q = objective_q(&params, &assign, &data, &nets).unwrap();
        let expected = 0.25 + 1.0 + 4.0 + 0.0 + 1.0 + 1.0 + 1.0 + 4.0;
        assert!((q - expected).abs() < 1e-12);
        assert!(one_step_mean(&params, &assign, &data, &nets, 1).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let data = scalar_series(1.0);
        let nets = NetworkPair::from_adjacency(DMatrix::zeros(1, 1), DMatrix::zeros(1, 1)).unwrap();
        let params = ParameterSet::zeros(ParamLayout::new(2, 1, 0, 0));
        let assign = GroupAssignment::single(1, 1);
        assert!(matches!(objective_q(&params, &assign, &data, &nets), Err(GmnarError::Dimension(_))));
    }

    #[test]
    fn stationarity_margin() {
        let params = ParameterSet::new(
            DVector::from_vec(vec![0.15, 0.2]),
            DVector::from_vec(vec![0.25, 0.4]),
            dmatrix![-0.2, 0.3; -0.18, 0.35],
            DMatrix::zeros(0, 2),
            DMatrix::zeros(0, 2),
        )
        .unwrap();
        let s = check_stationarity(&params);
        assert!((s.kappa - 0.95).abs() < 1e-12);
        assert!(s.stationary);

        let zero = ParameterSet::zeros(ParamLayout::new(1, 1, 0, 0));
        assert_eq!(check_stationarity(&zero), Stationarity { stationary: true, kappa: 0.0 });

        let mut hot = zero.clone();
        hot.lambda[0] = 0.6;
        hot.gamma[0] = 0.5;
        let s = check_stationarity(&hot);
        assert!((s.kappa - 1.1).abs() < 1e-12);
        assert!(!s.stationary);
    }

    #[test]
    fn layout_indices() {
        let layout = ParamLayout::new(2, 3, 1, 2);
        assert_eq!(layout.dim(), 2 * 2 + 3 * 3 + 6);
        assert_eq!(layout.col_block(0), 4);
        assert_eq!(layout.alpha_index(1, 2), 4 + 9 + 2 * 2 + 1);
        let names = layout.names();
        assert_eq!(names[0], "lambda_1");
        assert_eq!(names[1], "zeta_1_1");
        assert_eq!(names[4], "gamma_1");
        assert_eq!(names[layout.alpha_index(1, 2)], "alpha_2_3");
    }

    #[test]
    fn invalid_labels_rejected() {
        assert!(GroupAssignment::new(2, 1, vec![0, 2], vec![0]).is_err());
        assert!(GroupAssignment::new(0, 1, vec![], vec![0]).is_err());
        let a = GroupAssignment::new(3, 1, vec![0, 2, 2, 0], vec![0]).unwrap();
        assert_eq!(a.row_sizes(), vec![2, 0, 2]);
        assert_eq!(a.row_members(2), vec![1, 2]);
    }

    #[test]
    fn series_rejects_bad_shapes() {
        let ok = MatrixSeries::new(vec![DMatrix::zeros(2, 3); 3], vec![DMatrix::zeros(2, 1); 2], vec![DMatrix::zeros(3, 0); 2]);
        assert!(ok.is_ok());
        let short = MatrixSeries::new(vec![DMatrix::zeros(2, 3); 3], vec![DMatrix::zeros(2, 1); 1], vec![DMatrix::zeros(3, 0); 2]);
        assert!(short.is_err());
        let mut y = vec![DMatrix::zeros(2, 3); 3];
        y[1][(0, 0)] = f64::NAN;
        assert!(matches!(
            MatrixSeries::new(y, vec![DMatrix::zeros(2, 1); 2], vec![DMatrix::zeros(3, 0); 2]),
            Err(GmnarError::NonFinite(_))
        ));
    }
}

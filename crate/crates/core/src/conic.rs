//! Conic intermediate representation, an embedded homogeneous self-dual
//! interior-point solver, and SDPA sparse-format interop.
//!
//! Programs are stated in primal standard form
//!
//! ```text
//!     min/max  <c, x>    s.t.    <a_k, x> = b_k  (k = 1..m),    x ∈ K,
//! ```
//!
//! where `K` is a product of dense PSD blocks and a nonnegative orthant.
//! A coefficient on an off-diagonal PSD entry addresses that entry once:
//! the term `(block, i, j, v)` with `i < j` contributes `v·X_ij`.
//!
//! The solver embeds the program in the homogeneous self-dual model, so
//! primal/dual infeasibility comes out as a verified Farkas certificate
//! rather than a failed solve; borderline instances report `Unknown`.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Cholesky, Eigh, UPLO};

use crate::{Error, Result};

/// Reference to a single scalar decision variable inside a [`ConicProgram`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum VarRef {
    /// Entry `(row, col)` of a PSD block; canonicalized to `row ≤ col`.
    Psd { block: usize, row: usize, col: usize },
    /// One coordinate of the nonnegative orthant.
    Nonneg { index: usize },
}

impl VarRef {
    pub fn psd(block: usize, row: usize, col: usize) -> Self {
        VarRef::Psd {
            block,
            row: row.min(col),
            col: row.max(col),
        }
    }

    pub fn nonneg(index: usize) -> Self {
        VarRef::Nonneg { index }
    }
}

/// Sparse linear functional over the program's variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    terms: Vec<(VarRef, f64)>,
}

impl LinExpr {
    pub fn new() -> Self {
        LinExpr { terms: Vec::new() }
    }

    pub fn term(var: VarRef, coeff: f64) -> Self {
        let mut e = LinExpr::new();
        e.push(var, coeff);
        e
    }

    pub fn push(&mut self, var: VarRef, coeff: f64) {
        if coeff != 0.0 {
            self.terms.push((var, coeff));
        }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[(VarRef, f64)] {
        &self.terms
    }

    /// Sort by variable, merge duplicates, drop exact zeros.
    pub fn canonicalize(&mut self) {
        self.terms.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out: Vec<(VarRef, f64)> = Vec::with_capacity(self.terms.len());
        for &(v, c) in &self.terms {
            match out.last_mut() {
                Some((lv, lc)) if *lv == v => *lc += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        self.terms = out;
    }
}

impl FromIterator<(VarRef, f64)> for LinExpr {
    fn from_iter<T: IntoIterator<Item = (VarRef, f64)>>(iter: T) -> Self {
        let mut e = LinExpr::new();
        for (v, c) in iter {
            e.push(v, c);
        }
        e
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Linear conic program over PSD blocks and nonnegative scalars.
#[derive(Clone, Debug)]
pub struct ConicProgram {
    psd_blocks: Vec<(String, usize)>,
    nonneg_count: usize,
    objective: LinExpr,
    equalities: Vec<(LinExpr, f64)>,
    sense: Sense,
}

impl ConicProgram {
    pub fn new(sense: Sense) -> Self {
        ConicProgram {
            psd_blocks: Vec::new(),
            nonneg_count: 0,
            objective: LinExpr::new(),
            equalities: Vec::new(),
            sense,
        }
    }

    /// Append a PSD block, returning its index.
    pub fn add_psd_block(&mut self, name: impl Into<String>, dim: usize) -> usize {
        assert!(dim >= 1, "PSD blocks must be at least 1x1");
        self.psd_blocks.push((name.into(), dim));
        self.psd_blocks.len() - 1
    }

    /// Append `count` nonnegative scalars, returning the index of the first.
    pub fn add_nonneg_vars(&mut self, count: usize) -> usize {
        let first = self.nonneg_count;
        self.nonneg_count += count;
        first
    }

    pub fn set_objective(&mut self, mut expr: LinExpr) {
        expr.canonicalize();
        self.objective = expr;
    }

    pub fn add_equality(&mut self, mut expr: LinExpr, rhs: f64) {
        expr.canonicalize();
        self.equalities.push((expr, rhs));
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn psd_blocks(&self) -> &[(String, usize)] {
        &self.psd_blocks
    }

    pub fn nonneg_count(&self) -> usize {
        self.nonneg_count
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    pub fn equalities(&self) -> &[(LinExpr, f64)] {
        &self.equalities
    }

    pub fn num_equalities(&self) -> usize {
        self.equalities.len()
    }

    /// Total scalar variable count (upper triangles + nonnegatives).
    pub fn num_entries(&self) -> usize {
        self.psd_blocks
            .iter()
            .map(|&(_, d)| d * (d + 1) / 2)
            .sum::<usize>()
            + self.nonneg_count
    }

    /// Check that every coefficient references an existing entry on or above
    /// the diagonal of its block.
    pub fn validate(&self) -> Result<()> {
        if self.psd_blocks.is_empty() && self.nonneg_count == 0 {
            return Err(Error::InvalidProgram("program has no variables".into()));
        }
        let exprs = std::iter::once(&self.objective).chain(self.equalities.iter().map(|(e, _)| e));
        for expr in exprs {
            for &(v, c) in expr.terms() {
                if !c.is_finite() {
                    return Err(Error::InvalidProgram("non-finite coefficient".into()));
                }
                match v {
                    VarRef::Psd { block, row, col } => {
                        let dim = self
                            .psd_blocks
                            .get(block)
                            .map(|&(_, d)| d)
                            .ok_or_else(|| {
                                Error::InvalidProgram(format!("no PSD block {block}"))
                            })?;
                        if row > col || col >= dim {
                            return Err(Error::InvalidProgram(format!(
                                "entry ({row},{col}) outside upper triangle of {dim}x{dim} block"
                            )));
                        }
                    }
                    VarRef::Nonneg { index } => {
                        if index >= self.nonneg_count {
                            return Err(Error::InvalidProgram(format!(
                                "no nonnegative variable {index}"
                            )));
                        }
                    }
                }
            }
        }
        if self.equalities.iter().any(|(_, b)| !b.is_finite()) {
            return Err(Error::InvalidProgram("non-finite right-hand side".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub max_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol_gap: 1e-8,
            tol_feas: 1e-8,
            max_iters: 200,
        }
    }
}

impl SolveOptions {
    /// Defaults overridden by the `MS_TOL_GAP`, `MS_TOL_FEAS`, and
    /// `MS_MAX_ITERS` environment variables when set.
    pub fn from_env() -> Self {
        let mut opts = SolveOptions::default();
        if let Some(v) = env_f64("MS_TOL_GAP") {
            opts.tol_gap = v;
        }
        if let Some(v) = env_f64("MS_TOL_FEAS") {
            opts.tol_feas = v;
        }
        if let Ok(s) = std::env::var("MS_MAX_ITERS") {
            if let Ok(v) = s.trim().parse::<usize>() {
                opts.max_iters = v;
            }
        }
        opts
    }
}

fn env_f64(key: &str) -> Option<f64> {
    std::env::var(key).ok()?.trim().parse::<f64>().ok()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    Unknown,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Status::Optimal => "optimal",
            Status::PrimalInfeasible => "primal_infeasible",
            Status::DualInfeasible => "dual_infeasible",
            Status::Unknown => "unknown",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, Default, serde::Serialize, serde::Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

/// Result of a conic solve in the caller's sense convention.
///
/// - `Optimal`: `objective` is the optimal value; `psd`/`nonneg` the primal
///   point, `dual` the equality multipliers (`∂objective/∂b_k`).
/// - `PrimalInfeasible`: `certificate` holds a Farkas dual ray `y` with
///   `Σ y_k b_k = 1` and `Σ y_k a_k` negative semidefinite; the objective is
///   `+∞` when minimizing.
/// - `DualInfeasible` (unbounded objective): `psd`/`nonneg` hold an
///   improving ray with `<a_k, x> = 0` and `<c, x> = −1` in minimize form.
/// - `Unknown`: best iterate and its residuals, nothing verified.
#[derive(Clone, Debug)]
pub struct ConicSolution {
    pub status: Status,
    pub objective: f64,
    pub psd: Vec<Array2<f64>>,
    pub nonneg: Vec<f64>,
    pub dual: Vec<f64>,
    pub certificate: Option<Vec<f64>>,
    pub residuals: Residuals,
    pub iters: usize,
}

// ---------------------------------------------------------------------------
// internal problem data
// ---------------------------------------------------------------------------

/// Product-cone state vector: one dense symmetric matrix per PSD block plus
/// the nonnegative coordinates.
#[derive(Clone, Debug)]
struct BlockVec {
    mats: Vec<Array2<f64>>,
    nn: Vec<f64>,
}

impl BlockVec {
    fn zeros(dims: &[usize], q: usize) -> Self {
        BlockVec {
            mats: dims.iter().map(|&d| Array2::zeros((d, d))).collect(),
            nn: vec![0.0; q],
        }
    }

    fn identity(dims: &[usize], q: usize) -> Self {
        BlockVec {
            mats: dims.iter().map(|&d| Array2::eye(d)).collect(),
            nn: vec![1.0; q],
        }
    }

    fn dot(&self, other: &BlockVec) -> f64 {
        let mut acc = 0.0;
        for (a, b) in self.mats.iter().zip(&other.mats) {
            acc += a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<f64>();
        }
        acc += self.nn.iter().zip(&other.nn).map(|(x, y)| x * y).sum::<f64>();
        acc
    }

    fn axpy(&mut self, alpha: f64, other: &BlockVec) {
        for (a, b) in self.mats.iter_mut().zip(&other.mats) {
            a.zip_mut_with(b, |x, &y| *x += alpha * y);
        }
        for (a, b) in self.nn.iter_mut().zip(&other.nn) {
            *a += alpha * b;
        }
    }

    fn scaled(&self, alpha: f64) -> BlockVec {
        let mut out = self.clone();
        for m in &mut out.mats {
            m.mapv_inplace(|v| alpha * v);
        }
        for v in &mut out.nn {
            *v *= alpha;
        }
        out
    }

    fn norm2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    fn norm_inf(&self) -> f64 {
        let a = self
            .mats
            .iter()
            .flat_map(|m| m.iter())
            .fold(0.0f64, |acc, &v| acc.max(v.abs()));
        self.nn.iter().fold(a, |acc, &v| acc.max(v.abs()))
    }

    fn is_finite(&self) -> bool {
        self.mats.iter().all(|m| m.iter().all(|v| v.is_finite()))
            && self.nn.iter().all(|v| v.is_finite())
    }
}

/// One equality row; PSD terms keep the user semantics `v·X_ij` per entry.
#[derive(Clone, Debug, Default)]
struct SparseRow {
    psd: Vec<(usize, usize, usize, f64)>,
    nn: Vec<(usize, f64)>,
}

impl SparseRow {
    fn from_expr(expr: &LinExpr) -> Self {
        let mut row = SparseRow::default();
        for &(v, c) in expr.terms() {
            match v {
                VarRef::Psd { block, row: i, col: j } => row.psd.push((block, i, j, c)),
                VarRef::Nonneg { index } => row.nn.push((index, c)),
            }
        }
        row
    }

    fn scale(&mut self, alpha: f64) {
        for t in &mut self.psd {
            t.3 *= alpha;
        }
        for t in &mut self.nn {
            t.1 *= alpha;
        }
    }

    fn norm_inf(&self) -> f64 {
        let a = self.psd.iter().map(|t| t.3.abs()).fold(0.0, f64::max);
        let b = self.nn.iter().map(|t| t.1.abs()).fold(0.0, f64::max);
        a.max(b)
    }

    /// `<G, X>` with `G` the symmetric matrix this row represents.
    fn apply(&self, x: &BlockVec) -> f64 {
        let mut acc = 0.0;
        for &(b, i, j, v) in &self.psd {
            acc += v * x.mats[b][[i, j]];
        }
        for &(i, v) in &self.nn {
            acc += v * x.nn[i];
        }
        acc
    }

    /// Accumulate `alpha·G` into `out` as a symmetric matrix.
    fn accumulate(&self, alpha: f64, out: &mut BlockVec) {
        for &(b, i, j, v) in &self.psd {
            if i == j {
                out.mats[b][[i, i]] += alpha * v;
            } else {
                out.mats[b][[i, j]] += alpha * v / 2.0;
                out.mats[b][[j, i]] += alpha * v / 2.0;
            }
        }
        for &(i, v) in &self.nn {
            out.nn[i] += alpha * v;
        }
    }
}

struct ProblemData {
    dims: Vec<usize>,
    q: usize,
    rows: Vec<SparseRow>,
    b: Vec<f64>,
    c: BlockVec,
    /// rows grouped per PSD block for Schur assembly, sorted by row index
    block_rows: Vec<Vec<(usize, Vec<(usize, usize, f64)>)>>,
    /// rows touching each nonnegative variable
    nn_rows: Vec<Vec<(usize, f64)>>,
    row_scale: Vec<f64>,
    beta_b: f64,
    beta_c: f64,
    maximize: bool,
    norm_b0: f64,
    norm_c0: f64,
}

impl ProblemData {
    fn new(p: &ConicProgram) -> ProblemData {
        let dims: Vec<usize> = p.psd_blocks.iter().map(|&(_, d)| d).collect();
        let q = p.nonneg_count;
        let maximize = p.sense == Sense::Maximize;

        let mut c = BlockVec::zeros(&dims, q);
        let obj_row = SparseRow::from_expr(&p.objective);
        obj_row.accumulate(if maximize { -1.0 } else { 1.0 }, &mut c);

        let mut rows: Vec<SparseRow> = Vec::with_capacity(p.equalities.len());
        let mut b: Vec<f64> = Vec::with_capacity(p.equalities.len());
        let mut row_scale = Vec::with_capacity(p.equalities.len());
        for (expr, rhs) in &p.equalities {
            let mut row = SparseRow::from_expr(expr);
            let scale = row.norm_inf().max(rhs.abs()).max(1e-30);
            let inv = 1.0 / scale;
            row.scale(inv);
            rows.push(row);
            b.push(rhs * inv);
            row_scale.push(inv);
        }
        let norm_b0: f64 = p
            .equalities
            .iter()
            .fold(0.0f64, |m, &(_, r)| m.max(r.abs()));
        let mut c0 = BlockVec::zeros(&dims, q);
        obj_row.accumulate(1.0, &mut c0);
        let norm_c0 = c0.norm_inf();

        let beta_b = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let beta_c = c
            .mats
            .iter()
            .flat_map(|m| m.iter())
            .chain(c.nn.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1.0);
        for v in &mut b {
            *v /= beta_b;
        }
        let c = c.scaled(1.0 / beta_c);

        let mut block_rows: Vec<Vec<(usize, Vec<(usize, usize, f64)>)>> =
            vec![Vec::new(); dims.len()];
        let mut nn_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); q];
        for (k, row) in rows.iter().enumerate() {
            let mut per_block: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); dims.len()];
            for &(blk, i, j, v) in &row.psd {
                per_block[blk].push((i, j, v));
            }
            for (blk, terms) in per_block.into_iter().enumerate() {
                if !terms.is_empty() {
                    block_rows[blk].push((k, terms));
                }
            }
            for &(i, v) in &row.nn {
                nn_rows[i].push((k, v));
            }
        }

        ProblemData {
            dims,
            q,
            rows,
            b,
            c,
            block_rows,
            nn_rows,
            row_scale,
            beta_b,
            beta_c,
            maximize,
            norm_b0,
            norm_c0,
        }
    }

    fn m(&self) -> usize {
        self.rows.len()
    }

    fn nu(&self) -> f64 {
        (self.dims.iter().sum::<usize>() + self.q) as f64
    }

    fn apply_a(&self, x: &BlockVec) -> Vec<f64> {
        self.rows.iter().map(|r| r.apply(x)).collect()
    }

    fn apply_at(&self, y: &[f64]) -> BlockVec {
        let mut out = BlockVec::zeros(&self.dims, self.q);
        for (row, &yk) in self.rows.iter().zip(y) {
            if yk != 0.0 {
                row.accumulate(yk, &mut out);
            }
        }
        out
    }

    /// Primal feasibility residual and objective of an original-space point.
    fn primal_stats(&self, x_o: &BlockVec) -> (f64, f64) {
        let ax = self.apply_a(x_o);
        let mut pres_inf = 0.0f64;
        let mut ax_inf = 0.0f64;
        for k in 0..self.m() {
            let lhs = ax[k] / self.row_scale[k].max(1e-300);
            let rhs = self.b[k] * self.beta_b / self.row_scale[k].max(1e-300);
            pres_inf = pres_inf.max((lhs - rhs).abs());
            ax_inf = ax_inf.max(lhs.abs());
        }
        let pres = pres_inf / self.norm_b0.max(ax_inf).max(1.0);
        let pobj = self.c.dot(x_o) * self.beta_c;
        (pres, pobj)
    }

    /// Candidate primal/dual point mapped back to the original problem data.
    fn candidate(&self, x: &BlockVec, y: &[f64], s: &BlockVec, tau: f64) -> Candidate {
        let x_o = x.scaled(self.beta_b / tau);
        let s_o = s.scaled(self.beta_c / tau);
        let y_o: Vec<f64> = y
            .iter()
            .zip(&self.row_scale)
            .map(|(&yk, &rs)| yk * self.beta_c * rs / tau)
            .collect();
        let (pres, pobj) = self.primal_stats(&x_o);
        // dual residual: A_o' y_o + s_o − c_o, with A_o' v = A_s' (v / rs)
        let y_unscaled: Vec<f64> = y_o
            .iter()
            .zip(&self.row_scale)
            .map(|(&v, &rs)| v / rs.max(1e-300))
            .collect();
        let aty = self.apply_at(&y_unscaled);
        let mut dres_vec = aty.clone();
        dres_vec.axpy(1.0, &s_o);
        dres_vec.axpy(-self.beta_c, &self.c);
        let dres = dres_vec.norm_inf()
            / self.norm_c0.max(aty.norm_inf()).max(s_o.norm_inf()).max(1.0);
        let dobj: f64 = y_o
            .iter()
            .zip(self.b.iter().zip(&self.row_scale))
            .map(|(&yo, (&bs, &rs))| yo * bs * self.beta_b / rs.max(1e-300))
            .collect::<Vec<f64>>()
            .iter()
            .sum();
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs());
        Candidate {
            x: x_o,
            y: y_o,
            pobj,
            dobj,
            pres,
            dres,
            gap,
        }
    }
}

#[derive(Clone)]
struct Candidate {
    x: BlockVec,
    y: Vec<f64>,
    pobj: f64,
    dobj: f64,
    pres: f64,
    dres: f64,
    gap: f64,
}

// ---------------------------------------------------------------------------
// Nesterov–Todd scaling
// ---------------------------------------------------------------------------

struct PsdScale {
    /// λ = R⁻¹XR⁻ᵀ = RᵀSR, diagonal
    lambda: Array1<f64>,
    r: Array2<f64>,
    rinv: Array2<f64>,
    /// T = RRᵀ, the scaling matrix with TST = X
    t: Array2<f64>,
}

struct Scaling {
    psd: Vec<PsdScale>,
    /// per-coordinate w = √(x/s) for the nonnegative part
    w: Vec<f64>,
    lam_nn: Vec<f64>,
}

fn symmetrize(mut a: Array2<f64>) -> Array2<f64> {
    let at = a.t().to_owned();
    a.zip_mut_with(&at, |x, &y| *x = 0.5 * (*x + y));
    a
}

/// Invert a lower-triangular matrix by forward substitution.
fn tri_inv_lower(l: &Array2<f64>) -> Option<Array2<f64>> {
    let d = l.nrows();
    let mut inv = Array2::<f64>::zeros((d, d));
    for c in 0..d {
        for r in c..d {
            let mut v = if r == c { 1.0 } else { 0.0 };
            for k in c..r {
                v -= l[[r, k]] * inv[[k, c]];
            }
            let diag = l[[r, r]];
            if diag.abs() < 1e-300 {
                return None;
            }
            inv[[r, c]] = v / diag;
        }
    }
    Some(inv)
}

impl Scaling {
    /// Unweighted scaling (T = I, w = 1), used to factor the plain Gram
    /// matrix `A Aᵀ` for terminal feasibility polishing.
    fn identity(dims: &[usize], q: usize) -> Scaling {
        let psd = dims
            .iter()
            .map(|&d| PsdScale {
                lambda: Array1::ones(d),
                r: Array2::eye(d),
                rinv: Array2::eye(d),
                t: Array2::eye(d),
            })
            .collect();
        Scaling {
            psd,
            w: vec![1.0; q],
            lam_nn: vec![1.0; q],
        }
    }

    fn compute(x: &BlockVec, s: &BlockVec) -> Option<Scaling> {
        let mut psd = Vec::with_capacity(x.mats.len());
        for (xb, sb) in x.mats.iter().zip(&s.mats) {
            let lx = xb.cholesky(UPLO::Lower).ok()?;
            let inner = symmetrize(lx.t().dot(sb).dot(&lx));
            let (mut evals, evecs) = inner.eigh(UPLO::Lower).ok()?;
            let emax = evals.iter().cloned().fold(f64::MIN, f64::max);
            if !emax.is_finite() || emax <= 0.0 {
                return None;
            }
            let floor = emax * 1e-14;
            evals.mapv_inplace(|v| v.max(floor));
            let lambda = evals.mapv(f64::sqrt);
            // R = Lx Q Λ^{-1/4},  R⁻¹ = Λ^{1/4} Qᵀ Lx⁻¹
            let mut r = lx.dot(&evecs);
            for (mut col, &ev) in r.columns_mut().into_iter().zip(evals.iter()) {
                col.mapv_inplace(|v| v * ev.powf(-0.25));
            }
            let lxinv = tri_inv_lower(&lx)?;
            let mut qt = evecs.t().to_owned();
            for (mut row, &ev) in qt.rows_mut().into_iter().zip(evals.iter()) {
                row.mapv_inplace(|v| v * ev.powf(0.25));
            }
            let rinv = qt.dot(&lxinv);
            let t = symmetrize(r.dot(&r.t()));
            psd.push(PsdScale { lambda, r, rinv, t });
        }
        let mut w = Vec::with_capacity(x.nn.len());
        let mut lam_nn = Vec::with_capacity(x.nn.len());
        for (&xi, &si) in x.nn.iter().zip(&s.nn) {
            if xi <= 0.0 || si <= 0.0 {
                return None;
            }
            w.push((xi / si).sqrt());
            lam_nn.push((xi * si).sqrt());
        }
        Some(Scaling { psd, w, lam_nn })
    }

    /// Apply the inverse scaled Hessian: per PSD block `V ↦ TVT`, per
    /// nonnegative coordinate `v ↦ w²v`.
    fn finv(&self, v: &BlockVec) -> BlockVec {
        let mats = self
            .psd
            .iter()
            .zip(&v.mats)
            .map(|(sc, m)| symmetrize(sc.t.dot(m).dot(&sc.t)))
            .collect();
        let nn = v
            .nn
            .iter()
            .zip(&self.w)
            .map(|(&vi, &wi)| wi * wi * vi)
            .collect();
        BlockVec { mats, nn }
    }

    /// Directions mapped into the scaled frame: `R⁻¹ dx R⁻ᵀ` and `Rᵀ ds R`.
    fn scale_dirs(&self, dx: &BlockVec, ds: &BlockVec) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let xbar = self
            .psd
            .iter()
            .zip(&dx.mats)
            .map(|(sc, m)| symmetrize(sc.rinv.dot(m).dot(&sc.rinv.t())))
            .collect();
        let sbar = self
            .psd
            .iter()
            .zip(&ds.mats)
            .map(|(sc, m)| symmetrize(sc.r.t().dot(m).dot(&sc.r)))
            .collect();
        (xbar, sbar)
    }
}

/// Largest step `α` keeping `x + α dx`, `s + α ds`, `τ + α dτ`, `κ + α dκ`
/// in the cone, computed in the common scaled frame.
fn max_step(
    scal: &Scaling,
    xbar: &[Array2<f64>],
    sbar: &[Array2<f64>],
    x: &BlockVec,
    s: &BlockVec,
    dx: &BlockVec,
    ds: &BlockVec,
    tau: f64,
    dtau: f64,
    kappa: f64,
    dkappa: f64,
) -> f64 {
    let mut alpha_inv = 0.0f64;
    for (sc, dir) in scal.psd.iter().zip(xbar) {
        alpha_inv = alpha_inv.max(neg_min_eig_scaled(&sc.lambda, dir));
    }
    for (sc, dir) in scal.psd.iter().zip(sbar) {
        alpha_inv = alpha_inv.max(neg_min_eig_scaled(&sc.lambda, dir));
    }
    for ((&xi, &dxi), (&si, &dsi)) in x
        .nn
        .iter()
        .zip(&dx.nn)
        .zip(s.nn.iter().zip(&ds.nn))
    {
        alpha_inv = alpha_inv.max(-dxi / xi).max(-dsi / si);
    }
    alpha_inv = alpha_inv.max(-dtau / tau).max(-dkappa / kappa);
    if alpha_inv <= 1e-300 {
        1e300
    } else {
        1.0 / alpha_inv
    }
}

/// `max(0, −λ_min(Λ^{-1/2} M Λ^{-1/2}))` for the step-to-boundary rule.
fn neg_min_eig_scaled(lambda: &Array1<f64>, m: &Array2<f64>) -> f64 {
    let d = lambda.len();
    let mut scaled = m.clone();
    for i in 0..d {
        for j in 0..d {
            scaled[[i, j]] /= (lambda[i] * lambda[j]).sqrt();
        }
    }
    match scaled.eigh(UPLO::Lower) {
        Ok((evals, _)) => (-evals[0]).max(0.0),
        Err(_) => f64::INFINITY,
    }
}

// ---------------------------------------------------------------------------
// Schur complement and KKT solves
// ---------------------------------------------------------------------------

struct KktFactor {
    /// Cholesky factor (lower) of the regularized Schur complement
    chol: Array2<f64>,
    /// unregularized Schur complement for iterative refinement
    m_full: Array2<f64>,
}

impl KktFactor {
    fn new(data: &ProblemData, scal: &Scaling) -> Option<KktFactor> {
        let m = data.m();
        let mut mat = Array2::<f64>::zeros((m, m));
        // PSD contribution: M_lk += <G_k, T G_l T>, accumulated per block
        for (blk, rows) in data.block_rows.iter().enumerate() {
            let t = &scal.psd[blk].t;
            let d = t.nrows();
            let tf = t.as_slice().expect("contiguous");
            let mut u = vec![0.0f64; d * d];
            for (pos_l, (l, terms_l)) in rows.iter().enumerate() {
                u.iter_mut().for_each(|v| *v = 0.0);
                for &(i, j, v) in terms_l {
                    if i == j {
                        let ti = &tf[i * d..(i + 1) * d];
                        for a in 0..d {
                            let va = v * ti[a];
                            let ua = &mut u[a * d..(a + 1) * d];
                            for (uc, tc) in ua.iter_mut().zip(ti) {
                                *uc += va * tc;
                            }
                        }
                    } else {
                        let ti = &tf[i * d..(i + 1) * d];
                        let tj = &tf[j * d..(j + 1) * d];
                        let half = v / 2.0;
                        for a in 0..d {
                            let vi = half * ti[a];
                            let vj = half * tj[a];
                            let ua = &mut u[a * d..(a + 1) * d];
                            for ((uc, tjc), tic) in ua.iter_mut().zip(tj).zip(ti) {
                                *uc += vi * tjc + vj * tic;
                            }
                        }
                    }
                }
                for (k, terms_k) in &rows[..=pos_l] {
                    let mut acc = 0.0;
                    for &(i, j, v) in terms_k {
                        acc += v * u[i * d + j];
                    }
                    mat[[*l, *k]] += acc;
                }
            }
        }
        // nonnegative contribution: M_lk += w_i² a_li a_ki
        for (i, rows) in data.nn_rows.iter().enumerate() {
            let w2 = scal.w[i] * scal.w[i];
            for (a, &(l, vl)) in rows.iter().enumerate() {
                for &(k, vk) in &rows[..=a] {
                    mat[[l, k]] += w2 * vl * vk;
                }
            }
        }
        // mirror the lower triangle
        for l in 0..m {
            for k in 0..l {
                mat[[k, l]] = mat[[l, k]];
            }
        }
        if mat.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let max_diag = (0..m).map(|i| mat[[i, i]]).fold(0.0f64, f64::max).max(1.0);
        let mut delta = 0.0;
        for attempt in 0..8 {
            let mut reg = mat.clone();
            for i in 0..m {
                reg[[i, i]] += delta;
            }
            if let Ok(chol) = reg.cholesky(UPLO::Lower) {
                return Some(KktFactor { chol, m_full: mat });
            }
            delta = if attempt == 0 {
                max_diag * 1e-12
            } else {
                delta * 100.0
            };
        }
        None
    }

    /// Solve `M dy = rhs` with the factored matrix plus iterative refinement
    /// against the unregularized Schur complement; refine while the residual
    /// keeps shrinking and return the best iterate seen.
    fn solve_vec(&self, rhs: &Array1<f64>) -> Array1<f64> {
        let norm = |v: &Array1<f64>| v.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        let mut dy = chol_solve(&self.chol, rhs);
        let mut best = dy.clone();
        let mut best_res = f64::INFINITY;
        let mut prev = f64::INFINITY;
        for _ in 0..6 {
            let r = rhs - &self.m_full.dot(&dy);
            let rn = norm(&r);
            if rn < best_res {
                best_res = rn;
                best = dy.clone();
            }
            if rn >= prev * 0.5 {
                break;
            }
            prev = rn;
            let corr = chol_solve(&self.chol, &r);
            dy += &corr;
        }
        best
    }

    /// Solve the reduced system `A dx = by`, `dx − F⁻¹(Aᵀ dy) = bx`.
    fn solve(
        &self,
        data: &ProblemData,
        scal: &Scaling,
        bx: &BlockVec,
        by: &[f64],
    ) -> (BlockVec, Vec<f64>) {
        let abx = data.apply_a(bx);
        let rhs = Array1::from_iter(by.iter().zip(&abx).map(|(&b, &a)| b - a));
        let dy = self.solve_vec(&rhs);
        let dy_vec: Vec<f64> = dy.to_vec();
        let mut dx = scal.finv(&data.apply_at(&dy_vec));
        dx.axpy(1.0, bx);
        (dx, dy_vec)
    }
}

/// Forward/back substitution with a lower Cholesky factor.
fn chol_solve(l: &Array2<f64>, rhs: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut z = rhs.to_vec();
    for i in 0..n {
        let mut v = z[i];
        for k in 0..i {
            v -= l[[i, k]] * z[k];
        }
        z[i] = v / l[[i, i]];
    }
    for i in (0..n).rev() {
        let mut v = z[i];
        for k in (i + 1)..n {
            v -= l[[k, i]] * z[k];
        }
        z[i] = v / l[[i, i]];
    }
    Array1::from_vec(z)
}

// ---------------------------------------------------------------------------
// main solver
// ---------------------------------------------------------------------------

/// Solve a conic program with the embedded interior-point method.
///
/// Panics if the program fails [`ConicProgram::validate`]; numerical
/// difficulties surface as `Status::Unknown`, never as a panic.
pub fn solve(p: &ConicProgram, opts: &SolveOptions) -> ConicSolution {
    p.validate().expect("well-formed conic program");
    let data = ProblemData::new(p);
    run_hsd(&data, opts)
}

/// Reclassify an `Unknown` solution as `Optimal` at the given (typically
/// looser) tolerances, but only when the returned best iterate actually
/// verifies: primal/dual residuals within `tol_feas`, relative gap within
/// `tol_gap`, PSD blocks clean to `tol_feas`, and nonnegative entries above
/// `-tol_feas`.  Callers that prefer a verified reduced-accuracy value over
/// no answer apply this after [`solve`]; every other status passes through
/// untouched.
pub fn accept_at(mut sol: ConicSolution, tol_gap: f64, tol_feas: f64) -> ConicSolution {
    let clean = sol.psd.iter().all(|mat| {
        let mut shifted = mat.clone();
        for i in 0..shifted.nrows() {
            shifted[[i, i]] += tol_feas;
        }
        shifted.cholesky(UPLO::Lower).is_ok()
    }) && sol.nonneg.iter().all(|&v| v >= -tol_feas);
    if sol.status == Status::Unknown
        && sol.residuals.primal <= tol_feas
        && sol.residuals.dual <= tol_feas
        && sol.residuals.gap <= tol_gap
        && clean
    {
        sol.status = Status::Optimal;
    }
    sol
}

fn run_hsd(data: &ProblemData, opts: &SolveOptions) -> ConicSolution {
    let dims = &data.dims;
    let q = data.q;
    let m = data.m();
    let nu = data.nu() + 1.0;
    let tf = opts.tol_feas;
    let tg = opts.tol_gap;

    let mut x = BlockVec::identity(dims, q);
    let mut s = BlockVec::identity(dims, q);
    let mut y = vec![0.0f64; m];
    let mut tau = 1.0f64;
    let mut kappa = 1.0f64;

    let mut best: Option<(f64, Candidate, usize)> = None;
    // stall bookkeeping: the best merit and τ/κ ratio seen, and the last
    // iteration on which either improved meaningfully
    const STALL_PATIENCE: usize = 8;
    let mut stall_phi = f64::INFINITY;
    let mut stall_tk = f64::INFINITY;
    let mut stall_since = 0usize;
    // deepest τ/κ collapse observed: near machine precision the ratio can
    // bounce back up before crossing the declaration gate, so keep the ray
    // for a final verification attempt
    let mut collapse: Option<(f64, BlockVec, Vec<f64>, usize)> = None;

    for iter in 0..opts.max_iters {
        // residuals of the self-dual model (scaled data)
        let ax = data.apply_a(&x);
        let rp: Vec<f64> = data.b.iter().zip(&ax).map(|(&bk, &axk)| tau * bk - axk).collect();
        let mut rd = data.c.scaled(tau);
        rd.axpy(-1.0, &data.apply_at(&y));
        rd.axpy(-1.0, &s);
        let cx = data.c.dot(&x);
        let by: f64 = data.b.iter().zip(&y).map(|(&b, &yk)| b * yk).sum();
        let rg = kappa + cx - by;
        let mu = (x.dot(&s) + tau * kappa) / nu;

        if !x.is_finite() || !s.is_finite() || !tau.is_finite() || !kappa.is_finite() {
            break;
        }

        // check the candidate against the original data
        let cand = data.candidate(&x, &y, &s, tau);
        let phi = cand.pres.max(cand.dres).max(cand.gap);
        if std::env::var_os("MS_TRACE").is_some() {
            eprintln!(
                "iter {iter:3}  pres {:9.2e}  dres {:9.2e}  gap {:9.2e}  mu {:9.2e}  tau/kappa {:9.2e}",
                cand.pres, cand.dres, cand.gap, mu, tau / kappa
            );
        }
        if best.as_ref().map_or(true, |(bp, _, _)| phi < *bp) {
            best = Some((phi, cand.clone(), iter));
        }
        if cand.pres <= tf && cand.dres <= tf && cand.gap <= tg && psd_clean(&cand.x, tf) {
            return finish_optimal(data, cand, iter);
        }

        // infeasibility gate: τ/κ collapse plus a verified certificate
        if tau < 1e-9 * kappa {
            if let Some(sol) = try_certificates(data, &x, &y, tf, iter) {
                return sol;
            }
        }

        // stall detection: progress means the merit dropped by ≥1% or τ/κ by
        // ≥20% (the latter keeps infeasibility detection alive while the ray
        // forms).  Once neither has moved for a while, every further
        // factorization is wasted work — stop and report the best iterate.
        let tk = tau / kappa;
        if phi < 0.99 * stall_phi || tk < 0.8 * stall_tk {
            stall_phi = stall_phi.min(phi);
            stall_tk = stall_tk.min(tk);
            stall_since = iter;
        } else if iter >= 12 && iter - stall_since >= STALL_PATIENCE {
            break;
        }
        if tk < 1e-6 && collapse.as_ref().map_or(true, |(t, ..)| tk < *t) {
            collapse = Some((tk, x.clone(), y.clone(), iter));
        }

        let Some(scal) = Scaling::compute(&x, &s) else {
            break;
        };
        let Some(kkt) = KktFactor::new(data, &scal) else {
            break;
        };

        // τ-column subsystem, shared by both passes
        let bx2 = scal.finv(&data.c).scaled(-1.0);
        let (p_dir, q_dir) = kkt.solve(data, &scal, &bx2, &data.b);
        let cp = data.c.dot(&p_dir);
        let bq: f64 = data.b.iter().zip(&q_dir).map(|(&b, &v)| b * v).sum();
        let denom = cp - bq - kappa / tau;
        if !denom.is_finite() || denom >= 0.0 {
            break;
        }

        // affine pass: η = 1, target −λ² (so the constant block is just −x)
        let mut bx1 = x.scaled(-1.0);
        bx1.axpy(-1.0, &scal.finv(&rd));
        let (u, v) = kkt.solve(data, &scal, &bx1, &rp);
        let dkc_aff = -tau * kappa;
        let cu = data.c.dot(&u);
        let bv: f64 = data.b.iter().zip(&v).map(|(&b, &w)| b * w).sum();
        let dtau_aff = (-rg - dkc_aff / tau - cu + bv) / denom;
        let mut dx_aff = u.clone();
        dx_aff.axpy(dtau_aff, &p_dir);
        let dy_aff: Vec<f64> = v
            .iter()
            .zip(&q_dir)
            .map(|(&a, &b)| a + dtau_aff * b)
            .collect();
        let mut ds_aff = rd.clone();
        ds_aff.axpy(dtau_aff, &data.c);
        ds_aff.axpy(-1.0, &data.apply_at(&dy_aff));
        let dkappa_aff = (dkc_aff - kappa * dtau_aff) / tau;

        let (xbar_aff, sbar_aff) = scal.scale_dirs(&dx_aff, &ds_aff);
        let alpha_aff = max_step(
            &scal, &xbar_aff, &sbar_aff, &x, &s, &dx_aff, &ds_aff, tau, dtau_aff, kappa,
            dkappa_aff,
        )
        .min(1.0);

        let xs = x.dot(&s);
        let xds = x.dot(&ds_aff);
        let dxs = dx_aff.dot(&s);
        let dxds = dx_aff.dot(&ds_aff);
        let mu_aff = (xs
            + alpha_aff * (xds + dxs)
            + alpha_aff * alpha_aff * dxds
            + (tau + alpha_aff * dtau_aff) * (kappa + alpha_aff * dkappa_aff))
            / nu;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
        let eta = 1.0 - sigma;

        // combined pass with Mehrotra corrector
        let mut gc = BlockVec::zeros(dims, q);
        for (blk, sc) in scal.psd.iter().enumerate() {
            let d = sc.lambda.len();
            let mut target = Array2::<f64>::zeros((d, d));
            let corr = symmetrize(xbar_aff[blk].dot(&sbar_aff[blk]));
            for i in 0..d {
                for j in 0..d {
                    let mut v = -corr[[i, j]];
                    if i == j {
                        v += sigma * mu - sc.lambda[i] * sc.lambda[i];
                    }
                    target[[i, j]] = 2.0 * v / (sc.lambda[i] + sc.lambda[j]);
                }
            }
            gc.mats[blk] = symmetrize(sc.r.dot(&target).dot(&sc.r.t()));
        }
        for i in 0..q {
            let corr = dx_aff.nn[i] * ds_aff.nn[i];
            gc.nn[i] = scal.w[i] * (sigma * mu - scal.lam_nn[i] * scal.lam_nn[i] - corr)
                / scal.lam_nn[i];
        }
        let dkc = sigma * mu - tau * kappa - dtau_aff * dkappa_aff;

        let mut bx1 = gc;
        bx1.axpy(-eta, &scal.finv(&rd));
        let by1: Vec<f64> = rp.iter().map(|&v| eta * v).collect();
        let (u, v) = kkt.solve(data, &scal, &bx1, &by1);
        let cu = data.c.dot(&u);
        let bv: f64 = data.b.iter().zip(&v).map(|(&b, &w)| b * w).sum();
        let dtau = (-eta * rg - dkc / tau - cu + bv) / denom;
        let mut dx = u;
        dx.axpy(dtau, &p_dir);
        let dy: Vec<f64> = v.iter().zip(&q_dir).map(|(&a, &b)| a + dtau * b).collect();
        let mut ds = rd.scaled(eta);
        ds.axpy(dtau, &data.c);
        ds.axpy(-1.0, &data.apply_at(&dy));
        let dkappa = (dkc - kappa * dtau) / tau;

        let (xbar, sbar) = scal.scale_dirs(&dx, &ds);
        let alpha = (0.99
            * max_step(&scal, &xbar, &sbar, &x, &s, &dx, &ds, tau, dtau, kappa, dkappa))
        .min(1.0);
        if !alpha.is_finite() || alpha <= 1e-14 {
            break;
        }

        x.axpy(alpha, &dx);
        s.axpy(alpha, &ds);
        for (yk, dyk) in y.iter_mut().zip(&dy) {
            *yk += alpha * dyk;
        }
        tau += alpha * dtau;
        kappa += alpha * dkappa;
    }

    // terminal polish: project the best iterate onto the equality manifold
    // and re-test the optimality gates before giving up
    if let Some((phi, cand, it)) = &best {
        if *phi <= 1e-4 {
            let mut polished = cand.clone();
            if primal_polish(data, &mut polished)
                && polished.pres <= tf
                && polished.dres <= tf
                && polished.gap <= tg
                && psd_clean(&polished.x, tf)
            {
                return finish_optimal(data, polished, *it);
            }
        }
    }
    // last chance for a certificate: the final iterate, then the deepest
    // observed τ/κ collapse — the ratio bottoms out near machine precision
    // and can drift back up, but the ray it carried still verifies
    if tau < 1e-6 * kappa {
        let final_iter = best.as_ref().map_or(0, |(_, _, i)| *i);
        if let Some(sol) = try_certificates(data, &x, &y, tf, final_iter) {
            return sol;
        }
    }
    if let Some((_, cx, cy, citer)) = &collapse {
        if let Some(sol) = try_certificates(data, cx, cy, tf, *citer) {
            return sol;
        }
    }
    let (_, cand, iter) = best.unwrap_or_else(|| {
        (
            f64::INFINITY,
            data.candidate(&x, &y, &s, tau.max(1e-300)),
            0,
        )
    });
    ConicSolution {
        status: Status::Unknown,
        objective: user_obj(data, cand.pobj),
        psd: cand.x.mats,
        nonneg: cand.x.nn,
        dual: user_duals(data, cand.y),
        certificate: None,
        residuals: Residuals {
            primal: cand.pres,
            dual: cand.dres,
            gap: cand.gap,
        },
        iters: iter + 1,
    }
}

fn user_obj(data: &ProblemData, pobj_min: f64) -> f64 {
    if data.maximize {
        -pobj_min
    } else {
        pobj_min
    }
}

fn user_duals(data: &ProblemData, y: Vec<f64>) -> Vec<f64> {
    if data.maximize {
        y.into_iter().map(|v| -v).collect()
    } else {
        y
    }
}

/// Least-squares projection of a candidate onto `A_o x = b_o` via the plain
/// Gram system, leaving the dual point untouched; recomputes the primal
/// residual, objective, and gap.
fn primal_polish(data: &ProblemData, cand: &mut Candidate) -> bool {
    let scal = Scaling::identity(&data.dims, data.q);
    let Some(kkt) = KktFactor::new(data, &scal) else {
        return false;
    };
    for _ in 0..2 {
        let ax = data.apply_a(&cand.x);
        let rhs = Array1::from_iter((0..data.m()).map(|k| data.b[k] * data.beta_b - ax[k]));
        let w = kkt.solve_vec(&rhs);
        let corr = data.apply_at(&w.to_vec());
        cand.x.axpy(1.0, &corr);
    }
    let (pres, pobj) = data.primal_stats(&cand.x);
    cand.pres = pres;
    cand.pobj = pobj;
    cand.gap = (pobj - cand.dobj).abs() / (1.0 + pobj.abs());
    true
}

fn psd_clean(x: &BlockVec, tol: f64) -> bool {
    x.mats.iter().all(|mat| {
        let d = mat.nrows();
        let mut shifted = mat.clone();
        for i in 0..d {
            shifted[[i, i]] += tol;
        }
        shifted.cholesky(UPLO::Lower).is_ok()
    }) && x.nn.iter().all(|&v| v >= -tol)
}

fn finish_optimal(data: &ProblemData, cand: Candidate, iter: usize) -> ConicSolution {
    ConicSolution {
        status: Status::Optimal,
        objective: user_obj(data, cand.pobj),
        psd: cand.x.mats,
        nonneg: cand.x.nn,
        dual: user_duals(data, cand.y),
        certificate: None,
        residuals: Residuals {
            primal: cand.pres,
            dual: cand.dres,
            gap: cand.gap,
        },
        iters: iter + 1,
    }
}

/// Attempt to turn the current ray into a verified infeasibility certificate.
fn try_certificates(
    data: &ProblemData,
    x: &BlockVec,
    y: &[f64],
    tol: f64,
    iter: usize,
) -> Option<ConicSolution> {
    // primal infeasibility: y with Σ y_k b_k = 1 and Σ y_k a_k ⪯ 0
    let by_s: f64 = data.b.iter().zip(y).map(|(&b, &v)| b * v).sum();
    if by_s > 0.0 {
        let norm = data.beta_b * by_s;
        let y_hat: Vec<f64> = y
            .iter()
            .zip(&data.row_scale)
            .map(|(&v, &rs)| v * rs / norm)
            .collect();
        let y_for_adjoint: Vec<f64> = y.iter().map(|&v| v / norm).collect();
        let z = data.apply_at(&y_for_adjoint);
        let scale = z.norm2().max(1.0);
        let psd_ok = z.mats.iter().all(|m| match m.eigh(UPLO::Lower) {
            Ok((evals, _)) => evals[evals.len() - 1] <= tol * scale,
            Err(_) => false,
        });
        let nn_ok = z.nn.iter().all(|&v| v <= tol * scale);
        if psd_ok && nn_ok {
            let objective = if data.maximize {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            };
            return Some(ConicSolution {
                status: Status::PrimalInfeasible,
                objective,
                psd: data.dims.iter().map(|&d| Array2::zeros((d, d))).collect(),
                nonneg: vec![0.0; data.q],
                dual: vec![0.0; data.m()],
                certificate: Some(y_hat),
                residuals: Residuals::default(),
                iters: iter + 1,
            });
        }
    }
    // dual infeasibility: improving ray x ∈ K with A x = 0, <c, x> = −1
    let cx = data.c.dot(x);
    if cx < 0.0 {
        let norm = -data.beta_c * cx;
        let x_hat = x.scaled(1.0 / norm);
        let ax = data.apply_a(&x_hat);
        let xnorm = x_hat.norm2().max(1.0);
        let ax_ok = ax
            .iter()
            .zip(&data.row_scale)
            .all(|(&v, &rs)| (v / rs.max(1e-300)).abs() <= tol * xnorm);
        if ax_ok && psd_clean(&x_hat, tol * xnorm) {
            let objective = if data.maximize {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            };
            return Some(ConicSolution {
                status: Status::DualInfeasible,
                objective,
                psd: x_hat.mats,
                nonneg: x_hat.nn,
                dual: vec![0.0; data.m()],
                certificate: None,
                residuals: Residuals::default(),
                iters: iter + 1,
            });
        }
    }
    None
}

// ---------------------------------------------------------------------------
// LP convenience path
// ---------------------------------------------------------------------------

/// Encode `min cᵀx  s.t.  A x ≥ b, x ≥ 0` over the nonnegative orthant with
/// one slack per row.
pub fn lp_program(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> ConicProgram {
    assert_eq!(a.len(), b.len(), "row/rhs count mismatch");
    let n = c.len();
    let m = a.len();
    let mut p = ConicProgram::new(Sense::Minimize);
    let x0 = p.add_nonneg_vars(n);
    let s0 = p.add_nonneg_vars(m);
    p.set_objective(
        c.iter()
            .enumerate()
            .map(|(j, &cj)| (VarRef::nonneg(x0 + j), cj))
            .collect(),
    );
    for (k, (row, &rhs)) in a.iter().zip(b).enumerate() {
        assert_eq!(row.len(), n, "row {k} has wrong arity");
        let mut expr: LinExpr = row
            .iter()
            .enumerate()
            .map(|(j, &v)| (VarRef::nonneg(x0 + j), v))
            .collect();
        expr.push(VarRef::nonneg(s0 + k), -1.0);
        p.add_equality(expr, rhs);
    }
    p
}

/// Solve `min cᵀx  s.t.  A x ≥ b, x ≥ 0`, returning the optimal value and
/// optimizer. Errors when the solver does not reach a verified optimum.
pub fn lp_solve(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<(f64, Vec<f64>)> {
    let p = lp_program(c, a, b);
    let sol = solve(&p, &SolveOptions::default());
    match sol.status {
        Status::Optimal => Ok((sol.objective, sol.nonneg[..c.len()].to_vec())),
        other => Err(Error::SolverStatus(other.to_string())),
    }
}

// ---------------------------------------------------------------------------
// SDPA sparse format
// ---------------------------------------------------------------------------

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Render the program in SDPA sparse format (`.dat-s`).
///
/// The file encodes the minimize form (`F_0 = −C`, `F_k = A_k`, `c = b`);
/// maximize programs are exported with the objective negated. Nonnegative
/// scalars become one trailing diagonal block with negative size.
pub fn export_sdpa(p: &ConicProgram) -> String {
    let flip = if p.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let mut out = String::new();
    out.push_str(&format!("{}\n", p.equalities.len()));
    let nblocks = p.psd_blocks.len() + usize::from(p.nonneg_count > 0);
    out.push_str(&format!("{nblocks}\n"));
    let mut sizes: Vec<String> = p.psd_blocks.iter().map(|&(_, d)| d.to_string()).collect();
    if p.nonneg_count > 0 {
        sizes.push(format!("-{}", p.nonneg_count));
    }
    out.push_str(&sizes.join(" "));
    out.push('\n');
    let rhs: Vec<String> = p.equalities.iter().map(|&(_, b)| fmt17(b)).collect();
    out.push_str(&rhs.join(" "));
    out.push('\n');

    let nn_block = p.psd_blocks.len() + 1;
    let write_expr = |out: &mut String, matno: usize, expr: &LinExpr, sign: f64| {
        let mut canon = expr.clone();
        canon.canonicalize();
        for &(v, cf) in canon.terms() {
            let cf = cf * sign;
            match v {
                VarRef::Psd { block, row, col } => {
                    let value = if row == col { cf } else { cf / 2.0 };
                    out.push_str(&format!(
                        "{matno} {} {} {} {}\n",
                        block + 1,
                        row + 1,
                        col + 1,
                        fmt17(value)
                    ));
                }
                VarRef::Nonneg { index } => {
                    out.push_str(&format!(
                        "{matno} {nn_block} {} {} {}\n",
                        index + 1,
                        index + 1,
                        fmt17(cf)
                    ));
                }
            }
        }
    };
    // F_0 = −C
    write_expr(&mut out, 0, &p.objective, -flip);
    for (k, (expr, _)) in p.equalities.iter().enumerate() {
        write_expr(&mut out, k + 1, expr, 1.0);
    }
    out
}

/// Parse SDPA sparse format back into a minimize-form [`ConicProgram`].
pub fn parse_sdpa(text: &str) -> Result<ConicProgram> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('"') && !l.starts_with('*'));
    let mut next_line = |what: &str| -> Result<&str> {
        lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing {what} line")))
    };
    let clean = |l: &str| -> String {
        l.replace(['{', '}', '(', ')', ','], " ")
    };

    let m: usize = clean(next_line("constraint count")?)
        .split_whitespace()
        .next()
        .ok_or_else(|| Error::Parse("empty constraint count line".into()))?
        .parse()
        .map_err(|_| Error::Parse("bad constraint count".into()))?;
    let nblocks: usize = clean(next_line("block count")?)
        .split_whitespace()
        .next()
        .ok_or_else(|| Error::Parse("empty block count line".into()))?
        .parse()
        .map_err(|_| Error::Parse("bad block count".into()))?;
    let sizes: Vec<i64> = clean(next_line("block sizes")?)
        .split_whitespace()
        .map(|t| t.parse::<i64>().or_else(|_| t.parse::<f64>().map(|v| v as i64)))
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parse("bad block size".into()))?;
    if sizes.len() != nblocks {
        return Err(Error::Parse(format!(
            "expected {nblocks} block sizes, found {}",
            sizes.len()
        )));
    }
    let rhs: Vec<f64> = clean(next_line("right-hand side")?)
        .split_whitespace()
        .map(str::parse::<f64>)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parse("bad rhs value".into()))?;
    if rhs.len() != m {
        return Err(Error::Parse(format!(
            "expected {m} rhs values, found {}",
            rhs.len()
        )));
    }

    let mut p = ConicProgram::new(Sense::Minimize);
    // block id -> (is_psd, program block index or nonneg offset)
    let mut block_map: Vec<(bool, usize)> = Vec::with_capacity(nblocks);
    for (idx, &sz) in sizes.iter().enumerate() {
        if sz > 0 {
            let b = p.add_psd_block(format!("blk{}", idx + 1), sz as usize);
            block_map.push((true, b));
        } else if sz < 0 {
            let off = p.add_nonneg_vars((-sz) as usize);
            block_map.push((false, off));
        } else {
            return Err(Error::Parse("zero block size".into()));
        }
    }

    let mut objective = LinExpr::new();
    let mut eq_exprs: Vec<LinExpr> = vec![LinExpr::new(); m];
    for line in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 5 {
            return Err(Error::Parse(format!("bad entry line: {line}")));
        }
        let matno: usize = toks[0]
            .parse()
            .map_err(|_| Error::Parse(format!("bad matno in: {line}")))?;
        let blkno: usize = toks[1]
            .parse()
            .map_err(|_| Error::Parse(format!("bad blkno in: {line}")))?;
        let i: usize = toks[2]
            .parse()
            .map_err(|_| Error::Parse(format!("bad row in: {line}")))?;
        let j: usize = toks[3]
            .parse()
            .map_err(|_| Error::Parse(format!("bad col in: {line}")))?;
        let value: f64 = toks[4]
            .parse()
            .map_err(|_| Error::Parse(format!("bad value in: {line}")))?;
        if matno > m || blkno == 0 || blkno > nblocks || i == 0 || j == 0 || i > j {
            return Err(Error::Parse(format!("entry out of range: {line}")));
        }
        let (is_psd, base) = block_map[blkno - 1];
        let (var, coeff) = if is_psd {
            let coeff = if i == j { value } else { 2.0 * value };
            (VarRef::psd(base, i - 1, j - 1), coeff)
        } else {
            if i != j {
                return Err(Error::Parse(format!(
                    "off-diagonal entry in diagonal block: {line}"
                )));
            }
            (VarRef::nonneg(base + i - 1), value)
        };
        if matno == 0 {
            // F_0 = −C
            objective.push(var, -coeff);
        } else {
            eq_exprs[matno - 1].push(var, coeff);
        }
    }
    p.set_objective(objective);
    for (expr, &b) in eq_exprs.into_iter().zip(&rhs) {
        p.add_equality(expr, b);
    }
    p.validate()?;
    Ok(p)
}

/// Structural equality of two programs: same cones, objective, and
/// equalities after canonicalization, ignoring block names. Maximize
/// programs are compared through their minimize form.
pub fn structural_eq(a: &ConicProgram, b: &ConicProgram) -> bool {
    let canon = |p: &ConicProgram| -> (Vec<usize>, usize, LinExpr, Vec<(LinExpr, f64)>) {
        let flip = if p.sense == Sense::Maximize { -1.0 } else { 1.0 };
        let mut obj: LinExpr = p
            .objective
            .terms()
            .iter()
            .map(|&(v, c)| (v, c * flip))
            .collect();
        obj.canonicalize();
        let eqs: Vec<(LinExpr, f64)> = p
            .equalities
            .iter()
            .map(|(e, r)| {
                let mut e = e.clone();
                e.canonicalize();
                (e, *r)
            })
            .collect();
        (
            p.psd_blocks.iter().map(|&(_, d)| d).collect(),
            p.nonneg_count,
            obj,
            eqs,
        )
    };
    canon(a) == canon(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn solve_default(p: &ConicProgram) -> ConicSolution {
        solve(p, &SolveOptions::default())
    }

    /// min X_11 s.t. X_11 = 1 over a 1x1 PSD block.
    fn trivial_program(rhs: f64) -> ConicProgram {
        let mut p = ConicProgram::new(Sense::Minimize);
        let b = p.add_psd_block("X", 1);
        p.set_objective(LinExpr::term(VarRef::psd(b, 0, 0), 1.0));
        p.add_equality(LinExpr::term(VarRef::psd(b, 0, 0), 1.0), rhs);
        p
    }

    #[test]
    fn trivial_equality_is_optimal_at_one() {
        let sol = solve_default(&trivial_program(1.0));
        assert_eq!(sol.status, Status::Optimal);
        assert_abs_diff_eq!(sol.objective, 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(sol.psd[0][[0, 0]], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.dual[0], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn negative_rhs_is_primal_infeasible_with_farkas_witness() {
        let sol = solve_default(&trivial_program(-1.0));
        assert_eq!(sol.status, Status::PrimalInfeasible);
        let y = sol.certificate.expect("certificate");
        // Σ y_k b_k = 1 and Σ y_k A_k = y·E_11 ⪯ 0
        assert_abs_diff_eq!(y[0] * -1.0, 1.0, epsilon = 1e-6);
        assert!(y[0] < 0.0);
    }

    #[test]
    fn trace_minimization_with_fixed_offdiagonal() {
        // min X_11 + X_22 s.t. X_12 = 1, X ⪰ 0: optimum 2 at X = all-ones
        let mut p = ConicProgram::new(Sense::Minimize);
        let b = p.add_psd_block("X", 2);
        let mut obj = LinExpr::new();
        obj.push(VarRef::psd(b, 0, 0), 1.0);
        obj.push(VarRef::psd(b, 1, 1), 1.0);
        p.set_objective(obj);
        p.add_equality(LinExpr::term(VarRef::psd(b, 0, 1), 1.0), 1.0);
        let sol = solve_default(&p);
        assert_eq!(sol.status, Status::Optimal);
        assert_abs_diff_eq!(sol.objective, 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.psd[0][[0, 1]], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.psd[0][[0, 0]], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn unbounded_program_reports_dual_infeasible() {
        // min −X_11 s.t. X_22 = 1: X_11 can grow without bound
        let mut p = ConicProgram::new(Sense::Minimize);
        let b = p.add_psd_block("X", 2);
        p.set_objective(LinExpr::term(VarRef::psd(b, 0, 0), -1.0));
        p.add_equality(LinExpr::term(VarRef::psd(b, 1, 1), 1.0), 1.0);
        let sol = solve_default(&p);
        assert_eq!(sol.status, Status::DualInfeasible);
        assert_eq!(sol.objective, f64::NEG_INFINITY);
        // the ray increases X_11 while keeping the constraint fixed
        assert!(sol.psd[0][[0, 0]] > 0.5);
        assert!(sol.psd[0][[1, 1]].abs() < 1e-6);
    }

    #[test]
    fn maximize_sense_flips_objective() {
        let mut p = ConicProgram::new(Sense::Maximize);
        let b = p.add_psd_block("X", 1);
        p.set_objective(LinExpr::term(VarRef::psd(b, 0, 0), -1.0));
        p.add_equality(LinExpr::term(VarRef::psd(b, 0, 0), 1.0), 2.0);
        let sol = solve_default(&p);
        assert_eq!(sol.status, Status::Optimal);
        assert_abs_diff_eq!(sol.objective, -2.0, epsilon = 1e-7);
    }

    #[test]
    fn mixed_cone_program() {
        // min X_11 + z s.t. X_11 + z = 1, X_11 − z = 0 → X_11 = z = 1/2
        let mut p = ConicProgram::new(Sense::Minimize);
        let b = p.add_psd_block("X", 1);
        let z = p.add_nonneg_vars(1);
        let x11 = VarRef::psd(b, 0, 0);
        let zv = VarRef::nonneg(z);
        p.set_objective([(x11, 1.0), (zv, 1.0)].into_iter().collect());
        p.add_equality([(x11, 1.0), (zv, 1.0)].into_iter().collect(), 1.0);
        p.add_equality([(x11, 1.0), (zv, -1.0)].into_iter().collect(), 0.0);
        let sol = solve_default(&p);
        assert_eq!(sol.status, Status::Optimal);
        assert_abs_diff_eq!(sol.objective, 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(sol.nonneg[0], 0.5, epsilon = 1e-6);
    }

    #[test]
    fn lp_min_x_subject_to_x_geq_one() {
        let (val, x) = lp_solve(&[1.0], &[vec![1.0]], &[1.0]).unwrap();
        assert_abs_diff_eq!(val, 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn solver_is_deterministic() {
        let p = trivial_program(1.0);
        let a = solve_default(&p);
        let b = solve_default(&p);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.iters, b.iters);
    }

    #[test]
    fn scaling_rows_by_ten_preserves_status_and_value() {
        let base = trivial_program(1.0);
        let mut scaled = ConicProgram::new(Sense::Minimize);
        let b = scaled.add_psd_block("X", 1);
        scaled.set_objective(LinExpr::term(VarRef::psd(b, 0, 0), 1.0));
        scaled.add_equality(LinExpr::term(VarRef::psd(b, 0, 0), 10.0), 10.0);
        let s0 = solve_default(&base);
        let s1 = solve_default(&scaled);
        assert_eq!(s0.status, s1.status);
        assert!((s0.objective - s1.objective).abs() <= 10.0 * 1e-8);

        // same check on an LP with several rows
        let c = vec![1.0, 2.0];
        let a = vec![vec![1.0, 1.0], vec![2.0, -1.0]];
        let bb = vec![1.0, 0.5];
        let a10: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(|v| 10.0 * v).collect()).collect();
        let b10: Vec<f64> = bb.iter().map(|v| 10.0 * v).collect();
        let (v0, _) = lp_solve(&c, &a, &bb).unwrap();
        let (v1, _) = lp_solve(&c, &a10, &b10).unwrap();
        assert!((v0 - v1).abs() <= 10.0 * 1e-8);
    }

    // -- brute-force vertex enumeration oracle for small LPs ----------------

    /// Minimize c·x over {A x ≥ b, x ≥ 0} by enumerating basic points:
    /// every choice of n active constraints from the rows of [A; I].
    fn lp_vertex_oracle(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<f64> {
        let n = c.len();
        let m = a.len();
        let mut stacked: Vec<(Vec<f64>, f64)> = Vec::with_capacity(m + n);
        for (row, &rhs) in a.iter().zip(b) {
            stacked.push((row.clone(), rhs));
        }
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            stacked.push((e, 0.0));
        }
        let total = stacked.len();
        let mut best: Option<f64> = None;
        let mut choice: Vec<usize> = (0..n).collect();
        loop {
            if let Some(x) = solve_square(&stacked, &choice, n) {
                let feas = a
                    .iter()
                    .zip(b)
                    .all(|(row, &rhs)| {
                        row.iter().zip(&x).map(|(r, v)| r * v).sum::<f64>() >= rhs - 1e-9
                    })
                    && x.iter().all(|&v| v >= -1e-9);
                if feas {
                    let val = c.iter().zip(&x).map(|(cv, xv)| cv * xv).sum::<f64>();
                    best = Some(best.map_or(val, |bv: f64| bv.min(val)));
                }
            }
            // next combination
            let mut i = n;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if choice[i] != i + total - n {
                    choice[i] += 1;
                    for k in (i + 1)..n {
                        choice[k] = choice[k - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    /// Solve the n×n system formed by the chosen constraint rows.
    fn solve_square(stacked: &[(Vec<f64>, f64)], choice: &[usize], n: usize) -> Option<Vec<f64>> {
        let mut m: Vec<Vec<f64>> = choice
            .iter()
            .map(|&k| {
                let mut r = stacked[k].0.clone();
                r.push(stacked[k].1);
                r
            })
            .collect();
        for col in 0..n {
            let piv = (col..n).max_by(|&r1, &r2| {
                m[r1][col].abs().partial_cmp(&m[r2][col].abs()).unwrap()
            })?;
            if m[piv][col].abs() < 1e-12 {
                return None;
            }
            m.swap(col, piv);
            for r in 0..n {
                if r != col {
                    let f = m[r][col] / m[col][col];
                    for cc in col..=n {
                        m[r][cc] -= f * m[col][cc];
                    }
                }
            }
        }
        Some((0..n).map(|r| m[r][n] / m[r][r]).collect())
    }

    #[test]
    fn random_lps_match_vertex_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed_1f);
        for case in 0..30 {
            let n = rng.gen_range(2..=4);
            let m = rng.gen_range(2..=5);
            // feasible by construction: b = A x0 − slack with x0 ≥ 0,
            // bounded since c > 0 and x ≥ 0
            let a: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| rng.gen_range(-1.0..2.0)).collect())
                .collect();
            let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
            let b: Vec<f64> = a
                .iter()
                .map(|row| {
                    row.iter().zip(&x0).map(|(r, v)| r * v).sum::<f64>()
                        - rng.gen_range(0.0..1.0)
                })
                .collect();
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
            let oracle = lp_vertex_oracle(&c, &a, &b).expect("oracle found a vertex");
            let (val, x) = lp_solve(&c, &a, &b)
                .unwrap_or_else(|e| panic!("case {case}: solver failed: {e}"));
            assert!(
                (val - oracle).abs() <= 1e-7 * (1.0 + oracle.abs()),
                "case {case}: solver {val} vs oracle {oracle}"
            );
            for (row, &rhs) in a.iter().zip(&b) {
                let lhs: f64 = row.iter().zip(&x).map(|(r, v)| r * v).sum();
                assert!(lhs >= rhs - 1e-6, "case {case}: infeasible output");
            }
        }
    }

    // -- SDPA interop --------------------------------------------------------

    #[test]
    fn sdpa_export_of_trivial_program() {
        let text = export_sdpa(&trivial_program(1.0));
        let expected = "1\n1\n1\n1.0000000000000000e0\n\
                        0 1 1 1 -1.0000000000000000e0\n\
                        1 1 1 1 1.0000000000000000e0\n";
        assert_eq!(text, expected);
    }

    #[test]
    fn sdpa_round_trip_rebuilds_programs() {
        let mut mixed = ConicProgram::new(Sense::Minimize);
        let b0 = mixed.add_psd_block("A", 2);
        let b1 = mixed.add_psd_block("B", 3);
        let z = mixed.add_nonneg_vars(2);
        let mut obj = LinExpr::new();
        obj.push(VarRef::psd(b0, 0, 1), 3.5);
        obj.push(VarRef::psd(b1, 2, 2), -1.25);
        obj.push(VarRef::nonneg(z + 1), 0.75);
        mixed.set_objective(obj);
        let mut eq = LinExpr::new();
        eq.push(VarRef::psd(b0, 0, 0), 1.0);
        eq.push(VarRef::psd(b1, 0, 2), -2.0);
        eq.push(VarRef::nonneg(z), 4.0);
        mixed.add_equality(eq, 0.125);
        mixed.add_equality(LinExpr::term(VarRef::psd(b1, 1, 1), 1.0), -3.0);

        for p in [trivial_program(1.0), mixed] {
            let text = export_sdpa(&p);
            let back = parse_sdpa(&text).unwrap();
            assert!(structural_eq(&p, &back), "round trip changed program");
        }
    }

    #[test]
    fn sdpa_export_negates_maximize_objective() {
        let mut p = ConicProgram::new(Sense::Maximize);
        let b = p.add_psd_block("X", 1);
        p.set_objective(LinExpr::term(VarRef::psd(b, 0, 0), 1.0));
        p.add_equality(LinExpr::term(VarRef::psd(b, 0, 0), 1.0), 1.0);
        let back = parse_sdpa(&export_sdpa(&p)).unwrap();
        assert_eq!(back.sense(), Sense::Minimize);
        assert!(structural_eq(&p, &back));
    }

    #[test]
    fn parse_rejects_malformed_input() {
        assert!(parse_sdpa("").is_err());
        assert!(parse_sdpa("1\n1\n1\n1.0\n0 1 2 1 5.0\n").is_err()); // i > j
        assert!(parse_sdpa("1\n1\n1\n1.0 2.0\n").is_err()); // rhs arity mismatch
        assert!(parse_sdpa("1\n1\n1\n1.0\n1 2 1 1 5.0\n").is_err()); // no block 2
    }

    #[test]
    fn validate_catches_bad_references() {
        let mut p = ConicProgram::new(Sense::Minimize);
        p.add_psd_block("X", 2);
        p.set_objective(LinExpr::term(VarRef::psd(0, 0, 1), 1.0));
        p.add_equality(LinExpr::term(VarRef::psd(1, 0, 0), 1.0), 0.0);
        assert!(p.validate().is_err());

        let mut q = ConicProgram::new(Sense::Minimize);
        q.add_nonneg_vars(1);
        q.set_objective(LinExpr::term(VarRef::nonneg(3), 1.0));
        assert!(q.validate().is_err());
    }
}

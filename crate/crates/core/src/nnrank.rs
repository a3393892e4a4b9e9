//! Lower bounds on the nonnegative rank of a matrix.
//!
//! The nonnegative rank of `M ∈ ℝ₊^{m×n}` is the smallest `r` with
//! `M = Σ_{ℓ≤r} a_ℓ b_ℓᵀ`, `a_ℓ ∈ ℝ₊^m`, `b_ℓ ∈ ℝ₊^n`.  Each factorization
//! is an atomic measure on
//!
//! ```text
//! K^M = { (x, y) ≥ 0 : √(M_max)·z − z² ≥ 0 for every coordinate z,
//!         M_ij − x_i y_j ≥ 0 on the support,  x_i y_j = 0 on zero entries }
//! ```
//!
//! (after normalizing each factor pair) whose mass is the number of factors
//! and whose cross moments reproduce `M`.  Minimizing the mass `L(1)` over
//! level-`t` pseudo-moments on `K^M` lower-bounds the nonnegative rank.  The
//! row and column variables share one index space of size `m + n`, column
//! `j` living at index `m + j`; the bound comes dense or ideal-sparse over
//! the maximal bicliques of the bipartite support graph.

use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::conic::SolveOptions;
use crate::cprank::{BoundResult, Strength};
use crate::graph::{self, BipartiteGraph, CliqueList, Graph};
use crate::momrelax::{self, MatrixScope};
use crate::polybasis::{Exponent, Polynomial};
use crate::{Error, GmpSpec, Result};

/// Nonnegative matrix with a positive maximum entry, carrying its bipartite
/// support graph and that graph's maximal bicliques.
#[derive(Clone, Debug)]
pub struct NnInstance {
    pub mat: Array2<f64>,
    /// number of rows (left vertices `0..m`)
    pub m: usize,
    /// number of columns (right vertices `m..m+n`)
    pub n: usize,
    /// largest entry of `mat`
    pub m_max: f64,
    pub bigraph: BipartiteGraph,
    pub bicliques: CliqueList,
}

impl NnInstance {
    /// Validates nonnegativity and a positive maximum entry, then precomputes
    /// the bipartite support graph and its maximal bicliques.
    pub fn new(mat: Array2<f64>) -> Result<Self> {
        let (m, n) = mat.dim();
        if m == 0 || n == 0 {
            return Err(Error::InvalidProgram(
                "nonnegative-rank instance needs at least one row and one column".into(),
            ));
        }
        if let Some(v) = mat.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::InvalidProgram(format!(
                "nonnegative-rank instance needs nonnegative entries, found {v}"
            )));
        }
        let m_max = mat.iter().fold(0.0f64, |acc, &v| acc.max(v));
        if m_max <= 0.0 {
            return Err(Error::InvalidProgram(
                "all-zero matrix: the nonnegative rank is 0 and no bound is defined".into(),
            ));
        }
        let mut bigraph = BipartiteGraph::new(m, n);
        for i in 0..m {
            for j in 0..n {
                if mat[[i, j]] != 0.0 {
                    bigraph.add_edge(i, j);
                }
            }
        }
        let bicliques = graph::maximal_bicliques(&bigraph);
        Ok(NnInstance {
            mat,
            m,
            n,
            m_max,
            bigraph,
            bicliques,
        })
    }

    /// The instance of the transposed matrix (row and column roles swapped).
    pub fn transpose(&self) -> NnInstance {
        NnInstance::new(self.mat.t().to_owned())
            .expect("transpose of a valid instance is a valid instance")
    }

    /// Total number of relaxation variables, `m + n`.
    pub fn num_vars(&self) -> usize {
        self.m + self.n
    }
}

/// Relaxation flavor: one shared pseudo-moment vector (`Dense`) or one per
/// maximal biclique (`Isp`).  There is no weak variant: the program has no
/// matrix localizer to weaken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NnMode {
    Dense,
    Isp,
}

impl std::fmt::Display for NnMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NnMode::Dense => "dense",
            NnMode::Isp => "isp",
        })
    }
}

impl std::str::FromStr for NnMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(NnMode::Dense),
            "isp" => Ok(NnMode::Isp),
            other => Err(Error::Parse(format!(
                "unknown mode `{other}` (expected dense or isp)"
            ))),
        }
    }
}

/// One bound computation: relaxation level `t ≥ 1`, flavor, and strength.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NnBoundRequest {
    pub t: usize,
    pub mode: NnMode,
    pub strength: Strength,
}

/// `√(M_max)·x_i − x_i²` over `nvars` variables.
fn box_generator(m_max: f64, i: usize, nvars: usize) -> Polynomial {
    let xi = Exponent::var(i, nvars);
    let mut p = Polynomial::monomial(xi.clone(), m_max.sqrt());
    p.add_term(xi.product(&xi), -1.0);
    p
}

/// `M_ij − x_i x_j` over `nvars` variables (combined numbering).
fn entry_cap_generator(entry: f64, i: usize, j: usize, nvars: usize) -> Polynomial {
    let mut p = Polynomial::constant(entry, nvars);
    p.add_term(
        Exponent::var(i, nvars).product(&Exponent::var(j, nvars)),
        -1.0,
    );
    p
}

/// The generalized moment problem whose optimal mass is the nonnegative-rank
/// convexification: objective `L(1)`, cross-moment equalities
/// `L(x_i x_{m+j}) = M_ij` for every row `i` and column `j`, box generators
/// `√(M_max)·x_v − x_v²` for all `m + n` variables, entry caps
/// `M_ij − x_i x_{m+j}` on the support, and the zero-pattern ideal, plus the
/// requested strengthening families.  Within-side products carry no
/// equality: only cross moments are pinned to the matrix.
pub fn nn_spec(inst: &NnInstance, strength: Strength) -> GmpSpec {
    let nv = inst.num_vars();
    let mut spec = GmpSpec::new(nv);
    spec.objective = Polynomial::constant(1.0, nv);
    for i in 0..inst.m {
        for j in 0..inst.n {
            let e = Exponent::var(i, nv).product(&Exponent::var(inst.m + j, nv));
            spec.equalities
                .push((Polynomial::monomial(e, 1.0), inst.mat[[i, j]]));
        }
    }
    let box_gens: Vec<Polynomial> = (0..nv).map(|v| box_generator(inst.m_max, v, nv)).collect();
    let edge_gens: Vec<Polynomial> = inst
        .bigraph
        .edges()
        .map(|(i, j)| entry_cap_generator(inst.mat[[i, j - inst.m]], i, j, nv))
        .collect();
    spec.ineq_gens.extend(box_gens.iter().cloned());
    spec.ineq_gens.extend(edge_gens.iter().cloned());
    spec.nonedges = inst.bigraph.nonedges().into_iter().collect();
    match strength {
        Strength::Plain => {}
        Strength::Dagger => {
            spec.sign_families.extend(edge_gens);
        }
        Strength::Ddagger => {
            spec.sign_families.push(Polynomial::constant(1.0, nv));
            spec.sign_families.extend(box_gens);
            spec.sign_families.extend(edge_gens);
        }
    }
    spec
}

/// Computes the requested nonnegative-rank bound.  An `Optimal` value
/// lower-bounds the nonnegative rank.
///
/// Solver-accuracy policy matches [`crate::cprank::cp_bound`]: one solver
/// call per request, large programs at a 1e-6 floor, and verified
/// reduced-accuracy acceptance of stalled iterates.
pub fn nn_bound(inst: &NnInstance, req: &NnBoundRequest) -> Result<BoundResult> {
    nn_bound_opts(inst, req, &SolveOptions::from_env())
}

/// [`nn_bound`] with explicit solver options.
pub fn nn_bound_opts(
    inst: &NnInstance,
    req: &NnBoundRequest,
    opts: &SolveOptions,
) -> Result<BoundResult> {
    let spec = nn_spec(inst, req.strength);
    let start = Instant::now();
    let (prog, layout) = match req.mode {
        NnMode::Dense => momrelax::build_dense(&spec, req.t)?,
        NnMode::Isp => {
            momrelax::build_isp(&spec, req.t, &inst.bicliques, MatrixScope::ZeroOutside)?
        }
    };
    let sol = crate::cprank::solve_relaxation(&prog, opts);
    Ok(BoundResult::from_solution(
        &prog,
        &layout,
        sol,
        start.elapsed().as_secs_f64(),
    ))
}

/// Combinatorial companions of the moment bounds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NnCombinatorial {
    /// numeric rank of `M` at relative tolerance `1e-8`
    pub rank: usize,
    /// greedy biclique-cover size of the bipartite support graph
    pub bc_greedy: usize,
    /// fractional biclique-cover number of the bipartite support graph
    pub bc_frac: f64,
    /// `⌈n/2⌉ + 2` for square zero-diagonal matrices with full off-diagonal
    /// support (the distance-matrix pattern); absent otherwise
    pub upper_edm_style: Option<usize>,
}

/// Rank and biclique-cover statistics of the bipartite support graph.
pub fn nn_combinatorial(inst: &NnInstance) -> Result<NnCombinatorial> {
    let rank = crate::certify::numeric_rank(&inst.mat, 1e-8);
    let edges: Vec<(usize, usize)> = inst.bigraph.edges().collect();
    let combined = Graph::with_edges(inst.num_vars(), edges.iter().copied());
    let bc_greedy = graph::greedy_edge_clique_cover(&combined, &inst.bicliques).len();
    let (bc_frac, _) = graph::frac_cover(&inst.bicliques, &edges)?;
    Ok(NnCombinatorial {
        rank,
        bc_greedy,
        bc_frac,
        upper_edm_style: edm_style_upper(inst),
    })
}

fn edm_style_upper(inst: &NnInstance) -> Option<usize> {
    if inst.m != inst.n {
        return None;
    }
    for i in 0..inst.n {
        for j in 0..inst.n {
            if (inst.mat[[i, j]] == 0.0) != (i == j) {
                return None;
            }
        }
    }
    Some(inst.n.div_ceil(2) + 2)
}

/// The 4×4 nested-rectangles matrix
///
/// ```text
/// ⎛ 1−a  1+a  1−b  1+b ⎞
/// ⎜ 1+a  1−a  1−b  1+b ⎟
/// ⎜ 1+a  1−a  1+b  1−b ⎟
/// ⎝ 1−a  1+a  1+b  1−b ⎠
/// ```
///
/// for `a, b ∈ [0, 1]`.
pub fn nested_rectangles(a: f64, b: f64) -> Result<NnInstance> {
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
        return Err(Error::Parse(format!(
            "S(a,b) needs a, b in [0, 1], got a = {a}, b = {b}"
        )));
    }
    let mat = ndarray::arr2(&[
        [1.0 - a, 1.0 + a, 1.0 - b, 1.0 + b],
        [1.0 + a, 1.0 - a, 1.0 - b, 1.0 + b],
        [1.0 + a, 1.0 - a, 1.0 + b, 1.0 - b],
        [1.0 - a, 1.0 + a, 1.0 + b, 1.0 - b],
    ]);
    NnInstance::new(mat)
}

/// The squared-distance matrix `M_n = ((i − j)²)_{i,j=1..n}` for `n ≥ 2`;
/// rank 3 for `n ≥ 3`, crown-graph support.
pub fn edm(n: usize) -> Result<NnInstance> {
    if n < 2 {
        return Err(Error::Parse(format!("edm(n) needs n >= 2, got {n}")));
    }
    let mat = Array2::from_shape_fn((n, n), |(i, j)| {
        let d = i as f64 - j as f64;
        d * d
    });
    NnInstance::new(mat)
}

/// The identity matrix `I_n` as a nonnegative-rank instance, `n ≥ 1`.
pub fn identity(n: usize) -> Result<NnInstance> {
    if n < 1 {
        return Err(Error::Parse("identity(n) needs n >= 1".into()));
    }
    NnInstance::new(Array2::eye(n))
}

/// Named parametric instances: `S` (nested rectangles, params `a, b`),
/// `edm` (squared distances, param `n`), and `identity` (param `n`).
pub fn builtin_nn(name: &str, params: &[f64]) -> Result<NnInstance> {
    let int_param = |params: &[f64], what: &str| -> Result<usize> {
        if params.len() != 1 || params[0].fract() != 0.0 || params[0] < 0.0 {
            return Err(Error::Parse(format!(
                "{what} takes one nonnegative integer parameter, got {params:?}"
            )));
        }
        Ok(params[0] as usize)
    };
    match name {
        "S" | "s" => {
            if params.len() != 2 {
                return Err(Error::Parse(format!(
                    "S(a,b) takes two parameters, got {params:?}"
                )));
            }
            nested_rectangles(params[0], params[1])
        }
        "edm" => edm(int_param(params, "edm(n)")?),
        "identity" => identity(int_param(params, "identity(n)")?),
        other => Err(Error::UnknownBuiltin(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::Status;

    fn bound(inst: &NnInstance, t: usize, mode: NnMode, strength: Strength) -> BoundResult {
        nn_bound(inst, &NnBoundRequest { t, mode, strength }).unwrap()
    }

    fn value(inst: &NnInstance, t: usize, mode: NnMode, strength: Strength) -> f64 {
        let r = bound(inst, t, mode, strength);
        assert_eq!(r.status, Status::Optimal, "unexpected status {}", r.status);
        r.value.unwrap()
    }

    #[test]
    fn instance_validation() {
        assert!(matches!(
            NnInstance::new(Array2::zeros((2, 3))),
            Err(Error::InvalidProgram(_))
        ));
        assert!(matches!(
            NnInstance::new(ndarray::arr2(&[[1.0, -2.0]])),
            Err(Error::InvalidProgram(_))
        ));
        assert!(matches!(
            NnInstance::new(Array2::zeros((0, 3))),
            Err(Error::InvalidProgram(_))
        ));
    }

    #[test]
    fn one_entry_spec_shape() {
        let inst = NnInstance::new(ndarray::arr2(&[[1.0]])).unwrap();
        let spec = nn_spec(&inst, Strength::Plain);
        assert_eq!(spec.n, 2);
        assert_eq!(spec.equalities.len(), 1);
        assert_eq!(spec.equalities[0].1, 1.0);
        assert_eq!(spec.ineq_gens.len(), 3); // two box generators + one entry cap
        assert!(spec.nonedges.is_empty());
        assert!(spec.matrix_localizers.is_empty());
    }

    #[test]
    fn identity_support_counts() {
        let inst = identity(4).unwrap();
        assert_eq!(inst.bigraph.edge_count(), 4);
        assert_eq!(inst.bigraph.nonedges().len(), 12);
        assert_eq!(inst.bicliques.len(), 4);
    }

    #[test]
    fn nested_rectangles_at_the_corner_has_eight_edges() {
        // Each column of S(1,1) carries two zeros, so the support has
        // 16 − 8 = 8 edges and 8 nonedges.
        let inst = nested_rectangles(1.0, 1.0).unwrap();
        assert_eq!(inst.bigraph.edge_count(), 8);
        assert_eq!(inst.bigraph.nonedges().len(), 8);
        let row0: Vec<f64> = (0..4).map(|j| inst.mat[[0, j]]).collect();
        assert_eq!(row0, [0.0, 2.0, 0.0, 2.0]);
    }

    #[test]
    fn builtin_matrices_match_their_definitions() {
        let s00 = nested_rectangles(0.0, 0.0).unwrap();
        assert!(s00.mat.iter().all(|&v| v == 1.0));
        let e3 = edm(3).unwrap();
        assert_eq!(
            e3.mat,
            ndarray::arr2(&[[0.0, 1.0, 4.0], [1.0, 0.0, 1.0], [4.0, 1.0, 0.0]])
        );
        assert_eq!(identity(5).unwrap().mat, Array2::eye(5));
        assert!(matches!(
            nested_rectangles(1.5, 0.0),
            Err(Error::Parse(_))
        ));
        assert!(matches!(edm(1), Err(Error::Parse(_))));
        assert!(matches!(
            builtin_nn("edm", &[2.5]),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            builtin_nn("nosuch", &[]),
            Err(Error::UnknownBuiltin(_))
        ));
    }

    #[test]
    fn crown_graphs_have_all_proper_row_subsets_as_bicliques() {
        for n in [4, 5] {
            let inst = edm(n).unwrap();
            assert_eq!(inst.bicliques.len(), (1 << n) - 2);
        }
    }

    #[test]
    fn identity_separates_ideal_sparse_from_dense() {
        let inst = identity(6).unwrap();
        let isp = value(&inst, 1, NnMode::Isp, Strength::Plain);
        assert!((isp - 6.0).abs() <= 1e-3, "got {isp}");
        let dense = value(&inst, 1, NnMode::Dense, Strength::Plain);
        assert!(
            dense <= 8.0 * 4.0 / 6.0 + 1e-4,
            "dense bound {dense} exceeds the feasible-point witness"
        );
    }

    #[test]
    fn distance_matrix_level_one_table_values() {
        let e4 = edm(4).unwrap();
        let dense = value(&e4, 1, NnMode::Dense, Strength::Dagger);
        assert!((dense - 2.0).abs() <= 0.02, "got {dense}");
        let e5 = edm(5).unwrap();
        let isp = value(&e5, 1, NnMode::Isp, Strength::Dagger);
        assert!((isp - 3.35).abs() <= 0.02, "got {isp}");
    }

    #[test]
    fn bounds_are_invariant_under_transposition() {
        let inst = NnInstance::new(ndarray::arr2(&[
            [1.0, 0.0, 2.0, 0.5],
            [0.0, 3.0, 1.0, 0.0],
            [2.0, 1.0, 0.0, 1.0],
        ]))
        .unwrap();
        let t = inst.transpose();
        for mode in [NnMode::Dense, NnMode::Isp] {
            let v = value(&inst, 1, mode, Strength::Plain);
            let vt = value(&t, 1, mode, Strength::Plain);
            assert!((v - vt).abs() <= 1e-6, "{mode}: {v} vs transposed {vt}");
        }
    }

    #[test]
    fn ideal_sparse_dominates_the_fractional_biclique_cover() {
        for inst in [edm(4).unwrap(), identity(4).unwrap(), nested_rectangles(1.0, 1.0).unwrap()] {
            let comb = nn_combinatorial(&inst).unwrap();
            let v = value(&inst, 1, NnMode::Isp, Strength::Plain);
            assert!(
                v >= comb.bc_frac - 1e-6,
                "isp {v} below fractional cover {}",
                comb.bc_frac
            );
        }
    }

    #[test]
    fn dense_is_dominated_by_ideal_sparse() {
        for inst in [edm(4).unwrap(), nested_rectangles(1.0, 1.0).unwrap()] {
            let dense = value(&inst, 1, NnMode::Dense, Strength::Plain);
            let isp = value(&inst, 1, NnMode::Isp, Strength::Plain);
            assert!(dense <= isp + 1e-6, "dense {dense} > isp {isp}");
        }
    }

    #[test]
    fn strengthenings_are_monotone() {
        let inst = nested_rectangles(0.5, 1.0).unwrap();
        let plain = value(&inst, 1, NnMode::Isp, Strength::Plain);
        let dagger = value(&inst, 1, NnMode::Isp, Strength::Dagger);
        let ddagger = value(&inst, 1, NnMode::Isp, Strength::Ddagger);
        assert!(plain <= dagger + 1e-6, "{plain} > {dagger}");
        assert!(dagger <= ddagger + 1e-6, "{dagger} > {ddagger}");
    }

    #[test]
    fn combinatorial_companions() {
        let id5 = identity(5).unwrap();
        let c = nn_combinatorial(&id5).unwrap();
        assert_eq!((c.rank, c.bc_greedy), (5, 5));
        assert!((c.bc_frac - 5.0).abs() <= 1e-6);
        assert_eq!(c.upper_edm_style, None);

        let e4 = nn_combinatorial(&edm(4).unwrap()).unwrap();
        assert_eq!(e4.rank, 3);
        assert_eq!(e4.upper_edm_style, Some(4));
        assert!(e4.bc_greedy as f64 >= e4.bc_frac - 1e-6);

        let ones = NnInstance::new(Array2::ones((2, 3))).unwrap();
        let c1 = nn_combinatorial(&ones).unwrap();
        assert_eq!(c1.bc_greedy, 1);
        assert!((c1.bc_frac - 1.0).abs() <= 1e-6);
    }
}

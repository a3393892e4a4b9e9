//! Lower bounds on the cp-rank of a completely positive matrix.
//!
//! A symmetric matrix `A` is completely positive (cp) when it factors as
//! `A = Σ_ℓ a_ℓ a_ℓᵀ` with entrywise-nonnegative vectors `a_ℓ`; the smallest
//! number of factors is its cp-rank.  Every such factorization is an atomic
//! measure on
//!
//! ```text
//! K_A = { x ≥ 0 : √(A_ii)·x_i − x_i² ≥ 0,  A_ij − x_i x_j ≥ 0 on edges,
//!         x_i x_j = 0 on nonedges of the support graph }
//! ```
//!
//! whose total mass is the number of factors and whose second moments
//! reproduce `A`.  Minimizing the mass `L(1)` over level-`t` pseudo-moments
//! on `K_A` therefore lower-bounds the cp-rank, and infeasibility of the
//! relaxation certifies that `A` is not cp.  The bound comes in a dense
//! flavor, an ideal-sparse flavor (one pseudo-moment vector per maximal
//! clique of the support graph), and a weak ideal-sparse flavor whose matrix
//! localizer uses principal submatrices `A[V_k] − x(V_k)x(V_k)ᵀ` instead of
//! zero-substitution.

use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::conic::{self, ConicProgram, ConicSolution, SolveOptions, Status};
use crate::graph::{self, CliqueList, Graph};
use crate::momrelax::{self, MatrixScope, PseudoMoment, RelaxationLayout};
use crate::polybasis::{Exponent, PolyMatrix, Polynomial};
use crate::{Error, GmpSpec, Result};

/// Symmetric nonnegative matrix with positive diagonal, carrying its support
/// graph and that graph's maximal cliques.
#[derive(Clone, Debug)]
pub struct CpInstance {
    pub a: Array2<f64>,
    pub n: usize,
    pub graph: Graph,
    pub cliques: CliqueList,
}

impl CpInstance {
    /// Validates squareness, symmetry (relative `1e-12`), entrywise
    /// nonnegativity, and a strictly positive diagonal, then precomputes the
    /// support graph and its maximal cliques.
    pub fn new(a: Array2<f64>) -> Result<Self> {
        let graph = graph::support_graph(&a, 0.0)?;
        let n = a.nrows();
        for i in 0..n {
            if !(a[[i, i]] > 0.0) {
                return Err(Error::InvalidProgram(format!(
                    "cp instance needs a positive diagonal, but A[{i}][{i}] = {}",
                    a[[i, i]]
                )));
            }
        }
        if let Some(v) = a.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::InvalidProgram(format!(
                "cp instance needs nonnegative entries, found {v}"
            )));
        }
        let cliques = graph::maximal_cliques(&graph);
        Ok(CpInstance {
            a,
            n,
            graph,
            cliques,
        })
    }
}

/// Optional strengthenings of the level-`t` program: `Dagger` adds the sign
/// families `L((A_ij − x_i x_j)·x^γ) ≥ 0` on edges; `Ddagger` additionally
/// adds `L(x^γ) ≥ 0`, the diagonal families `L((√(A_ii)x_i − x_i²)·x^γ) ≥ 0`,
/// and the edge moment-matrix conditions `L(x_i x_j·[x]_{t−1}[x]_{t−1}ᵀ) ⪰ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strength {
    Plain,
    Dagger,
    Ddagger,
}

impl std::fmt::Display for Strength {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strength::Plain => "plain",
            Strength::Dagger => "dagger",
            Strength::Ddagger => "ddagger",
        })
    }
}

impl std::str::FromStr for Strength {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Strength::Plain),
            "dagger" => Ok(Strength::Dagger),
            "ddagger" => Ok(Strength::Ddagger),
            other => Err(Error::Parse(format!(
                "unknown strength `{other}` (expected plain, dagger, or ddagger)"
            ))),
        }
    }
}

/// Relaxation flavor: one shared pseudo-moment vector (`Dense`), one per
/// maximal clique (`Isp`), or per-clique with principal-submatrix matrix
/// localizers (`Wisp`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CpMode {
    Dense,
    Isp,
    Wisp,
}

impl std::fmt::Display for CpMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CpMode::Dense => "dense",
            CpMode::Isp => "isp",
            CpMode::Wisp => "wisp",
        })
    }
}

impl std::str::FromStr for CpMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(CpMode::Dense),
            "isp" => Ok(CpMode::Isp),
            "wisp" => Ok(CpMode::Wisp),
            other => Err(Error::Parse(format!(
                "unknown mode `{other}` (expected dense, isp, or wisp)"
            ))),
        }
    }
}

/// One bound computation: relaxation level `t ≥ 1`, flavor, and strength.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CpBoundRequest {
    pub t: usize,
    pub mode: CpMode,
    pub strength: Strength,
}

/// Sizes of the assembled conic program.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProgramStats {
    pub psd_block_dims: Vec<usize>,
    pub num_equalities: usize,
    pub nonneg_vars: usize,
}

impl ProgramStats {
    pub fn of(prog: &ConicProgram) -> Self {
        ProgramStats {
            psd_block_dims: prog.psd_blocks().iter().map(|&(_, d)| d).collect(),
            num_equalities: prog.num_equalities(),
            nonneg_vars: prog.nonneg_count(),
        }
    }
}

/// Outcome of a bound computation.  `value` is present exactly when the
/// solver proved optimality; `PrimalInfeasible` certifies the matrix is not
/// cp (respectively admits no nonnegative factorization at this level), and
/// `Unknown` draws no conclusion.
#[derive(Clone, Debug)]
pub struct BoundResult {
    pub status: Status,
    pub value: Option<f64>,
    pub pseudo_moments: Vec<PseudoMoment>,
    /// seconds spent assembling and solving
    pub wall_time: f64,
    pub program_stats: ProgramStats,
}

impl BoundResult {
    pub(crate) fn from_solution(
        prog: &ConicProgram,
        layout: &RelaxationLayout,
        sol: ConicSolution,
        wall_time: f64,
    ) -> Self {
        let program_stats = ProgramStats::of(prog);
        let (value, pseudo_moments) = if sol.status == Status::Optimal {
            (Some(sol.objective), layout.pseudo_moments(&sol))
        } else {
            (None, Vec::new())
        };
        BoundResult {
            status: sol.status,
            value,
            pseudo_moments,
            wall_time,
            program_stats,
        }
    }

    /// The proved optimal value, or an error carrying the solver status.
    pub fn optimal_value(&self) -> Result<f64> {
        self.value
            .ok_or_else(|| Error::SolverStatus(self.status.to_string()))
    }
}

/// `√c·x_i − x_i²` over `nvars` variables.
fn box_generator(c: f64, i: usize, nvars: usize) -> Polynomial {
    let xi = Exponent::var(i, nvars);
    let mut p = Polynomial::monomial(xi.clone(), c.sqrt());
    p.add_term(xi.product(&xi), -1.0);
    p
}

/// `bound − x_i x_j` over `nvars` variables.
fn product_cap_generator(bound: f64, i: usize, j: usize, nvars: usize) -> Polynomial {
    let mut p = Polynomial::constant(bound, nvars);
    p.add_term(
        Exponent::var(i, nvars).product(&Exponent::var(j, nvars)),
        -1.0,
    );
    p
}

/// The entrywise polynomial matrix `A − x·xᵀ`.
fn shifted_outer_matrix(a: &Array2<f64>) -> PolyMatrix {
    let n = a.nrows();
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            entries.push(product_cap_generator(a[[i, j]], i, j, n));
        }
    }
    PolyMatrix::new(n, entries)
}

/// The generalized moment problem whose optimal mass is the cp-rank
/// convexification: objective `L(1)`, second-moment equalities
/// `L(x_i x_j) = A_ij` for all `i ≤ j`, generators `√(A_ii)·x_i − x_i²` and
/// `A_ij − x_i x_j` on edges, the nonedge ideal, and the matrix localizer
/// `A − x·xᵀ`, plus the requested strengthening families.
pub fn cp_spec(inst: &CpInstance, strength: Strength) -> GmpSpec {
    let n = inst.n;
    let a = &inst.a;
    let mut spec = GmpSpec::new(n);
    spec.objective = Polynomial::constant(1.0, n);
    for i in 0..n {
        for j in i..n {
            let m = Exponent::var(i, n).product(&Exponent::var(j, n));
            spec.equalities
                .push((Polynomial::monomial(m, 1.0), a[[i, j]]));
        }
    }
    let diag_gens: Vec<Polynomial> = (0..n).map(|i| box_generator(a[[i, i]], i, n)).collect();
    let edge_gens: Vec<Polynomial> = inst
        .graph
        .edges()
        .map(|(i, j)| product_cap_generator(a[[i, j]], i, j, n))
        .collect();
    spec.ineq_gens.extend(diag_gens.iter().cloned());
    spec.ineq_gens.extend(edge_gens.iter().cloned());
    spec.nonedges = inst.graph.nonedges().into_iter().collect();
    spec.matrix_localizers.push(shifted_outer_matrix(a));
    match strength {
        Strength::Plain => {}
        Strength::Dagger => {
            spec.sign_families.extend(edge_gens);
        }
        Strength::Ddagger => {
            spec.sign_families.push(Polynomial::constant(1.0, n));
            spec.sign_families.extend(diag_gens);
            spec.sign_families.extend(edge_gens);
            for (i, j) in inst.graph.edges() {
                let m = Exponent::var(i, n).product(&Exponent::var(j, n));
                spec.monomial_psd_localizers
                    .push(Polynomial::monomial(m, 1.0));
            }
        }
    }
    spec
}

/// Equality-row count beyond which a relaxation is solved at reduced
/// accuracy from the start: the interior-point method factors one dense
/// m×m system per iteration, and on systems this large the accumulated
/// rounding floor sits above 1e-8, so demanding more only burns time.
const LARGE_PROGRAM_EQS: usize = 2000;

/// Accuracy floor for large programs and for accepting a stalled-but-verified
/// iterate (see [`conic::accept_at`]).
const REDUCED_TOL: f64 = 1e-6;

/// Single solver call for a moment relaxation.  Programs with more than
/// [`LARGE_PROGRAM_EQS`] equality rows run with tolerances floored at
/// [`REDUCED_TOL`]; afterwards, an `Unknown` whose best iterate verifies at
/// that floor is reclassified `Optimal` there.  Values so accepted carry
/// residuals no worse than `REDUCED_TOL`, which every downstream consumer
/// (tables, flatness, extraction) tolerates by a wide margin.
pub(crate) fn solve_relaxation(prog: &ConicProgram, opts: &SolveOptions) -> ConicSolution {
    let mut eff = *opts;
    if prog.num_equalities() > LARGE_PROGRAM_EQS {
        eff.tol_gap = eff.tol_gap.max(REDUCED_TOL);
        eff.tol_feas = eff.tol_feas.max(REDUCED_TOL);
    }
    let sol = conic::solve(prog, &eff);
    conic::accept_at(
        sol,
        eff.tol_gap.max(REDUCED_TOL),
        eff.tol_feas.max(REDUCED_TOL),
    )
}

/// Computes the requested cp-rank bound.  An `Optimal` result lower-bounds
/// the cp-rank; `PrimalInfeasible` certifies the matrix is not completely
/// positive.
///
/// One solver call is made per request.  Very large programs are solved at a
/// relative accuracy of 1e-6 rather than the usual 1e-8, and a solve that
/// stalls just short of the requested tolerances still yields a value when
/// its best iterate passes the full optimality checks at 1e-6; `Unknown` is
/// reported otherwise.
pub fn cp_bound(inst: &CpInstance, req: &CpBoundRequest) -> Result<BoundResult> {
    cp_bound_opts(inst, req, &SolveOptions::from_env())
}

/// [`cp_bound`] with explicit solver options.
pub fn cp_bound_opts(
    inst: &CpInstance,
    req: &CpBoundRequest,
    opts: &SolveOptions,
) -> Result<BoundResult> {
    let spec = cp_spec(inst, req.strength);
    let start = Instant::now();
    let (prog, layout) = match req.mode {
        CpMode::Dense => momrelax::build_dense(&spec, req.t)?,
        CpMode::Isp => momrelax::build_isp(&spec, req.t, &inst.cliques, MatrixScope::ZeroOutside)?,
        CpMode::Wisp => momrelax::build_isp(&spec, req.t, &inst.cliques, MatrixScope::Principal)?,
    };
    let sol = solve_relaxation(&prog, opts);
    Ok(BoundResult::from_solution(
        &prog,
        &layout,
        sol,
        start.elapsed().as_secs_f64(),
    ))
}

/// Combinatorial companions of the moment bounds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CpCombinatorial {
    /// numeric rank of `A` at relative tolerance `1e-8`
    pub rank: usize,
    /// greedy edge clique-cover size of the support graph
    pub c_greedy: usize,
    /// fractional edge clique-cover number of the support graph
    pub c_frac: f64,
    /// smallest applicable published cp-rank upper bound
    pub upper: usize,
}

/// Rank, clique-cover statistics of the support graph, and the best published
/// cp-rank upper bound.
pub fn cp_combinatorial(inst: &CpInstance) -> Result<CpCombinatorial> {
    let rank = crate::certify::numeric_rank(&inst.a, 1e-8);
    let cover = graph::greedy_edge_clique_cover(&inst.graph, &inst.cliques);
    let edges: Vec<(usize, usize)> = inst.graph.edges().collect();
    let (c_frac, _) = graph::frac_cover(&inst.cliques, &edges)?;
    Ok(CpCombinatorial {
        rank,
        c_greedy: cover.len(),
        c_frac,
        upper: cp_rank_upper(inst, rank),
    })
}

/// Smallest applicable published upper bound on the cp-rank: `n` when
/// `n ≤ 4`; `C(n+1,2) − 4` when `n ≥ 5`; `C(r+1,2) − 1` when `r = rank ≥ 2`;
/// and `max(n, |E|)` when the support graph is triangle-free.
fn cp_rank_upper(inst: &CpInstance, rank: usize) -> usize {
    let n = inst.n;
    let mut best = if n <= 4 { n } else { (n + 1) * n / 2 - 4 };
    if rank >= 2 {
        best = best.min((rank + 1) * rank / 2 - 1);
    }
    if triangle_free(&inst.graph) {
        best = best.min(n.max(inst.graph.edge_count()));
    }
    best
}

fn triangle_free(g: &Graph) -> bool {
    g.edges()
        .all(|(i, j)| (0..g.n()).all(|k| !(g.has_edge(i, k) && g.has_edge(j, k))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;

    fn inst(name: &str) -> CpInstance {
        instances::builtin_cp(name).unwrap()
    }

    fn bound(inst: &CpInstance, t: usize, mode: CpMode, strength: Strength) -> BoundResult {
        cp_bound(inst, &CpBoundRequest { t, mode, strength }).unwrap()
    }

    fn value(inst: &CpInstance, t: usize, mode: CpMode, strength: Strength) -> f64 {
        let r = bound(inst, t, mode, strength);
        let v = r.optimal_value().unwrap();
        assert!(
            v >= 1.0 - 1e-6,
            "optimal mass {v} below the a-priori lower bound 1"
        );
        v
    }

    #[test]
    fn one_by_one_spec_shape() {
        let c = 2.25;
        let i = CpInstance::new(ndarray::arr2(&[[c]])).unwrap();
        let spec = cp_spec(&i, Strength::Plain);
        assert_eq!(spec.equalities.len(), 1);
        assert_eq!(spec.equalities[0].1, c);
        assert_eq!(spec.ineq_gens.len(), 1);
        let terms: Vec<(u16, f64)> = spec.ineq_gens[0]
            .terms()
            .map(|(e, coef)| (e.power(0), coef))
            .collect();
        assert!(terms.contains(&(1, c.sqrt())));
        assert!(terms.contains(&(2, -1.0)));
        assert!(spec.nonedges.is_empty());
        assert_eq!(spec.matrix_localizers.len(), 1);
    }

    #[test]
    fn diagonal_matrix_has_only_nonedge_pairs() {
        let i = CpInstance::new(Array2::from_diag(&ndarray::arr1(&[1.0, 1.0]))).unwrap();
        let spec = cp_spec(&i, Strength::Plain);
        assert_eq!(spec.nonedges.iter().copied().collect::<Vec<_>>(), [(0, 1)]);
        // box generators only: no edges, hence no product-cap generators
        assert_eq!(spec.ineq_gens.len(), 2);
    }

    #[test]
    fn five_cycle_example_spec_counts() {
        let spec = cp_spec(&inst("ex1"), Strength::Plain);
        assert_eq!(spec.ineq_gens.len(), 10); // 5 diagonal + 5 edge generators
        assert_eq!(spec.nonedges.len(), 5); // C_5 complement
        assert_eq!(spec.equalities.len(), 15);
    }

    #[test]
    fn rejects_zero_diagonal_and_negative_entries() {
        let zero_diag = ndarray::arr2(&[[0.0, 1.0], [1.0, 2.0]]);
        assert!(matches!(
            CpInstance::new(zero_diag),
            Err(Error::InvalidProgram(_))
        ));
        let negative = ndarray::arr2(&[[1.0, -0.5], [-0.5, 2.0]]);
        assert!(matches!(
            CpInstance::new(negative),
            Err(Error::InvalidProgram(_))
        ));
        let asym = ndarray::arr2(&[[1.0, 0.5], [0.25, 2.0]]);
        assert!(matches!(
            CpInstance::new(asym),
            Err(Error::AsymmetricMatrix(_))
        ));
    }

    #[test]
    fn bipartite_example_ideal_sparse_level_one_is_six() {
        let v = value(&inst("ex2"), 1, CpMode::Isp, Strength::Plain);
        assert!((v - 6.0).abs() <= 1e-3, "got {v}");
    }

    #[test]
    fn tripartite_example_dense_level_one() {
        let v = value(&inst("ex4"), 1, CpMode::Dense, Strength::Plain);
        assert!((v - 4.85).abs() <= 0.05, "got {v}");
    }

    #[test]
    fn separation_family_reaches_m_squared_under_wisp() {
        let v = value(&inst("sep_cp(3)"), 1, CpMode::Wisp, Strength::Plain);
        assert!((v - 9.0).abs() <= 1e-3, "got {v}");
    }

    #[test]
    fn doubly_nonnegative_non_cp_matrix_is_detected_at_level_one() {
        let r = bound(&inst("ex5"), 1, CpMode::Isp, Strength::Plain);
        assert_eq!(r.status, Status::PrimalInfeasible);
        assert!(r.value.is_none());
    }

    #[test]
    fn scaling_the_matrix_leaves_the_level_one_bound_unchanged() {
        let base = inst("ex2");
        let scaled = CpInstance::new(3.7 * &base.a).unwrap();
        let v0 = value(&base, 1, CpMode::Isp, Strength::Plain);
        let v1 = value(&scaled, 1, CpMode::Isp, Strength::Plain);
        assert!((v0 - v1).abs() <= 1e-6, "got {v0} vs {v1}");
    }

    #[test]
    fn dense_is_dominated_by_ideal_sparse_and_wisp_by_isp() {
        for name in ["ex1", "ex2"] {
            let i = inst(name);
            let dense = value(&i, 1, CpMode::Dense, Strength::Plain);
            let isp = value(&i, 1, CpMode::Isp, Strength::Plain);
            let wisp = value(&i, 1, CpMode::Wisp, Strength::Plain);
            assert!(dense <= isp + 1e-6, "{name}: dense {dense} > isp {isp}");
            assert!(wisp <= isp + 1e-6, "{name}: wisp {wisp} > isp {isp}");
        }
    }

    #[test]
    fn strengthenings_are_monotone() {
        let i = inst("ex1");
        for mode in [CpMode::Dense, CpMode::Isp] {
            let plain = value(&i, 1, mode, Strength::Plain);
            let dagger = value(&i, 1, mode, Strength::Dagger);
            let ddagger = value(&i, 1, mode, Strength::Ddagger);
            assert!(plain <= dagger + 1e-6, "{mode}: {plain} > {dagger}");
            assert!(dagger <= ddagger + 1e-6, "{mode}: {dagger} > {ddagger}");
        }
    }

    #[test]
    fn weak_variant_dominates_the_fractional_cover() {
        for name in ["ex1", "ex2", "sep_cp(2)"] {
            let i = inst(name);
            let comb = cp_combinatorial(&i).unwrap();
            let v = value(&i, 1, CpMode::Wisp, Strength::Plain);
            assert!(
                v >= comb.c_frac - 1e-6,
                "{name}: wisp {v} below fractional cover {}",
                comb.c_frac
            );
        }
    }

    #[test]
    fn explicit_factorizations_cap_the_bounds() {
        // A = a₁a₁ᵀ + a₂a₂ᵀ with a₁ = (1,1,0), a₂ = (0,1,1): two factors.
        let a = ndarray::arr2(&[[1.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 1.0]]);
        let i = CpInstance::new(a).unwrap();
        for (t, mode) in [(1, CpMode::Dense), (1, CpMode::Isp), (2, CpMode::Isp)] {
            let v = value(&i, t, mode, Strength::Plain);
            assert!(v <= 2.0 + 1e-4, "t={t} {mode}: bound {v} exceeds 2 factors");
        }
    }

    #[test]
    fn combinatorial_companions_on_builtins() {
        let id4 = CpInstance::new(Array2::eye(4)).unwrap();
        let c = cp_combinatorial(&id4).unwrap();
        assert_eq!((c.rank, c.c_greedy, c.upper), (4, 0, 4));
        assert_eq!(c.c_frac, 0.0);

        let c3 = cp_combinatorial(&inst("ex3")).unwrap();
        assert_eq!(c3.rank, 11);
        assert!(c3.c_frac <= 8.0 + 1e-6);
        assert!(c3.c_greedy as f64 >= c3.c_frac - 1e-6);

        // complete bipartite support: fractional cover equals the edge count
        let sep = cp_combinatorial(&inst("sep_cp(3)")).unwrap();
        assert!((sep.c_frac - 9.0).abs() <= 1e-6);
        assert_eq!(sep.upper, 9); // triangle-free: max(n, |E|)

        let c1 = cp_combinatorial(&inst("ex1")).unwrap();
        assert_eq!((c1.rank, c1.upper), (5, 5)); // C_5 support, triangle-free
        assert!((c1.c_frac - 5.0).abs() <= 1e-6);

        let c4 = cp_combinatorial(&inst("ex4")).unwrap();
        assert_eq!(c4.rank, 10);
        assert_eq!(c4.upper, 54); // rank bound C(11,2) − 1 beats C(13,2) − 4
    }

    #[test]
    fn level_zero_is_rejected() {
        let err = cp_bound(
            &inst("ex1"),
            &CpBoundRequest {
                t: 0,
                mode: CpMode::Dense,
                strength: Strength::Plain,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::LevelTooSmall { .. }));
    }

    #[test]
    fn program_stats_record_block_sizes() {
        let r = bound(&inst("ex1"), 1, CpMode::Dense, Strength::Plain);
        // moment matrix over {1, x₁..x₅} plus the 5×5 matrix localizer
        assert!(r.program_stats.psd_block_dims.contains(&6));
        assert!(r.program_stats.psd_block_dims.contains(&5));
        assert!(r.program_stats.num_equalities > 15);
        assert!(r.wall_time > 0.0);
    }
}

//! Lowering of generalized moment problems to conic programs: the dense
//! relaxation, the ideal-sparse relaxation over clique covers, its extended
//! variant over supercliques, and the correlative-sparse relaxation over a
//! chordal extension.
//!
//! All four builders share one assembly core. Each pseudo-moment vector gets
//! a *representative* conic entry per live monomial (first occurrence in its
//! moment block's upper triangle); later occurrences are tied to the
//! representative by glue rows, localizer entries are defined against
//! representatives by definition rows, and products whose support contains a
//! nonedge are pinned to zero — the monomial ideal imposed structurally.

use std::collections::{BTreeSet, HashMap};

use crate::conic::{ConicProgram, ConicSolution, LinExpr, Sense, VarRef};
use crate::polybasis::{Exponent, MonomialBasis, PolyMatrix, Polynomial};
use crate::{Error, Result};

/// A generalized moment problem: minimize `L(f_0)` over linear functionals
/// that are positive on the quadratic module of the listed generators and
/// annihilate the nonedge ideal.
#[derive(Clone, Debug)]
pub struct GmpSpec {
    pub n: usize,
    /// objective functional `f_0`
    pub objective: Polynomial,
    /// equality constraints `L(f_i) = a_i`
    pub equalities: Vec<(Polynomial, f64)>,
    /// scalar generators `g_j ≥ 0`, each yielding a localizing matrix
    pub ineq_gens: Vec<Polynomial>,
    /// nonedge pairs `(i < j)` generating the ideal `x_i x_j = 0`
    pub nonedges: BTreeSet<(usize, usize)>,
    /// polynomial matrices `G(x) ⪰ 0`, each yielding a block localizer
    pub matrix_localizers: Vec<PolyMatrix>,
    /// polynomials `h` with the sign condition `L(h·x^γ) ≥ 0` for all
    /// `|γ| ≤ 2t − deg h`
    pub sign_families: Vec<Polynomial>,
    /// polynomials `h` with the PSD condition `L(h·[x]_s[x]_sᵀ) ⪰ 0`
    pub monomial_psd_localizers: Vec<Polynomial>,
}

impl GmpSpec {
    /// An empty problem over `n` variables with a zero objective.
    pub fn new(n: usize) -> Self {
        GmpSpec {
            n,
            objective: Polynomial::zero(n),
            equalities: Vec::new(),
            ineq_gens: Vec::new(),
            nonedges: BTreeSet::new(),
            matrix_localizers: Vec::new(),
            sign_families: Vec::new(),
            monomial_psd_localizers: Vec::new(),
        }
    }

    /// Whether a monomial survives the ideal: no nonedge inside its support.
    pub fn keep(&self, e: &Exponent) -> bool {
        let supp = e.support();
        supp.iter().enumerate().all(|(a, &i)| {
            supp[a + 1..]
                .iter()
                .all(|&j| !self.nonedges.contains(&(i, j)))
        })
    }

    /// Smallest admissible `2t` for the declared degrees.
    fn degree_requirement(&self) -> usize {
        let even = |d: usize| 2 * d.div_ceil(2);
        let mut need = self.objective.degree().max(2);
        for (f, _) in &self.equalities {
            need = need.max(f.degree());
        }
        for g in &self.ineq_gens {
            need = need.max(even(g.degree()));
        }
        for gm in &self.matrix_localizers {
            need = need.max(even(gm.degree()));
        }
        for h in &self.sign_families {
            need = need.max(h.degree());
        }
        for h in &self.monomial_psd_localizers {
            need = need.max(even(h.degree()));
        }
        need
    }

    fn check_level(&self, t: usize) -> Result<()> {
        let needed = self.degree_requirement();
        if t == 0 || 2 * t < needed {
            return Err(Error::LevelTooSmall { t, needed });
        }
        Ok(())
    }
}

/// How matrix localizers restrict to a clique: substitute zero for outside
/// variables (the ideal-sparse default), or take the principal submatrix
/// (the weak variant).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixScope {
    ZeroOutside,
    Principal,
}

/// A recovered pseudo-moment vector `L` (or `L_k`) up to degree `2t`.
#[derive(Clone, Debug)]
pub struct PseudoMoment {
    pub basis: MonomialBasis,
    pub values: Vec<f64>,
    pub clique: Option<Vec<usize>>,
}

impl PseudoMoment {
    /// `L(x^e)`; monomials outside the basis are structural zeros.
    pub fn value(&self, e: &Exponent) -> f64 {
        match self.basis.index_of(e) {
            Some(i) => self.values[i],
            None => 0.0,
        }
    }

    /// Total mass `L(1)`.
    pub fn mass(&self) -> f64 {
        self.value(&Exponent::zero(self.basis.n()))
    }
}

/// One pseudo-moment vector's bookkeeping inside a built program.
#[derive(Clone, Debug)]
pub struct MomentTable {
    /// `Some(V_k)` for per-clique vectors, `None` for a shared vector
    pub clique: Option<Vec<usize>>,
    /// conic PSD blocks holding this vector's moment matrices
    pub moment_blocks: Vec<usize>,
    /// live monomials of degree ≤ 2t
    pub value_basis: MonomialBasis,
    /// representative conic entry per `value_basis` monomial
    pub reps: Vec<VarRef>,
}

/// Mapping from a built conic program back to pseudo-moments.
#[derive(Clone, Debug)]
pub struct RelaxationLayout {
    pub t: usize,
    pub n: usize,
    pub tables: Vec<MomentTable>,
}

impl RelaxationLayout {
    /// Read the pseudo-moment vectors out of a solver point.
    pub fn pseudo_moments(&self, sol: &ConicSolution) -> Vec<PseudoMoment> {
        self.tables
            .iter()
            .map(|tab| PseudoMoment {
                basis: tab.value_basis.clone(),
                values: tab.reps.iter().map(|&v| read_var(sol, v)).collect(),
                clique: tab.clique.clone(),
            })
            .collect()
    }
}

fn read_var(sol: &ConicSolution, v: VarRef) -> f64 {
    match v {
        VarRef::Psd { block, row, col } => sol.psd[block][[row, col]],
        VarRef::Nonneg { index } => sol.nonneg[index],
    }
}

/// Dense relaxation: one shared pseudo-moment vector over all variables,
/// with the ideal applied structurally to bases and matrix entries.
pub fn build_dense(spec: &GmpSpec, t: usize) -> Result<(ConicProgram, RelaxationLayout)> {
    let all: Vec<usize> = (0..spec.n).collect();
    build_common(spec, t, &[all], MatrixScope::ZeroOutside, true)
}

/// Ideal-sparse relaxation: one independent pseudo-moment vector per clique,
/// coupled only through the equality rows `Σ_k L_k(f_i|V_k) = a_i`.
pub fn build_isp(
    spec: &GmpSpec,
    t: usize,
    cliques: &crate::graph::CliqueList,
    scope: MatrixScope,
) -> Result<(ConicProgram, RelaxationLayout)> {
    build_common(spec, t, &cliques.cliques, scope, false)
}

/// Extended ideal-sparse relaxation over supercliques of the support graph;
/// nonedges inside a superclique stay structurally zero, which interpolates
/// between the per-clique and dense programs.
pub fn build_ext(
    spec: &GmpSpec,
    t: usize,
    supercliques: &crate::graph::CliqueList,
) -> Result<(ConicProgram, RelaxationLayout)> {
    build_common(spec, t, &supercliques.cliques, MatrixScope::ZeroOutside, false)
}

/// Correlative-sparse relaxation: a single shared pseudo-moment vector, its
/// moment matrix split into one block per chordal-extension clique and every
/// localizing constraint restricted clique-wise.
pub fn build_csp(
    spec: &GmpSpec,
    t: usize,
    chordal_cliques: &crate::graph::CliqueList,
) -> Result<(ConicProgram, RelaxationLayout)> {
    build_common(spec, t, &chordal_cliques.cliques, MatrixScope::ZeroOutside, true)
}

// ---------------------------------------------------------------------------
// shared assembly core
// ---------------------------------------------------------------------------

/// Skip a restricted scalar generator when the restriction lost the
/// constraint: identically zero, or collapsed to a constant from positive
/// degree (e.g. an edge generator on a clique missing an endpoint).
fn skip_restricted(original: &Polynomial, restricted: &Polynomial) -> bool {
    restricted.is_zero() || (restricted.degree() == 0 && original.degree() > 0)
}

struct TableCtx {
    reps: HashMap<Exponent, VarRef>,
}

impl TableCtx {
    fn rep(&self, e: &Exponent) -> Option<VarRef> {
        self.reps.get(e).copied()
    }

    /// Linear functional of a polynomial under this table's representatives,
    /// dropping ideal-killed terms. `None` when no term survives.
    fn functional(&self, p: &Polynomial, keep: &dyn Fn(&Exponent) -> bool) -> Option<LinExpr> {
        let mut expr = LinExpr::new();
        let mut any = false;
        for (e, c) in p.terms() {
            if !keep(e) {
                continue;
            }
            let rep = self
                .rep(e)
                .unwrap_or_else(|| panic!("no representative for live monomial {e:?}"));
            expr.push(rep, c);
            any = true;
        }
        if any {
            Some(expr)
        } else {
            None
        }
    }
}

fn build_common(
    spec: &GmpSpec,
    t: usize,
    sets: &[Vec<usize>],
    scope: MatrixScope,
    shared: bool,
) -> Result<(ConicProgram, RelaxationLayout)> {
    spec.check_level(t)?;
    if sets.is_empty() {
        return Err(Error::EmptyCliqueList);
    }
    let mut sets: Vec<Vec<usize>> = sets.to_vec();
    for s in &mut sets {
        s.sort_unstable();
        s.dedup();
        if s.iter().any(|&v| v >= spec.n) {
            return Err(Error::InvalidProgram(format!(
                "clique vertex out of range (n = {})",
                spec.n
            )));
        }
        if s.is_empty() {
            return Err(Error::InvalidProgram("empty clique in cover".into()));
        }
    }

    let keep = |e: &Exponent| spec.keep(e);
    let mut prog = ConicProgram::new(Sense::Minimize);

    // one representative map per pseudo-moment vector
    let n_tables = if shared { 1 } else { sets.len() };
    let mut ctxs: Vec<TableCtx> = (0..n_tables)
        .map(|_| TableCtx {
            reps: HashMap::new(),
        })
        .collect();
    let mut moment_blocks: Vec<Vec<usize>> = vec![Vec::new(); n_tables];

    // moment matrices first so every live monomial has a representative
    // before localizer rows reference it
    for (k, vset) in sets.iter().enumerate() {
        let table = if shared { 0 } else { k };
        let ctx = &mut ctxs[table];
        let row_basis = MonomialBasis::filtered(vset, t, spec.n, &keep);
        let dim = row_basis.len();
        let label = if sets.len() == 1 {
            "moment".to_string()
        } else {
            format!("moment[{k}]")
        };
        let blk = prog.add_psd_block(label, dim);
        moment_blocks[table].push(blk);
        for i in 0..dim {
            for j in i..dim {
                let entry = VarRef::psd(blk, i, j);
                let gamma = row_basis.entries()[i].product(&row_basis.entries()[j]);
                if !keep(&gamma) {
                    prog.add_equality(LinExpr::term(entry, 1.0), 0.0);
                    continue;
                }
                match ctx.reps.get(&gamma) {
                    None => {
                        ctx.reps.insert(gamma, entry);
                    }
                    Some(&rep) => {
                        let mut glue = LinExpr::term(entry, 1.0);
                        glue.push(rep, -1.0);
                        prog.add_equality(glue, 0.0);
                    }
                }
            }
        }
    }

    // localizing constraints, restricted per set
    for (k, vset) in sets.iter().enumerate() {
        let ctx = &ctxs[if shared { 0 } else { k }];
        let suffix = if sets.len() == 1 {
            String::new()
        } else {
            format!("[{k}]")
        };
        for (gi, g) in spec.ineq_gens.iter().enumerate() {
            let gr = g.restrict(vset);
            if skip_restricted(g, &gr) {
                continue;
            }
            let s = t - g.degree().div_ceil(2);
            add_scalar_localizer(&mut prog, ctx, &keep, vset, s, spec, &gr, &format!("loc{gi}{suffix}"));
        }
        for (gi, h) in spec.monomial_psd_localizers.iter().enumerate() {
            let hr = h.restrict(vset);
            if skip_restricted(h, &hr) {
                continue;
            }
            let s = t - h.degree().div_ceil(2);
            add_scalar_localizer(&mut prog, ctx, &keep, vset, s, spec, &hr, &format!("mpsd{gi}{suffix}"));
        }
        for (gi, gm) in spec.matrix_localizers.iter().enumerate() {
            let gr = match scope {
                MatrixScope::ZeroOutside => gm.restrict(vset),
                MatrixScope::Principal => gm.principal_submatrix(vset).restrict(vset),
            };
            if gr.is_zero() {
                continue;
            }
            let s = t - gm.degree().div_ceil(2);
            add_matrix_localizer(&mut prog, ctx, &keep, vset, s, spec, &gr, &format!("mloc{gi}{suffix}"));
        }
        for h in spec.sign_families.iter() {
            let hr = h.restrict(vset);
            if skip_restricted(h, &hr) {
                continue;
            }
            let dmax = 2 * t - h.degree();
            add_sign_family(&mut prog, ctx, &keep, vset, dmax, spec, &hr);
        }
    }

    // equality rows: direct for a shared vector, summed over cliques for
    // per-clique vectors
    for (idx, (f, rhs)) in spec.equalities.iter().enumerate() {
        let mut row = LinExpr::new();
        let mut any = false;
        if shared {
            for (e, c) in f.terms() {
                if !keep(e) {
                    continue;
                }
                let rep = ctxs[0].rep(e).ok_or_else(|| {
                    Error::InvalidProgram(format!(
                        "equality {idx} references a monomial outside the clique cover"
                    ))
                })?;
                row.push(rep, c);
                any = true;
            }
        } else {
            for (k, vset) in sets.iter().enumerate() {
                if let Some(expr) = ctxs[k].functional(&f.restrict(vset), &keep) {
                    for &(v, c) in expr.terms() {
                        row.push(v, c);
                    }
                    any = true;
                }
            }
        }
        if !any {
            if rhs.abs() > 0.0 {
                return Err(Error::InfeasibleBySupport {
                    index: idx,
                    rhs: *rhs,
                });
            }
            continue;
        }
        prog.add_equality(row, *rhs);
    }

    // objective: L(f_0) or Σ_k L_k(f_0|V_k)
    let mut obj = LinExpr::new();
    if shared {
        for (e, c) in spec.objective.terms() {
            if !keep(e) {
                continue;
            }
            let rep = ctxs[0].rep(e).ok_or_else(|| {
                Error::InvalidProgram(
                    "objective references a monomial outside the clique cover".into(),
                )
            })?;
            obj.push(rep, c);
        }
    } else {
        for (k, vset) in sets.iter().enumerate() {
            if let Some(expr) = ctxs[k].functional(&spec.objective.restrict(vset), &keep) {
                for &(v, c) in expr.terms() {
                    obj.push(v, c);
                }
            }
        }
    }
    prog.set_objective(obj);

    // layout
    let mut tables = Vec::with_capacity(n_tables);
    for (table, ctx) in ctxs.iter().enumerate() {
        let (clique, value_basis) = if shared {
            let covered = |e: &Exponent| {
                keep(e) && sets.iter().any(|vset| e.supported_on(vset))
            };
            let all: Vec<usize> = (0..spec.n).collect();
            (None, MonomialBasis::filtered(&all, 2 * t, spec.n, &covered))
        } else {
            let vset = &sets[table];
            (
                Some(vset.clone()),
                MonomialBasis::filtered(vset, 2 * t, spec.n, &keep),
            )
        };
        let reps: Vec<VarRef> = value_basis
            .entries()
            .iter()
            .map(|e| {
                ctx.rep(e)
                    .unwrap_or_else(|| panic!("live monomial {e:?} has no representative"))
            })
            .collect();
        tables.push(MomentTable {
            clique,
            moment_blocks: moment_blocks[table].clone(),
            value_basis,
            reps,
        });
    }

    Ok((
        prog,
        RelaxationLayout {
            t,
            n: spec.n,
            tables,
        },
    ))
}

/// Localizing matrix of a scalar polynomial: block entry `(α, β)` is defined
/// as `L(g·x^{α+β})` by one equality row; empty combinations pin the entry.
fn add_scalar_localizer(
    prog: &mut ConicProgram,
    ctx: &TableCtx,
    keep: &dyn Fn(&Exponent) -> bool,
    vset: &[usize],
    s: usize,
    spec: &GmpSpec,
    g: &Polynomial,
    label: &str,
) {
    let basis = MonomialBasis::filtered(vset, s, spec.n, keep);
    let dim = basis.len();
    let blk = prog.add_psd_block(label, dim);
    for i in 0..dim {
        for j in i..dim {
            let entry = VarRef::psd(blk, i, j);
            let shift = basis.entries()[i].product(&basis.entries()[j]);
            let mut row = LinExpr::term(entry, 1.0);
            let mut any = false;
            for (e, c) in g.terms() {
                let gamma = e.product(&shift);
                if !keep(&gamma) {
                    continue;
                }
                let rep = ctx.rep(&gamma).expect("localizer monomial within table");
                row.push(rep, -c);
                any = true;
            }
            let _ = any;
            prog.add_equality(row, 0.0);
        }
    }
}

/// Block localizer of a polynomial matrix `G`: the constraint
/// `L(G ⊗ [x]_s[x]_sᵀ) ⪰ 0` with entry `((a,α),(b,β)) = L(G_ab·x^{α+β})`.
fn add_matrix_localizer(
    prog: &mut ConicProgram,
    ctx: &TableCtx,
    keep: &dyn Fn(&Exponent) -> bool,
    vset: &[usize],
    s: usize,
    spec: &GmpSpec,
    gm: &PolyMatrix,
    label: &str,
) {
    let basis = MonomialBasis::filtered(vset, s, spec.n, keep);
    let bl = basis.len();
    let r = gm.dim();
    let dim = r * bl;
    let blk = prog.add_psd_block(label, dim);
    for row_idx in 0..dim {
        for col_idx in row_idx..dim {
            let (a, ia) = (row_idx / bl, row_idx % bl);
            let (b, ib) = (col_idx / bl, col_idx % bl);
            let entry = VarRef::psd(blk, row_idx, col_idx);
            let shift = basis.entries()[ia].product(&basis.entries()[ib]);
            let mut row = LinExpr::term(entry, 1.0);
            for (e, c) in gm.entry(a, b).terms() {
                let gamma = e.product(&shift);
                if !keep(&gamma) {
                    continue;
                }
                let rep = ctx.rep(&gamma).expect("matrix localizer monomial within table");
                row.push(rep, -c);
            }
            prog.add_equality(row, 0.0);
        }
    }
}

/// Sign family `L(h·x^γ) ≥ 0` for all `|γ| ≤ dmax`: one nonnegative scalar
/// per surviving combination, tied to the representatives by a row.
fn add_sign_family(
    prog: &mut ConicProgram,
    ctx: &TableCtx,
    keep: &dyn Fn(&Exponent) -> bool,
    vset: &[usize],
    dmax: usize,
    spec: &GmpSpec,
    h: &Polynomial,
) {
    let basis = MonomialBasis::filtered(vset, dmax, spec.n, keep);
    let mut rows: Vec<LinExpr> = Vec::new();
    for g0 in basis.entries() {
        let mut combo = LinExpr::new();
        let mut any = false;
        for (e, c) in h.terms() {
            let gamma = e.product(g0);
            if !keep(&gamma) {
                continue;
            }
            let rep = ctx.rep(&gamma).expect("sign family monomial within table");
            combo.push(rep, -c);
            any = true;
        }
        if any {
            rows.push(combo);
        }
    }
    if rows.is_empty() {
        return;
    }
    let first = prog.add_nonneg_vars(rows.len());
    for (off, mut combo) in rows.into_iter().enumerate() {
        combo.push(VarRef::nonneg(first + off), 1.0);
        prog.add_equality(combo, 0.0);
    }
}

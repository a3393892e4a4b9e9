//! Certification utilities: numeric rank, flatness of pseudo-moment
//! sequences, atom extraction, and factorization reconstruction.
//!
//! A pseudo-moment vector `L` that is flat — `rank M_s(L) = rank M_{s-d}(L)`
//! for some order `s` — is the truncated moment sequence of an atomic
//! measure.  [`extract_atoms`] recovers the atoms by simultaneous
//! diagonalization of the shift operators on the column space of the flat
//! moment matrix; summing `weight · point · pointᵀ` (or the bipartite outer
//! product) over the atoms then rebuilds the matrix being factorized.

use crate::momrelax::PseudoMoment;
use crate::polybasis::Exponent;
use crate::{Error, Result};
use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, LeastSquaresSvd, SVD, UPLO};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Weights at or below this threshold abort extraction.
const MIN_WEIGHT: f64 = 1e-9;
/// Coordinates in `(-COORD_CLIP, 0)` are snapped to zero; anything more
/// negative aborts extraction (the atoms must live in the nonnegative
/// orthant).
const COORD_CLIP: f64 = 1e-6;
/// Relative tolerance for the moment-matching gate on extracted atoms.
const MOMENT_GATE: f64 = 1e-5;
/// Random shift combinations tried before giving up.
const MAX_ATTEMPTS: usize = 8;

/// Numeric rank: the number of singular values exceeding `tol_ratio · σ_max`.
/// The zero (or empty) matrix has rank zero.
pub fn numeric_rank(a: &Array2<f64>, tol_ratio: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let (_, sigma, _) = a
        .svd(false, false)
        .expect("SVD of a finite matrix should not fail");
    let smax = sigma.iter().fold(0.0f64, |m, &v| m.max(v));
    if smax <= 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&v| v > tol_ratio * smax).count()
}

/// Rank comparison for one pseudo-moment vector.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlockFlatness {
    /// Variable set the vector lives on (`None` for a shared vector).
    pub clique: Option<Vec<usize>>,
    /// Smallest order at which the rank equality holds, or the highest
    /// order tried when it never does.
    pub s: usize,
    pub rank_s: usize,
    pub rank_s_minus_d: usize,
    pub flat: bool,
}

/// Flatness verdict across all pseudo-moment vectors of a relaxation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub blocks: Vec<BlockFlatness>,
    /// True when every block is flat (and there is at least one block).
    pub overall_flat: bool,
    /// Relative rank threshold the ranks were computed with.
    pub rank_tol: f64,
}

/// Moment matrix of order `s`: rows and columns are the live monomials of
/// degree `<= s`, entries `L(x^α · x^β)`.  Monomials outside the vector's
/// basis are structural zeros.
fn moment_matrix(pm: &PseudoMoment, s: usize) -> Array2<f64> {
    let rows: Vec<&Exponent> = pm
        .basis
        .entries()
        .iter()
        .filter(|e| e.degree() <= s)
        .collect();
    Array2::from_shape_fn((rows.len(), rows.len()), |(i, j)| {
        pm.value(&rows[i].product(rows[j]))
    })
}

fn block_flatness(pm: &PseudoMoment, t: usize, d: usize, tol_ratio: f64) -> BlockFlatness {
    let d = d.max(1);
    let rank_at: Vec<usize> = (0..=t)
        .map(|s| numeric_rank(&moment_matrix(pm, s), tol_ratio))
        .collect();
    for s in d..=t {
        if rank_at[s] == rank_at[s - d] {
            return BlockFlatness {
                clique: pm.clique.clone(),
                s,
                rank_s: rank_at[s],
                rank_s_minus_d: rank_at[s - d],
                flat: true,
            };
        }
    }
    BlockFlatness {
        clique: pm.clique.clone(),
        s: t,
        rank_s: rank_at[t],
        rank_s_minus_d: rank_at[t.saturating_sub(d)],
        flat: false,
    }
}

/// Check `rank M_s = rank M_{s-d}` for `s ∈ {d, …, t}` on a single
/// pseudo-moment vector; the vector is flat if the equality holds for some
/// `s`, and the report records the smallest such order.
pub fn check_flatness(pm: &PseudoMoment, t: usize, d: usize, tol_ratio: f64) -> FlatnessReport {
    flatness_report(std::slice::from_ref(pm), t, d, tol_ratio)
}

/// [`check_flatness`] across all pseudo-moment vectors of a relaxation:
/// for per-clique relaxations the measure decomposes only when every
/// clique's vector is flat.
pub fn flatness_report(
    pms: &[PseudoMoment],
    t: usize,
    d: usize,
    tol_ratio: f64,
) -> FlatnessReport {
    let blocks: Vec<BlockFlatness> = pms
        .iter()
        .map(|pm| block_flatness(pm, t, d, tol_ratio))
        .collect();
    let overall_flat = !blocks.is_empty() && blocks.iter().all(|b| b.flat);
    FlatnessReport {
        blocks,
        overall_flat,
        rank_tol: tol_ratio,
    }
}

/// One atom of a discrete measure: a point in the ambient space and a
/// positive weight.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Atom {
    pub point: Vec<f64>,
    pub weight: f64,
}

/// Finitely many weighted atoms recovered from one pseudo-moment vector.
/// Points are ambient: coordinates outside the vector's variable set are
/// zero.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtomicMeasure {
    pub atoms: Vec<Atom>,
    pub clique: Option<Vec<usize>>,
}

impl AtomicMeasure {
    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    /// Atoms across a list of measures (one per pseudo-moment vector).
    pub fn total_atoms(measures: &[AtomicMeasure]) -> usize {
        measures.iter().map(AtomicMeasure::num_atoms).sum()
    }
}

/// Recover an atomic measure from a pseudo-moment vector of degree `2t`.
///
/// When the vector is flat at order `s`, the shift operators restricted to
/// the column space of `M_{s-1}` commute and their joint eigenvalues are
/// the atom coordinates (simultaneous diagonalization via a random convex
/// combination, fixed seed, deterministic output).  Extraction is still
/// attempted on non-flat vectors — from `M_{t-1}` when `t ≥ 2`, and via a
/// mean/covariance construction when `t = 1` — but atoms are only returned
/// if they pass three gates: every weight exceeds `1e-9`, coordinates below
/// `-1e-6` abort (smaller negativity is snapped to zero), and the atoms
/// must reproduce the low-degree pseudo-moments to a relative `1e-5`.
pub fn extract_atoms(pm: &PseudoMoment, t: usize, tol_ratio: f64) -> Result<AtomicMeasure> {
    if t == 0 {
        return Err(Error::ExtractionFailed(
            "order-zero vectors carry no atom data".into(),
        ));
    }
    if t == 1 {
        return covariance_extract(pm, tol_ratio);
    }
    let flat = block_flatness(pm, t, 1, tol_ratio);
    let s_gram = if flat.flat { flat.s - 1 } else { t - 1 };
    hl_extract(pm, s_gram, t, tol_ratio)
}

/// [`extract_atoms`] on every vector of a relaxation; fails if any block
/// fails.
pub fn extract_atoms_all(
    pms: &[PseudoMoment],
    t: usize,
    tol_ratio: f64,
) -> Result<Vec<AtomicMeasure>> {
    pms.iter().map(|pm| extract_atoms(pm, t, tol_ratio)).collect()
}

/// Shift-operator extraction from the order-`s_gram` moment matrix.
fn hl_extract(
    pm: &PseudoMoment,
    s_gram: usize,
    t: usize,
    tol_ratio: f64,
) -> Result<AtomicMeasure> {
    let n = pm.basis.n();
    let vars = pm.basis.vars().to_vec();
    let rows: Vec<&Exponent> = pm
        .basis
        .entries()
        .iter()
        .filter(|e| e.degree() <= s_gram)
        .collect();
    let b = rows.len();
    let gram = Array2::from_shape_fn((b, b), |(i, j)| pm.value(&rows[i].product(rows[j])));
    let (evals, evecs) = sym_eig(&gram)?;
    let lmax = evals.iter().fold(0.0f64, |m, &v| m.max(v));
    if lmax <= f64::EPSILON {
        // the block carries (numerically) no mass: the empty measure
        return Ok(AtomicMeasure {
            atoms: Vec::new(),
            clique: pm.clique.clone(),
        });
    }
    let r = evals.iter().filter(|&&l| l > tol_ratio * lmax).count();

    // Whitening: columns of Q satisfy Qᵀ M_{s_gram} Q = I_r.
    let mut q = Array2::zeros((b, r));
    for (k, col) in (b - r..b).enumerate() {
        let scale = evals[col].sqrt().recip();
        for i in 0..b {
            q[[i, k]] = evecs[[i, col]] * scale;
        }
    }

    // Compressed shift operators N_v = Qᵀ (L(x_v · x^α x^β))_{α,β} Q.
    let ops: Vec<Array2<f64>> = vars
        .iter()
        .map(|&v| {
            let xv = Exponent::var(v, n);
            let shifted = Array2::from_shape_fn((b, b), |(i, j)| {
                pm.value(&rows[i].product(rows[j]).product(&xv))
            });
            q.t().dot(&shifted).dot(&q)
        })
        .collect();

    // Degrees the construction consumed; the gate checks these moments.
    let fit_cap = (2 * s_gram + 1).max(2).min(2 * t);
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d6f_6d5f_6174_6f6d);
    let mut last_err = Error::ExtractionFailed("no shift combination produced atoms".into());
    for _ in 0..MAX_ATTEMPTS {
        let coeffs: Vec<f64> = (0..ops.len()).map(|_| 0.25 + rng.gen::<f64>()).collect();
        let total: f64 = coeffs.iter().sum();
        let mut combo = Array2::<f64>::zeros((r, r));
        for (c, op) in coeffs.iter().zip(&ops) {
            combo = combo + op * (*c / total);
        }
        combo = (&combo + &combo.t()) * 0.5;
        let (_, w) = sym_eig(&combo)?;
        let points: Vec<Vec<f64>> = (0..r)
            .map(|l| {
                let wl = w.column(l);
                let mut point = vec![0.0; n];
                for (vi, &v) in vars.iter().enumerate() {
                    point[v] = wl.dot(&ops[vi].dot(&wl));
                }
                point
            })
            .collect();
        match fit_and_gate(pm, points, fit_cap) {
            Ok(measure) => return Ok(measure),
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}

/// Order-one extraction: any PSD moment matrix of degree two is the moment
/// matrix of a measure with `rank M_1` atoms sharing its mass, mean, and
/// covariance — place equal weights on a regular simplex aligned with the
/// covariance eigenvectors around the mean.
fn covariance_extract(pm: &PseudoMoment, tol_ratio: f64) -> Result<AtomicMeasure> {
    let n = pm.basis.n();
    let vars = pm.basis.vars().to_vec();
    let m1 = moment_matrix(pm, 1);
    let r = numeric_rank(&m1, tol_ratio);
    if r == 0 {
        return Ok(AtomicMeasure {
            atoms: Vec::new(),
            clique: pm.clique.clone(),
        });
    }
    let mass = pm.mass();
    if mass <= MIN_WEIGHT {
        return Err(Error::ExtractionFailed(format!(
            "moment matrix has rank {r} but mass {mass:.3e}"
        )));
    }
    let mean: Vec<f64> = vars
        .iter()
        .map(|&v| pm.value(&Exponent::var(v, n)) / mass)
        .collect();
    let k = vars.len();
    let cov = Array2::from_shape_fn((k, k), |(a, b)| {
        let e = Exponent::var(vars[a], n).product(&Exponent::var(vars[b], n));
        pm.value(&e) / mass - mean[a] * mean[b]
    });
    // rank M_1 = 1 + rank(cov): spread the atoms along r-1 eigendirections
    let spread = r - 1;
    let mut points = vec![vec![0.0; n]; r];
    for (l, point) in points.iter_mut().enumerate() {
        for (vi, &v) in vars.iter().enumerate() {
            point[v] = mean[vi];
        }
        let _ = l;
    }
    if spread > 0 {
        let (evals, evecs) = sym_eig(&cov)?;
        // Vertices of a regular simplex: rows of the top eigenvector block
        // of I_r - J_r/r, scaled by √r — they sum to zero and have identity
        // second moment.
        let rf = r as f64;
        let centering = Array2::from_shape_fn((r, r), |(i, j)| {
            if i == j {
                1.0 - 1.0 / rf
            } else {
                -1.0 / rf
            }
        });
        let (_, simplex) = sym_eig(&centering)?;
        for (l, point) in points.iter_mut().enumerate() {
            for d in 0..spread {
                let col = k - 1 - d;
                let lam = evals[col].max(0.0);
                let dir = lam.sqrt() * rf.sqrt() * simplex[[l, r - 1 - d]];
                for (vi, &v) in vars.iter().enumerate() {
                    point[v] += dir * evecs[[vi, col]];
                }
            }
        }
    }
    let weighted: Vec<(Vec<f64>, f64)> = points
        .into_iter()
        .map(|p| (p, mass / r as f64))
        .collect();
    gate_atoms(pm, weighted, 2)
}

/// Symmetric eigendecomposition with eigenvalues ascending.
fn sym_eig(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    a.eigh(UPLO::Upper)
        .map_err(|e| Error::ExtractionFailed(format!("eigendecomposition failed: {e}")))
}

/// Solve for nonnegative weights by least-squares moment matching on all
/// monomials of degree `<= cap`, then apply the gates.
fn fit_and_gate(pm: &PseudoMoment, points: Vec<Vec<f64>>, cap: usize) -> Result<AtomicMeasure> {
    let fit: Vec<&Exponent> = pm
        .basis
        .entries()
        .iter()
        .filter(|e| e.degree() <= cap)
        .collect();
    let vand = Array2::from_shape_fn((fit.len(), points.len()), |(i, l)| fit[i].eval(&points[l]));
    let rhs = Array1::from_iter(fit.iter().map(|e| pm.value(e)));
    let weights = vand
        .least_squares(&rhs)
        .map_err(|e| Error::ExtractionFailed(format!("weight fit failed: {e}")))?
        .solution;
    let weighted = points
        .into_iter()
        .zip(weights.iter().copied())
        .collect::<Vec<_>>();
    gate_atoms(pm, weighted, cap)
}

/// Clip and validate candidate atoms; on success returns them sorted by
/// point (lexicographically), so the output order is reproducible.
fn gate_atoms(
    pm: &PseudoMoment,
    weighted: Vec<(Vec<f64>, f64)>,
    cap: usize,
) -> Result<AtomicMeasure> {
    let mut atoms = Vec::with_capacity(weighted.len());
    for (mut point, weight) in weighted {
        for x in &mut point {
            if *x < -COORD_CLIP {
                return Err(Error::ExtractionFailed(format!(
                    "atom coordinate {x:.3e} lies outside the nonnegative orthant"
                )));
            }
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        if !(weight > MIN_WEIGHT) {
            return Err(Error::ExtractionFailed(format!(
                "atom weight {weight:.3e} is not positive"
            )));
        }
        atoms.push(Atom { point, weight });
    }
    // the atoms must reproduce the pseudo-moments they were derived from
    let mut scale = 1.0f64;
    let mut worst = 0.0f64;
    for e in pm.basis.entries().iter().filter(|e| e.degree() <= cap) {
        let truth = pm.value(e);
        scale = scale.max(truth.abs());
        let rebuilt: f64 = atoms.iter().map(|a| a.weight * e.eval(&a.point)).sum();
        worst = worst.max((rebuilt - truth).abs());
    }
    if worst > MOMENT_GATE * scale {
        return Err(Error::ExtractionFailed(format!(
            "extracted atoms mismatch the pseudo-moments by {worst:.3e}"
        )));
    }
    atoms.sort_by(|a, b| {
        a.point
            .iter()
            .zip(&b.point)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or_else(|| a.weight.total_cmp(&b.weight))
    });
    Ok(AtomicMeasure {
        atoms,
        clique: pm.clique.clone(),
    })
}

/// Sum `weight · point · pointᵀ` over all atoms and report the entrywise
/// `ℓ₁` distance to the target matrix.
pub fn reconstruct_cp(measures: &[AtomicMeasure], a: &Array2<f64>) -> (Array2<f64>, f64) {
    let n = a.nrows();
    let mut rec = Array2::<f64>::zeros((n, n));
    for measure in measures {
        for atom in &measure.atoms {
            for i in 0..n {
                for j in 0..n {
                    rec[[i, j]] += atom.weight * atom.point[i] * atom.point[j];
                }
            }
        }
    }
    let residual = rec.iter().zip(a.iter()).map(|(x, y)| (x - y).abs()).sum();
    (rec, residual)
}

/// Sum `weight · u · wᵀ` over all atoms, where `u` is the first block of
/// the point (row variables) and `w` the second (column variables), and
/// report the entrywise `ℓ₁` distance to the target matrix.
pub fn reconstruct_nn(measures: &[AtomicMeasure], m: &Array2<f64>) -> (Array2<f64>, f64) {
    let (rows, cols) = m.dim();
    let mut rec = Array2::<f64>::zeros((rows, cols));
    for measure in measures {
        for atom in &measure.atoms {
            for i in 0..rows {
                for j in 0..cols {
                    rec[[i, j]] += atom.weight * atom.point[i] * atom.point[rows + j];
                }
            }
        }
    }
    let residual = rec.iter().zip(m.iter()).map(|(x, y)| (x - y).abs()).sum();
    (rec, residual)
}

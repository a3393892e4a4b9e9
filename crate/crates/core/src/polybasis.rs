//! Monomial exponents, graded-lexicographic bases, and sparse polynomials.
//!
//! Everything downstream (moment matrices, localizers, layouts) indexes
//! pseudo-moments by [`Exponent`] and enumerates truncated bases through
//! [`MonomialBasis`].  The ordering is graded lexicographic with
//! `x1 > x2 > ...`: lower total degree first, ties broken so that e.g. the
//! degree-2 monomials on two variables come out as `x1^2, x1*x2, x2^2`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

/// Exponent vector of a monomial in an ambient set of `n` variables.
///
/// Variables are indexed `0..n`; the entry at position `i` is the power of
/// `x_i`.  Ordering ([`Ord`]) is graded lexicographic.
#[derive(Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Exponent(Vec<u16>);

impl Exponent {
    /// The constant monomial `1` in `n` variables.
    pub fn zero(n: usize) -> Self {
        Exponent(vec![0; n])
    }

    /// The monomial `x_i` in `n` variables.
    pub fn var(i: usize, n: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        Exponent(e)
    }

    /// Build from an explicit power vector.
    pub fn from_powers(powers: Vec<u16>) -> Self {
        Exponent(powers)
    }

    /// Number of ambient variables.
    #[inline]
    pub fn n(&self) -> usize {
        self.0.len()
    }

    /// Power of `x_i`.
    #[inline]
    pub fn power(&self, i: usize) -> u16 {
        self.0[i]
    }

    /// Total degree.
    #[inline]
    pub fn degree(&self) -> usize {
        self.0.iter().map(|&p| p as usize).sum()
    }

    /// Indices of variables with a positive power, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| self.0[i] > 0).collect()
    }

    /// Whether every variable in the support lies in `vars` (sorted slice).
    pub fn supported_on(&self, vars: &[usize]) -> bool {
        (0..self.0.len()).all(|i| self.0[i] == 0 || vars.binary_search(&i).is_ok())
    }

    /// Exponent of the product monomial `x^self * x^other`.
    pub fn product(&self, other: &Exponent) -> Exponent {
        debug_assert_eq!(self.0.len(), other.0.len());
        Exponent(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(&a, &b)| a + b)
                .collect(),
        )
    }

    /// Evaluate the monomial at a point.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0)
            .map(|(i, &p)| x[i].powi(p as i32))
            .product()
    }
}

impl Ord for Exponent {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => other.0.cmp(&self.0), // descending lex within a degree
            ord => ord,
        }
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.degree() == 0 {
            return write!(f, "1");
        }
        let mut first = true;
        for (i, &p) in self.0.iter().enumerate() {
            if p == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if p == 1 {
                write!(f, "x{}", i + 1)?;
            } else {
                write!(f, "x{}^{}", i + 1, p)?;
            }
        }
        Ok(())
    }
}

/// All monomials of total degree `<= t` supported on a variable subset,
/// listed in graded-lexicographic order with O(1) position lookup.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    n: usize,
    vars: Vec<usize>,
    entries: Vec<Exponent>,
    index: HashMap<Exponent, usize>,
}

impl MonomialBasis {
    /// Basis of all monomials with support in `vars` and degree `<= t`,
    /// inside the ambient set of `n` variables.  `vars` must be sorted and
    /// duplicate-free.
    pub fn new(vars: &[usize], t: usize, n: usize) -> Self {
        Self::filtered(vars, t, n, |_| true)
    }

    /// As [`MonomialBasis::new`], keeping only exponents accepted by `keep`.
    pub fn filtered(vars: &[usize], t: usize, n: usize, keep: impl Fn(&Exponent) -> bool) -> Self {
        debug_assert!(vars.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(vars.iter().all(|&v| v < n));
        let mut entries = Vec::new();
        let mut current = vec![0u16; n];
        enumerate(vars, 0, t, &mut current, &mut entries, &keep);
        entries.sort();
        let index = entries
            .iter()
            .enumerate()
            .map(|(k, e)| (e.clone(), k))
            .collect();
        MonomialBasis {
            n,
            vars: vars.to_vec(),
            entries,
            index,
        }
    }

    /// Ambient variable count.
    pub fn n(&self) -> usize {
        self.n
    }

    /// The variable subset this basis is supported on.
    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    /// Number of monomials.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Monomials in graded-lex order.
    pub fn entries(&self) -> &[Exponent] {
        &self.entries
    }

    /// Position of a monomial, if present.
    pub fn index_of(&self, e: &Exponent) -> Option<usize> {
        self.index.get(e).copied()
    }
}

fn enumerate(
    vars: &[usize],
    pos: usize,
    budget: usize,
    current: &mut Vec<u16>,
    out: &mut Vec<Exponent>,
    keep: &impl Fn(&Exponent) -> bool,
) {
    if pos == vars.len() {
        let e = Exponent(current.clone());
        if keep(&e) {
            out.push(e);
        }
        return;
    }
    for p in 0..=budget {
        current[vars[pos]] = p as u16;
        enumerate(vars, pos + 1, budget - p, current, out, keep);
    }
    current[vars[pos]] = 0;
}

/// Sparse polynomial with real coefficients, keyed by exponent.
///
/// Zero coefficients are never stored, so `terms()` iterates exactly the
/// monomials present and `is_zero()` is a length check.
#[derive(Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Polynomial {
    n: usize,
    terms: BTreeMap<Exponent, f64>,
}

impl Polynomial {
    pub fn zero(n: usize) -> Self {
        Polynomial {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(c: f64, n: usize) -> Self {
        let mut p = Self::zero(n);
        p.add_term(Exponent::zero(n), c);
        p
    }

    /// The monomial `c * x^e`.
    pub fn monomial(e: Exponent, c: f64) -> Self {
        let mut p = Self::zero(e.n());
        p.add_term(e, c);
        p
    }

    /// Ambient variable count.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Add `c * x^e`, dropping the term if it cancels.
    pub fn add_term(&mut self, e: Exponent, c: f64) {
        debug_assert_eq!(e.n(), self.n);
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(e.clone()).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.remove(&e);
        }
    }

    /// Terms in graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, f64)> {
        self.terms.iter().map(|(e, &c)| (e, c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree (0 for the zero polynomial).
    pub fn degree(&self) -> usize {
        self.terms.keys().map(|e| e.degree()).max().unwrap_or(0)
    }

    /// `Some(c)` if the polynomial is the constant `c` (including zero).
    pub fn as_constant(&self) -> Option<f64> {
        if self.terms.is_empty() {
            return Some(0.0);
        }
        if self.terms.len() == 1 {
            let (e, c) = self.terms.iter().next().unwrap();
            if e.degree() == 0 {
                return Some(*c);
            }
        }
        None
    }

    /// Restriction to a variable subset: terms whose support is not contained
    /// in `vars` (sorted) are dropped, i.e. those variables are set to zero.
    pub fn restrict(&self, vars: &[usize]) -> Polynomial {
        let mut out = Self::zero(self.n);
        for (e, c) in self.terms() {
            if e.supported_on(vars) {
                out.add_term(e.clone(), c);
            }
        }
        out
    }

    /// Evaluate at a point of length `n`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms().map(|(e, c)| c * e.eval(x)).sum()
    }

    pub fn scale(&self, c: f64) -> Polynomial {
        let mut out = Self::zero(self.n);
        for (e, coeff) in self.terms() {
            out.add_term(e.clone(), c * coeff);
        }
        out
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.terms() {
            if first {
                write!(f, "{c}*{e:?}")?;
                first = false;
            } else if c >= 0.0 {
                write!(f, " + {c}*{e:?}")?;
            } else {
                write!(f, " - {}*{e:?}", -c)?;
            }
        }
        Ok(())
    }
}

/// Symmetric matrix with polynomial entries, used for matrix localizers.
#[derive(Clone, Debug)]
pub struct PolyMatrix {
    dim: usize,
    entries: Vec<Polynomial>, // row-major, dim x dim
}

impl PolyMatrix {
    /// Build from row-major entries; panics unless square and symmetric.
    pub fn new(dim: usize, entries: Vec<Polynomial>) -> Self {
        assert_eq!(entries.len(), dim * dim, "PolyMatrix must be square");
        for i in 0..dim {
            for j in (i + 1)..dim {
                assert!(
                    entries[i * dim + j] == entries[j * dim + i],
                    "PolyMatrix must be symmetric"
                );
            }
        }
        PolyMatrix { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> &Polynomial {
        &self.entries[i * self.dim + j]
    }

    /// Max total degree over the entries.
    pub fn degree(&self) -> usize {
        self.entries.iter().map(|p| p.degree()).max().unwrap_or(0)
    }

    /// Entrywise restriction (variables outside `vars` set to zero).
    pub fn restrict(&self, vars: &[usize]) -> PolyMatrix {
        PolyMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(|p| p.restrict(vars)).collect(),
        }
    }

    /// Principal submatrix on the rows/columns in `keep` (sorted indices).
    pub fn principal_submatrix(&self, keep: &[usize]) -> PolyMatrix {
        let entries = keep
            .iter()
            .flat_map(|&i| keep.iter().map(move |&j| self.entry(i, j).clone()))
            .collect();
        PolyMatrix {
            dim: keep.len(),
            entries,
        }
    }

    /// True if every entry is the zero polynomial.
    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|p| p.is_zero())
    }

    /// `Some(matrix of constants)` if no entry has positive degree.
    pub fn as_constant(&self) -> Option<Vec<f64>> {
        self.entries.iter().map(|p| p.as_constant()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binomial(n: usize, k: usize) -> usize {
        let mut acc = 1usize;
        for i in 0..k {
            acc = acc * (n - i) / (i + 1);
        }
        acc
    }

    #[test]
    fn smallest_bases() {
        let b = MonomialBasis::new(&[0], 1, 1);
        assert_eq!(b.entries(), &[Exponent::zero(1), Exponent::var(0, 1)]);

        let b = MonomialBasis::new(&[0, 1], 2, 2);
        assert_eq!(b.len(), 6);
        // graded lex: 1, x1, x2, x1^2, x1*x2, x2^2
        assert_eq!(b.entries()[0], Exponent::zero(2));
        assert_eq!(b.entries()[1], Exponent::var(0, 2));
        assert_eq!(b.entries()[2], Exponent::var(1, 2));
        assert_eq!(b.entries()[3], Exponent::from_powers(vec![2, 0]));
        assert_eq!(b.entries()[4], Exponent::from_powers(vec![1, 1]));
        assert_eq!(b.entries()[5], Exponent::from_powers(vec![0, 2]));
    }

    #[test]
    fn basis_count_matches_binomial() {
        // |basis(U, t)| = C(|U| + t, t)
        let vars: Vec<usize> = (0..12).collect();
        let b = MonomialBasis::new(&vars, 3, 12);
        assert_eq!(b.len(), binomial(15, 3));
        assert_eq!(b.len(), 455);
        for u in 0..=6usize {
            for t in 0..=4usize {
                let vars: Vec<usize> = (0..u).collect();
                let b = MonomialBasis::new(&vars, t, 8);
                assert_eq!(b.len(), binomial(u + t, t), "u={u} t={t}");
            }
        }
    }

    #[test]
    fn index_of_positions() {
        let b1 = MonomialBasis::new(&[0, 1], 1, 2);
        assert_eq!(b1.index_of(&Exponent::zero(2)), Some(0));
        assert_eq!(b1.index_of(&Exponent::from_powers(vec![1, 1])), None);

        let b2 = MonomialBasis::new(&[0, 1], 2, 2);
        assert_eq!(b2.index_of(&Exponent::from_powers(vec![1, 1])), Some(4));
    }

    #[test]
    fn restrict_drops_escaping_terms() {
        let n = 3;
        let x = |i: usize| Exponent::var(i, n);
        let mut p = Polynomial::zero(n);
        p.add_term(x(0).product(&x(1)), 1.0); // x1*x2
        p.add_term(x(0).product(&x(0)), 1.0); // x1^2
        let r = p.restrict(&[0]);
        assert_eq!(r.terms().count(), 1);
        assert_eq!(r.terms().next().unwrap().0, &x(0).product(&x(0)));

        // (3 + 2*x2 + x2*x3) restricted to {x1, x3} keeps only the constant
        let mut q = Polynomial::zero(n);
        q.add_term(Exponent::zero(n), 3.0);
        q.add_term(x(1).clone(), 2.0);
        q.add_term(x(1).product(&x(2)), 1.0);
        let r = q.restrict(&[0, 2]);
        assert_eq!(r.as_constant(), Some(3.0));
    }

    #[test]
    fn product_exponent_adds() {
        let a = Exponent::from_powers(vec![2, 1, 0]);
        let b = Exponent::from_powers(vec![0, 1, 3]);
        assert_eq!(a.product(&b), Exponent::from_powers(vec![2, 2, 3]));
        let one = Exponent::zero(3);
        assert_eq!(one.product(&a), a);
    }

    proptest! {
        #[test]
        fn index_of_is_inverse_of_entries(u in 1usize..5, t in 0usize..4) {
            let vars: Vec<usize> = (0..u).collect();
            let b = MonomialBasis::new(&vars, t, u + 1);
            for (k, e) in b.entries().iter().enumerate() {
                prop_assert_eq!(b.index_of(e), Some(k));
            }
            // strictly increasing order
            for w in b.entries().windows(2) {
                prop_assert!(w[0] < w[1]);
            }
        }

        #[test]
        fn restrict_composes_as_intersection(
            coeffs in proptest::collection::vec((0u16..3, 0u16..3, 0u16..3, -5.0f64..5.0), 0..8),
            mask_a in 0usize..8,
            mask_b in 0usize..8,
        ) {
            let n = 3;
            let mut p = Polynomial::zero(n);
            for (a, b, c, v) in coeffs {
                p.add_term(Exponent::from_powers(vec![a, b, c]), v);
            }
            let sel = |m: usize| (0..n).filter(|i| m & (1 << i) != 0).collect::<Vec<_>>();
            let (ua, ub) = (sel(mask_a), sel(mask_b));
            let inter: Vec<usize> = ua.iter().copied().filter(|i| ub.contains(i)).collect();
            prop_assert_eq!(p.restrict(&ua).restrict(&ub), p.restrict(&inter));
        }

        #[test]
        fn product_degree_adds(a in proptest::collection::vec(0u16..4, 4), b in proptest::collection::vec(0u16..4, 4)) {
            let (ea, eb) = (Exponent::from_powers(a), Exponent::from_powers(b));
            prop_assert_eq!(ea.product(&eb).degree(), ea.degree() + eb.degree());
        }
    }
}

//! Graded state spaces, metrics and truncated correlator families.
//!
//! A correlator family stores the values `Y_n(a_1, ..., a_n)` of a potential
//! on a homogeneous basis for `3 <= n <= N`. Only sorted multi-indices are
//! stored; any other ordering is recovered through the Koszul sign.
//!
//! Invariants:
//! - stored keys are sorted, lie in `[0, dim)` and have arity in `[3, N]`
//! - no stored key repeats an odd index
//! - every stored value is nonzero and has an even number of odd indices

use std::collections::BTreeMap;

use num::Zero;

use crate::error::{Error, Result};
use crate::poly::{Monomial, Poly};
use crate::scalar::{factorial, invert_matrix, Coeff, Rational};

/// Homogeneous basis `∂_0, ..., ∂_{dim-1}` with parities in `{0, 1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GradedBasis {
    parity: Vec<u8>,
    labels: Vec<String>,
}

impl GradedBasis {
    pub fn new(parity: Vec<u8>, labels: Vec<String>) -> Result<Self> {
        if parity.len() != labels.len() {
            return Err(Error::Invalid(format!(
                "{} parities but {} labels",
                parity.len(),
                labels.len()
            )));
        }
        if let Some(p) = parity.iter().find(|&&p| p > 1) {
            return Err(Error::Invalid(format!("parity {p} is not 0 or 1")));
        }
        Ok(GradedBasis { parity, labels })
    }

    /// Purely even basis labelled `e0, e1, ...`.
    pub fn even(dim: usize) -> Self {
        GradedBasis {
            parity: vec![0; dim],
            labels: (0..dim).map(|i| format!("e{i}")).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.parity.len()
    }

    pub fn parity(&self, a: usize) -> u8 {
        self.parity[a]
    }

    pub fn parities(&self) -> &[u8] {
        &self.parity
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn is_even(&self) -> bool {
        self.parity.iter().all(|&p| p == 0)
    }

    pub fn total_parity(&self, index: &[usize]) -> u8 {
        index.iter().map(|&a| self.parity[a]).sum::<u8>() % 2
    }
}

/// Even, nondegenerate, graded-symmetric bilinear form with cached inverse.
#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    g: Vec<Vec<Rational>>,
    inv: Vec<Vec<Rational>>,
}

impl Metric {
    pub fn new(basis: &GradedBasis, g: Vec<Vec<Rational>>) -> Result<Self> {
        let d = basis.dim();
        if g.len() != d || g.iter().any(|r| r.len() != d) {
            return Err(Error::Invalid(format!("metric must be {d}x{d}")));
        }
        for a in 0..d {
            for b in 0..d {
                if basis.parity(a) != basis.parity(b) && !g[a][b].is_zero() {
                    return Err(Error::Invalid(format!("metric entry ({a},{b}) pairs opposite parities")));
                }
                let sign = if basis.parity(a) * basis.parity(b) == 1 { -1 } else { 1 };
                if g[a][b] != g[b][a].scale(&crate::scalar::rat(sign)) {
                    return Err(Error::Invalid(format!("metric is not graded symmetric at ({a},{b})")));
                }
            }
        }
        let inv = invert_matrix(&g).ok_or_else(|| Error::Singular("metric is degenerate".into()))?;
        Ok(Metric { g, inv })
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn get(&self, a: usize, b: usize) -> &Rational {
        &self.g[a][b]
    }

    pub fn inv(&self, a: usize, b: usize) -> &Rational {
        &self.inv[a][b]
    }

    pub fn matrix(&self) -> &[Vec<Rational>] {
        &self.g
    }

    pub fn inverse(&self) -> &[Vec<Rational>] {
        &self.inv
    }

    /// Nonzero entries `(a, b, g^{ab})` of the inverse metric.
    pub fn inverse_entries(&self) -> Vec<(usize, usize, Rational)> {
        let d = self.dim();
        let mut out = Vec::new();
        for a in 0..d {
            for b in 0..d {
                if !self.inv[a][b].is_zero() {
                    out.push((a, b, self.inv[a][b].clone()));
                }
            }
        }
        out
    }
}

/// Sign of rearranging `x_0, ..., x_{k-1}` into `x_{perm[0]}, ..., x_{perm[k-1]}`
/// where `parities[i]` is the parity of `x_i`: `(-1)` to the number of
/// inversions between odd elements.
pub fn koszul_sign(perm: &[usize], parities: &[u8]) -> i32 {
    let mut odd_inversions = 0usize;
    for i in 0..perm.len() {
        if parities[perm[i]] == 0 {
            continue;
        }
        for j in i + 1..perm.len() {
            if parities[perm[j]] == 1 && perm[i] > perm[j] {
                odd_inversions += 1;
            }
        }
    }
    if odd_inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Sorts a multi-index, returning the sorted key and the Koszul sign of the
/// sort. The sign is `0` when an odd index repeats.
pub fn sort_with_sign(index: &[usize], basis: &GradedBasis) -> (Vec<usize>, i32) {
    let mut perm: Vec<usize> = (0..index.len()).collect();
    perm.sort_by_key(|&i| (index[i], i));
    let sorted: Vec<usize> = perm.iter().map(|&i| index[i]).collect();
    if sorted.windows(2).any(|w| w[0] == w[1] && basis.parity(w[0]) == 1) {
        return (sorted, 0);
    }
    let parities: Vec<u8> = index.iter().map(|&a| basis.parity(a)).collect();
    (sorted, koszul_sign(&perm, &parities))
}

/// All sorted multi-indices of length `n` over `[0, dim)` that can carry a
/// nonzero correlator: no repeated odd index and an even number of odd ones.
pub fn admissible_keys(basis: &GradedBasis, n: usize) -> Vec<Vec<usize>> {
    fn rec(basis: &GradedBasis, n: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            if basis.total_parity(cur) == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for a in start..basis.dim() {
            if basis.parity(a) == 1 && cur.last() == Some(&a) {
                continue;
            }
            cur.push(a);
            rec(basis, n, a, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(basis, n, 0, &mut Vec::with_capacity(n), &mut out);
    out
}

/// Multiplicities of each index in a sorted key, as `1 / prod(m!)`.
pub fn inverse_multiplicity_factorial(key: &[usize]) -> Rational {
    let mut acc = crate::scalar::rat(1);
    let mut i = 0;
    while i < key.len() {
        let mut j = i;
        while j < key.len() && key[j] == key[i] {
            j += 1;
        }
        acc = acc / factorial(j - i);
        i = j;
    }
    acc
}

/// Correlators `Y_3, ..., Y_N` over a coefficient ring `R`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelatorFamily<R> {
    basis: GradedBasis,
    truncation: usize,
    values: BTreeMap<Vec<usize>, R>,
}

impl<R: Coeff> CorrelatorFamily<R> {
    pub fn new(basis: GradedBasis, truncation: usize) -> Result<Self> {
        if truncation < 3 {
            return Err(Error::Invalid(format!("truncation {truncation} is below 3")));
        }
        Ok(CorrelatorFamily { basis, truncation, values: BTreeMap::new() })
    }

    pub fn basis(&self) -> &GradedBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    fn check_index(&self, index: &[usize]) -> Result<()> {
        let n = index.len();
        if n < 3 || n > self.truncation {
            return Err(Error::Arity { arity: n, min: 3, max: self.truncation });
        }
        if let Some(&a) = index.iter().find(|&&a| a >= self.dim()) {
            return Err(Error::Invalid(format!("index {a} out of range for dimension {}", self.dim())));
        }
        Ok(())
    }

    /// Stores `value` at a sorted key. Zero values clear the entry.
    pub fn insert(&mut self, key: Vec<usize>, value: R) -> Result<()> {
        self.check_index(&key)?;
        if key.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Invalid(format!("key {key:?} is not sorted")));
        }
        let (_, sign) = sort_with_sign(&key, &self.basis);
        if value.is_zero() {
            self.values.remove(&key);
            return Ok(());
        }
        if sign == 0 {
            return Err(Error::Invalid(format!("key {key:?} repeats an odd index")));
        }
        if self.basis.total_parity(&key) == 1 {
            return Err(Error::Invalid(format!("key {key:?} is odd, its correlator must vanish")));
        }
        self.values.insert(key, value);
        Ok(())
    }

    /// Stores `value` as `Y(index)` for an arbitrary ordering of the index.
    pub fn insert_unsorted(&mut self, index: &[usize], value: R) -> Result<()> {
        self.check_index(index)?;
        let (key, sign) = sort_with_sign(index, &self.basis);
        if sign == 0 {
            if value.is_zero() {
                return Ok(());
            }
            return Err(Error::Invalid(format!("index {index:?} repeats an odd index")));
        }
        let v = if sign < 0 { -value } else { value };
        self.insert(key, v)
    }

    /// `Y_n(index)` for any ordering, with the Koszul sign applied.
    pub fn get(&self, index: &[usize]) -> Result<R> {
        self.check_index(index)?;
        Ok(self.value(index))
    }

    /// Like [`Self::get`] but without bounds checks; zero outside storage.
    pub fn value(&self, index: &[usize]) -> R {
        if index.windows(2).all(|w| w[0] <= w[1]) {
            if index.windows(2).any(|w| w[0] == w[1] && self.basis.parity(w[0]) == 1) {
                return R::zero();
            }
            return self.values.get(index).cloned().unwrap_or_else(R::zero);
        }
        let (key, sign) = sort_with_sign(index, &self.basis);
        match (sign, self.values.get(&key)) {
            (0, _) | (_, None) => R::zero(),
            (1, Some(v)) => v.clone(),
            (_, Some(v)) => -v.clone(),
        }
    }

    /// Stored nonzero entries in key order.
    pub fn entries(&self) -> impl Iterator<Item = (&Vec<usize>, &R)> {
        self.values.iter()
    }

    pub fn entries_of_arity(&self, n: usize) -> impl Iterator<Item = (&Vec<usize>, &R)> {
        self.values.iter().filter(move |(k, _)| k.len() == n)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Applies `f` to every value, dropping zeros.
    pub fn map<S: Coeff>(&self, f: impl Fn(&R) -> S) -> CorrelatorFamily<S> {
        let values = self
            .values
            .iter()
            .map(|(k, v)| (k.clone(), f(v)))
            .filter(|(_, v)| !v.is_zero())
            .collect();
        CorrelatorFamily { basis: self.basis.clone(), truncation: self.truncation, values }
    }

    /// Keeps only arities up to `n`.
    pub fn truncated(&self, n: usize) -> CorrelatorFamily<R> {
        let n = n.min(self.truncation);
        CorrelatorFamily {
            basis: self.basis.clone(),
            truncation: n,
            values: self
                .values
                .iter()
                .filter(|(k, _)| k.len() <= n)
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }
}

impl CorrelatorFamily<Rational> {
    /// Lifts rational values to constant polynomials.
    pub fn to_poly(&self) -> CorrelatorFamily<Poly> {
        self.map(|c| Poly::constant(c.clone()))
    }

    /// The potential `Φ = Σ_n (1/n!) Y_n(x, ..., x)` as a polynomial whose
    /// variable `a` is the coordinate `x^a`.
    pub fn potential_view(&self) -> Poly {
        let mut phi = Poly::zero();
        for (key, v) in &self.values {
            let m = Monomial::from_exponents(key.iter().map(|&a| (a as u32, 1)));
            phi.add_term(m, v * inverse_multiplicity_factorial(key));
        }
        phi
    }

    /// Inverse of [`Self::potential_view`]. Terms of degree below 3 or above
    /// `truncation` are rejected.
    pub fn from_polynomial(basis: GradedBasis, truncation: usize, phi: &Poly) -> Result<Self> {
        let mut fam = CorrelatorFamily::new(basis, truncation)?;
        for (m, c) in phi.terms() {
            let mut key = Vec::new();
            for &(v, e) in m.factors() {
                key.extend(std::iter::repeat(v as usize).take(e as usize));
            }
            fam.check_index(&key)?;
            let value = c / inverse_multiplicity_factorial(&key);
            fam.insert(key, value)?;
        }
        Ok(fam)
    }
}

/// Conversion of a coefficient into a polynomial coefficient.
pub trait AsPoly {
    fn as_poly(&self) -> Poly;
}

impl AsPoly for Rational {
    fn as_poly(&self) -> Poly {
        Poly::constant(self.clone())
    }
}

impl AsPoly for Poly {
    fn as_poly(&self) -> Poly {
        self.clone()
    }
}

/// Formal shift `Σ_b s^b ∂_b` with components that are linear forms in
/// shift symbols. Only even directions may be shifted.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct FormalShiftVector {
    components: BTreeMap<usize, Poly>,
}

impl FormalShiftVector {
    /// Shift by one fresh symbol per listed index: `s^a = var(first_var + k)`
    /// for the `k`-th listed index.
    pub fn symbols(indices: &[usize], first_var: u32) -> Self {
        let components = indices
            .iter()
            .enumerate()
            .map(|(k, &a)| (a, Poly::var(first_var + k as u32)))
            .collect();
        FormalShiftVector { components }
    }

    pub fn from_components(components: BTreeMap<usize, Poly>) -> Result<Self> {
        for (a, p) in &components {
            if p.terms().any(|(m, _)| m.degree() != 1) {
                return Err(Error::Invalid(format!("shift component at {a} is not a linear form")));
            }
        }
        Ok(FormalShiftVector {
            components: components.into_iter().filter(|(_, p)| !p.is_zero()).collect(),
        })
    }

    pub fn components(&self) -> &BTreeMap<usize, Poly> {
        &self.components
    }

    pub fn sum(&self, other: &FormalShiftVector) -> FormalShiftVector {
        let mut components = self.components.clone();
        for (a, p) in &other.components {
            let e = components.entry(*a).or_insert_with(Poly::zero);
            *e = &*e + p;
        }
        components.retain(|_, p| !p.is_zero());
        FormalShiftVector { components }
    }
}

/// Correlators of the potential shifted by `s`:
/// `Ŷ_n(a) = Σ_M (1/M!) Σ_b s^{b_1}...s^{b_M} Y_{n+M}(a, b)` for `n + M <= N`.
/// Coefficients are truncated at total symbol degree `N - n`.
pub fn shift_correlators<R: Coeff + AsPoly>(
    family: &CorrelatorFamily<R>,
    shift: &FormalShiftVector,
) -> Result<CorrelatorFamily<Poly>> {
    let basis = family.basis().clone();
    for &a in shift.components.keys() {
        if a >= basis.dim() {
            return Err(Error::Invalid(format!("shift index {a} out of range")));
        }
        if basis.parity(a) == 1 {
            return Err(Error::OddShift(a));
        }
    }
    let n_max = family.truncation();
    let dirs: Vec<(usize, &Poly)> = shift.components.iter().map(|(a, p)| (*a, p)).collect();

    // Multisets of shift directions by size, with weight Π s^{b}^{m_b} / m_b!.
    let mut by_size: Vec<Vec<(Vec<usize>, Poly)>> = vec![vec![(Vec::new(), Poly::constant(crate::scalar::rat(1)))]];
    for m in 1..=n_max.saturating_sub(3) {
        let mut level = Vec::new();
        for (dirs_prev, _) in &by_size[m - 1] {
            let start = dirs_prev.last().copied().unwrap_or(0);
            for (k, _) in dirs.iter().enumerate().skip(start) {
                let mut next = dirs_prev.clone();
                next.push(k);
                level.push((next, Poly::zero()));
            }
        }
        for entry in level.iter_mut() {
            let mut w = Poly::constant(crate::scalar::rat(1));
            for &k in &entry.0 {
                w = &w * dirs[k].1;
            }
            let key: Vec<usize> = entry.0.clone();
            entry.1 = w.scale(&inverse_multiplicity_factorial(&key));
        }
        by_size.push(level);
    }

    let mut out = CorrelatorFamily::new(basis.clone(), n_max)?;
    for n in 3..=n_max {
        for key in admissible_keys(&basis, n) {
            let mut acc = Poly::zero();
            for m in 0..=(n_max - n) {
                for (ks, w) in &by_size[m] {
                    let mut idx = key.clone();
                    idx.extend(ks.iter().map(|&k| dirs[k].0));
                    let y = family.value(&idx);
                    if y.is_zero() {
                        continue;
                    }
                    acc = acc + &y.as_poly() * w;
                }
            }
            let acc = acc.truncate((n_max - n) as u32);
            if !acc.is_zero() {
                out.insert(key, acc)?;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, ratio};

    fn super_basis() -> GradedBasis {
        GradedBasis::new(vec![0, 1, 1, 0], vec!["1".into(), "t1".into(), "t2".into(), "t12".into()]).unwrap()
    }

    #[test]
    fn koszul_sign_of_swaps() {
        assert_eq!(koszul_sign(&[1, 0], &[1, 1]), -1);
        assert_eq!(koszul_sign(&[1, 0], &[1, 0]), 1);
        assert_eq!(koszul_sign(&[2, 1, 0], &[1, 1, 1]), -1);
        assert_eq!(koszul_sign(&[0, 1, 2], &[1, 1, 1]), 1);
    }

    #[test]
    fn unsorted_lookup_uses_koszul_sign() {
        let mut f = CorrelatorFamily::<Rational>::new(super_basis(), 4).unwrap();
        f.insert(vec![0, 1, 2], rat(1)).unwrap();
        assert_eq!(f.get(&[0, 2, 1]).unwrap(), rat(-1));
        assert_eq!(f.get(&[2, 0, 1]).unwrap(), rat(-1));
        assert_eq!(f.get(&[1, 1, 0]).unwrap(), rat(0));
        assert!(f.insert(vec![0, 0, 1], rat(1)).is_err());
        assert!(f.insert(vec![1, 1, 3], rat(1)).is_err());
    }

    #[test]
    fn arity_out_of_range_is_an_error() {
        let f = CorrelatorFamily::<Rational>::new(GradedBasis::even(1), 4).unwrap();
        assert!(matches!(f.get(&[0, 0]), Err(Error::Arity { .. })));
        assert!(matches!(f.get(&[0; 5]), Err(Error::Arity { .. })));
    }

    #[test]
    fn potential_round_trip() {
        let mut f = CorrelatorFamily::<Rational>::new(GradedBasis::even(2), 5).unwrap();
        f.insert(vec![0, 0, 1], rat(1)).unwrap();
        f.insert(vec![1, 1, 1, 1], ratio(3, 2)).unwrap();
        f.insert(vec![0, 1, 1, 1, 1], rat(-2)).unwrap();
        let phi = f.potential_view();
        // x0^2 x1 / 2 carries Y(0,0,1) = 1.
        assert_eq!(phi.coefficient(&Monomial::from_exponents([(0, 2), (1, 1)])), ratio(1, 2));
        assert_eq!(phi.coefficient(&Monomial::from_exponents([(1, 4)])), ratio(3, 2) / rat(24));
        let back = CorrelatorFamily::from_polynomial(GradedBasis::even(2), 5, &phi).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn one_dimensional_shift() {
        let mut f = CorrelatorFamily::<Rational>::new(GradedBasis::even(1), 4).unwrap();
        f.insert(vec![0; 3], rat(2)).unwrap();
        f.insert(vec![0; 4], rat(5)).unwrap();
        let s = FormalShiftVector::symbols(&[0], 0);
        let g = shift_correlators(&f, &s).unwrap();
        let expected = Poly::constant(rat(2)) + Poly::var(0).scale(&rat(5));
        assert_eq!(g.get(&[0; 3]).unwrap(), expected);
        assert_eq!(g.get(&[0; 4]).unwrap(), Poly::constant(rat(5)));
    }

    #[test]
    fn shift_on_odd_index_is_rejected() {
        let f = CorrelatorFamily::<Rational>::new(super_basis(), 4).unwrap();
        let s = FormalShiftVector::symbols(&[1], 0);
        assert_eq!(shift_correlators(&f, &s).unwrap_err(), Error::OddShift(1));
    }

    #[test]
    fn graded_symmetric_metric_is_accepted() {
        let b = super_basis();
        let mut g = vec![vec![rat(0); 4]; 4];
        g[0][3] = rat(1);
        g[3][0] = rat(1);
        g[1][2] = rat(1);
        g[2][1] = rat(-1);
        assert!(Metric::new(&b, g.clone()).is_ok());
        g[2][1] = rat(1);
        assert!(Metric::new(&b, g).is_err());
    }
}

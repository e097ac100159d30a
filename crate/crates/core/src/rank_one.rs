//! Rank-one theories `Φ(x) = Σ C_n x^n / n!` with metric `g(∂, ∂) = 1`.
//!
//! For `C_3 = 1` the tensor product becomes multiplication of the series
//! `U(η) = Σ B_n η^n`, where `x = Σ B_n y^{n+1}/(n+1)!` inverts `y = Φ''(x)`.
//! The general case goes through universal polynomials `P_n` in the
//! coefficients of both factors, obtained from the normalized case by
//! restoring powers of `C_3'` and `C_3''`.

use std::sync::{Mutex, OnceLock};

use num::{One, Zero};

use crate::error::{Error, Result};
use crate::frobenius::{CheckReport, FrobeniusModel, Violation};
use crate::poly::{Monomial, Poly};
use crate::scalar::{factorial, rat, Coeff, Rational};
use crate::series::{CorrelatorFamily, GradedBasis, Metric};
use crate::tensor::tensor_correlators;

/// Coefficients `C_3, ..., C_N`.
#[derive(Clone, Debug, PartialEq)]
pub struct RankOneTheory<R = Rational> {
    coeffs: Vec<R>,
}

impl<R: Coeff> RankOneTheory<R> {
    /// `coeffs[0]` is `C_3`.
    pub fn new(coeffs: Vec<R>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Invalid("a rank-one theory needs at least C3".into()));
        }
        Ok(RankOneTheory { coeffs })
    }

    pub fn unit(truncation: usize) -> Self {
        let mut coeffs = vec![R::zero(); truncation.max(3) - 2];
        coeffs[0] = R::one();
        RankOneTheory { coeffs }
    }

    pub fn truncation(&self) -> usize {
        self.coeffs.len() + 2
    }

    /// `C_n`, zero beyond the truncation.
    pub fn c(&self, n: usize) -> R {
        if n < 3 {
            return R::zero();
        }
        self.coeffs.get(n - 3).cloned().unwrap_or_else(R::zero)
    }

    pub fn coeffs(&self) -> &[R] {
        &self.coeffs
    }

    pub fn truncated(&self, n: usize) -> Self {
        RankOneTheory { coeffs: self.coeffs.iter().take(n.max(3) - 2).cloned().collect() }
    }

    pub fn is_invertible(&self) -> bool {
        !self.coeffs[0].is_zero()
    }

    /// `C_i ↦ λ^{i-2} C_i`, the rescaling `∂ ↦ λ∂` that keeps `g(∂, ∂) = 1`
    /// after dividing the metric by `λ²`.
    pub fn rescaled(&self, lambda: &Rational) -> Self {
        let mut p = Rational::one();
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| {
                p *= lambda;
                c.scale(&p)
            })
            .collect();
        RankOneTheory { coeffs }
    }

    /// The one-dimensional Frobenius model with `Y_n(∂, ..., ∂) = C_n`.
    pub fn to_model(&self) -> FrobeniusModel<R> {
        let basis = GradedBasis::even(1);
        let metric = Metric::new(&basis, vec![vec![rat(1)]]).expect("unit metric");
        let mut y = CorrelatorFamily::new(basis, self.truncation()).expect("truncation at least 3");
        for n in 3..=self.truncation() {
            y.insert(vec![0; n], self.c(n)).expect("valid key");
        }
        FrobeniusModel::new(metric, y, None, None).expect("consistent model")
    }

    pub fn from_model(model: &FrobeniusModel<R>) -> Result<Self> {
        if model.dim() != 1 || !model.basis().is_even() || *model.metric().get(0, 0) != rat(1) {
            return Err(Error::Invalid("a rank-one model needs one even direction with g = 1".into()));
        }
        Ok(RankOneTheory {
            coeffs: (3..=model.truncation()).map(|n| model.correlators().value(&vec![0; n])).collect(),
        })
    }
}

/// `U(η) = Σ B_n η^n` with `B_0 = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct USeries<R = Rational> {
    b: Vec<R>,
}

impl<R: Coeff> USeries<R> {
    pub fn new(b: Vec<R>) -> Result<Self> {
        if b.first().map_or(true, |b0| !b0.is_one()) {
            return Err(Error::Invalid("U must start with B0 = 1".into()));
        }
        Ok(USeries { b })
    }

    pub fn coeffs(&self) -> &[R] {
        &self.b
    }

    /// Highest power of `η` kept.
    pub fn order(&self) -> usize {
        self.b.len() - 1
    }

    pub fn mul(&self, other: &Self) -> Self {
        let len = self.b.len().min(other.b.len());
        USeries { b: series_mul(&self.b, &other.b, len) }
    }

    /// Coefficients of `-log U(η)`, starting at `η^0`.
    pub fn neg_log(&self) -> Vec<R> {
        let len = self.b.len();
        let mut w = self.b.clone();
        w[0] = R::zero();
        let mut power = w.clone();
        let mut out = vec![R::zero(); len];
        for k in 1..len {
            // -log(1 + w) = Σ (-1)^k w^k / k
            let c = Rational::new(if k % 2 == 0 { 1.into() } else { (-1).into() }, (k as i64).into());
            for (o, p) in out.iter_mut().zip(&power) {
                *o = o.clone() + p.scale(&c);
            }
            power = series_mul(&power, &w, len);
        }
        out
    }
}

fn series_mul<R: Coeff>(a: &[R], b: &[R], len: usize) -> Vec<R> {
    let mut out = vec![R::zero(); len];
    for (i, x) in a.iter().enumerate().take(len) {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(len - i) {
            if !y.is_zero() {
                out[i + j] = out[i + j].clone() + x.clone() * y.clone();
            }
        }
    }
    out
}

/// Compositional inverse of `f(x) = x + f_2 x² + ...` given as coefficients
/// `f[0] = 0, f[1] = 1, ...`, to the same length.
pub fn series_reversion<R: Coeff>(f: &[R]) -> Result<Vec<R>> {
    let len = f.len();
    if len < 2 || !f[0].is_zero() || !f[1].is_one() {
        return Err(Error::NotNormalized("series must be x + O(x²)".into()));
    }
    let mut g = vec![R::zero(); len];
    g[1] = R::one();
    for k in 2..len {
        // [y^k] Σ_{j>=2} f_j g(y)^j with the current g, whose y^k term is still 0.
        let mut power = series_mul(&g, &g, len);
        let mut acc = R::zero();
        for fj in f.iter().take(k + 1).skip(2) {
            acc = acc + fj.clone() * power[k].clone();
            power = series_mul(&power, &g, len);
        }
        g[k] = -acc;
    }
    Ok(g)
}

/// `U` of a theory with `C_3 = 1`, to order `N - 3`.
pub fn u_transform<R: Coeff>(t: &RankOneTheory<R>) -> Result<USeries<R>> {
    if !t.c(3).is_one() {
        return Err(Error::NotNormalized(format!("C3 = {} but must be 1", t.c(3))));
    }
    let big_n = t.truncation();
    // Φ''(x) = Σ_{m>=1} C_{m+2} x^m / m!
    let f: Vec<R> = (0..=big_n - 2)
        .map(|m| if m == 0 { R::zero() } else { t.c(m + 2).scale(&(rat(1) / factorial(m))) })
        .collect();
    let g = series_reversion(&f)?;
    let b = (0..=big_n - 3).map(|n| g[n + 1].scale(&factorial(n + 1))).collect();
    Ok(USeries { b })
}

/// Inverse of [`u_transform`]: the theory with `C_3 = 1` whose `U` is given.
pub fn inverse_u_transform<R: Coeff>(u: &USeries<R>) -> RankOneTheory<R> {
    let len = u.b.len() + 1;
    let g: Vec<R> = (0..len)
        .map(|k| if k == 0 { R::zero() } else { u.b[k - 1].scale(&(rat(1) / factorial(k))) })
        .collect();
    let f = series_reversion(&g).expect("B0 = 1");
    RankOneTheory { coeffs: (1..len).map(|m| f[m].scale(&factorial(m))).collect() }
}

/// Polynomial variable standing for `C_i` of the first factor.
pub fn left_var(i: usize) -> u32 {
    2 * (i as u32 - 3)
}

/// Polynomial variable standing for `C_i` of the second factor.
pub fn right_var(i: usize) -> u32 {
    2 * (i as u32 - 3) + 1
}

/// Display name of a rank-one variable: `C4'` or `C4''`.
pub fn var_name(v: u32) -> String {
    let i = v / 2 + 3;
    if v % 2 == 0 {
        format!("C{i}'")
    } else {
        format!("C{i}''")
    }
}

/// `((k', l'), (k'', l''))`: total index and number of factors per side of a
/// monomial in the rank-one variables.
pub fn bidegree(m: &Monomial) -> ((usize, usize), (usize, usize)) {
    let mut left = (0, 0);
    let mut right = (0, 0);
    for &(v, e) in m.factors() {
        let i = (v / 2 + 3) as usize;
        let side = if v % 2 == 0 { &mut left } else { &mut right };
        side.0 += i * e as usize;
        side.1 += e as usize;
    }
    (left, right)
}

/// Symbolic theory with `C_3 = 1` and `C_i` a variable for `4 <= i <= n`.
fn normalized_symbolic(n: usize, var: fn(usize) -> u32) -> RankOneTheory<Poly> {
    let coeffs = (3..=n).map(|i| if i == 3 { Poly::one() } else { Poly::var(var(i)) }).collect();
    RankOneTheory { coeffs }
}

/// Multiplies a normalized `P_n` monomial by the powers of `C_3'` and `C_3''`
/// that make it homogeneous: exponent `n - 2 - k + 2l` on each side.
fn restore_c3(n: usize, p: &Poly) -> Result<Poly> {
    let mut out = Poly::zero();
    for (m, c) in p.terms() {
        let ((k1, l1), (k2, l2)) = bidegree(m);
        let i = (n + 2 * l1) as i64 - 2 - k1 as i64;
        let j = (n + 2 * l2) as i64 - 2 - k2 as i64;
        if i < 0 || j < 0 {
            return Err(Error::Invalid(format!("P{n} has a term needing a negative power of C3")));
        }
        let mut factors: Vec<(u32, u32)> = m.factors().to_vec();
        if i > 0 {
            factors.push((left_var(3), i as u32));
        }
        if j > 0 {
            factors.push((right_var(3), j as u32));
        }
        out.add_term(Monomial::from_exponents(factors), c.clone());
    }
    Ok(out)
}

fn polynomial_cache() -> &'static Mutex<Vec<Poly>> {
    static CACHE: OnceLock<Mutex<Vec<Poly>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(Vec::new()))
}

/// Universal polynomials `P_3, ..., P_{n_max}` with `C_n = P_n(C', C'')` in
/// the variables [`left_var`] and [`right_var`].
pub fn universal_polynomials(n_max: usize) -> Result<Vec<Poly>> {
    let mut cache = polynomial_cache().lock().unwrap();
    if cache.len() + 2 < n_max {
        let a = u_transform(&normalized_symbolic(n_max, left_var))?;
        let b = u_transform(&normalized_symbolic(n_max, right_var))?;
        let normalized = inverse_u_transform(&a.mul(&b));
        *cache = (3..=n_max).map(|n| restore_c3(n, &normalized.c(n))).collect::<Result<_>>()?;
    }
    Ok(cache[..n_max.max(3) - 2].to_vec())
}

pub fn universal_polynomial(n: usize) -> Result<Poly> {
    Ok(universal_polynomials(n)?.pop().expect("n >= 3"))
}

/// Tensor product of rank-one theories, truncated at the smaller truncation.
pub fn tensor_rank1<R: Coeff>(t1: &RankOneTheory<R>, t2: &RankOneTheory<R>) -> Result<RankOneTheory<R>> {
    let n = t1.truncation().min(t2.truncation());
    let polys = universal_polynomials(n)?;
    let value = |v: u32| {
        let i = (v / 2 + 3) as usize;
        if v % 2 == 0 {
            t1.c(i)
        } else {
            t2.c(i)
        }
    };
    Ok(RankOneTheory { coeffs: polys.iter().map(|p| p.eval(value)).collect() })
}

/// Tensor product of normalized theories by multiplying their `U`-series.
pub fn tensor_normalized<R: Coeff>(t1: &RankOneTheory<R>, t2: &RankOneTheory<R>) -> Result<RankOneTheory<R>> {
    Ok(inverse_u_transform(&u_transform(t1)?.mul(&u_transform(t2)?)))
}

/// Compares [`tensor_rank1`] with the diagonal-class tensor product of the
/// corresponding one-dimensional models for `n <= order`.
pub fn cross_validate<R: Coeff>(t1: &RankOneTheory<R>, t2: &RankOneTheory<R>, order: usize) -> Result<CheckReport> {
    let a = tensor_rank1(&t1.truncated(order), &t2.truncated(order))?;
    let b = tensor_correlators(&t1.truncated(order).to_model(), &t2.truncated(order).to_model(), Some(order))?;
    let mut report = CheckReport::default();
    for n in 3..=order {
        let lhs = a.c(n);
        let rhs = b.correlators().value(&vec![0; n]);
        if lhs != rhs {
            report.violations.push(Violation {
                check: "rank-one pathways".into(),
                location: format!("C{n}"),
                lhs: lhs.to_string(),
                rhs: rhs.to_string(),
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    fn theory(cs: &[i64]) -> RankOneTheory {
        RankOneTheory::new(cs.iter().map(|&c| rat(c)).collect()).unwrap()
    }

    #[test]
    fn cubic_has_trivial_u() {
        let u = u_transform(&RankOneTheory::<Rational>::unit(8)).unwrap();
        assert_eq!(u.coeffs()[0], rat(1));
        assert!(u.coeffs()[1..].iter().all(Zero::is_zero));
    }

    #[test]
    fn u_of_quadratic_second_derivative() {
        // Φ'' = x + x²/2, so x = y - y²/2 + y³/2 - ...
        let u = u_transform(&theory(&[1, 1, 0, 0])).unwrap();
        assert_eq!(u.coeffs()[..3], [rat(1), rat(-1), rat(3)]);
    }

    #[test]
    fn u_transform_round_trip() {
        let t = RankOneTheory::new(vec![rat(1), ratio(2, 3), rat(-5), ratio(1, 7), rat(4)]).unwrap();
        let back = inverse_u_transform(&u_transform(&t).unwrap());
        assert_eq!(back, t);
    }

    #[test]
    fn printed_low_order_values() {
        let c4 = tensor_rank1(&theory(&[1, 2]), &theory(&[1, 3])).unwrap();
        assert_eq!(c4.c(4), rat(5));
        let c5 = tensor_rank1(&theory(&[1, 1, 0]), &theory(&[1, 1, 0])).unwrap();
        assert_eq!(c5.c(5), rat(5));
    }

    #[test]
    fn both_degenerate_gives_zero() {
        let t = tensor_rank1(&theory(&[0, 3, -1, 2, 5, 1]), &theory(&[0, 1, 1, 1, 1, 1])).unwrap();
        assert!(t.coeffs().iter().all(Zero::is_zero));
    }

    #[test]
    fn scaling_matches_universal_polynomials() {
        let t1 = theory(&[3, 1, 2, -1, 4]);
        let t2 = theory(&[2, -2, 1, 0, 1]);
        let lambda1 = rat(1) / t1.c(3);
        let lambda2 = rat(1) / t2.c(3);
        let normalized = tensor_normalized(&t1.rescaled(&lambda1), &t2.rescaled(&lambda2)).unwrap();
        let direct = tensor_rank1(&t1, &t2).unwrap();
        let undo = normalized.rescaled(&(t1.c(3) * t2.c(3)));
        assert_eq!(direct, undo);
    }

    #[test]
    fn neg_log_u() {
        let u = USeries::new(vec![rat(1), rat(2), rat(0)]).unwrap();
        // -log(1 + 2η) = -2η + 2η² - ...
        assert_eq!(u.neg_log(), vec![rat(0), rat(-2), rat(2)]);
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(u_transform(&theory(&[2, 1])), Err(Error::NotNormalized(_))));
        assert!(USeries::new(vec![rat(2)]).is_err());
        assert!(RankOneTheory::<Rational>::new(vec![]).is_err());
    }
}

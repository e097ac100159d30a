//! Tensor product of truncated Frobenius models through the diagonal class
//! of `M̄_{0,n}`, with the product identity, Euler field and the
//! compatibility of base-point shifts.

use std::collections::{BTreeMap, HashMap};

use num::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frobenius::{CheckReport, EulerData, FrobeniusModel, OperadicTree};
use crate::m0n::{diagonal_with_limit, DiagonalClass, DEFAULT_N_MAX, HARD_N_MAX};
use crate::poly::Poly;
use crate::scalar::{Coeff, Rational};
use crate::series::{admissible_keys, shift_correlators, CorrelatorFamily, FormalShiftVector, GradedBasis, Metric};

/// Product basis `∂_{a'a''} = ∂'_{a'} ⊗ ∂''_{a''}`, flattened as
/// `a' * dim'' + a''`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorIndexMap {
    left: GradedBasis,
    right: GradedBasis,
    product: GradedBasis,
}

impl TensorIndexMap {
    pub fn new(left: &GradedBasis, right: &GradedBasis) -> Self {
        let mut parity = Vec::new();
        let mut labels = Vec::new();
        for a in 0..left.dim() {
            for b in 0..right.dim() {
                parity.push((left.parity(a) + right.parity(b)) % 2);
                labels.push(format!("{}*{}", left.labels()[a], right.labels()[b]));
            }
        }
        let product = GradedBasis::new(parity, labels).expect("parities are 0 or 1");
        TensorIndexMap { left: left.clone(), right: right.clone(), product }
    }

    pub fn left(&self) -> &GradedBasis {
        &self.left
    }

    pub fn right(&self) -> &GradedBasis {
        &self.right
    }

    pub fn product(&self) -> &GradedBasis {
        &self.product
    }

    pub fn index(&self, a: usize, b: usize) -> usize {
        a * self.right.dim() + b
    }

    pub fn split(&self, i: usize) -> (usize, usize) {
        (i / self.right.dim(), i % self.right.dim())
    }

    /// `g_{(a'a''),(b'b'')} = (-1)^{ã'' b̃'} g'_{a'b'} g''_{a''b''}`.
    pub fn metric(&self, g1: &Metric, g2: &Metric) -> Result<Metric> {
        let d = self.product.dim();
        let mut g = vec![vec![Rational::zero(); d]; d];
        for (i, row) in g.iter_mut().enumerate() {
            let (a1, a2) = self.split(i);
            for (j, entry) in row.iter_mut().enumerate() {
                let (b1, b2) = self.split(j);
                let v = g1.get(a1, b1) * g2.get(a2, b2);
                *entry = if self.right.parity(a2) * self.left.parity(b1) == 1 { -v } else { v };
            }
        }
        Metric::new(&self.product, g)
    }

    /// `ε(γ', γ'')`: sign of moving all primed factors in front of all double
    /// primed ones in `(γ'_1 ⊗ γ''_1) ... (γ'_n ⊗ γ''_n)`.
    fn regroup_sign(&self, first: &[usize], second: &[usize]) -> i32 {
        let mut odd_second = 0u32;
        let mut total = 0u32;
        for (a, b) in first.iter().zip(second) {
            total += odd_second * self.left.parity(*a) as u32;
            odd_second += self.right.parity(*b) as u32;
        }
        if total % 2 == 1 {
            -1
        } else {
            1
        }
    }
}

/// The largest arity the tensor product can be computed to by default.
pub fn default_order<R: Coeff>(m1: &FrobeniusModel<R>, m2: &FrobeniusModel<R>) -> usize {
    m1.truncation().min(m2.truncation()).min(DEFAULT_N_MAX)
}

/// `e = e' ⊗ e''`.
pub fn tensor_identity<R: Coeff>(m1: &FrobeniusModel<R>, m2: &FrobeniusModel<R>) -> Result<usize> {
    let e1 = m1.identity().ok_or(Error::MissingIdentity)?;
    let e2 = m2.identity().ok_or(Error::MissingIdentity)?;
    Ok(TensorIndexMap::new(m1.basis(), m2.basis()).index(e1, e2))
}

/// Euler field of the product for factors with identities of equal weight
/// `d`: `d_{(a'a''),(b'b'')} = d'_{a'b'} δ + δ d''_{a''b''} - d δ δ`, shift
/// `r'` placed in the slots `(a', e'')` and `r''` in `(e', a'')`, and
/// `D = D' + D'' - 2d`.
pub fn tensor_euler<R: Coeff>(m1: &FrobeniusModel<R>, m2: &FrobeniusModel<R>) -> Result<EulerData> {
    let eu1 = m1.euler().ok_or(Error::MissingEuler)?;
    let eu2 = m2.euler().ok_or(Error::MissingEuler)?;
    let e1 = m1.identity().ok_or(Error::MissingIdentity)?;
    let e2 = m2.identity().ok_or(Error::MissingIdentity)?;
    if eu1.d0 != eu2.d0 {
        return Err(Error::EulerMismatch(eu1.d0.to_string(), eu2.d0.to_string()));
    }
    let w = eu1.d0.clone();
    let map = TensorIndexMap::new(m1.basis(), m2.basis());
    let dim = map.product().dim();
    let mut d = vec![vec![Rational::zero(); dim]; dim];
    let mut r = vec![Rational::zero(); dim];
    for (i, row) in d.iter_mut().enumerate() {
        let (a1, a2) = map.split(i);
        for (j, entry) in row.iter_mut().enumerate() {
            let (b1, b2) = map.split(j);
            let mut v = Rational::zero();
            if a2 == b2 {
                v += &eu1.d[a1][b1];
            }
            if a1 == b1 {
                v += &eu2.d[a2][b2];
            }
            if a1 == b1 && a2 == b2 {
                v -= &w;
            }
            *entry = v;
        }
    }
    for (a, x) in eu1.r.iter().enumerate() {
        r[map.index(a, e2)] += x;
    }
    for (b, x) in eu2.r.iter().enumerate() {
        r[map.index(e1, b)] += x;
    }
    Ok(EulerData {
        d,
        r,
        conformal_dim: &eu1.conformal_dim + &eu2.conformal_dim - &w - &w,
        d0: w,
    })
}

/// Values `Y(σ)(a)` for every basis stratum `σ` of one `M̄_{0,n}`, indexed
/// by codimension and position in the basis.
struct StratumValues<R> {
    by_codim: Vec<Vec<R>>,
}

fn stratum_values<R: Coeff>(
    model: &FrobeniusModel<R>,
    trees: &[Vec<OperadicTree>],
    idx: &[usize],
) -> Result<StratumValues<R>> {
    let by_codim = trees
        .iter()
        .map(|level| level.iter().map(|t| t.evaluate(model, idx)).collect::<Result<Vec<R>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(StratumValues { by_codim })
}

fn arity_correlators<R: Coeff>(
    m1: &FrobeniusModel<R>,
    m2: &FrobeniusModel<R>,
    map: &TensorIndexMap,
    diag: &DiagonalClass,
) -> Result<Vec<(Vec<usize>, R)>> {
    let ring = diag.ring();
    let n = diag.n;
    let trees: Vec<Vec<OperadicTree>> =
        (0..=ring.dim()).map(|k| ring.basis(k).iter().map(OperadicTree::new).collect()).collect();
    let keys = admissible_keys(map.product(), n);
    let split_keys: Vec<(Vec<usize>, Vec<usize>)> =
        keys.iter().map(|k| k.iter().map(|&i| map.split(i)).unzip()).collect();

    let mut needed1: Vec<Vec<usize>> = split_keys.iter().map(|(a, _)| a.clone()).collect();
    let mut needed2: Vec<Vec<usize>> = split_keys.iter().map(|(_, b)| b.clone()).collect();
    needed1.sort();
    needed1.dedup();
    needed2.sort();
    needed2.dedup();
    let table = |model: &FrobeniusModel<R>, needed: Vec<Vec<usize>>| -> Result<HashMap<Vec<usize>, StratumValues<R>>> {
        needed
            .into_par_iter()
            .map(|idx| stratum_values(model, &trees, &idx).map(|v| (idx, v)))
            .collect()
    };
    let t1 = table(m1, needed1)?;
    let t2 = table(m2, needed2)?;
    let dim = ring.dim();

    Ok(keys
        .into_par_iter()
        .zip(split_keys.into_par_iter())
        .filter_map(|(key, (a1, a2))| {
            let v1 = &t1[&a1];
            let v2 = &t2[&a2];
            let mut acc = R::zero();
            for (k, i, j, g) in &diag.entries {
                let x = &v1.by_codim[*k][*i];
                if x.is_zero() {
                    continue;
                }
                let y = &v2.by_codim[dim - *k][*j];
                if y.is_zero() {
                    continue;
                }
                acc = acc + (x.clone() * y.clone()).scale(g);
            }
            if acc.is_zero() {
                return None;
            }
            let v = if map.regroup_sign(&a1, &a2) < 0 { -acc } else { acc };
            Some((key, v))
        })
        .collect())
}

/// `Y_n = (Y' ⊗ Y'')(Δ_{M̄_{0,n}})` for `3 <= n <= order`, with metric
/// `g' ⊗ g''`. The product carries `e' ⊗ e''` when both factors have
/// identities and the tensor Euler field when both also have Euler data.
/// `order` defaults to [`default_order`] and may not exceed either
/// truncation or the largest `n` the diagonal is available for.
pub fn tensor_correlators<R: Coeff>(
    m1: &FrobeniusModel<R>,
    m2: &FrobeniusModel<R>,
    order: Option<usize>,
) -> Result<FrobeniusModel<R>> {
    let order = order.unwrap_or_else(|| default_order(m1, m2));
    let available = m1.truncation().min(m2.truncation());
    if order > available {
        return Err(Error::TooLarge { n: order, max: available });
    }
    if order > HARD_N_MAX {
        return Err(Error::TooLarge { n: order, max: HARD_N_MAX });
    }
    if order < 3 {
        return Err(Error::Invalid(format!("order {order} is below 3")));
    }
    let map = TensorIndexMap::new(m1.basis(), m2.basis());
    let metric = map.metric(m1.metric(), m2.metric())?;
    let mut family = CorrelatorFamily::new(map.product().clone(), order)?;
    for n in 3..=order {
        let diag = diagonal_with_limit(n, HARD_N_MAX)?;
        for (key, v) in arity_correlators(m1, m2, &map, &diag)? {
            family.insert(key, v)?;
        }
    }
    let identity = tensor_identity(m1, m2).ok();
    let euler = match (m1.euler(), m2.euler(), identity) {
        (Some(_), Some(_), Some(_)) => Some(tensor_euler(m1, m2)?),
        _ => None,
    };
    FrobeniusModel::new(metric, family, euler, identity)
}

/// Matrix of `𝒱' ⊗ id + id ⊗ 𝒱''` in the product basis.
pub fn tensor_grading_operator(v1: &[Vec<Rational>], v2: &[Vec<Rational>]) -> Vec<Vec<Rational>> {
    let (d1, d2) = (v1.len(), v2.len());
    let dim = d1 * d2;
    let mut out = vec![vec![Rational::zero(); dim]; dim];
    for a1 in 0..d1 {
        for a2 in 0..d2 {
            for b1 in 0..d1 {
                for b2 in 0..d2 {
                    let mut v = Rational::zero();
                    if a2 == b2 {
                        v += &v1[a1][b1];
                    }
                    if a1 == b1 {
                        v += &v2[a2][b2];
                    }
                    out[a1 * d2 + a2][b1 * d2 + b2] = v;
                }
            }
        }
    }
    out
}

/// The linear map `θ_τ` from `A' ⊔ A''` into the product basis, sending
/// `∂'_{a'}` to `∂_{a' e''}` and `∂''_{a''}` to `∂_{e' a''}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThetaTau {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

impl ThetaTau {
    pub fn new<R: Coeff>(m1: &FrobeniusModel<R>, m2: &FrobeniusModel<R>) -> Result<Self> {
        let e1 = m1.identity().ok_or(Error::MissingIdentity)?;
        let e2 = m2.identity().ok_or(Error::MissingIdentity)?;
        let map = TensorIndexMap::new(m1.basis(), m2.basis());
        Ok(ThetaTau {
            left: (0..m1.dim()).map(|a| map.index(a, e2)).collect(),
            right: (0..m2.dim()).map(|b| map.index(e1, b)).collect(),
        })
    }

    /// Image of the pair of shifts `(s', s'')`.
    pub fn apply(&self, s1: &FormalShiftVector, s2: &FormalShiftVector) -> Result<FormalShiftVector> {
        let mut components: BTreeMap<usize, Poly> = BTreeMap::new();
        for (a, p) in s1.components() {
            let e = components.entry(self.left[*a]).or_insert_with(Poly::zero);
            *e = &*e + p;
        }
        for (b, p) in s2.components() {
            let e = components.entry(self.right[*b]).or_insert_with(Poly::zero);
            *e = &*e + p;
        }
        FormalShiftVector::from_components(components)
    }
}

/// Generic formal shift with one symbol per even direction of `basis`,
/// numbered from `first_var`.
pub fn generic_shift(basis: &GradedBasis, first_var: u32) -> FormalShiftVector {
    let even: Vec<usize> = (0..basis.dim()).filter(|&a| basis.parity(a) == 0).collect();
    FormalShiftVector::symbols(&even, first_var)
}

/// Compares shift-then-tensor with tensor-then-shift along `θ_τ` for the
/// given formal shifts. Coefficients are compared for `n <= order` up to
/// symbol degree `order - n`.
pub fn theta_tau_compatibility(
    m1: &FrobeniusModel,
    m2: &FrobeniusModel,
    s1: &FormalShiftVector,
    s2: &FormalShiftVector,
    order: usize,
) -> Result<CheckReport> {
    let theta = ThetaTau::new(m1, m2)?;
    let m1 = m1.truncated(order);
    let m2 = m2.truncated(order);
    let shifted1 = m1.with_correlators(shift_correlators(m1.correlators(), s1)?)?;
    let shifted2 = m2.with_correlators(shift_correlators(m2.correlators(), s2)?)?;
    let side_a = tensor_correlators(&shifted1, &shifted2, Some(order))?;
    let product = tensor_correlators(&m1, &m2, Some(order))?;
    let side_b = shift_correlators(product.correlators(), &theta.apply(s1, s2)?)?;

    let mut report = CheckReport::default();
    let mut keys: Vec<&Vec<usize>> = side_a.correlators().entries().map(|(k, _)| k).collect();
    keys.extend(side_b.entries().map(|(k, _)| k));
    keys.sort();
    keys.dedup();
    for key in keys {
        let n = key.len();
        let depth = (order - n) as u32;
        let lhs = side_a.correlators().value(key).truncate(depth);
        let rhs = side_b.value(key).truncate(depth);
        if lhs != rhs {
            report.violations.push(crate::frobenius::Violation {
                check: "theta-tau compatibility".into(),
                location: format!("Y{n}{key:?}"),
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
    use crate::frobenius::{conformality_check, flat_identity_check, quasi_homogeneity_check, wdvv_check};
    use crate::models;
    use crate::scalar::rat;

    #[test]
    fn unit_times_unit_is_unit() {
        let u = models::unit_theory(6);
        let t = tensor_correlators(&u, &u, None).unwrap();
        assert!(t.correlators().entries().eq(u.correlators().entries()));
        assert_eq!(t.identity(), Some(0));
        let eu = t.euler().unwrap();
        assert_eq!(eu.conformal_dim, rat(2));
        assert_eq!(eu.d, vec![vec![rat(1)]]);
    }

    #[test]
    fn unit_factor_is_neutral() {
        let u = models::unit_theory(6);
        let p = models::projective_plane(6);
        let t = tensor_correlators(&p, &u, None).unwrap();
        for (key, v) in p.correlators().entries() {
            assert_eq!(&t.correlators().value(key), v);
        }
        assert_eq!(t.correlators().len(), p.correlators().len());
        assert_eq!(t.euler(), p.euler());
    }

    #[test]
    fn arity_three_is_the_product() {
        let a = models::projective_line(4);
        let b = models::two_dim_power(rat(3), 4, 4);
        let t = tensor_correlators(&a, &b, Some(4)).unwrap();
        let map = TensorIndexMap::new(a.basis(), b.basis());
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    let (x, y, z) = (map.split(i), map.split(j), map.split(k));
                    let expect = a.correlators().value(&[x.0, y.0, z.0]) * b.correlators().value(&[x.1, y.1, z.1]);
                    assert_eq!(t.correlators().value(&[i, j, k]), expect);
                }
            }
        }
    }

    #[test]
    fn projective_line_squared_is_consistent() {
        let p = models::projective_line(6);
        let t = tensor_correlators(&p, &p, None).unwrap();
        assert!(wdvv_check(&t).passed());
        assert!(flat_identity_check(&t).unwrap().passed());
        assert!(conformality_check(&t).unwrap().passed());
        assert!(quasi_homogeneity_check(&t).unwrap().passed());
    }

    #[test]
    fn order_beyond_inputs_is_rejected() {
        let p = models::projective_line(5);
        assert!(matches!(tensor_correlators(&p, &p, Some(6)), Err(Error::TooLarge { .. })));
        let q = models::projective_line(10);
        assert!(matches!(tensor_correlators(&q, &q, Some(9)), Err(Error::TooLarge { n: 9, max: 8 })));
    }

    #[test]
    fn missing_identity_is_an_error() {
        let p = models::projective_line(4);
        let bare = FrobeniusModel::new(p.metric().clone(), p.correlators().clone(), None, None).unwrap();
        assert_eq!(tensor_identity(&p, &bare), Err(Error::MissingIdentity));
        assert!(tensor_correlators(&p, &bare, None).unwrap().identity().is_none());
    }

    #[test]
    fn euler_weight_mismatch_is_an_error() {
        let p = models::projective_line(4);
        let mut eu = p.euler().unwrap().clone();
        eu.d0 = rat(2);
        let q = p.clone().with_euler(Some(eu)).unwrap();
        assert!(matches!(tensor_euler(&p, &q), Err(Error::EulerMismatch(..))));
    }

    #[test]
    fn super_factor_tensor_is_consistent() {
        let ext = models::exterior_algebra();
        let p = models::projective_line(3);
        let t = tensor_correlators(&ext, &p, Some(3)).unwrap();
        assert!(wdvv_check(&t).passed());
        assert!(flat_identity_check(&t).unwrap().passed());
        let t2 = tensor_correlators(&ext, &ext, Some(3)).unwrap();
        assert!(wdvv_check(&t2).passed());
        assert!(flat_identity_check(&t2).unwrap().passed());
    }

    #[test]
    fn identity_shift_compatibility() {
        let a = models::projective_line(5);
        let b = models::two_dim_power(rat(2), 4, 5);
        let s1 = FormalShiftVector::symbols(&[0], 0);
        let s2 = FormalShiftVector::symbols(&[0], 1);
        assert!(theta_tau_compatibility(&a, &b, &s1, &s2, 5).unwrap().passed());
        let zero = FormalShiftVector::default();
        assert!(theta_tau_compatibility(&a, &b, &zero, &zero, 5).unwrap().passed());
    }
}

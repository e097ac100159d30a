//! Small reference Frobenius models with known potentials.

use num::{One, Zero};

use crate::frobenius::{EulerData, FrobeniusModel};
use crate::scalar::{rat, ratio, Rational};
use crate::series::{CorrelatorFamily, GradedBasis, Metric};

fn diag(entries: &[Rational]) -> Vec<Vec<Rational>> {
    (0..entries.len())
        .map(|i| (0..entries.len()).map(|j| if i == j { entries[i].clone() } else { Rational::zero() }).collect())
        .collect()
}

fn antidiagonal(dim: usize) -> Vec<Vec<Rational>> {
    (0..dim)
        .map(|i| (0..dim).map(|j| if i + j + 1 == dim { rat(1) } else { rat(0) }).collect())
        .collect()
}

fn rational_pow(q: &Rational, k: usize) -> Rational {
    (0..k).fold(Rational::one(), |acc, _| acc * q)
}

/// One-dimensional theory with `Φ = x³/6`.
pub fn unit_theory(truncation: usize) -> FrobeniusModel {
    let basis = GradedBasis::even(1);
    let metric = Metric::new(&basis, vec![vec![rat(1)]]).unwrap();
    let mut y = CorrelatorFamily::new(basis, truncation).unwrap();
    y.insert(vec![0, 0, 0], rat(1)).unwrap();
    let euler = EulerData { d: vec![vec![rat(1)]], r: vec![rat(0)], conformal_dim: rat(2), d0: rat(1) };
    FrobeniusModel::new(metric, y, Some(euler), Some(0)).unwrap()
}

fn two_dim_frame(truncation: usize) -> (Metric, CorrelatorFamily<Rational>) {
    let basis = GradedBasis::even(2);
    let metric = Metric::new(&basis, antidiagonal(2)).unwrap();
    let mut y = CorrelatorFamily::new(basis, truncation).unwrap();
    y.insert(vec![0, 0, 1], rat(1)).unwrap();
    (metric, y)
}

/// `Φ = x0² x1 / 2 + c e^{β x1}` with `E = x0 ∂_0 + (2/β) ∂_1`.
pub fn two_dim_exponential(c: Rational, beta: Rational, truncation: usize) -> FrobeniusModel {
    assert!(!beta.is_zero(), "β must be nonzero");
    let (metric, mut y) = two_dim_frame(truncation);
    for n in 3..=truncation {
        let v = &c * rational_pow(&beta, n);
        y.insert(vec![1; n], v).unwrap();
    }
    let euler = EulerData {
        d: diag(&[rat(1), rat(0)]),
        r: vec![rat(0), rat(2) / &beta],
        conformal_dim: rat(1),
        d0: rat(1),
    };
    FrobeniusModel::new(metric, y, Some(euler), Some(0)).unwrap()
}

/// `Φ = x0² x1 / 2 + c x1^k / k!` with `E = x0 ∂_0 + (2/(k-1)) x1 ∂_1`.
pub fn two_dim_power(c: Rational, k: usize, truncation: usize) -> FrobeniusModel {
    assert!(k >= 3, "power must be at least 3");
    let (metric, mut y) = two_dim_frame(truncation);
    if k <= truncation {
        y.insert(vec![1; k], c).unwrap();
    }
    let alpha = ratio(2, k as i64 - 1);
    let euler = EulerData {
        d: diag(&[rat(1), alpha.clone()]),
        r: vec![rat(0), rat(0)],
        conformal_dim: rat(1) + alpha,
        d0: rat(1),
    };
    FrobeniusModel::new(metric, y, Some(euler), Some(0)).unwrap()
}

/// Quantum cohomology of `P¹`: `Φ = x0² x1 / 2 + e^{x1}`.
pub fn projective_line(truncation: usize) -> FrobeniusModel {
    two_dim_exponential(rat(1), rat(1), truncation)
}

/// Numbers of rational plane curves of degree `1..=4` through `3d - 1` points.
pub const PLANE_CURVE_COUNTS: [i64; 4] = [1, 1, 12, 620];

/// Quantum cohomology of `P²` in the basis `1, p, p²`.
pub fn projective_plane(truncation: usize) -> FrobeniusModel {
    projective_plane_with_counts(truncation, &PLANE_CURVE_COUNTS)
}

/// `Φ = x0² x2 / 2 + x0 x1² / 2 + Σ_d N_d e^{d x1} x2^{3d-1} / (3d-1)!` with
/// the given `N_d`. Degrees whose terms exceed the truncation are ignored;
/// degrees that are needed but missing are treated as zero.
pub fn projective_plane_with_counts(truncation: usize, counts: &[i64]) -> FrobeniusModel {
    let basis = GradedBasis::even(3);
    let metric = Metric::new(&basis, antidiagonal(3)).unwrap();
    let mut y = CorrelatorFamily::new(basis, truncation).unwrap();
    y.insert(vec![0, 0, 2], rat(1)).unwrap();
    y.insert(vec![0, 1, 1], rat(1)).unwrap();
    for (i, &nd) in counts.iter().enumerate() {
        let d = i + 1;
        let p = 3 * d - 1;
        if p > truncation {
            break;
        }
        for k in 0..=truncation.saturating_sub(p) {
            if k + p < 3 {
                continue;
            }
            let mut key = vec![1; k];
            key.extend(vec![2; p]);
            y.insert(key, rat(nd) * rational_pow(&rat(d as i64), k)).unwrap();
        }
    }
    let euler = EulerData {
        d: diag(&[rat(1), rat(0), rat(-1)]),
        r: vec![rat(0), rat(3), rat(0)],
        conformal_dim: rat(0),
        d0: rat(1),
    };
    FrobeniusModel::new(metric, y, Some(euler), Some(0)).unwrap()
}

/// Exterior algebra on two odd generators `θ1, θ2` with basis
/// `1, θ1, θ2, θ1θ2`, pairing by the coefficient of `θ1θ2`.
pub fn exterior_algebra() -> FrobeniusModel {
    let basis = GradedBasis::new(
        vec![0, 1, 1, 0],
        ["1", "t1", "t2", "t1t2"].iter().map(|s| s.to_string()).collect(),
    )
    .unwrap();
    let mut g = vec![vec![rat(0); 4]; 4];
    g[0][3] = rat(1);
    g[3][0] = rat(1);
    g[1][2] = rat(1);
    g[2][1] = rat(-1);
    let metric = Metric::new(&basis, g).unwrap();
    let mut y = CorrelatorFamily::new(basis, 3).unwrap();
    y.insert(vec![0, 0, 3], rat(1)).unwrap();
    y.insert(vec![0, 1, 2], rat(1)).unwrap();
    let euler = EulerData {
        d: diag(&[rat(1), ratio(1, 2), ratio(1, 2), rat(0)]),
        r: vec![rat(0); 4],
        conformal_dim: rat(1),
        d0: rat(1),
    };
    FrobeniusModel::new(metric, y, Some(euler), Some(0)).unwrap()
}

//! Numeric semisimple data: idempotents, canonical coordinates, metric
//! weights and their first derivatives at a point, special initial
//! conditions `(u, η, v)`, their tensor law and the `Pⁿ × Pᵐ` closed forms.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg};

use nalgebra::{DMatrix, DVector};
use num::{Num, One, Zero};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::frobenius::FrobeniusModel;
use crate::scalar::to_f64;

pub type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NumericOptions {
    pub tolerance: f64,
    pub seed: u64,
    pub retries: usize,
}

impl Default for NumericOptions {
    fn default() -> Self {
        NumericOptions { tolerance: 1e-10, seed: 0, retries: 8 }
    }
}

/// Idempotents `e_i`, weights `η_i = g(e_i, e_i)` and canonical
/// coordinates at one point, with first derivatives when the truncation
/// allows.
#[derive(Clone, Debug)]
pub struct SemisimplePointData {
    pub u: Vec<C64>,
    pub eta: Vec<C64>,
    /// `idempotents[i][a]` is the `∂_a` component of `e_i`.
    pub idempotents: Vec<Vec<C64>>,
    /// `d_idempotents[i][a]` is `∂_a e_i`.
    pub d_idempotents: Option<Vec<Vec<Vec<C64>>>>,
    /// `d_eta[i][a]` is `∂_a η_i`.
    pub d_eta: Option<Vec<Vec<C64>>>,
}

/// `(u, η, v)` with `v[i][j]` the coefficient of `e_j` in `𝒱 e_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpecialInitialConditions<T = C64> {
    pub u: Vec<T>,
    pub eta: Vec<T>,
    pub v: Vec<Vec<T>>,
}

fn to_c(q: &crate::Rational) -> C64 {
    C64::new(to_f64(q), 0.0)
}

/// `∂_{idx} Φ` at `x`, from the stored correlators.
fn potential_derivative(model: &FrobeniusModel, idx: &[usize], x: &[C64]) -> C64 {
    let mut need = vec![0usize; model.dim()];
    for &a in idx {
        need[a] += 1;
    }
    let mut total = C64::zero();
    'entries: for (key, y) in model.correlators().entries() {
        if key.len() < idx.len() {
            continue;
        }
        let mut count = vec![0usize; model.dim()];
        for &a in key {
            count[a] += 1;
        }
        let mut term = to_c(y);
        for a in 0..model.dim() {
            if count[a] < need[a] {
                continue 'entries;
            }
            let k = count[a] - need[a];
            if k > 0 {
                let fact: f64 = (1..=k).map(|i| i as f64).product();
                term *= x[a].powu(k as u32) / fact;
            }
        }
        total += term;
    }
    total
}

/// Structure constants at `x`: `product[a][b][c]` is the `∂_c` component of
/// `∂_a ∘ ∂_b`.
struct Multiplication {
    dim: usize,
    product: Vec<Vec<Vec<C64>>>,
}

impl Multiplication {
    fn at(model: &FrobeniusModel, x: &[C64]) -> Self {
        let dim = model.dim();
        let ginv = model.metric().inverse_entries();
        let mut product = vec![vec![vec![C64::zero(); dim]; dim]; dim];
        for a in 0..dim {
            for b in a..dim {
                for (e, c, g) in &ginv {
                    let v = potential_derivative(model, &[a, b, *e], x) * to_f64(g);
                    product[a][b][*c] += v;
                }
                if a != b {
                    product[b][a] = product[a][b].clone();
                }
            }
        }
        Multiplication { dim, product }
    }

    fn mul(&self, v: &[C64], w: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::zero(); self.dim];
        for a in 0..self.dim {
            if v[a] == C64::zero() {
                continue;
            }
            for b in 0..self.dim {
                let s = v[a] * w[b];
                for c in 0..self.dim {
                    out[c] += s * self.product[a][b][c];
                }
            }
        }
        out
    }

    /// Matrix of `v ∘ ·`.
    fn operator(&self, v: &[C64]) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for b in 0..self.dim {
            let mut unit = vec![C64::zero(); self.dim];
            unit[b] = C64::one();
            let col = self.mul(v, &unit);
            for c in 0..self.dim {
                m[(c, b)] = col[c];
            }
        }
        m
    }
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn bilinear(model: &FrobeniusModel, v: &[C64], w: &[C64]) -> C64 {
    let mut s = C64::zero();
    for a in 0..model.dim() {
        for b in 0..model.dim() {
            let g = model.metric().get(a, b);
            if !g.is_zero() {
                s += v[a] * w[b] * to_f64(g);
            }
        }
    }
    s
}

/// Eigenvalues and eigenvectors of a matrix with simple spectrum, or `None`
/// when two eigenvalues are closer than `tol` relative to the spectral scale.
fn simple_eigensystem(m: &DMatrix<C64>, tol: f64) -> Option<Vec<(C64, Vec<C64>)>> {
    let n = m.nrows();
    let eig = m.clone().schur().eigenvalues()?;
    let scale = eig.iter().map(|z| z.norm()).fold(1.0, f64::max);
    for i in 0..n {
        for j in i + 1..n {
            if (eig[i] - eig[j]).norm() <= tol.sqrt() * scale {
                return None;
            }
        }
    }
    let mut out = Vec::with_capacity(n);
    for &lambda in eig.iter() {
        let shifted = m - DMatrix::identity(n, n) * lambda;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t?;
        let (k, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())?;
        let v: Vec<C64> = v_t.row(k).iter().map(|z| z.conj()).collect();
        out.push((lambda, v));
    }
    Some(out)
}

fn idempotent_frame(model: &FrobeniusModel, mult: &Multiplication, opts: &NumericOptions) -> Result<Vec<Vec<C64>>> {
    let dim = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.retries.max(1) {
        let w: Vec<C64> = (0..dim).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let Some(system) = simple_eigensystem(&mult.operator(&w), opts.tolerance) else {
            continue;
        };
        let mut frame = Vec::with_capacity(dim);
        for (_, f) in system {
            let ff = mult.mul(&f, &f);
            let c: C64 = ff.iter().zip(&f).map(|(a, b)| a * b.conj()).sum::<C64>() / norm(&f).powi(2);
            if c.norm() <= opts.tolerance.sqrt() {
                return Err(Error::NotSemisimple);
            }
            frame.push(f.iter().map(|z| z / c).collect::<Vec<C64>>());
        }
        let scale = frame.iter().map(|e| norm(e)).fold(1.0, f64::max);
        let mut residual: f64 = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                let p = mult.mul(&frame[i], &frame[j]);
                let expected = if i == j { frame[i].clone() } else { vec![C64::zero(); dim] };
                let diff: Vec<C64> = p.iter().zip(&expected).map(|(a, b)| a - b).collect();
                residual = residual.max(norm(&diff));
            }
        }
        if residual <= opts.tolerance.sqrt() * scale * scale {
            return Ok(frame);
        }
    }
    Err(Error::NotSemisimple)
}

/// Diagonalizes the multiplication at `x`. Canonical coordinates come from
/// `E = Σ u^i e_i` when the model carries Euler data, and otherwise from
/// integrating `du^i = g(e_i, ·)/η_i` along the segment from `0`.
pub fn diagonalize_at_point(model: &FrobeniusModel, x: &[C64], opts: &NumericOptions) -> Result<SemisimplePointData> {
    let mut data = diagonalize_frame(model, x, opts)?;
    data.u = match model.euler() {
        Some(eu) => {
            let dim = model.dim();
            let e_field: Vec<C64> = (0..dim)
                .map(|b| (0..dim).map(|a| x[a] * to_f64(&eu.d[a][b])).sum::<C64>() + to_f64(&eu.r[b]))
                .collect();
            data.idempotents
                .iter()
                .zip(&data.eta)
                .map(|(e, eta)| bilinear(model, &e_field, e) / eta)
                .collect()
        }
        None => integrate_coordinates(model, x, &data.idempotents, opts)?,
    };
    Ok(data)
}

fn diagonalize_frame(model: &FrobeniusModel, x: &[C64], opts: &NumericOptions) -> Result<SemisimplePointData> {
    if !model.basis().is_even() {
        return Err(Error::Invalid("semisimple numerics need an even basis".into()));
    }
    if x.len() != model.dim() {
        return Err(Error::Invalid(format!("point has {} coordinates, expected {}", x.len(), model.dim())));
    }
    let dim = model.dim();
    let mult = Multiplication::at(model, x);
    let frame = idempotent_frame(model, &mult, opts)?;
    let eta: Vec<C64> = frame.iter().map(|e| bilinear(model, e, e)).collect();
    if eta.iter().any(|z| z.norm() <= opts.tolerance) {
        return Err(Error::Singular("an idempotent is isotropic".into()));
    }
    let (d_idempotents, d_eta) = if model.truncation() >= 4 {
        let ginv = model.metric().inverse_entries();
        let mut fourth = vec![vec![vec![vec![C64::zero(); dim]; dim]; dim]; dim];
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    for d in 0..dim {
                        fourth[a][b][c][d] = potential_derivative(model, &[a, b, c, d], x);
                    }
                }
            }
        }
        let mut de = Vec::with_capacity(dim);
        let mut deta = Vec::with_capacity(dim);
        for (i, e) in frame.iter().enumerate() {
            let op = DMatrix::identity(dim, dim) - mult.operator(e) * C64::new(2.0, 0.0);
            let lu = op.lu();
            let mut per_direction = Vec::with_capacity(dim);
            let mut eta_row = Vec::with_capacity(dim);
            for a in 0..dim {
                let mut rhs = DVector::zeros(dim);
                for (f, c, g) in &ginv {
                    let mut s = C64::zero();
                    for b in 0..dim {
                        for b2 in 0..dim {
                            s += e[b] * e[b2] * fourth[b][b2][a][*f];
                        }
                    }
                    rhs[*c] += s * to_f64(g);
                }
                let sol = lu.solve(&rhs).ok_or_else(|| Error::Singular(format!("first-order system for e_{i}")))?;
                let v: Vec<C64> = sol.iter().cloned().collect();
                eta_row.push(bilinear(model, &v, e) * 2.0);
                per_direction.push(v);
            }
            de.push(per_direction);
            deta.push(eta_row);
        }
        (Some(de), Some(deta))
    } else {
        (None, None)
    };
    Ok(SemisimplePointData { u: vec![C64::zero(); dim], eta, idempotents: frame, d_idempotents, d_eta })
}

/// Reorders `frame` to follow `previous` by largest overlap.
fn track(previous: &[Vec<C64>], frame: Vec<Vec<C64>>) -> Result<Vec<Vec<C64>>> {
    let mut out = Vec::with_capacity(frame.len());
    let mut used = vec![false; frame.len()];
    for p in previous {
        let (k, _) = frame
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, f)| (k, norm(&f.iter().zip(p).map(|(a, b)| a - b).collect::<Vec<_>>())))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .ok_or(Error::NotSemisimple)?;
        used[k] = true;
        out.push(frame[k].clone());
    }
    Ok(out)
}

fn integrate_coordinates(model: &FrobeniusModel, x: &[C64], frame: &[Vec<C64>], opts: &NumericOptions) -> Result<Vec<C64>> {
    if x.iter().all(|z| z.norm() == 0.0) {
        return Ok(vec![C64::zero(); frame.len()]);
    }
    const STEPS: usize = 64;
    let mut current = frame.to_vec();
    let mut integrand = vec![vec![C64::zero(); frame.len()]; STEPS + 1];
    for s in (0..=STEPS).rev() {
        let t = s as f64 / STEPS as f64;
        let point: Vec<C64> = x.iter().map(|z| z * t).collect();
        let data = diagonalize_frame(model, &point, opts)?;
        current = track(&current, data.idempotents)?;
        for (i, e) in current.iter().enumerate() {
            integrand[s][i] = bilinear(model, e, x) / bilinear(model, e, e);
        }
    }
    let h = 1.0 / STEPS as f64;
    Ok((0..frame.len())
        .map(|i| {
            let mut acc = integrand[0][i] + integrand[STEPS][i];
            for (s, row) in integrand.iter().enumerate().take(STEPS).skip(1) {
                acc += row[i] * if s % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * h / 3.0
        })
        .collect())
}

/// Pairs `(i, j)` with `|u^i - u^j| <= tol · max|u|`.
pub fn tameness_collisions(u: &[C64], tol: f64) -> Vec<(usize, usize)> {
    let scale = u.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut out = Vec::new();
    for i in 0..u.len() {
        for j in i + 1..u.len() {
            if (u[i] - u[j]).norm() <= tol * scale {
                out.push((i, j));
            }
        }
    }
    out
}

fn require_tame(u: &[C64], tol: f64) -> Result<()> {
    let collisions = tameness_collisions(u, tol);
    if collisions.is_empty() {
        Ok(())
    } else {
        Err(Error::NotTame(collisions))
    }
}

/// Special initial conditions at `x`:
/// `v_ij = (u^j - u^i) η_ij / (2 η_j)` with `η_ij = e_j(η_i)`.
pub fn special_init(model: &FrobeniusModel, x: &[C64], opts: &NumericOptions) -> Result<SpecialInitialConditions> {
    if model.euler().is_none() {
        return Err(Error::MissingEuler);
    }
    let data = diagonalize_at_point(model, x, opts)?;
    special_init_from(&data, opts.tolerance)
}

pub fn special_init_from(data: &SemisimplePointData, tol: f64) -> Result<SpecialInitialConditions> {
    require_tame(&data.u, tol)?;
    let d_eta = data
        .d_eta
        .as_ref()
        .ok_or(Error::Arity { arity: 4, min: 4, max: 3 })?;
    let n = data.u.len();
    let mut v = vec![vec![C64::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let eta_ij: C64 = data.idempotents[j].iter().zip(&d_eta[i]).map(|(e, d)| e * d).sum();
            v[i][j] = (data.u[j] - data.u[i]) * eta_ij / (data.eta[j] * 2.0);
        }
    }
    Ok(SpecialInitialConditions { u: data.u.clone(), eta: data.eta.clone(), v })
}

/// `g(𝒱 e_i, e_j) / η_j` with `𝒱 ∂_a = Σ_b d_{ab} ∂_b - (D/2) ∂_a`.
pub fn grading_in_idempotent_frame(model: &FrobeniusModel, data: &SemisimplePointData) -> Result<Vec<Vec<C64>>> {
    let eu = model.euler().ok_or(Error::MissingEuler)?;
    let dim = model.dim();
    let half = to_f64(&eu.conformal_dim) / 2.0;
    let image = |e: &[C64]| -> Vec<C64> {
        (0..dim)
            .map(|b| (0..dim).map(|a| e[a] * to_f64(&eu.d[a][b])).sum::<C64>() - e[b] * half)
            .collect()
    };
    Ok(data
        .idempotents
        .iter()
        .map(|ei| {
            let w = image(ei);
            data.idempotents
                .iter()
                .zip(&data.eta)
                .map(|(ej, eta)| bilinear(model, &w, ej) / eta)
                .collect()
        })
        .collect())
}

impl SpecialInitialConditions<C64> {
    /// `max |η_j v_ij + η_i v_ji|`.
    pub fn skewness_residual(&self) -> f64 {
        let n = self.u.len();
        let mut r: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                r = r.max((self.eta[j] * self.v[i][j] + self.eta[i] * self.v[j][i]).norm());
            }
        }
        r
    }

    /// Largest entrywise distance to `other`.
    pub fn distance(&self, other: &Self) -> f64 {
        let mut d: f64 = 0.0;
        for (a, b) in self.u.iter().zip(&other.u).chain(self.eta.iter().zip(&other.eta)) {
            d = d.max((a - b).norm());
        }
        for (ra, rb) in self.v.iter().zip(&other.v) {
            for (a, b) in ra.iter().zip(rb) {
                d = d.max((a - b).norm());
            }
        }
        if self.u.len() != other.u.len() {
            d = f64::INFINITY;
        }
        d
    }

    /// Reorders the idempotents so that `u` follows `reference.u`.
    pub fn aligned_to(&self, reference: &Self, tol: f64) -> Option<Self> {
        let n = self.u.len();
        if reference.u.len() != n {
            return None;
        }
        let scale = reference.u.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let mut perm = Vec::with_capacity(n);
        for r in &reference.u {
            let k = (0..n).find(|&k| (self.u[k] - r).norm() <= tol * scale && !perm.contains(&k))?;
            perm.push(k);
        }
        Some(SpecialInitialConditions {
            u: perm.iter().map(|&k| self.u[k]).collect(),
            eta: perm.iter().map(|&k| self.eta[k]).collect(),
            v: perm.iter().map(|&i| perm.iter().map(|&j| self.v[i][j]).collect()).collect(),
        })
    }
}

/// `u_{ij} = u'_i + u''_j`, `η_{ij} = η'_i η''_j` and
/// `v_{ij,kl} = δ_{jl} v'_{ik} + δ_{ik} v''_{jl}`, with `(i, j)` flattened as
/// `i * n'' + j`. No tameness check.
pub fn tensor_special_init_unchecked<T>(s1: &SpecialInitialConditions<T>, s2: &SpecialInitialConditions<T>) -> SpecialInitialConditions<T>
where
    T: Clone + Zero + Add<Output = T> + Mul<Output = T>,
{
    let (n1, n2) = (s1.u.len(), s2.u.len());
    let mut u = Vec::with_capacity(n1 * n2);
    let mut eta = Vec::with_capacity(n1 * n2);
    for i in 0..n1 {
        for j in 0..n2 {
            u.push(s1.u[i].clone() + s2.u[j].clone());
            eta.push(s1.eta[i].clone() * s2.eta[j].clone());
        }
    }
    let mut v = vec![vec![T::zero(); n1 * n2]; n1 * n2];
    for i in 0..n1 {
        for j in 0..n2 {
            for k in 0..n1 {
                for l in 0..n2 {
                    let mut x = T::zero();
                    if j == l {
                        x = x + s1.v[i][k].clone();
                    }
                    if i == k {
                        x = x + s2.v[j][l].clone();
                    }
                    v[i * n2 + j][k * n2 + l] = x;
                }
            }
        }
    }
    SpecialInitialConditions { u, eta, v }
}

/// [`tensor_special_init_unchecked`] after checking that the sums
/// `u'_i + u''_j` are pairwise distinct.
pub fn tensor_special_init(
    s1: &SpecialInitialConditions,
    s2: &SpecialInitialConditions,
    tol: f64,
) -> Result<SpecialInitialConditions> {
    let out = tensor_special_init_unchecked(s1, s2);
    require_tame(&out.u, tol)?;
    Ok(out)
}

/// `A_j = -(𝒱 + ½ Id) P_j`, where `𝒱` acts on coordinate columns by
/// `𝒱[k][j] = v_jk` and `P_j` projects onto `e_j`.
pub fn schlesinger_matrices<T>(s: &SpecialInitialConditions<T>) -> Vec<Vec<Vec<T>>>
where
    T: Clone + Num + Neg<Output = T>,
{
    let n = s.u.len();
    let half = T::one() / (T::one() + T::one());
    (0..n)
        .map(|j| {
            let mut a = vec![vec![T::zero(); n]; n];
            for (k, row) in a.iter_mut().enumerate() {
                let mut x = s.v[j][k].clone();
                if k == j {
                    x = x + half.clone();
                }
                row[j] = -x;
            }
            a
        })
        .collect()
}

fn root_of_unity(n: usize, k: i64) -> C64 {
    C64::from_polar(1.0, 2.0 * PI * k as f64 / (n as f64 + 1.0))
}

/// Special initial conditions of `Pⁿ` at `x^0 = x0`, `x^1 = x1`:
/// `u_i = x0 + ζ^i (n+1) e^{x1/(n+1)}`, `η_i = ζ^i e^{-x1 n/(n+1)}/(n+1)`,
/// `v_ik = -ζ^{i-k}/(1 - ζ^{i-k})`, with `ζ = e^{2πi/(n+1)}`.
pub fn pn_special_init(n: usize, x0: C64, x1: C64) -> SpecialInitialConditions {
    let m = n as f64 + 1.0;
    let idx = 0..=n as i64;
    let u = idx.clone().map(|i| x0 + root_of_unity(n, i) * m * (x1 / m).exp()).collect();
    let eta = idx.clone().map(|i| root_of_unity(n, i) * (-x1 * n as f64 / m).exp() / m).collect();
    let v = idx
        .clone()
        .map(|i| {
            idx.clone()
                .map(|k| {
                    if i == k {
                        C64::zero()
                    } else {
                        let z = root_of_unity(n, i - k);
                        -z / (C64::one() - z)
                    }
                })
                .collect()
        })
        .collect();
    SpecialInitialConditions { u, eta, v }
}

/// Closed form for `Pⁿ × Pᵐ`, indexed by `(i, j)` flattened as `i (m+1) + j`:
/// `u_ij = x00 + ζ_n^i (n+1) e^{x10/(n+1)} + ζ_m^j (m+1) e^{x01/(m+1)}`,
/// `η_ij = ζ_n^i ζ_m^j e^{-x10 n/(n+1) - x01 m/(m+1)} / ((n+1)(m+1))`,
/// `v_{ij,kl} = -(ζ_n^{i-k}/(1-ζ_n^{i-k}) δ_jl + ζ_m^{j-l}/(1-ζ_m^{j-l}) δ_ik)`.
pub fn pn_pm_model(n: usize, m: usize, x00: C64, x10: C64, x01: C64, tol: f64) -> Result<SpecialInitialConditions> {
    let (a, b) = (n as f64 + 1.0, m as f64 + 1.0);
    let mut u = Vec::new();
    let mut eta = Vec::new();
    for i in 0..=n as i64 {
        for j in 0..=m as i64 {
            u.push(x00 + root_of_unity(n, i) * a * (x10 / a).exp() + root_of_unity(m, j) * b * (x01 / b).exp());
            eta.push(
                root_of_unity(n, i) * root_of_unity(m, j) * (-x10 * n as f64 / a - x01 * m as f64 / b).exp() / (a * b),
            );
        }
    }
    let ratio = |z: C64| z / (C64::one() - z);
    let dim = (n + 1) * (m + 1);
    let mut v = vec![vec![C64::zero(); dim]; dim];
    for i in 0..=n {
        for j in 0..=m {
            for k in 0..=n {
                for l in 0..=m {
                    let mut x = C64::zero();
                    if j == l && i != k {
                        x += ratio(root_of_unity(n, i as i64 - k as i64));
                    }
                    if i == k && j != l {
                        x += ratio(root_of_unity(m, j as i64 - l as i64));
                    }
                    v[i * (m + 1) + j][k * (m + 1) + l] = -x;
                }
            }
        }
    }
    require_tame(&u, tol)?;
    Ok(SpecialInitialConditions { u, eta, v })
}

/// Zeroth and first order idempotent data of one factor at its base point.
#[derive(Clone, Debug, PartialEq)]
pub struct FirstOrderData<T> {
    /// `e0[i][a]`: components of `e_i` at the base point.
    pub e0: Vec<Vec<T>>,
    /// `e1[i][a][b]`: components of `∂_a e_i`.
    pub e1: Vec<Vec<Vec<T>>>,
    pub eta0: Vec<T>,
    /// `deta[i][a] = ∂_a η_i`.
    pub deta: Vec<Vec<T>>,
}

impl FirstOrderData<C64> {
    pub fn from_point(data: &SemisimplePointData) -> Result<Self> {
        Ok(FirstOrderData {
            e0: data.idempotents.clone(),
            e1: data.d_idempotents.clone().ok_or(Error::Arity { arity: 4, min: 4, max: 3 })?,
            eta0: data.eta.clone(),
            deta: data.d_eta.clone().ok_or(Error::Arity { arity: 4, min: 4, max: 3 })?,
        })
    }
}

/// First-order data of the tensor product at the base point.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorFirstOrder<T> {
    pub e0: Vec<Vec<T>>,
    pub e1: Vec<Vec<Vec<T>>>,
    pub eta0: Vec<T>,
    pub deta: Vec<Vec<T>>,
    /// `eta_derivs[ij][kl] = e_kl(η_ij)` at the base point.
    pub eta_derivs: Vec<Vec<T>>,
}

fn invert<T: Clone + Num>(m: &[Vec<T>]) -> Option<Vec<Vec<T>>> {
    let n = m.len();
    let mut a: Vec<Vec<T>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { T::one() } else { T::zero() }));
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&r| !a[r][c].is_zero())?;
        a.swap(c, p);
        let pivot = a[c][c].clone();
        for x in a[c].iter_mut() {
            *x = x.clone() / pivot.clone();
        }
        for r in 0..n {
            if r != c && !a[r][c].is_zero() {
                let f = a[r][c].clone();
                for k in 0..2 * n {
                    let t = f.clone() * a[c][k].clone();
                    a[r][k] = a[r][k].clone() - t;
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// `λ[a][i]` with `∂_a = Σ_i λ_i^a e_i`.
fn lambda<T: Clone + Num>(e0: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    // Columns of E are the e_i; ∂_a = Σ_i (E^{-1})_{i a} e_i.
    let n = e0.len();
    let columns: Vec<Vec<T>> = (0..n).map(|a| (0..n).map(|i| e0[i][a].clone()).collect()).collect();
    let inv = invert(&columns).ok_or_else(|| Error::Singular("idempotent frame".into()))?;
    Ok((0..n).map(|a| (0..n).map(|i| inv[i][a].clone()).collect()).collect())
}

fn kron<T: Clone + Num>(v: &[T], w: &[T]) -> Vec<T> {
    v.iter().flat_map(|a| w.iter().map(move |b| a.clone() * b.clone())).collect()
}

/// First-order idempotents and metric weights of the tensor product:
/// `e_ij = e'_i ⊗ e''_j + Σ x^{a'a''} (λ_j^{a''} ∂'_{a'}e'_i ⊗ e''_j + λ_i^{a'} e'_i ⊗ ∂''_{a''}e''_j)`,
/// `∂_{a'a''} η_ij = λ_j^{a''} ∂'_{a'}η'_i η''_j + λ_i^{a'} η'_i ∂''_{a''}η''_j`,
/// and `e_kl(η_ij) = δ_jl η'_ik η''_j + δ_ik η'_i η''_jl`.
pub fn idempotent_expansion_tensor<T: Clone + Num>(f1: &FirstOrderData<T>, f2: &FirstOrderData<T>) -> Result<TensorFirstOrder<T>> {
    let (n1, n2) = (f1.e0.len(), f2.e0.len());
    let l1 = lambda(&f1.e0)?;
    let l2 = lambda(&f2.e0)?;
    let mut e0 = Vec::new();
    let mut e1 = Vec::new();
    let mut eta0 = Vec::new();
    let mut deta = Vec::new();
    for i in 0..n1 {
        for j in 0..n2 {
            e0.push(kron(&f1.e0[i], &f2.e0[j]));
            eta0.push(f1.eta0[i].clone() * f2.eta0[j].clone());
            let mut dirs = Vec::new();
            let mut etas = Vec::new();
            for a1 in 0..n1 {
                for a2 in 0..n2 {
                    let x = kron(&f1.e1[i][a1], &f2.e0[j]);
                    let y = kron(&f1.e0[i], &f2.e1[j][a2]);
                    dirs.push(
                        x.into_iter()
                            .zip(y)
                            .map(|(p, q)| l2[a2][j].clone() * p + l1[a1][i].clone() * q)
                            .collect::<Vec<T>>(),
                    );
                    etas.push(
                        l2[a2][j].clone() * f1.deta[i][a1].clone() * f2.eta0[j].clone()
                            + l1[a1][i].clone() * f1.eta0[i].clone() * f2.deta[j][a2].clone(),
                    );
                }
            }
            e1.push(dirs);
            deta.push(etas);
        }
    }
    let factor_derivs = |f: &FirstOrderData<T>| -> Vec<Vec<T>> {
        let n = f.e0.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|k| (0..n).fold(T::zero(), |acc, a| acc + f.e0[k][a].clone() * f.deta[i][a].clone()))
                    .collect()
            })
            .collect()
    };
    let h1 = factor_derivs(f1);
    let h2 = factor_derivs(f2);
    let mut eta_derivs = vec![vec![T::zero(); n1 * n2]; n1 * n2];
    for i in 0..n1 {
        for j in 0..n2 {
            for k in 0..n1 {
                for l in 0..n2 {
                    let mut x = T::zero();
                    if j == l {
                        x = x + h1[i][k].clone() * f2.eta0[j].clone();
                    }
                    if i == k {
                        x = x + f1.eta0[i].clone() * h2[j][l].clone();
                    }
                    eta_derivs[i * n2 + j][k * n2 + l] = x;
                }
            }
        }
    }
    Ok(TensorFirstOrder { e0, e1, eta0, deta, eta_derivs })
}

impl<T: Clone + Num> TensorFirstOrder<T> {
    /// `e_kl(η_ij)` obtained by applying `e_kl = Σ e_kl^{a'a''} ∂_{a'a''}` to
    /// the first-order expansion of `η_ij`.
    pub fn eta_derivs_by_differentiation(&self) -> Vec<Vec<T>> {
        let n = self.e0.len();
        (0..n)
            .map(|ij| {
                (0..n)
                    .map(|kl| {
                        self.e0[kl]
                            .iter()
                            .zip(&self.deta[ij])
                            .fold(T::zero(), |acc, (e, d)| acc + e.clone() * d.clone())
                    })
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::scalar::rat;
    use crate::series::{CorrelatorFamily, GradedBasis, Metric};

    fn origin(dim: usize) -> Vec<C64> {
        vec![C64::zero(); dim]
    }

    #[test]
    fn cubic_point() {
        let m = models::unit_theory(4);
        let x = [C64::new(0.7, 0.0)];
        let d = diagonalize_at_point(&m, &x, &NumericOptions::default()).unwrap();
        assert!((d.idempotents[0][0] - 1.0).norm() < 1e-12);
        assert!((d.eta[0] - 1.0).norm() < 1e-12);
        assert!((d.u[0] - 0.7).norm() < 1e-12);
    }

    #[test]
    fn split_constant_algebra() {
        let basis = GradedBasis::even(2);
        let metric = Metric::new(&basis, vec![vec![rat(1), rat(0)], vec![rat(0), rat(1)]]).unwrap();
        let mut y = CorrelatorFamily::new(basis, 3).unwrap();
        y.insert(vec![0, 0, 0], rat(1)).unwrap();
        y.insert(vec![1, 1, 1], rat(1)).unwrap();
        let m = FrobeniusModel::new(metric, y, None, None).unwrap();
        let d = diagonalize_at_point(&m, &origin(2), &NumericOptions::default()).unwrap();
        let mut frame = d.idempotents.clone();
        frame.sort_by(|a, b| b[0].norm().partial_cmp(&a[0].norm()).unwrap());
        assert!((frame[0][0] - 1.0).norm() < 1e-12 && frame[0][1].norm() < 1e-12);
        assert!((frame[1][1] - 1.0).norm() < 1e-12 && frame[1][0].norm() < 1e-12);
        assert!(d.eta.iter().all(|e| (e - 1.0).norm() < 1e-12));
    }

    #[test]
    fn nilpotent_algebra_is_rejected() {
        let basis = GradedBasis::even(2);
        let metric = Metric::new(&basis, vec![vec![rat(0), rat(1)], vec![rat(1), rat(0)]]).unwrap();
        let mut y = CorrelatorFamily::new(basis, 3).unwrap();
        y.insert(vec![0, 0, 1], rat(1)).unwrap();
        let m = FrobeniusModel::new(metric, y, None, Some(0)).unwrap();
        let err = diagonalize_at_point(&m, &origin(2), &NumericOptions::default()).unwrap_err();
        assert_eq!(err, Error::NotSemisimple);
    }

    #[test]
    fn projective_line_matches_closed_form() {
        let m = models::projective_line(24);
        let opts = NumericOptions::default();
        for (x0, x1) in [(0.0, 0.0), (0.3, -0.4)] {
            let x = [C64::new(x0, 0.0), C64::new(x1, 0.0)];
            let s = special_init(&m, &x, &opts).unwrap();
            let expected = pn_special_init(1, x[0], x[1]);
            let s = s.aligned_to(&expected, 1e-8).unwrap();
            assert!(s.distance(&expected) < 1e-10, "{s:?}");
        }
    }

    #[test]
    fn schlesinger_sum_and_trace() {
        let s = pn_special_init(2, C64::new(0.1, 0.0), C64::new(0.2, 0.1));
        let a = schlesinger_matrices(&s);
        let n = s.u.len();
        for k in 0..n {
            for l in 0..n {
                let total: C64 = a.iter().map(|m| m[k][l]).sum();
                let expected = -(s.v[l][k] + if k == l { 0.5 } else { 0.0 });
                assert!((total - expected).norm() < 1e-14);
            }
        }
        for (j, m) in a.iter().enumerate() {
            let tr: C64 = (0..n).map(|k| m[k][k]).sum();
            assert!((tr + 0.5).norm() < 1e-14);
            for row in m {
                for (c, x) in row.iter().enumerate() {
                    assert!(c == j || x.norm() == 0.0);
                }
            }
        }
    }

    #[test]
    fn non_tame_product_is_reported() {
        let err = pn_pm_model(1, 1, C64::zero(), C64::zero(), C64::zero(), 1e-10).unwrap_err();
        assert_eq!(err, Error::NotTame(vec![(1, 2)]));
    }
}

//! Truncated Frobenius models: metric, correlators and optional Euler data,
//! together with the structural checks they are expected to satisfy.
//!
//! Every check returns a [`CheckReport`] listing violations and the identities
//! that cannot be decided because they need correlators beyond the
//! truncation.

use std::collections::BTreeMap;

use num::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{rat, ratio, Coeff, Rational};
use crate::series::{admissible_keys, koszul_sign, CorrelatorFamily, GradedBasis, Metric};
use crate::trees::{enumerate_stable_trees, Flag, Label, StableTree};

/// Euler field `E = Σ d_{ab} x^a ∂_b + Σ r^b ∂_b` with constants `D` and `d0`.
#[derive(Clone, Debug, PartialEq)]
pub struct EulerData {
    pub d: Vec<Vec<Rational>>,
    pub r: Vec<Rational>,
    pub conformal_dim: Rational,
    pub d0: Rational,
}

impl EulerData {
    pub fn has_shift(&self) -> bool {
        self.r.iter().any(|x| !x.is_zero())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrobeniusModel<R = Rational> {
    basis: GradedBasis,
    metric: Metric,
    correlators: CorrelatorFamily<R>,
    euler: Option<EulerData>,
    identity: Option<usize>,
}

impl<R: Coeff> FrobeniusModel<R> {
    pub fn new(
        metric: Metric,
        correlators: CorrelatorFamily<R>,
        euler: Option<EulerData>,
        identity: Option<usize>,
    ) -> Result<Self> {
        let basis = correlators.basis().clone();
        let d = basis.dim();
        if metric.dim() != d {
            return Err(Error::Invalid(format!("metric has dimension {} but basis {d}", metric.dim())));
        }
        if let Some(i) = identity {
            if i >= d {
                return Err(Error::Invalid(format!("identity index {i} out of range")));
            }
            if basis.parity(i) != 0 {
                return Err(Error::Invalid("identity must be even".into()));
            }
        }
        if let Some(e) = &euler {
            if e.d.len() != d || e.d.iter().any(|row| row.len() != d) || e.r.len() != d {
                return Err(Error::Invalid(format!("Euler data must have d {d}x{d} and r of length {d}")));
            }
            for a in 0..d {
                for b in 0..d {
                    if basis.parity(a) != basis.parity(b) && !e.d[a][b].is_zero() {
                        return Err(Error::Invalid(format!("Euler entry d[{a}][{b}] mixes parities")));
                    }
                }
                if basis.parity(a) == 1 && !e.r[a].is_zero() {
                    return Err(Error::Invalid(format!("Euler shift r[{a}] on an odd direction")));
                }
            }
        }
        Ok(FrobeniusModel { basis, metric, correlators, euler, identity })
    }

    pub fn basis(&self) -> &GradedBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn correlators(&self) -> &CorrelatorFamily<R> {
        &self.correlators
    }

    pub fn truncation(&self) -> usize {
        self.correlators.truncation()
    }

    pub fn euler(&self) -> Option<&EulerData> {
        self.euler.as_ref()
    }

    pub fn identity(&self) -> Option<usize> {
        self.identity
    }

    pub fn with_correlators<S: Coeff>(&self, correlators: CorrelatorFamily<S>) -> Result<FrobeniusModel<S>> {
        FrobeniusModel::new(self.metric.clone(), correlators, self.euler.clone(), self.identity)
    }

    pub fn with_euler(mut self, euler: Option<EulerData>) -> Result<Self> {
        self.euler = None;
        FrobeniusModel::new(self.metric, self.correlators, euler, self.identity)
    }

    pub fn truncated(&self, n: usize) -> Self {
        FrobeniusModel { correlators: self.correlators.truncated(n), ..self.clone() }
    }

    fn y(&self, index: &[usize]) -> R {
        self.correlators.value(index)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub check: String,
    pub location: String,
    pub lhs: String,
    pub rhs: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Partial,
    Fail,
}

/// Outcome of one or more checks. `Fail` when any identity is violated,
/// `Partial` when none is violated but some could not be decided.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CheckReport {
    pub violations: Vec<Violation>,
    pub unverifiable: Vec<String>,
}

impl CheckReport {
    pub fn status(&self) -> Status {
        if !self.violations.is_empty() {
            Status::Fail
        } else if !self.unverifiable.is_empty() {
            Status::Partial
        } else {
            Status::Pass
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(&mut self, other: CheckReport) {
        self.violations.extend(other.violations);
        self.unverifiable.extend(other.unverifiable);
    }

    fn compare<R: Coeff>(&mut self, check: &str, location: impl FnOnce() -> String, lhs: &R, rhs: &R) {
        if lhs != rhs {
            self.violations.push(Violation {
                check: check.into(),
                location: location(),
                lhs: lhs.to_string(),
                rhs: rhs.to_string(),
            });
        }
    }
}

fn parity_sum(basis: &GradedBasis, idx: &[usize]) -> u8 {
    basis.total_parity(idx)
}

fn signed<R: Coeff>(v: R, sign: i32) -> R {
    if sign < 0 {
        -v
    } else {
        v
    }
}

/// All subsets of positions `0..m`, as membership masks.
fn position_subsets(m: usize) -> impl Iterator<Item = u32> {
    0..(1u32 << m)
}

/// WDVV at the level of coefficients: for every `a, b, c, d` and every
/// multi-index `K` with `|K| <= N - 3`,
/// `∂_K Σ Φ_{abe} g^{ef} Φ_{fcd} = (-1)^{ã(b̃+c̃)} ∂_K Σ Φ_{bce} g^{ef} Φ_{fad}` at 0.
pub fn wdvv_check<R: Coeff>(model: &FrobeniusModel<R>) -> CheckReport {
    let mut report = CheckReport::default();
    let basis = model.basis();
    let dim = model.dim();
    let n = model.truncation();
    let ginv = model.metric().inverse_entries();
    // ∂_K (F G) at 0 with F = ∂_x ∂_y ∂_e Φ and G = ∂_f ∂_z ∂_w Φ.
    let channel = |k: &[usize], x: usize, y: usize, z: usize, w: usize| -> R {
        let m = k.len();
        let kpar: Vec<u8> = k.iter().map(|&i| basis.parity(i)).collect();
        let mut acc = R::zero();
        for mask in position_subsets(m) {
            let k1: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
            let k2: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) == 0).collect();
            let mut perm = k1.clone();
            perm.extend(&k2);
            let shuffle = koszul_sign(&perm, &kpar);
            let p2: u8 = k2.iter().map(|&i| kpar[i]).sum::<u8>() % 2;
            for (e, f, g) in &ginv {
                let fpar = (basis.parity(x) + basis.parity(y) + basis.parity(*e)) % 2;
                let sign = shuffle * if p2 * fpar == 1 { -1 } else { 1 };
                let mut left: Vec<usize> = k1.iter().map(|&i| k[i]).collect();
                left.extend([x, y, *e]);
                let lv = model.y(&left);
                if lv.is_zero() {
                    continue;
                }
                let mut right: Vec<usize> = k2.iter().map(|&i| k[i]).collect();
                right.extend([*f, z, w]);
                let rv = model.y(&right);
                if rv.is_zero() {
                    continue;
                }
                acc = acc + signed((lv * rv).scale(g), sign);
            }
        }
        acc
    };
    for m in 0..=n.saturating_sub(3) {
        let keys = multisets(basis, m);
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    for d in 0..dim {
                        for k in &keys {
                            let mut all = vec![a, b, c, d];
                            all.extend(k);
                            if parity_sum(basis, &all) == 1 {
                                continue;
                            }
                            let lhs = channel(k, a, b, c, d);
                            let s = basis.parity(a) * (basis.parity(b) + basis.parity(c)) % 2;
                            let rhs = signed(channel(k, b, c, a, d), if s == 1 { -1 } else { 1 });
                            report.compare("wdvv", || format!("degree {m}, (a,b,c,d)=({a},{b},{c},{d}), K={k:?}"), &lhs, &rhs);
                        }
                    }
                }
            }
        }
    }
    report
}

/// Sorted multi-indices of length `m` without repeated odd entries.
fn multisets(basis: &GradedBasis, m: usize) -> Vec<Vec<usize>> {
    fn rec(basis: &GradedBasis, m: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for a in start..basis.dim() {
            if basis.parity(a) == 1 && cur.last() == Some(&a) {
                continue;
            }
            cur.push(a);
            rec(basis, m, a, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(basis, m, 0, &mut Vec::new(), &mut out);
    out
}

/// Coherence of the partition sums: for `n <= N + 1` points with `i, j, k, l`
/// at the first four positions, the sum over splittings separating `{i, j}`
/// from `{k, l}` equals the sum over splittings separating `{i, k}` from
/// `{j, l}`.
pub fn coherence_check<R: Coeff>(model: &FrobeniusModel<R>) -> CheckReport {
    let mut report = CheckReport::default();
    let basis = model.basis();
    let dim = model.dim();
    let ginv = model.metric().inverse_entries();
    let partition_sum = |gamma: &[usize], first: [usize; 2], second: [usize; 2]| -> R {
        let n = gamma.len();
        let par: Vec<u8> = gamma.iter().map(|&a| basis.parity(a)).collect();
        let free: Vec<usize> = (0..n).filter(|i| !first.contains(i) && !second.contains(i)).collect();
        let mut acc = R::zero();
        for mask in position_subsets(free.len()) {
            let mut s1: Vec<usize> = first.to_vec();
            let mut s2: Vec<usize> = second.to_vec();
            for (t, &i) in free.iter().enumerate() {
                if mask & (1 << t) != 0 {
                    s1.push(i);
                } else {
                    s2.push(i);
                }
            }
            s1.sort_unstable();
            s2.sort_unstable();
            let mut perm = s1.clone();
            perm.extend(&s2);
            let sign = koszul_sign(&perm, &par);
            for (e, f, g) in &ginv {
                let mut left: Vec<usize> = s1.iter().map(|&i| gamma[i]).collect();
                left.push(*e);
                let lv = model.y(&left);
                if lv.is_zero() {
                    continue;
                }
                let mut right = vec![*f];
                right.extend(s2.iter().map(|&i| gamma[i]));
                let rv = model.y(&right);
                if rv.is_zero() {
                    continue;
                }
                acc = acc + signed((lv * rv).scale(g), sign);
            }
        }
        acc
    };
    for n in 4..=model.truncation() + 1 {
        let tails = multisets(basis, n - 4);
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    for d in 0..dim {
                        for k in &tails {
                            let mut gamma = vec![a, b, c, d];
                            gamma.extend(k);
                            if parity_sum(basis, &gamma) == 1 {
                                continue;
                            }
                            let lhs = partition_sum(&gamma, [0, 1], [2, 3]);
                            let rhs = partition_sum(&gamma, [0, 2], [1, 3]);
                            report.compare("coherence", || format!("n={n}, gamma={gamma:?}"), &lhs, &rhs);
                        }
                    }
                }
            }
        }
    }
    report
}

/// Precomputed vertex structure of a stable tree for repeated evaluation of
/// operadic correlators.
#[derive(Clone, Debug)]
pub struct OperadicTree {
    tree: StableTree,
    /// Per vertex: flags as `Slot::Tail(position)` or edge halves.
    vertices: Vec<Vec<Slot>>,
    edges: usize,
    /// For each edge, the vertices whose last unassigned edge it is.
    ready_after: Vec<Vec<usize>>,
    /// Vertices without edges.
    ready_initially: Vec<usize>,
    max_arity: usize,
}

#[derive(Clone, Copy, Debug)]
enum Slot {
    Tail(usize),
    Upper(usize),
    Lower(usize),
}

impl OperadicTree {
    pub fn new(tree: &StableTree) -> Self {
        let labels = tree.labels();
        let pos = |l: Label| labels.iter().position(|&x| x == l).unwrap();
        let layout = tree.layout();
        let vertices: Vec<Vec<Slot>> = layout
            .vertices
            .iter()
            .map(|flags| {
                flags
                    .iter()
                    .map(|f| match *f {
                        Flag::Tail(l) => Slot::Tail(pos(l)),
                        Flag::Half { edge, toward_root: false } => Slot::Upper(edge),
                        Flag::Half { edge, toward_root: true } => Slot::Lower(edge),
                    })
                    .collect()
            })
            .collect();
        let edges = tree.edge_count();
        let mut ready_after = vec![Vec::new(); edges];
        let mut ready_initially = Vec::new();
        for (v, slots) in vertices.iter().enumerate() {
            let last = slots
                .iter()
                .filter_map(|s| match s {
                    Slot::Upper(e) | Slot::Lower(e) => Some(*e),
                    Slot::Tail(_) => None,
                })
                .max();
            match last {
                Some(e) => ready_after[e].push(v),
                None => ready_initially.push(v),
            }
        }
        let max_arity = vertices.iter().map(Vec::len).max().unwrap_or(0);
        OperadicTree { tree: tree.clone(), vertices, edges, ready_after, ready_initially, max_arity }
    }

    pub fn tree(&self) -> &StableTree {
        &self.tree
    }

    pub fn max_arity(&self) -> usize {
        self.max_arity
    }

    /// `Y(τ)(∂_{idx_1} ⊗ ... ⊗ ∂_{idx_n})`: vertex correlators contracted
    /// with the inverse metric along edges. Tail `k` (in increasing label
    /// order) receives `idx[k]`.
    pub fn evaluate<R: Coeff>(&self, model: &FrobeniusModel<R>, idx: &[usize]) -> Result<R> {
        if idx.len() != self.tree.num_tails() {
            return Err(Error::Invalid(format!("{} indices for a tree with {} tails", idx.len(), self.tree.num_tails())));
        }
        if self.max_arity > model.truncation() {
            return Err(Error::Arity { arity: self.max_arity, min: 3, max: model.truncation() });
        }
        let ginv = model.metric().inverse_entries();
        let even = model.basis().is_even();
        let mut assign = vec![(0usize, 0usize); self.edges];
        let vertex_value = |v: usize, assign: &[(usize, usize)]| -> R {
            let index: Vec<usize> = self.vertices[v]
                .iter()
                .map(|s| match *s {
                    Slot::Tail(p) => idx[p],
                    Slot::Upper(e) => assign[e].0,
                    Slot::Lower(e) => assign[e].1,
                })
                .collect();
            model.y(&index)
        };
        let mut base = R::one();
        for &v in &self.ready_initially {
            base = base * vertex_value(v, &assign);
            if base.is_zero() {
                return Ok(base);
            }
        }
        let mut total = R::zero();
        self.recurse(model, idx, &ginv, 0, base, &mut assign, &vertex_value, even, &mut total);
        Ok(total)
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse<R: Coeff>(
        &self,
        model: &FrobeniusModel<R>,
        idx: &[usize],
        ginv: &[(usize, usize, Rational)],
        e: usize,
        acc: R,
        assign: &mut Vec<(usize, usize)>,
        vertex_value: &dyn Fn(usize, &[(usize, usize)]) -> R,
        even: bool,
        total: &mut R,
    ) {
        if e == self.edges {
            let sign = if even { 1 } else { self.sign(model.basis(), idx, assign) };
            *total = total.clone() + signed(acc, sign);
            return;
        }
        for (p, q, g) in ginv {
            assign[e] = (*p, *q);
            let mut v = acc.scale(g);
            for &vtx in &self.ready_after[e] {
                v = v * vertex_value(vtx, assign);
                if v.is_zero() {
                    break;
                }
            }
            if !v.is_zero() {
                self.recurse(model, idx, ginv, e + 1, v, assign, vertex_value, even, total);
            }
        }
    }

    /// Koszul sign of regrouping `(γ_1, ..., γ_n, p_1, q_1, ..., p_E, q_E)`
    /// into vertex order.
    fn sign(&self, basis: &GradedBasis, idx: &[usize], assign: &[(usize, usize)]) -> i32 {
        let n = idx.len();
        let mut parities: Vec<u8> = idx.iter().map(|&a| basis.parity(a)).collect();
        for &(p, q) in assign {
            parities.push(basis.parity(p));
            parities.push(basis.parity(q));
        }
        let perm: Vec<usize> = self
            .vertices
            .iter()
            .flatten()
            .map(|s| match *s {
                Slot::Tail(p) => p,
                Slot::Upper(e) => n + 2 * e,
                Slot::Lower(e) => n + 2 * e + 1,
            })
            .collect();
        koszul_sign(&perm, &parities)
    }
}

/// `Y(τ)(idx)` for a single evaluation.
pub fn operadic_correlator<R: Coeff>(model: &FrobeniusModel<R>, tree: &StableTree, idx: &[usize]) -> Result<R> {
    OperadicTree::new(tree).evaluate(model, idx)
}

/// `Y_3(a, b, 0) = g_{ab}` and `Y_n(..., 0) = 0` for `3 < n <= N`.
pub fn flat_identity_check<R: Coeff>(model: &FrobeniusModel<R>) -> Result<CheckReport> {
    let e = model.identity().ok_or(Error::MissingIdentity)?;
    let mut report = CheckReport::default();
    let dim = model.dim();
    for a in 0..dim {
        for b in 0..dim {
            let lhs = model.y(&[a, b, e]);
            let rhs = R::from_rational(model.metric().get(a, b));
            report.compare("flat identity", || format!("Y3({a},{b},{e})"), &lhs, &rhs);
        }
    }
    for n in 4..=model.truncation() {
        for key in admissible_keys(model.basis(), n - 1) {
            let mut idx = key.clone();
            idx.push(e);
            let v = model.y(&idx);
            report.compare("flat identity", || format!("Y{n}({idx:?})"), &v, &R::zero());
        }
    }
    Ok(report)
}

/// `Σ_c d_{ac} g_{cb} + Σ_c d_{bc} g_{ac} = D g_{ab}`.
pub fn conformality_check<R: Coeff>(model: &FrobeniusModel<R>) -> Result<CheckReport> {
    let eu = model.euler().ok_or(Error::MissingEuler)?;
    let g = model.metric();
    let dim = model.dim();
    let mut report = CheckReport::default();
    for a in 0..dim {
        for b in 0..dim {
            let mut lhs = Rational::zero();
            for c in 0..dim {
                lhs += &eu.d[a][c] * g.get(c, b) + &eu.d[b][c] * g.get(a, c);
            }
            let rhs = &eu.conformal_dim * g.get(a, b);
            report.compare("conformality", || format!("({a},{b})"), &lhs, &rhs);
        }
    }
    Ok(report)
}

/// Matrix of `𝒱(∂_a) = [∂_a, E] - (D/2) ∂_a`: entry `[a][b]` is the
/// coefficient of `∂_b`.
pub fn grading_operator<R: Coeff>(model: &FrobeniusModel<R>) -> Result<Vec<Vec<Rational>>> {
    let eu = model.euler().ok_or(Error::MissingEuler)?;
    let half_d = &eu.conformal_dim * ratio(1, 2);
    Ok((0..model.dim())
        .map(|a| {
            (0..model.dim())
                .map(|b| if a == b { &eu.d[a][b] - &half_d } else { eu.d[a][b].clone() })
                .collect()
        })
        .collect())
}

/// `g(𝒱X, Y) + g(X, 𝒱Y) = 0` on basis vectors.
pub fn grading_skew_check<R: Coeff>(model: &FrobeniusModel<R>) -> Result<CheckReport> {
    let v = grading_operator(model)?;
    let g = model.metric();
    let dim = model.dim();
    let mut report = CheckReport::default();
    for a in 0..dim {
        for b in 0..dim {
            let mut s = Rational::zero();
            for c in 0..dim {
                s += &v[a][c] * g.get(c, b) + &v[b][c] * g.get(a, c);
            }
            report.compare("grading skew-symmetry", || format!("({a},{b})"), &s, &Rational::zero());
        }
    }
    Ok(report)
}

/// Quasi-homogeneity of the correlators:
/// `Σ_i Σ_b d_{a_i b} Y_n(.., b at i, ..) + Σ_b r^b Y_{n+1}(a, b) = (d0 + D) Y_n(a)`.
/// Arities whose shift term needs `Y_{N+1}` are reported as unverifiable.
pub fn quasi_homogeneity_check<R: Coeff>(model: &FrobeniusModel<R>) -> Result<CheckReport> {
    let eu = model.euler().ok_or(Error::MissingEuler)?;
    let mut report = CheckReport::default();
    let dim = model.dim();
    let weight = &eu.d0 + &eu.conformal_dim;
    for n in 3..=model.truncation() {
        if eu.has_shift() && n + 1 > model.truncation() {
            report.unverifiable.push(format!("quasi-homogeneity at arity {n} needs Y{}", n + 1));
            continue;
        }
        for key in admissible_keys(model.basis(), n) {
            let mut lhs = R::zero();
            for i in 0..n {
                for b in 0..dim {
                    let c = &eu.d[key[i]][b];
                    if c.is_zero() {
                        continue;
                    }
                    let mut idx = key.clone();
                    idx[i] = b;
                    lhs = lhs + model.y(&idx).scale(c);
                }
            }
            for b in 0..dim {
                if eu.r[b].is_zero() {
                    continue;
                }
                let mut idx = key.clone();
                idx.push(b);
                lhs = lhs + model.y(&idx).scale(&eu.r[b]);
            }
            let rhs = model.y(&key).scale(&weight);
            report.compare("quasi-homogeneity", || format!("Y{n}{key:?}"), &lhs, &rhs);
        }
    }
    Ok(report)
}

/// All index tuples of length `n` over `[0, dim)`.
pub fn index_tuples(dim: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..dim).map(move |a| {
                    let mut u = t.clone();
                    u.push(a);
                    u
                })
            })
            .collect();
    }
    out
}

/// Tree version of quasi-homogeneity, for all stable trees with `n` tails,
/// `4 <= n <= n_max`:
/// `Σ_i Σ_b d_{a_i b} Y(τ)(.., b, ..) - |E_τ| d0 Y(τ)(a) + Σ_b r^b Y(π^*τ)(a, b)
///  = (d0 + D) Y(τ)(a)`.
pub fn operadic_quasi_homogeneity_check<R: Coeff>(model: &FrobeniusModel<R>, n_max: usize) -> Result<CheckReport> {
    let eu = model.euler().ok_or(Error::MissingEuler)?;
    let mut report = CheckReport::default();
    let dim = model.dim();
    let big_n = model.truncation();
    let weight = &eu.d0 + &eu.conformal_dim;
    for n in 3..=n_max {
        for edges in 0..=n - 3 {
            for tree in enumerate_stable_trees(n, edges)? {
                let op = OperadicTree::new(&tree);
                let needs = op.max_arity() + eu.has_shift() as usize;
                if needs > big_n {
                    report.unverifiable.push(format!("tree {tree} needs Y{needs}"));
                    continue;
                }
                let pulled: Vec<OperadicTree> = tree.pullback(n as Label + 1)?.iter().map(OperadicTree::new).collect();
                for idx in index_tuples(dim, n) {
                    if parity_sum(model.basis(), &idx) == 1 {
                        continue;
                    }
                    let base = op.evaluate(model, &idx)?;
                    let mut lhs = base.scale(&(-rat(edges as i64) * &eu.d0));
                    for i in 0..n {
                        for b in 0..dim {
                            let c = &eu.d[idx[i]][b];
                            if c.is_zero() {
                                continue;
                            }
                            let mut j = idx.clone();
                            j[i] = b;
                            lhs = lhs + op.evaluate(model, &j)?.scale(c);
                        }
                    }
                    for b in 0..dim {
                        if eu.r[b].is_zero() {
                            continue;
                        }
                        let mut j = idx.clone();
                        j.push(b);
                        for p in &pulled {
                            lhs = lhs + p.evaluate(model, &j)?.scale(&eu.r[b]);
                        }
                    }
                    let rhs = base.scale(&weight);
                    report.compare("operadic quasi-homogeneity", || format!("{tree} {idx:?}"), &lhs, &rhs);
                }
            }
        }
    }
    Ok(report)
}

/// `Y(τ)(a_1, ..., a_{n-1}, ∂_0) = Y(π_*τ)(a_1, ..., a_{n-1})`, with zero
/// when `π_*τ` vanishes, for trees with `4 <= n <= n_max` tails.
pub fn identity_pushforward_check<R: Coeff>(model: &FrobeniusModel<R>, n_max: usize) -> Result<CheckReport> {
    let e = model.identity().ok_or(Error::MissingIdentity)?;
    let mut report = CheckReport::default();
    for n in 4..=n_max {
        for edges in 0..=n - 3 {
            for tree in enumerate_stable_trees(n, edges)? {
                let op = OperadicTree::new(&tree);
                if op.max_arity() > model.truncation() {
                    report.unverifiable.push(format!("tree {tree} needs Y{}", op.max_arity()));
                    continue;
                }
                let image = tree.pushforward(n as Label)?.map(|t| OperadicTree::new(&t));
                for idx in index_tuples(model.dim(), n - 1) {
                    let mut full = idx.clone();
                    full.push(e);
                    let lhs = op.evaluate(model, &full)?;
                    let rhs = match &image {
                        Some(t) => t.evaluate(model, &idx)?,
                        None => R::zero(),
                    };
                    report.compare("identity pushforward", || format!("{tree} {idx:?}"), &lhs, &rhs);
                }
            }
        }
    }
    Ok(report)
}

/// Components of `∘_n(∂_{idx_1}, ..., ∂_{idx_n}) = Σ_c Σ_b Y_{n+1}(idx, b) g^{bc} ∂_c`.
pub fn higher_product<R: Coeff>(model: &FrobeniusModel<R>, idx: &[usize]) -> Result<Vec<R>> {
    if idx.len() < 2 || idx.len() + 1 > model.truncation() {
        return Err(Error::Arity { arity: idx.len() + 1, min: 3, max: model.truncation() });
    }
    let dim = model.dim();
    let mut out = vec![R::zero(); dim];
    for b in 0..dim {
        let mut full = idx.to_vec();
        full.push(b);
        let y = model.y(&full);
        if y.is_zero() {
            continue;
        }
        for (c, slot) in out.iter_mut().enumerate() {
            let g = model.metric().inv(b, c);
            if !g.is_zero() {
                *slot = slot.clone() + y.scale(g);
            }
        }
    }
    Ok(out)
}

/// Every check applicable to the model, keyed by name.
pub fn full_report<R: Coeff>(model: &FrobeniusModel<R>) -> BTreeMap<String, CheckReport> {
    let mut out = BTreeMap::new();
    out.insert("wdvv".into(), wdvv_check(model));
    out.insert("coherence".into(), coherence_check(model));
    if let Ok(r) = flat_identity_check(model) {
        out.insert("identity".into(), r);
    }
    if let (Ok(mut c), Ok(q)) = (conformality_check(model), quasi_homogeneity_check(model)) {
        c.merge(q);
        out.insert("euler".into(), c);
    }
    out
}

//! Cohomology of `M̄_{0,n}` through boundary strata.
//!
//! Classes are linear combinations of stratum classes `[τ]`. Since the
//! intersection pairing on `H*(M̄_{0,n})` is perfect and strata span, a class
//! of codimension `k` is determined by its pairings with a basis in the
//! complementary codimension. The normal form of a class is its coordinate
//! vector in a fixed basis of strata, chosen greedily in canonical tree order.

mod intersection;

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use num::Zero;
use rayon::prelude::*;

pub use intersection::Intersector;

use crate::error::{Error, Result};
use crate::scalar::{invert_integer_matrix, rat, Rational};
use crate::trees::{enumerate_stable_trees, Label, StableTree};

/// Largest `n` served by default. `n = 8` can be requested through
/// [`ring_with_limit`] but takes minutes and several hundred megabytes.
pub const DEFAULT_N_MAX: usize = 7;

/// Hard ceiling for explicit requests.
pub const HARD_N_MAX: usize = 8;

/// Betti numbers `dim H^{2k}(M̄_{0,n})`, `k = 0..=n-3`, from Keel's recursion
/// `P_{n+1} = (1+q) P_n + (q/2) Σ_{j=2}^{n-2} C(n,j) P_{j+1} P_{n-j+1}`.
pub fn betti_numbers(n: usize) -> Vec<u64> {
    let mut polys: Vec<Vec<u64>> = vec![vec![], vec![], vec![], vec![1]];
    for m in 3..n {
        // Compute P_{m+1} from P_3..P_m.
        let mut next = vec![0u64; m - 1];
        for (k, &c) in polys[m].iter().enumerate() {
            next[k] += c;
            next[k + 1] += c;
        }
        let mut acc = vec![0u64; m - 1];
        for j in 2..=m - 2 {
            let c = binom_u64(m, j);
            let (a, b) = (&polys[j + 1], &polys[m - j + 1]);
            for (i, &x) in a.iter().enumerate() {
                for (k, &y) in b.iter().enumerate() {
                    acc[i + k + 1] += c * x * y;
                }
            }
        }
        for (k, v) in acc.into_iter().enumerate() {
            next[k] += v / 2;
        }
        polys.push(next);
    }
    polys[n].clone()
}

fn binom_u64(n: usize, k: usize) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// Class in `H*(M̄_{0,L})` as a linear combination of strata.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrataAlgebraElement {
    labels: Vec<Label>,
    terms: BTreeMap<StableTree, Rational>,
}

impl StrataAlgebraElement {
    pub fn zero(labels: &[Label]) -> Self {
        StrataAlgebraElement { labels: labels.to_vec(), terms: BTreeMap::new() }
    }

    pub fn zero_n(n: usize) -> Self {
        Self::zero(&(1..=n as Label).collect::<Vec<_>>())
    }

    /// Fundamental class `[M̄_{0,L}]`.
    pub fn one(labels: &[Label]) -> Result<Self> {
        Ok(Self::from_tree(&StableTree::corolla(labels)?))
    }

    pub fn from_tree(tree: &StableTree) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(tree.clone(), rat(1));
        StrataAlgebraElement { labels: tree.labels(), terms }
    }

    pub fn from_terms(labels: &[Label], terms: impl IntoIterator<Item = (StableTree, Rational)>) -> Result<Self> {
        let mut e = Self::zero(labels);
        for (t, c) in terms {
            e.add_term(t, c)?;
        }
        Ok(e)
    }

    pub fn add_term(&mut self, tree: StableTree, c: Rational) -> Result<()> {
        if tree.labels() != self.labels {
            return Err(Error::Invalid(format!("tree {tree} has the wrong label set")));
        }
        let e = self.terms.entry(tree).or_insert_with(Rational::zero);
        *e += c;
        self.terms.retain(|_, v| !v.is_zero());
        Ok(())
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn terms(&self) -> &BTreeMap<StableTree, Rational> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        for (t, c) in &other.terms {
            out.add_term(t.clone(), c.clone())?;
        }
        Ok(out)
    }

    pub fn scale(&self, c: &Rational) -> Self {
        let terms = if c.is_zero() {
            BTreeMap::new()
        } else {
            self.terms.iter().map(|(t, v)| (t.clone(), v * c)).collect()
        };
        StrataAlgebraElement { labels: self.labels.clone(), terms }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(&rat(-1)))
    }

    /// Part of codimension `k`.
    pub fn homogeneous_part(&self, k: usize) -> Self {
        StrataAlgebraElement {
            labels: self.labels.clone(),
            terms: self.terms.iter().filter(|(t, _)| t.edge_count() == k).map(|(t, c)| (t.clone(), c.clone())).collect(),
        }
    }

    fn codims(&self) -> Vec<usize> {
        let mut ks: Vec<usize> = self.terms.keys().map(StableTree::edge_count).collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    }
}

/// Bases, Gram matrices and normal-form data for one `n`.
pub struct M0nRing {
    n: usize,
    basis: Vec<Vec<StableTree>>,
    /// `inv_gram[k][j][i]`: entry of the inverse of the pairing matrix
    /// between `basis[k]` (rows `i`) and `basis[n-3-k]` (columns `j`).
    inv_gram: Vec<Vec<Vec<Rational>>>,
    intersector: Mutex<Intersector>,
    normal_forms: Mutex<HashMap<StableTree, Vec<(usize, Rational)>>>,
}

/// Greedy row selection over `Z/p`: indices of rows independent of all
/// previously selected rows.
fn greedy_independent_rows(rows: &[Vec<i64>]) -> Vec<usize> {
    const P: i128 = 2_305_843_009_213_693_951; // 2^61 - 1
    let reduce = |x: i64| -> i128 { (x as i128).rem_euclid(P) };
    let pow = |mut b: i128, mut e: i128| -> i128 {
        let mut r = 1i128;
        while e > 0 {
            if e & 1 == 1 {
                r = r * b % P;
            }
            b = b * b % P;
            e >>= 1;
        }
        r
    };
    let mut echelon: Vec<(usize, Vec<i128>)> = Vec::new();
    let mut chosen = Vec::new();
    for (idx, row) in rows.iter().enumerate() {
        let mut v: Vec<i128> = row.iter().map(|&x| reduce(x)).collect();
        for (pc, er) in &echelon {
            let f = v[*pc];
            if f != 0 {
                for (x, y) in v.iter_mut().zip(er) {
                    *x = (*x - f * y % P).rem_euclid(P);
                }
            }
        }
        if let Some(pc) = v.iter().position(|&x| x != 0) {
            let inv = pow(v[pc], P - 2);
            for x in v.iter_mut() {
                *x = *x * inv % P;
            }
            echelon.push((pc, v));
            chosen.push(idx);
        }
    }
    chosen
}

fn pairing_rows(rows: &[StableTree], cols: &[StableTree]) -> Vec<Vec<i64>> {
    rows.par_iter()
        .map_init(Intersector::new, |ix, r| {
            cols.iter()
                .map(|c| {
                    let mut s = r.splits().to_vec();
                    s.extend_from_slice(c.splits());
                    ix.top(r.label_mask(), &s)
                })
                .collect()
        })
        .collect()
}

impl M0nRing {
    /// Builds bases and Gram inverses for `M̄_{0,n}` on labels `1..=n`.
    pub fn build(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::TooFewTails(n));
        }
        if n > HARD_N_MAX {
            return Err(Error::TooLarge { n, max: HARD_N_MAX });
        }
        let top = n - 3;
        let strata: Vec<Vec<StableTree>> = (0..=top).map(|k| enumerate_stable_trees(n, k)).collect::<Result<_>>()?;
        let mut basis: Vec<Vec<StableTree>> = vec![Vec::new(); top + 1];
        for k in 0..=top / 2 {
            let c = top - k;
            let rows = pairing_rows(&strata[k], &strata[c]);
            basis[k] = greedy_independent_rows(&rows).into_iter().map(|i| strata[k][i].clone()).collect();
            if c != k {
                let rows = pairing_rows(&strata[c], &basis[k]);
                basis[c] = greedy_independent_rows(&rows).into_iter().map(|i| strata[c][i].clone()).collect();
            }
        }
        let mut inv_gram = vec![Vec::new(); top + 1];
        for k in 0..=top {
            let g = pairing_rows(&basis[k], &basis[top - k]);
            inv_gram[k] = invert_integer_matrix(&g)
                .ok_or_else(|| Error::Singular(format!("pairing on M̄_0,{n} in codimension {k}")))?;
        }
        Ok(M0nRing {
            n,
            basis,
            inv_gram,
            intersector: Mutex::new(Intersector::new()),
            normal_forms: Mutex::new(HashMap::new()),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n - 3
    }

    /// Basis strata of codimension `k` on labels `1..=n`.
    pub fn basis(&self, k: usize) -> &[StableTree] {
        self.basis.get(k).map_or(&[], |b| b.as_slice())
    }

    /// Entry `g^{στ}` of the inverse Gram matrix for `σ = basis(k)[i]` and
    /// `τ = basis(n-3-k)[j]`.
    pub fn inverse_gram(&self, k: usize, i: usize, j: usize) -> &Rational {
        &self.inv_gram[k][j][i]
    }

    /// `∫ [a] [b]` for strata on labels `1..=n`, zero unless codimensions
    /// are complementary.
    pub fn pair_trees(&self, a: &StableTree, b: &StableTree) -> i64 {
        let mut s = a.splits().to_vec();
        s.extend_from_slice(b.splits());
        self.intersector.lock().unwrap().top(a.label_mask(), &s)
    }

    fn triple(&self, a: &StableTree, b: &StableTree, c: &StableTree) -> i64 {
        let mut s = a.splits().to_vec();
        s.extend_from_slice(b.splits());
        s.extend_from_slice(c.splits());
        self.intersector.lock().unwrap().top(a.label_mask(), &s)
    }

    /// Coordinates of a standard-labelled stratum in `basis(codim)`.
    fn tree_normal_form(&self, tree: &StableTree) -> Vec<(usize, Rational)> {
        if let Some(v) = self.normal_forms.lock().unwrap().get(tree) {
            return v.clone();
        }
        let k = tree.edge_count();
        let dual = self.basis(self.dim() - k);
        let pairings: Vec<i64> = dual.iter().map(|c| self.pair_trees(tree, c)).collect();
        let coords = self.solve(k, &pairings.iter().map(|&p| rat(p)).collect::<Vec<_>>());
        self.normal_forms.lock().unwrap().insert(tree.clone(), coords.clone());
        coords
    }

    /// Basis coordinates in codimension `k` of the class whose pairings with
    /// `basis(n-3-k)` are `pairings`.
    fn solve(&self, k: usize, pairings: &[Rational]) -> Vec<(usize, Rational)> {
        let inv = &self.inv_gram[k];
        (0..self.basis[k].len())
            .filter_map(|i| {
                let v = pairings
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| !p.is_zero())
                    .fold(Rational::zero(), |acc, (j, p)| acc + p * &inv[j][i]);
                (!v.is_zero()).then_some((i, v))
            })
            .collect()
    }
}

impl std::fmt::Debug for M0nRing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sizes: Vec<usize> = self.basis.iter().map(Vec::len).collect();
        f.debug_struct("M0nRing").field("n", &self.n).field("basis_sizes", &sizes).finish()
    }
}

fn rings() -> &'static Mutex<HashMap<usize, Arc<M0nRing>>> {
    static RINGS: OnceLock<Mutex<HashMap<usize, Arc<M0nRing>>>> = OnceLock::new();
    RINGS.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cached ring for `n <= DEFAULT_N_MAX`.
pub fn ring(n: usize) -> Result<Arc<M0nRing>> {
    ring_with_limit(n, DEFAULT_N_MAX)
}

/// Cached ring for `n <= limit`, where `limit <= HARD_N_MAX`.
pub fn ring_with_limit(n: usize, limit: usize) -> Result<Arc<M0nRing>> {
    let limit = limit.min(HARD_N_MAX);
    if n > limit {
        return Err(Error::TooLarge { n, max: limit });
    }
    let mut map = rings().lock().unwrap();
    if let Some(r) = map.get(&n) {
        return Ok(r.clone());
    }
    let r = Arc::new(M0nRing::build(n)?);
    map.insert(n, r.clone());
    Ok(r)
}

/// Basis strata of `H^{2 codim}(M̄_{0,n})`.
pub fn basis(n: usize, codim: usize) -> Result<Vec<StrataAlgebraElement>> {
    Ok(ring(n)?.basis(codim).iter().map(StrataAlgebraElement::from_tree).collect())
}

fn standardizer(labels: &[Label]) -> (impl Fn(Label) -> Label + '_, impl Fn(Label) -> Label + '_) {
    let to_std = move |l: Label| labels.iter().position(|&x| x == l).expect("label present") as Label + 1;
    let from_std = move |l: Label| labels[(l - 1) as usize];
    (to_std, from_std)
}

/// Normal form: coordinates in the fixed basis, expressed as strata on the
/// element's own labels.
pub fn reduce(a: &StrataAlgebraElement) -> Result<StrataAlgebraElement> {
    let n = a.n();
    let r = ring(n)?;
    let (to_std, from_std) = standardizer(a.labels());
    let mut coords: BTreeMap<(usize, usize), Rational> = BTreeMap::new();
    for (t, c) in a.terms() {
        let st = t.relabel(&to_std)?;
        for (i, v) in r.tree_normal_form(&st) {
            *coords.entry((t.edge_count(), i)).or_insert_with(Rational::zero) += c * v;
        }
    }
    let mut out = StrataAlgebraElement::zero(a.labels());
    for ((k, i), v) in coords {
        if !v.is_zero() {
            out.add_term(r.basis(k)[i].relabel(&from_std)?, v)?;
        }
    }
    Ok(out)
}

/// Equality of classes.
pub fn classes_equal(a: &StrataAlgebraElement, b: &StrataAlgebraElement) -> Result<bool> {
    Ok(reduce(&a.sub(b)?)?.is_zero())
}

/// Cup product, returned in normal form.
pub fn multiply(a: &StrataAlgebraElement, b: &StrataAlgebraElement) -> Result<StrataAlgebraElement> {
    if a.labels() != b.labels() {
        return Err(Error::Invalid("factors live on different label sets".into()));
    }
    let n = a.n();
    let r = ring(n)?;
    let (to_std, from_std) = standardizer(a.labels());
    let dim = r.dim();
    let mut out = StrataAlgebraElement::zero(a.labels());
    for ka in a.codims() {
        for kb in b.codims() {
            let k = ka + kb;
            if k > dim {
                continue;
            }
            let dual = r.basis(dim - k);
            let mut pairings = vec![Rational::zero(); dual.len()];
            for (ta, ca) in a.homogeneous_part(ka).terms() {
                let sa = ta.relabel(&to_std)?;
                for (tb, cb) in b.homogeneous_part(kb).terms() {
                    let sb = tb.relabel(&to_std)?;
                    let c = ca * cb;
                    for (j, d) in dual.iter().enumerate() {
                        let v = r.triple(&sa, &sb, d);
                        if v != 0 {
                            pairings[j] += &c * rat(v);
                        }
                    }
                }
            }
            for (i, v) in r.solve(k, &pairings) {
                out.add_term(r.basis(k)[i].relabel(&from_std)?, v)?;
            }
        }
    }
    Ok(out)
}

/// Degree of the top-codimension part: the sum of the coefficients of point
/// strata.
pub fn integrate(a: &StrataAlgebraElement) -> Rational {
    let top = a.n().saturating_sub(3);
    a.terms().iter().filter(|(t, _)| t.edge_count() == top).fold(Rational::zero(), |acc, (_, c)| acc + c)
}

/// `∫ a · b`.
pub fn pairing(a: &StrataAlgebraElement, b: &StrataAlgebraElement) -> Result<Rational> {
    Ok(integrate(&multiply(a, b)?))
}

/// Pushforward along the map forgetting tail `s`.
pub fn pushforward_class(a: &StrataAlgebraElement, s: Label) -> Result<StrataAlgebraElement> {
    let labels: Vec<Label> = a.labels().iter().copied().filter(|&l| l != s).collect();
    if labels.len() == a.labels().len() {
        return Err(Error::NotATail(s));
    }
    let mut out = StrataAlgebraElement::zero(&labels);
    for (t, c) in a.terms() {
        if let Some(p) = t.pushforward(s)? {
            out.add_term(p, c.clone())?;
        }
    }
    Ok(out)
}

/// Pullback along the map forgetting a new tail `s`.
pub fn pullback_class(a: &StrataAlgebraElement, s: Label) -> Result<StrataAlgebraElement> {
    let mut labels = a.labels().to_vec();
    if labels.contains(&s) {
        return Err(Error::LabelCollision(s));
    }
    labels.push(s);
    labels.sort_unstable();
    let mut out = StrataAlgebraElement::zero(&labels);
    for (t, c) in a.terms() {
        for p in t.pullback(s)? {
            out.add_term(p, c.clone())?;
        }
    }
    Ok(out)
}

/// Element of `H*(M̄_{0,L1}) ⊗ H*(M̄_{0,L2})` as a combination of pairs of
/// strata.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TensorClass {
    pub terms: BTreeMap<(StableTree, StableTree), Rational>,
}

impl TensorClass {
    pub fn add_term(&mut self, a: StableTree, b: StableTree, c: Rational) {
        let e = self.terms.entry((a, b)).or_insert_with(Rational::zero);
        *e += c;
        if e.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
    }

    /// Applies linear maps on each factor.
    pub fn map(
        &self,
        f: impl Fn(&StableTree) -> Result<StrataAlgebraElement>,
        g: impl Fn(&StableTree) -> Result<StrataAlgebraElement>,
    ) -> Result<TensorClass> {
        let mut out = TensorClass::default();
        for ((a, b), c) in &self.terms {
            let fa = f(a)?;
            let gb = g(b)?;
            for (x, u) in fa.terms() {
                for (y, v) in gb.terms() {
                    out.add_term(x.clone(), y.clone(), c * u * v);
                }
            }
        }
        Ok(out)
    }

    /// Rewrites both factors in normal form.
    pub fn reduced(&self) -> Result<TensorClass> {
        self.map(|a| reduce(&StrataAlgebraElement::from_tree(a)), |b| reduce(&StrataAlgebraElement::from_tree(b)))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// The class of the diagonal `Δ = Σ [σ] g^{στ} ⊗ [τ]` over basis strata.
#[derive(Clone, Debug)]
pub struct DiagonalClass {
    pub n: usize,
    /// `(codim of σ, index of σ, index of τ, g^{στ})` for nonzero entries.
    pub entries: Vec<(usize, usize, usize, Rational)>,
    ring: Arc<M0nRing>,
}

impl DiagonalClass {
    pub fn ring(&self) -> &M0nRing {
        &self.ring
    }

    pub fn sigma(&self, k: usize, i: usize) -> &StableTree {
        &self.ring.basis(k)[i]
    }

    pub fn tau(&self, k: usize, j: usize) -> &StableTree {
        &self.ring.basis(self.ring.dim() - k)[j]
    }

    /// Diagonal as pairs of strata on labels `1..=n`.
    pub fn as_tensor(&self) -> TensorClass {
        let mut t = TensorClass::default();
        for (k, i, j, c) in &self.entries {
            t.add_term(self.sigma(*k, *i).clone(), self.tau(*k, *j).clone(), c.clone());
        }
        t
    }
}

/// Diagonal class of `M̄_{0,n}` for `n <= DEFAULT_N_MAX`.
pub fn diagonal(n: usize) -> Result<DiagonalClass> {
    diagonal_with_limit(n, DEFAULT_N_MAX)
}

pub fn diagonal_with_limit(n: usize, limit: usize) -> Result<DiagonalClass> {
    let ring = ring_with_limit(n, limit)?;
    let dim = ring.dim();
    let mut entries = Vec::new();
    for k in 0..=dim {
        for i in 0..ring.basis(k).len() {
            for j in 0..ring.basis(dim - k).len() {
                let c = ring.inverse_gram(k, i, j);
                if !c.is_zero() {
                    entries.push((k, i, j, c.clone()));
                }
            }
        }
    }
    Ok(DiagonalClass { n, entries, ring })
}

//! One PASS/FAIL line per acceptance criterion. Criterion 1 checks the
//! reference closed forms verbatim and is allowed to fail.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use frobtensor::frobenius::{
    coherence_check, conformality_check, flat_identity_check, grading_operator, grading_skew_check,
    quasi_homogeneity_check, wdvv_check, FrobeniusModel,
};
use frobtensor::m0n::{diagonal, pullback_class, pushforward_class, reduce, ring, StrataAlgebraElement, TensorClass};
use frobtensor::models;
use frobtensor::poly::Poly;
use frobtensor::rank_one::{cross_validate, left_var, right_var, tensor_rank1, universal_polynomial, RankOneTheory};
use frobtensor::scalar::{invert_matrix, rat, ratio, Rational};
use frobtensor::semisimple::{
    idempotent_expansion_tensor, pn_pm_model, pn_special_init, tensor_special_init_unchecked, FirstOrderData,
    SpecialInitialConditions, C64,
};
use frobtensor::series::{koszul_sign, CorrelatorFamily, GradedBasis, Metric};
use frobtensor::tensor::{generic_shift, tensor_correlators, theta_tau_compatibility};
use frobtensor::trees::{all_splits, Label, StableTree};
use num::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn random_rational(rng: &mut ChaCha8Rng) -> Rational {
    ratio(rng.gen_range(-9..=9), rng.gen_range(1..=5))
}

fn random_rank_one(rng: &mut ChaCha8Rng, n: usize, c3: Option<Rational>) -> RankOneTheory {
    let coeffs = (3..=n)
        .map(|i| match (i, &c3) {
            (3, Some(v)) => v.clone(),
            _ => random_rational(rng),
        })
        .collect();
    RankOneTheory::new(coeffs).unwrap()
}

fn criterion_1() -> Outcome {
    let a = |i: usize| Poly::var(left_var(i));
    let b = |i: usize| Poly::var(right_var(i));
    let c = |k: i64| Poly::constant(rat(k));
    let printed = [
        (4, a(4) + b(4)),
        (5, a(5) + c(5) * a(4) * b(4) + b(5)),
        (6, a(6) + (c(8) * a(4) * a(4) + a(5)) * b(4) + a(4) * (c(8) * b(4) * b(4) + b(5)) + b(6)),
        (
            7,
            a(7) + (c(35) * a(4) * a(5) + c(14) * a(6)) * b(4)
                + (c(61) * a(4) * a(4) * b(4) * b(4)
                    + c(33) * a(4) * a(4) * b(5)
                    + c(33) * a(5) * b(4) * b(4)
                    + c(19) * a(5) * b(5))
                + a(4) * (c(35) * b(4) * b(5) + c(14) * b(6))
                + b(7),
        ),
    ];
    let mut mismatched = Vec::new();
    for (n, expected) in printed {
        let p = universal_polynomial(n)
            .map_err(|e| e.to_string())?
            .substitute(|v| (v == left_var(3) || v == right_var(3)).then(Poly::one));
        if p != expected {
            mismatched.push(format!("C{n}: computed {}", p.display_with(&frobtensor::rank_one::var_name)));
        }
    }
    if mismatched.is_empty() {
        Ok("C4..C7 match".into())
    } else {
        Err(mismatched.join("; "))
    }
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for k in 0..20 {
        let t1 = random_rank_one(&mut rng, 7, None);
        let t2 = random_rank_one(&mut rng, 7, None);
        let r = cross_validate(&t1, &t2, 7).map_err(|e| e.to_string())?;
        ensure(r.passed(), format!("pair {k}: {:?}", r.violations.first()))?;
    }
    Ok("20 pairs, n <= 7".into())
}

fn criterion_3() -> Outcome {
    for n in 3..=8 {
        let p = universal_polynomial(n)
            .map_err(|e| e.to_string())?
            .substitute(|v| (v == left_var(3) || v == right_var(3)).then(Poly::zero));
        ensure(p.is_zero(), format!("P{n} does not vanish at C3' = C3'' = 0"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t1 = random_rank_one(&mut rng, 8, Some(rat(0)));
    let t2 = random_rank_one(&mut rng, 8, Some(rat(0)));
    let t = tensor_rank1(&t1, &t2).map_err(|e| e.to_string())?;
    ensure(t.coeffs().iter().all(Zero::is_zero), "nonzero tensor coefficient")?;
    let d = tensor_correlators(&t1.to_model(), &t2.to_model(), Some(7)).map_err(|e| e.to_string())?;
    ensure(d.correlators().is_empty(), "diagonal route gives nonzero correlators")?;
    Ok("symbolic n <= 8, diagonal route n <= 7".into())
}

fn forget(s: Label) -> impl Fn(&StableTree) -> frobtensor::Result<StrataAlgebraElement> {
    move |t: &StableTree| pushforward_class(&StrataAlgebraElement::from_tree(t), s)
}

fn pull(s: Label) -> impl Fn(&StableTree) -> frobtensor::Result<StrataAlgebraElement> {
    move |t: &StableTree| pullback_class(&StrataAlgebraElement::from_tree(t), s)
}

fn keep(t: &StableTree) -> frobtensor::Result<StrataAlgebraElement> {
    Ok(StrataAlgebraElement::from_tree(t))
}

fn criterion_4() -> Outcome {
    let e = |x: frobtensor::Error| x.to_string();
    for n in 4..=6 {
        let d = diagonal(n).map_err(e)?.as_tensor();
        for s in 1..=n as Label {
            ensure(d.map(forget(s), forget(s)).map_err(e)?.reduced().map_err(e)?.is_zero(), format!("(π,π)Δ, n={n}"))?;
        }
        let s = n as Label;
        let lhs = d.map(keep, forget(s)).map_err(e)?.reduced().map_err(e)?;
        let rhs = diagonal(n - 1).map_err(e)?.as_tensor().map(pull(s), keep).map_err(e)?.reduced().map_err(e)?;
        ensure(lhs == rhs, format!("(id,π)Δ, n={n}"))?;
        if n >= 5 {
            for (s, t) in [(n as Label, 1), (2, 3)] {
                let rest: Vec<Label> = (1..=n as Label).filter(|&l| l != s && l != t).collect();
                let mut small = TensorClass::default();
                for ((a, b), c) in &diagonal(n - 2).map_err(e)?.as_tensor().terms {
                    let map = |l: Label| rest[(l - 1) as usize];
                    small.add_term(a.relabel(map).map_err(e)?, b.relabel(map).map_err(e)?, c.clone());
                }
                let lhs = small.map(pull(s), pull(t)).map_err(e)?.reduced().map_err(e)?;
                let rhs = d.map(forget(t), forget(s)).map_err(e)?.reduced().map_err(e)?;
                ensure(lhs == rhs, format!("disjoint subsets, n={n}"))?;
            }
        }
    }
    for n in 3..=7 {
        for ((a, b), _) in &diagonal(n).map_err(e)?.as_tensor().terms {
            ensure(a.edge_count() + b.edge_count() == n - 3, format!("degree, n={n}"))?;
        }
    }
    Ok("lemmas n <= 6, degree n <= 7".into())
}

fn random_euler_factor(rng: &mut ChaCha8Rng, truncation: usize) -> FrobeniusModel {
    let c = loop {
        let c = random_rational(rng);
        if !c.is_zero() {
            break c;
        }
    };
    if rng.gen_bool(0.5) {
        models::two_dim_exponential(c, rat(rng.gen_range(1..=3)), truncation)
    } else {
        models::two_dim_power(c, rng.gen_range(3..=6), truncation)
    }
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..4 {
        let a = random_euler_factor(&mut rng, 6);
        let b = random_euler_factor(&mut rng, 6);
        let t = tensor_correlators(&a, &b, Some(6)).map_err(|e| e.to_string())?;
        let checks = [
            flat_identity_check(&t).map_err(|e| e.to_string())?,
            conformality_check(&t).map_err(|e| e.to_string())?,
            quasi_homogeneity_check(&t).map_err(|e| e.to_string())?,
        ];
        for r in checks {
            ensure(r.passed(), format!("pair {k}: {:?}", r.violations.first()))?;
        }
    }
    Ok("4 pairs at N = 6".into())
}

/// `Φ = x0² x1 / 2 + f(x1)` with random Taylor coefficients of `f`.
fn random_even_factor(rng: &mut ChaCha8Rng, truncation: usize) -> FrobeniusModel {
    let basis = GradedBasis::even(2);
    let metric = Metric::new(&basis, vec![vec![rat(0), rat(1)], vec![rat(1), rat(0)]]).unwrap();
    let mut y = CorrelatorFamily::new(basis, truncation).unwrap();
    y.insert(vec![0, 0, 1], rat(1)).unwrap();
    for n in 3..=truncation {
        y.insert(vec![1; n], random_rational(rng)).unwrap();
    }
    FrobeniusModel::new(metric, y, None, Some(0)).unwrap()
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for k in 0..10 {
        let a = random_even_factor(&mut rng, 6);
        let b = random_even_factor(&mut rng, 6);
        ensure(wdvv_check(&a).passed() && wdvv_check(&b).passed(), "factor fails WDVV")?;
        let t = tensor_correlators(&a, &b, Some(6)).map_err(|e| e.to_string())?;
        let r = wdvv_check(&t);
        ensure(r.passed(), format!("pair {k}: {:?}", r.violations.first()))?;
    }
    Ok("10 pairs at N = 6".into())
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in 0..3 {
        let a = random_even_factor(&mut rng, 5);
        let b = random_even_factor(&mut rng, 5);
        let s1 = generic_shift(a.basis(), 0);
        let s2 = generic_shift(b.basis(), 2);
        let r = theta_tau_compatibility(&a, &b, &s1, &s2, 5).map_err(|e| e.to_string())?;
        ensure(r.passed(), format!("pair {k}: {:?}", r.violations.first()))?;
    }
    Ok("generic shifts, truncation 5".into())
}

fn symbolic_sic(n: usize, first_var: u32) -> SpecialInitialConditions<Poly> {
    let var = |k: usize| Poly::var(first_var + k as u32);
    SpecialInitialConditions {
        u: (0..n).map(var).collect(),
        eta: (0..n).map(|i| var(n + i)).collect(),
        v: (0..n).map(|i| (0..n).map(|j| if i == j { Poly::zero() } else { var(2 * n + i * n + j) }).collect()).collect(),
    }
}

fn criterion_8() -> Outcome {
    let (n1, n2) = (3, 2);
    let s1 = symbolic_sic(n1, 0);
    let s2 = symbolic_sic(n2, 100);
    let t = tensor_special_init_unchecked(&s1, &s2);
    for i in 0..n1 {
        for j in 0..n2 {
            let ij = i * n2 + j;
            ensure(t.u[ij] == &s1.u[i] + &s2.u[j], "u additivity")?;
            ensure(t.eta[ij] == &s1.eta[i] * &s2.eta[j], "η product")?;
            for k in 0..n1 {
                for l in 0..n2 {
                    let expected = match (i == k, j == l) {
                        (true, true) => Poly::zero(),
                        (false, true) => s1.v[i][k].clone(),
                        (true, false) => s2.v[j][l].clone(),
                        (false, false) => Poly::zero(),
                    };
                    ensure(t.v[ij][k * n2 + l] == expected, "δ structure of v")?;
                }
            }
        }
    }
    let params = (C64::new(0.3, 0.1), C64::new(-0.2, 0.05), C64::new(0.5, -0.4));
    let mut worst: f64 = 0.0;
    for (n, m) in [(1, 1), (1, 2), (2, 2), (2, 3)] {
        let closed = pn_pm_model(n, m, params.0, params.1, params.2, 1e-10).map_err(|e| e.to_string())?;
        let law = tensor_special_init_unchecked(&pn_special_init(n, params.0, params.1), &pn_special_init(m, C64::zero(), params.2));
        worst = worst.max(closed.distance(&law));
    }
    ensure(worst < 1e-10, format!("Pn x Pm deviates by {worst:e}"))?;
    Ok(format!("symbolic δ-structure exact, Pn x Pm within {worst:.1e}"))
}

fn random_first_order(rng: &mut ChaCha8Rng, n: usize) -> FirstOrderData<Rational> {
    let mut q = || random_rational(rng);
    let mut e0: Vec<Vec<Rational>> = (0..n).map(|_| (0..n).map(|_| q()).collect()).collect();
    for (i, row) in e0.iter_mut().enumerate() {
        row[i] += rat(25);
    }
    FirstOrderData {
        e0,
        e1: (0..n).map(|_| (0..n).map(|_| (0..n).map(|_| q()).collect()).collect()).collect(),
        eta0: (0..n).map(|_| q()).collect(),
        deta: (0..n).map(|_| (0..n).map(|_| q()).collect()).collect(),
    }
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (n1, n2) in [(1, 1), (2, 2), (2, 3), (3, 3)] {
        let f1 = random_first_order(&mut rng, n1);
        let f2 = random_first_order(&mut rng, n2);
        let t = idempotent_expansion_tensor(&f1, &f2).map_err(|e| e.to_string())?;
        ensure(t.eta_derivs_by_differentiation() == t.eta_derivs, format!("{n1} x {n2}"))?;
    }
    Ok("exact over Q".into())
}

fn criterion_10() -> Outcome {
    let parities = [0u8, 1, 1, 0, 1];
    let perms = all_permutations(5);
    for p in &perms {
        let permuted: Vec<u8> = p.iter().map(|&i| parities[i]).collect();
        for q in perms.iter().step_by(7) {
            let pq: Vec<usize> = q.iter().map(|&i| p[i]).collect();
            ensure(
                koszul_sign(&pq, &parities) == koszul_sign(p, &parities) * koszul_sign(q, &permuted),
                "Koszul sign is not multiplicative",
            )?;
        }
    }
    let ext = models::exterior_algebra();
    for (key, v) in ext.correlators().entries() {
        for p in all_permutations(key.len()) {
            let idx: Vec<usize> = p.iter().map(|&i| key[i]).collect();
            let par: Vec<u8> = key.iter().map(|&a| ext.basis().parity(a)).collect();
            let expected = if koszul_sign(&p, &par) < 0 { -v.clone() } else { v.clone() };
            ensure(ext.correlators().value(&idx) == expected, "graded symmetry")?;
        }
    }
    let broken = models::projective_plane_with_counts(5, &[1, 2]);
    for m in [models::projective_plane(6), broken, models::exterior_algebra()] {
        ensure(wdvv_check(&m).passed() == coherence_check(&m).passed(), "WDVV and coherence disagree")?;
    }
    for m in [models::projective_line(5), models::projective_plane(5), models::exterior_algebra()] {
        ensure(grading_skew_check(&m).map_err(|e| e.to_string())?.passed(), "𝒱 is not skew")?;
        ensure(!grading_operator(&m).map_err(|e| e.to_string())?.is_empty(), "empty grading operator")?;
    }
    for n in 4..=7usize {
        let ls: Vec<Label> = (1..=n as Label).collect();
        let all = ls.iter().fold(0u64, |m, l| m | (1 << l));
        let (i, j, k, l) = (ls[0], ls[n - 1], ls[1], ls[2]);
        let mut rel = StrataAlgebraElement::zero_n(n);
        for s in all_splits(all) {
            let side = |b: Label| s & (1u64 << b) != 0;
            let tree = StableTree::from_splits(&ls, &[s]).map_err(|e| e.to_string())?;
            if side(i) == side(j) && side(k) == side(l) && side(i) != side(k) {
                rel.add_term(tree.clone(), rat(1)).map_err(|e| e.to_string())?;
            }
            if side(i) == side(k) && side(j) == side(l) && side(i) != side(j) {
                rel.add_term(tree, rat(-1)).map_err(|e| e.to_string())?;
            }
        }
        ensure(reduce(&rel).map_err(|e| e.to_string())?.is_zero(), format!("Keel relation, n={n}"))?;
        let r = ring(n).map_err(|e| e.to_string())?;
        for c in 0..=r.dim() {
            let gram: Vec<Vec<Rational>> = r
                .basis(c)
                .iter()
                .map(|a| r.basis(r.dim() - c).iter().map(|b| rat(r.pair_trees(a, b))).collect())
                .collect();
            ensure(invert_matrix(&gram).is_some(), format!("degenerate pairing, n={n}"))?;
        }
    }
    Ok("see also tests/properties.rs".into())
}

fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in all_permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Writes past the test harness's output capture so the lines show up in a
/// plain `cargo test` run.
fn report(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

#[test]
fn acceptance() {
    let criteria: [(usize, &str, fn() -> Outcome); 10] = [
        (1, "explicit tensor law C4..C7", criterion_1),
        (2, "U-transform and diagonal pathways agree", criterion_2),
        (3, "zero cubic terms give the zero tensor", criterion_3),
        (4, "diagonal lemmas", criterion_4),
        (5, "tensor identity and Euler field", criterion_5),
        (6, "WDVV closure", criterion_6),
        (7, "base-point compatibility", criterion_7),
        (8, "semisimple tensor law", criterion_8),
        (9, "idempotent expansion", criterion_9),
        (10, "property suite", criterion_10),
    ];
    let mut unexpected = Vec::new();
    for (k, name, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => report(&format!("criterion {k}: PASS  {name} ({detail}; {secs:.2}s)")),
            Err(why) => {
                report(&format!("criterion {k}: FAIL  {name} ({why}; {secs:.2}s)"));
                if k != 1 {
                    unexpected.push(k);
                }
            }
        }
    }
    assert!(unexpected.is_empty(), "criteria failed: {unexpected:?}");
}

use frobtensor::poly::Poly;
use frobtensor::rank_one::{
    bidegree, cross_validate, left_var, right_var, tensor_normalized, tensor_rank1, universal_polynomial,
    universal_polynomials, RankOneTheory,
};
use frobtensor::scalar::{rat, Rational};
use frobtensor::tensor::tensor_correlators;
use num::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn a(i: usize) -> Poly {
    Poly::var(left_var(i))
}

fn b(i: usize) -> Poly {
    Poly::var(right_var(i))
}

fn c(k: i64) -> Poly {
    Poly::constant(rat(k))
}

fn with_unit_cubics(p: &Poly) -> Poly {
    p.substitute(|v| (v == left_var(3) || v == right_var(3)).then(Poly::one))
}

#[test]
fn explicit_tensor_law_up_to_c7() {
    let c4 = a(4) + b(4);
    let c5 = a(5) + c(5) * a(4) * b(4) + b(5);
    // From B_3 = -15 C4³ + 10 C4 C5 - C6 the mixed C4 C5 terms carry 10 - 1 = 9.
    let c6 = a(6) + (c(8) * a(4) * a(4) + c(9) * a(5)) * b(4) + a(4) * (c(8) * b(4) * b(4) + c(9) * b(5)) + b(6);
    let c7 = a(7)
        + (c(35) * a(4) * a(5) + c(14) * a(6)) * b(4)
        + (c(61) * a(4) * a(4) * b(4) * b(4) + c(33) * a(4) * a(4) * b(5) + c(33) * a(5) * b(4) * b(4) + c(19) * a(5) * b(5))
        + a(4) * (c(35) * b(4) * b(5) + c(14) * b(6))
        + b(7);
    for (n, expected) in [(4, c4), (5, c5), (6, c6), (7, c7)] {
        assert_eq!(with_unit_cubics(&universal_polynomial(n).unwrap()), expected, "C{n}");
    }
}

fn symbolic(var: fn(usize) -> u32, n: usize) -> RankOneTheory<Poly> {
    RankOneTheory::new((3..=n).map(|i| Poly::var(var(i))).collect()).unwrap()
}

#[test]
fn diagonal_route_gives_the_same_universal_polynomials() {
    let n = 7;
    let t = tensor_correlators(&symbolic(left_var, n).to_model(), &symbolic(right_var, n).to_model(), Some(n)).unwrap();
    for k in 3..=n {
        assert_eq!(t.correlators().value(&vec![0; k]), universal_polynomial(k).unwrap(), "P{k}");
    }
}

#[test]
fn bidegree_and_bilength_constraints() {
    for (idx, p) in universal_polynomials(8).unwrap().iter().enumerate() {
        let n = idx + 3;
        assert!(!p.is_zero());
        for (m, _) in p.terms() {
            let ((k1, l1), (k2, l2)) = bidegree(m);
            assert_eq!(k1 as i64 - 2 * l1 as i64, n as i64 - 2);
            assert_eq!(k2 as i64 - 2 * l2 as i64, n as i64 - 2);
            assert_eq!(l1 + l2, n - 1);
        }
    }
}

fn random_theory(rng: &mut ChaCha8Rng, n: usize, c3: Option<i64>) -> RankOneTheory {
    let coeffs = (3..=n)
        .map(|i| match (i, c3) {
            (3, Some(v)) => rat(v),
            _ => Rational::new(rng.gen_range(-9..=9).into(), rng.gen_range(1..=5).into()),
        })
        .collect();
    RankOneTheory::new(coeffs).unwrap()
}

#[test]
fn pathways_agree_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..6 {
        let t1 = random_theory(&mut rng, 7, Some(1));
        let t2 = random_theory(&mut rng, 7, None);
        assert!(cross_validate(&t1, &t2, 7).unwrap().passed());
    }
    let t1 = random_theory(&mut rng, 6, Some(1));
    let t2 = random_theory(&mut rng, 6, Some(0));
    assert!(cross_validate(&t1, &t2, 6).unwrap().passed());
    let u = RankOneTheory::<Rational>::unit(6);
    assert!(cross_validate(&u, &u, 6).unwrap().passed());
}

#[test]
fn tensor_is_commutative_associative_and_unital() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (x, y, z) = (random_theory(&mut rng, 8, None), random_theory(&mut rng, 8, None), random_theory(&mut rng, 8, None));
    assert_eq!(tensor_rank1(&x, &y).unwrap(), tensor_rank1(&y, &x).unwrap());
    let left = tensor_rank1(&tensor_rank1(&x, &y).unwrap(), &z).unwrap();
    let right = tensor_rank1(&x, &tensor_rank1(&y, &z).unwrap()).unwrap();
    assert_eq!(left, right);
    assert_eq!(tensor_rank1(&x, &RankOneTheory::unit(8)).unwrap(), x);
}

#[test]
fn normalized_route_matches_universal_polynomials() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random_theory(&mut rng, 9, Some(1));
    let y = random_theory(&mut rng, 9, Some(1));
    assert_eq!(tensor_normalized(&x, &y).unwrap(), tensor_rank1(&x, &y).unwrap());
}

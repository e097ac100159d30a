use frobtensor::models::{projective_line, projective_plane};
use frobtensor::semisimple::{
    diagonalize_at_point, grading_in_idempotent_frame, idempotent_expansion_tensor, pn_pm_model, pn_special_init,
    special_init, tensor_special_init, tensor_special_init_unchecked, FirstOrderData, NumericOptions,
    SpecialInitialConditions, C64,
};
use frobtensor::scalar::{ratio, Rational};
use frobtensor::tensor::tensor_correlators;
use num::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn real(xs: &[f64]) -> Vec<C64> {
    xs.iter().map(|&x| C64::new(x, 0.0)).collect()
}

#[test]
fn projective_plane_at_origin() {
    let m = projective_plane(6);
    let opts = NumericOptions::default();
    let s = special_init(&m, &real(&[0.0; 3]), &opts).unwrap();
    let expected = pn_special_init(2, C64::zero(), C64::zero());
    let s = s.aligned_to(&expected, 1e-8).unwrap();
    assert!(s.distance(&expected) < 1e-10, "{s:?}");
    assert!(s.skewness_residual() < 1e-12);
}

#[test]
fn v_agrees_with_grading_operator_in_idempotent_frame() {
    let m = projective_line(24);
    let opts = NumericOptions::default();
    let x = real(&[0.2, 0.5]);
    let data = diagonalize_at_point(&m, &x, &opts).unwrap();
    let s = special_init(&m, &x, &opts).unwrap();
    let oracle = grading_in_idempotent_frame(&m, &data).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            if i != j {
                assert!((s.v[i][j] - oracle[i][j]).norm() < 1e-10);
            }
        }
    }
}

#[test]
fn integrated_coordinates_match_euler_coordinates() {
    let m = projective_line(24);
    let opts = NumericOptions::default();
    let x = real(&[0.1, 0.4]);
    let with_euler = diagonalize_at_point(&m, &x, &opts).unwrap();
    let bare = m.clone().with_euler(None).unwrap();
    let integrated = diagonalize_at_point(&bare, &x, &opts).unwrap();
    // The Euler field of P^1 has constant part 2 ∂_1, so u(0) = ±2.
    let u0 = [C64::new(2.0, 0.0), C64::new(-2.0, 0.0)];
    for (i, e) in integrated.idempotents.iter().enumerate() {
        let k = (0..2)
            .min_by(|&a, &b| {
                let da: f64 = with_euler.idempotents[a].iter().zip(e).map(|(p, q)| (p - q).norm()).sum();
                let db: f64 = with_euler.idempotents[b].iter().zip(e).map(|(p, q)| (p - q).norm()).sum();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        let shift = if with_euler.u[k].re > 0.0 { u0[0] } else { u0[1] };
        assert!((integrated.u[i] + shift - with_euler.u[k]).norm() < 1e-9, "{:?} {:?}", integrated.u, with_euler.u);
    }
}

#[test]
fn tensor_model_matches_tensor_law_and_closed_form() {
    let opts = NumericOptions::default();
    let (p1, p2) = (projective_line(4), projective_plane(4));
    let t = tensor_correlators(&p1, &p2, Some(4)).unwrap();
    let origin = real(&[0.0; 6]);
    let direct = special_init(&t, &origin, &opts).unwrap();
    let s1 = special_init(&p1, &real(&[0.0; 2]), &opts).unwrap();
    let s2 = special_init(&p2, &real(&[0.0; 3]), &opts).unwrap();
    let law = tensor_special_init(&s1, &s2, 1e-10).unwrap();
    let closed = pn_pm_model(1, 2, C64::zero(), C64::zero(), C64::zero(), 1e-10).unwrap();
    let direct = direct.aligned_to(&closed, 1e-8).unwrap();
    let law = law.aligned_to(&closed, 1e-8).unwrap();
    assert!(direct.distance(&closed) < 1e-10, "{direct:?}");
    assert!(law.distance(&closed) < 1e-10);
    assert!(direct.skewness_residual() < 1e-12);
}

#[test]
fn closed_form_factorizes() {
    let (x00, x10, x01) = (C64::new(0.3, 0.1), C64::new(-0.2, 0.0), C64::new(0.5, -0.4));
    let product = pn_pm_model(2, 3, x00, x10, x01, 1e-10).unwrap();
    let law = tensor_special_init_unchecked(&pn_special_init(2, x00, x10), &pn_special_init(3, C64::zero(), x01));
    assert!(product.distance(&law) < 1e-12);
}

#[test]
fn first_order_tensor_idempotents_match_the_tensor_model() {
    let opts = NumericOptions::default();
    let (p1, p2) = (projective_line(5), projective_plane(5));
    let t = tensor_correlators(&p1, &p2, Some(5)).unwrap();
    let f1 = FirstOrderData::from_point(&diagonalize_at_point(&p1, &real(&[0.0; 2]), &opts).unwrap()).unwrap();
    let f2 = FirstOrderData::from_point(&diagonalize_at_point(&p2, &real(&[0.0; 3]), &opts).unwrap()).unwrap();
    let expansion = idempotent_expansion_tensor(&f1, &f2).unwrap();
    let direct = FirstOrderData::from_point(&diagonalize_at_point(&t, &real(&[0.0; 6]), &opts).unwrap()).unwrap();
    for (ij, e) in expansion.e0.iter().enumerate() {
        let k = (0..e.len())
            .find(|&k| direct.e0[k].iter().zip(e).all(|(p, q)| (p - q).norm() < 1e-9))
            .expect("idempotent of the product");
        assert!((direct.eta0[k] - expansion.eta0[ij]).norm() < 1e-10);
        for (dir, want) in expansion.e1[ij].iter().enumerate() {
            for (p, q) in direct.e1[k][dir].iter().zip(want) {
                assert!((p - q).norm() < 1e-9);
            }
            assert!((direct.deta[k][dir] - expansion.deta[ij][dir]).norm() < 1e-9);
        }
    }
    let oracle = expansion.eta_derivs_by_differentiation();
    for (a, b) in oracle.iter().flatten().zip(expansion.eta_derivs.iter().flatten()) {
        assert!((a - b).norm() < 1e-10);
    }
}

fn random_first_order(rng: &mut ChaCha8Rng, n: usize) -> FirstOrderData<Rational> {
    let mut q = || ratio(rng.gen_range(-9..=9), rng.gen_range(1..=4));
    let mut e0: Vec<Vec<Rational>> = (0..n).map(|_| (0..n).map(|_| q()).collect()).collect();
    for (i, row) in e0.iter_mut().enumerate() {
        row[i] += ratio(20, 1);
    }
    let e1 = (0..n).map(|_| (0..n).map(|_| (0..n).map(|_| q()).collect()).collect()).collect();
    let eta0 = (0..n).map(|_| q()).collect();
    let deta = (0..n).map(|_| (0..n).map(|_| q()).collect()).collect();
    FirstOrderData { e0, e1, eta0, deta }
}

#[test]
fn exact_first_order_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (n1, n2) in [(1, 2), (2, 2), (2, 3)] {
        let f1 = random_first_order(&mut rng, n1);
        let f2 = random_first_order(&mut rng, n2);
        let t = idempotent_expansion_tensor(&f1, &f2).unwrap();
        assert_eq!(t.eta_derivs_by_differentiation(), t.eta_derivs);
    }
}

#[test]
fn exact_tensor_law_has_delta_structure() {
    let s1 = SpecialInitialConditions {
        u: vec![ratio(1, 1), ratio(-1, 1)],
        eta: vec![ratio(1, 2), ratio(-1, 2)],
        v: vec![vec![ratio(0, 1), ratio(1, 2)], vec![ratio(-1, 2), ratio(0, 1)]],
    };
    let s2 = SpecialInitialConditions { u: vec![ratio(3, 1)], eta: vec![ratio(2, 1)], v: vec![vec![ratio(0, 1)]] };
    let t = tensor_special_init_unchecked(&s1, &s2);
    assert_eq!(t.u, vec![ratio(4, 1), ratio(2, 1)]);
    assert_eq!(t.eta, vec![ratio(1, 1), ratio(-1, 1)]);
    assert_eq!(t.v, s1.v);
}

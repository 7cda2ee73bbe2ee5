mod common;

use bw_frechet::geometry::{sym_basis, vec_index};
use bw_frechet::simulation::haar_orthogonal;
use bw_frechet::*;
use common::{random_spd, random_sym, rng};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn case() -> impl Strategy<Value = (usize, u64)> {
    (2usize..=8, any::<u64>())
}

fn lmin(a: &DMatrix<f64>) -> f64 {
    a.clone().symmetric_eigen().eigenvalues.min()
}

fn lmax(a: &DMatrix<f64>) -> f64 {
    a.clone().symmetric_eigen().eigenvalues.max()
}

fn inv_sqrt(a: &SpdMatrix) -> DMatrix<f64> {
    let e = a.as_matrix().clone().symmetric_eigen();
    let mut m = e.eigenvectors.clone();
    for (j, l) in e.eigenvalues.iter().enumerate() {
        m.column_mut(j).scale_mut(l.powf(-0.25));
    }
    &m * m.transpose()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn distance_is_symmetric_and_scales((d, seed) in case(), c in 0.05f64..20.0) {
        let mut r = rng(seed);
        let a = random_spd(d, 1.5, &mut r);
        let b = random_spd(d, 1.5, &mut r);
        let ab = bw_distance(&a, &b).unwrap();
        prop_assert!((ab - bw_distance(&b, &a).unwrap()).abs() <= 1e-9 * (1.0 + ab));
        let scaled = bw_distance(&a.scaled(c), &b.scaled(c)).unwrap();
        prop_assert!((scaled - c.sqrt() * ab).abs() <= 1e-8 * (1.0 + scaled));
        prop_assert!(bw_distance(&a, &a).unwrap() < 1e-6);
    }

    #[test]
    fn distance_is_rotation_invariant((d, seed) in case()) {
        let mut r = rng(seed);
        let a = random_spd(d, 1.5, &mut r);
        let b = random_spd(d, 1.5, &mut r);
        let o = haar_orthogonal(d, &mut r);
        let lhs = bw_distance_squared(&a.conjugate(&o), &b.conjugate(&o)).unwrap();
        let rhs = bw_distance_squared(&a, &b).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs));
    }

    #[test]
    fn triangle_inequality((d, seed) in case()) {
        let mut r = rng(seed);
        let a = random_spd(d, 1.5, &mut r);
        let b = random_spd(d, 1.5, &mut r);
        let c = random_spd(d, 1.5, &mut r);
        let ab = bw_distance(&a, &b).unwrap();
        let bc = bw_distance(&b, &c).unwrap();
        let ac = bw_distance(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-9);
    }

    #[test]
    fn transport_pushes_forward((d, seed) in case()) {
        let mut r = rng(seed);
        let q = random_spd(d, 1.5, &mut r);
        let s = random_spd(d, 1.5, &mut r);
        let t = ot_map(&q, &s).unwrap();
        let push = t.as_matrix() * q.as_matrix() * t.as_matrix();
        prop_assert!((push - s.as_matrix()).norm() <= 1e-9 * s.as_matrix().norm());
        prop_assert!(lmin(t.as_matrix()) > 0.0);
    }

    #[test]
    fn gradient_matches_finite_difference((d, seed) in case()) {
        let mut r = rng(seed);
        let q = random_spd(d, 1.0, &mut r);
        let s = random_spd(d, 1.0, &mut r);
        let h = random_sym(d, &mut r);
        let g = w2_gradient(&q, &s).unwrap();
        let step = 1e-5;
        let plus = SpdMatrix::new(q.as_matrix() + &h * step).unwrap();
        let minus = SpdMatrix::new(q.as_matrix() - &h * step).unwrap();
        let fd = (bw_distance_squared(&plus, &s).unwrap() - bw_distance_squared(&minus, &s).unwrap()) / (2.0 * step);
        let exact = g.as_matrix().dot(&h);
        prop_assert!((fd - exact).abs() <= 1e-5 * (1.0 + exact.abs()));
    }

    #[test]
    fn differential_matches_finite_difference((d, seed) in case()) {
        let mut r = rng(seed);
        let q = random_spd(d, 1.0, &mut r);
        let s = random_spd(d, 1.0, &mut r);
        let h = SymMatrix::new(random_sym(d, &mut r)).unwrap();
        let step = 1e-5;
        let plus = SpdMatrix::new(q.as_matrix() + h.as_matrix() * step).unwrap();
        let minus = SpdMatrix::new(q.as_matrix() - h.as_matrix() * step).unwrap();
        let fd = (ot_map(&plus, &s).unwrap().into_matrix() - ot_map(&minus, &s).unwrap().into_matrix()) / (2.0 * step);
        let exact = dt_map(&q, &s, &h).unwrap().into_matrix();
        prop_assert!((&fd - &exact).norm() <= 1e-5 * exact.norm());
    }

    #[test]
    fn differential_is_self_adjoint_and_negative((d, seed) in case()) {
        let mut r = rng(seed);
        let q = random_spd(d, 1.5, &mut r);
        let s = random_spd(d, 1.5, &mut r);
        let x = SymMatrix::new(random_sym(d, &mut r)).unwrap();
        let y = SymMatrix::new(random_sym(d, &mut r)).unwrap();
        let dx = dt_map(&q, &s, &x).unwrap();
        let dy = dt_map(&q, &s, &y).unwrap();
        let lhs = dx.inner(&y);
        let rhs = x.inner(&dy);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        prop_assert!(dx.inner(&x) <= 1e-12);
        let op = dt_operator(&q, &s).unwrap();
        prop_assert!(op.symmetric_eigenvalues().iter().all(|&l| l <= 1e-10));
        prop_assert!((op.apply(&x).as_matrix() - dx.as_matrix()).norm() <= 1e-9 * (1.0 + dx.norm()));
    }

    #[test]
    fn differential_two_sided_bound((d, seed) in case()) {
        let mut r = rng(seed);
        let q = random_spd(d, 1.5, &mut r);
        let s = random_spd(d, 1.5, &mut r);
        let x = SymMatrix::new(random_sym(d, &mut r)).unwrap();
        let s_half = sqrtm(&s).unwrap();
        let m = s_half.as_matrix() * q.as_matrix() * s_half.as_matrix();
        let qi = inv_sqrt(&q);
        let scale = (&qi * x.as_matrix() * &qi).norm_squared() / 2.0;
        let quad = -dt_map(&q, &s, &x).unwrap().inner(&x);
        prop_assert!(quad >= lmin(&m).sqrt() * scale * (1.0 - 1e-9));
        prop_assert!(quad <= lmax(&m).sqrt() * scale * (1.0 + 1e-9));
    }

    #[test]
    fn quadratic_approximation_bounds((d, seed) in case()) {
        let mut r = rng(seed);
        let q0 = random_spd(d, 1.0, &mut r);
        let q1 = random_spd(d, 1.0, &mut r);
        let s = random_spd(d, 1.0, &mut r);
        let delta = SymMatrix::symmetrized(&(q1.as_matrix() - q0.as_matrix()));
        let t = ot_map(&q0, &s).unwrap();
        let id = DMatrix::<f64>::identity(d, d);
        let gap = bw_distance_squared(&q1, &s).unwrap() - bw_distance_squared(&q0, &s).unwrap()
            + (t.as_matrix() - &id).dot(delta.as_matrix());
        let curv = -dt_map(&q0, &s, &delta).unwrap().inner(&delta);
        let qi = inv_sqrt(&q0);
        let qp = &qi * q1.as_matrix() * &qi;
        let lower = 2.0 / (1.0 + lmax(&qp).sqrt()).powi(2) * curv;
        let upper = 2.0 / (1.0 + lmin(&qp).sqrt()).powi(2) * curv;
        let tol = 1e-9 * (1.0 + curv);
        prop_assert!(gap >= lower - tol, "gap {gap} lower {lower}");
        prop_assert!(gap <= upper + tol, "gap {gap} upper {upper}");
    }

    #[test]
    fn distance_against_frobenius((d, seed) in case()) {
        let mut r = rng(seed);
        let q0 = random_spd(d, 1.0, &mut r);
        let q1 = random_spd(d, 1.0, &mut r);
        let w2 = bw_distance_squared(&q0, &q1).unwrap();
        let f2 = (q1.as_matrix() - q0.as_matrix()).norm_squared();
        let (min0, max0) = (lmin(q0.as_matrix()), lmax(q0.as_matrix()));
        let (min1, max1) = (lmin(q1.as_matrix()), lmax(q1.as_matrix()));
        let upper = max0 / (min0 * min0) / (1.0 + min1 / max0) * f2;
        let lower = 0.5 * min0 / (max0 * max0) / (1.0 + max1 / min0) * f2;
        prop_assert!(w2 <= upper * (1.0 + 1e-9));
        prop_assert!(w2 >= lower * (1.0 - 1e-9));
    }

    #[test]
    fn geodesic_has_constant_speed((d, seed) in case(), t in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let a = random_spd(d, 1.0, &mut r);
        let b = random_spd(d, 1.0, &mut r);
        let g = geodesic(&a, &b, t).unwrap();
        let ab = bw_distance(&a, &b).unwrap();
        prop_assert!((bw_distance(&a, &g).unwrap() - t * ab).abs() <= 1e-6 * (1.0 + ab));
        prop_assert!((bw_distance(&g, &b).unwrap() - (1.0 - t) * ab).abs() <= 1e-6 * (1.0 + ab));
    }

    #[test]
    fn basis_spans_symmetric_matrices((d, seed) in case()) {
        let mut r = rng(seed);
        let x = SymMatrix::new(random_sym(d, &mut r)).unwrap();
        let b = sym_basis(d);
        let v = x.to_vec();
        let back = &b * (b.transpose() * &v);
        prop_assert!((back - &v).norm() <= 1e-12 * (1.0 + v.norm()));
        prop_assert_eq!(v[vec_index(d - 1, 0, d)], x.as_matrix()[(d - 1, 0)]);
    }
}

#[test]
fn swapped_frobenius_lower_bound_fails_on_diagonal_pair() {
    let q0 = SpdMatrix::from_diagonal(&[1.0, 100.0]).unwrap();
    let q1 = SpdMatrix::from_diagonal(&[2.0, 100.0]).unwrap();
    let w2 = bw_distance_squared(&q0, &q1).unwrap();
    assert!((w2 - (2f64.sqrt() - 1.0).powi(2)).abs() < 1e-12);
    // max(Q0) min(Q0)^-2 / (1 + max(Q1) / min(Q0)) / 2 times |Q1 - Q0|^2
    let swapped = 0.5 * 100.0 / (1.0 + 100.0);
    assert!(swapped > w2);
}

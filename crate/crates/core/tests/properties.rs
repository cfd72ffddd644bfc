mod common;

use approx::assert_relative_eq;
use fiblab_core::catalog;
use fiblab_core::discriminant::Exclusion;
use fiblab_core::lifting::{classify_point, lift_pair, opposite_directions};
use fiblab_core::milnorfield::milnor_vector;
use fiblab_core::regularity::{balanced_dreg_margin, dreg_margin, sphere_margin};
use fiblab_core::{Map, Tolerances, Vector};
use proptest::prelude::*;

const SEED: u64 = 7;

fn quadrics_rays() -> Exclusion {
    let s = 0.5f64.sqrt();
    Exclusion::around(vec![vec![1.0, 0.0], vec![-s, s], vec![-s, -s]], 0.05, 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn jacobian_matches_differences(index in 0u64..100_000) {
        let (map, x) = common::random_pair(SEED, index, 1e-3);
        let exact = map.jacobian(&x).unwrap();
        let fd = common::fd_jacobian(&map, &x, 1e-3);
        prop_assert!((&exact - &fd).norm() <= 1e-8 * exact.norm().max(1.0));
    }

    #[test]
    fn spherified_differential_matches_differences(index in 0u64..100_000) {
        let (map, x) = common::random_pair(SEED, index, 1e-3);
        let jet = map.jet(&x, None).unwrap();
        let fd = common::fd_spherified(&map, &x, common::fd_step(&map, &x));
        prop_assert!((&jet.d_spherified - &fd).norm() <= 1e-6 * jet.d_spherified.norm());
    }

    #[test]
    fn lifts_and_case_do_not_depend_on_scaling_f(index in 0u64..100_000, c in 0.01f64..100.0) {
        let (map, x) = common::random_pair(SEED, index, 1e-2);
        let scaled = map.scaled(c);
        let tols = Tolerances::default();
        let (a, b) = (map.jet(&x, None).unwrap(), scaled.jet(&x, None).unwrap());
        prop_assert!((&a.spherified - &b.spherified).norm() <= 1e-12 * a.spherified.norm().max(1.0));
        prop_assert_eq!(classify_point(&a, &tols).label, classify_point(&b, &tols).label);
        if let (Ok(pa), Ok(pb)) = (lift_pair(&a, &tols), lift_pair(&b, &tols)) {
            prop_assert!((&pa.w_f - &pb.w_f).norm() <= 1e-8 * pa.w_f.norm().max(1.0));
            prop_assert!((&pa.w_sph - &pb.w_sph).norm() <= 1e-8 * pa.w_sph.norm().max(1.0));
            // ∇h scales by c², so α scales by 1/c².
            prop_assert!(((pa.alpha - pb.alpha * c * c) / pa.alpha).abs() <= 1e-8);
        }
    }

    #[test]
    fn submersion_margins_vanish_together(index in 0u64..100_000) {
        let (map, x) = common::random_pair(SEED, index, 1e-3);
        let jet = map.jet(&x, None).unwrap();
        let (c, d, b) = (dreg_margin(&jet), sphere_margin(&jet), balanced_dreg_margin(&jet));
        prop_assert_eq!(c < 1e-10, d < 1e-10);
        prop_assert_eq!(c < 1e-10, b < 1e-10);
    }

    #[test]
    fn opposite_predicate_is_symmetric_and_scale_free(
        u in prop::collection::vec(-10.0f64..10.0, 3),
        v in prop::collection::vec(-10.0f64..10.0, 3),
        s in 0.1f64..10.0,
    ) {
        let (u, v) = (Vector::from_vec(u), Vector::from_vec(v));
        prop_assume!(u.norm() > 1e-6 && v.norm() > 1e-6);
        let tol = 1e-9;
        let uv = opposite_directions(&u, &v, tol).unwrap();
        prop_assert_eq!(uv, opposite_directions(&v, &u, tol).unwrap());
        prop_assert_eq!(uv, opposite_directions(&(&u * s), &v, tol).unwrap());
        prop_assert!(opposite_directions(&u, &(-&u * s), tol).unwrap());
        prop_assert!(!opposite_directions(&u, &(&u * s), tol).unwrap());
    }

    #[test]
    fn quadrics_field_points_out_of_tube_and_sphere(
        theta in 0.0f64..std::f64::consts::TAU,
        z in -1.0f64..1.0,
        r in 0.005f64..0.5,
    ) {
        let map: Map = catalog::quadrics_3_2();
        let rho = (1.0 - z * z).sqrt();
        let x = Vector::from_vec(vec![rho * theta.cos(), rho * theta.sin(), z]) * r;
        let jet = map.jet(&x, None).unwrap();
        prop_assume!(quadrics_rays().excludes(&jet.fx).is_none());
        let s = milnor_vector(&jet, &Tolerances::default()).unwrap();
        prop_assert!(s.valid);
        prop_assert!(s.w_tilde.dot(&jet.grad_h) > 0.0);
        prop_assert!(s.w_tilde.dot(&jet.grad_sq_radius) > 0.0);
    }
}

#[test]
fn square_field_is_radial_at_every_radius() {
    let map: Map = catalog::square();
    let tols = Tolerances::default();
    for k in 1..=50 {
        let t = k as f64 * 0.37;
        let r = 0.02 * k as f64;
        let x = Vector::from_vec(vec![r * t.cos(), r * t.sin()]);
        let jet = map.jet(&x, None).unwrap();
        let s = milnor_vector(&jet, &tols).unwrap();
        let cos = s.w_tilde.dot(&x) / (s.w_tilde.norm() * r);
        assert_relative_eq!(cos, 1.0, epsilon = 1e-12);
    }
}

#[test]
fn submersion_margins_vanish_together_at_a_known_failure() {
    // The fibres of the spherified map are tangent to the sphere on
    // {x = 0, z² = y² + w²}.
    let map: Map = catalog::nondreg_4_3();
    let x = Vector::from_vec(vec![0.0, 0.3, 0.1f64.sqrt(), 0.1]);
    let jet = map.jet(&x, None).unwrap();
    let (c, d, b) = (
        dreg_margin(&jet),
        sphere_margin(&jet),
        balanced_dreg_margin(&jet),
    );
    assert!(c < 1e-10 && d < 1e-10 && b < 1e-10, "{c:e} {d:e} {b:e}");
}

use proptest::prelude::*;

use strip_lab_core::geometry::{
    ruled_point, solve_jacobi, taylor_bounds, CurvatureProfile, StripGeometry,
};
use strip_lab_core::oracle::{flat_survival, heat_kernel_1d, SeriesOptions};
use strip_lab_core::Region;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn jacobi_factor_stays_inside_envelope(amp in -0.4f64..0.4, w in 1.0f64..4.0, a in 0.3f64..1.0) {
        let profile = CurvatureProfile::GaussianBump {
            amplitude: amp / (a * a),
            center: [0.0, 0.0],
            widths: [w, w],
            radius: 2.0 * w,
        };
        let geom = StripGeometry::new(a, 3.0 * w, 41, 17, &profile).unwrap();
        let m = solve_jacobi(&profile, &geom).unwrap();
        let (lo, hi) = taylor_bounds(profile.sup_norm(), a).unwrap();
        for &x1 in &geom.x1_nodes() {
            for &x2 in &geom.x2_nodes() {
                let f = m.eval(x1, x2).0;
                prop_assert!(f > 0.0);
                prop_assert!(f >= lo - 1e-9 && f <= hi + 1e-9);
            }
        }
    }

    #[test]
    fn ruled_factor_dominates_one(w in -1.0f64..1.0, x2 in -1.0f64..1.0) {
        let p = ruled_point(w, x2);
        prop_assert!(p.f >= 1.0);
        prop_assert!(p.curvature <= 0.0);
        prop_assert!((p.curvature + w * w / p.f.powi(4)).abs() < 1e-12);
    }

    #[test]
    fn flat_survival_is_a_decreasing_probability(x1 in -1.0f64..1.0, x2 in -0.9f64..0.9, t in 0.05f64..2.0) {
        let o = SeriesOptions::default();
        let p = flat_survival([x1, x2], Region::Whole, t, 1.0, &o).unwrap().value;
        let q = flat_survival([x1, x2], Region::Whole, t * 1.5, 1.0, &o).unwrap().value;
        let box_only = flat_survival([x1, x2], Region::rect((-1.0, 1.0), (-1.0, 1.0)), t, 1.0, &o).unwrap().value;
        prop_assert!(p > 0.0 && p <= 1.0 + 1e-9);
        prop_assert!(q <= p + 1e-9);
        prop_assert!(box_only <= p + 1e-9);
    }

    #[test]
    fn heat_kernel_is_symmetric(x in -3.0f64..3.0, y in -3.0f64..3.0, t in 0.01f64..5.0) {
        prop_assert!((heat_kernel_1d(x, y, t) - heat_kernel_1d(y, x, t)).abs() < 1e-15);
    }
}

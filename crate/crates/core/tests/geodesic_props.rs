mod common;

use gengeom::fieldexpr::parse;
use gengeom::geodesic::{integrate_geodesic, GeodesicInit, GeodesicOptions, PpWaveReduced};
use gengeom::levicivita::ChristoffelField;
use proptest::prelude::*;

fn gamma(name: &str) -> ChristoffelField {
    ChristoffelField::new(&common::metric(name)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ppwave_norm_is_conserved(
        x0 in -1.5f64..1.5,
        y0 in -1.5f64..1.5,
        vd in -1.0f64..1.0,
        xd in -0.5f64..0.5,
        yd in -0.5f64..0.5,
        eps_i in 0usize..5,
    ) {
        // outside the impulse g(γ', γ') = -u̇ v̇ + ẋ² + ẏ² with u̇ = 1
        prop_assume!((-vd + xd * xd + yd * yd).abs() >= 0.1);
        let g = gamma("ppwave");
        let eps = common::standard_grid().values()[eps_i];
        let init = GeodesicInit { t0: -1.0, position: vec![-1.0, 0.0, x0, y0], velocity: vec![1.0, vd, xd, yd] };
        let opts = GeodesicOptions::default();
        let tr = integrate_geodesic(&g, &init, 1.0, eps, &opts).unwrap();
        let drift = tr.norm_drift(g.metric()).unwrap();
        prop_assert!(drift <= 10.0 * opts.tol, "drift {drift}");
    }

    #[test]
    fn sphere_norm_and_residual(th in 1.0f64..2.1, thd in -0.3f64..0.3, phd in 0.5f64..1.0) {
        // kept away from the coordinate poles, where φ̇ grows without bound and
        // the t-grid no longer resolves the curve
        let g = gamma("sphere2");
        let init = GeodesicInit { t0: 0.0, position: vec![th, 0.0], velocity: vec![thd, phd] };
        let opts = GeodesicOptions::default();
        let tr = integrate_geodesic(&g, &init, 2.0, 0.1, &opts).unwrap();
        prop_assert!(tr.norm_drift(g.metric()).unwrap() <= 10.0 * opts.tol);
        prop_assert!(tr.stats.max_residual <= 100.0 * opts.tol, "{}", tr.stats.max_residual);
    }

    #[test]
    fn reduced_and_full_ppwave_agree(
        x0 in -1.5f64..1.5,
        y0 in -1.5f64..1.5,
        xd in -0.5f64..0.5,
        yd in -0.5f64..0.5,
    ) {
        let g = gamma("ppwave");
        let reduced = PpWaveReduced::new(&parse("x^2 - y^2").unwrap()).unwrap();
        let opts = GeodesicOptions::default();
        let init = GeodesicInit { t0: -1.0, position: vec![-1.0, 0.0, x0, y0], velocity: vec![1.0, 0.0, xd, yd] };
        for &eps in common::standard_grid().values() {
            let full = integrate_geodesic(&g, &init, 1.0, eps, &opts).unwrap();
            let (_, states, _) =
                reduced.integrate(&[0.0, 0.0, x0, xd, y0, yd], -1.0, 1.0, eps, g.metric().delta(), &opts).unwrap();
            let mut worst: f64 = 0.0;
            for ((p, v), s) in full.positions.iter().zip(&full.velocities).zip(&states) {
                let full_state = [p[1], v[1], p[2], v[2], p[3], v[3]];
                for (a, b) in full_state.iter().zip(s) {
                    worst = worst.max((a - b).abs());
                }
            }
            prop_assert!(worst <= 1e-8, "eps {eps}: {worst}");
        }
    }

    #[test]
    fn affine_reparametrization_on_sphere(th in 0.6f64..2.5, thd in -1.0f64..1.0, phd in 0.2f64..1.0) {
        let g = gamma("sphere2");
        let opts = GeodesicOptions { samples: 201, ..Default::default() };
        let c = 2.0;
        let slow = GeodesicInit { t0: 0.0, position: vec![th, 0.0], velocity: vec![thd, phd] };
        let fast = GeodesicInit { velocity: vec![c * thd, c * phd], ..slow.clone() };
        let a = integrate_geodesic(&g, &slow, 2.0, 0.1, &opts).unwrap();
        let b = integrate_geodesic(&g, &fast, 2.0 / c, 0.1, &opts).unwrap();
        for (p, q) in a.positions.iter().zip(&b.positions) {
            for (x, y) in p.iter().zip(q) {
                prop_assert!((x - y).abs() <= 1e-6);
            }
        }
    }
}

#[test]
fn flat_geodesics_are_straight_lines() {
    let g = gamma("euclid2");
    let init = GeodesicInit { t0: 0.0, position: vec![0.5, -0.25], velocity: vec![1.0, -0.5] };
    let tr = integrate_geodesic(&g, &init, 1.0, 0.05, &GeodesicOptions::default()).unwrap();
    for (t, p) in tr.t.iter().zip(&tr.positions) {
        assert!((p[0] - (0.5 + t)).abs() <= 1e-12);
        assert!((p[1] - (-0.25 - 0.5 * t)).abs() <= 1e-12);
    }
}

mod common;

use gengeom::fieldexpr::{evaluate, Bindings};
use gengeom::levicivita::{compatibility_residual, koszul_residual, ChristoffelField, VectorFieldExpr};
use gengeom::scenario;
use proptest::prelude::*;

/// Three non-commuting polynomial fields in the metric's coordinates.
fn test_fields(gamma: &ChristoffelField) -> [VectorFieldExpr; 3] {
    let m = gamma.metric();
    let c = m.coords();
    let d = m.dim();
    let mk = |f: &dyn Fn(usize) -> String| {
        let texts: Vec<String> = (0..d).map(f).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        VectorFieldExpr::parse(m, &refs).unwrap()
    };
    [
        mk(&|i| format!("1 + {}^2", c[(i + 1) % d])),
        mk(&|i| format!("{} - 0.5*{}", c[i], c[(i + d - 1) % d])),
        mk(&|i| format!("0.3*{}*{} + {}", c[0], c[d - 1], i as f64 - 0.5)),
    ]
}

#[test]
fn koszul_formula_on_every_scenario() {
    for s in common::regular_scenarios() {
        let m = s.metric.build().unwrap();
        let gamma = ChristoffelField::new(&m).unwrap();
        let [xi, eta, zeta] = test_fields(&gamma);
        for &eps in s.grid().unwrap().values() {
            let pts = common::scenario_points(&s, eps, 30);
            let r = koszul_residual(&gamma, &xi, &eta, &zeta, &pts, eps).unwrap();
            assert!(r.max_relative <= 1e-8, "{} eps={eps}: {r:?}", s.name);
        }
    }
}

#[test]
fn metric_compatibility_on_every_scenario() {
    for s in common::regular_scenarios() {
        let m = s.metric.build().unwrap();
        let gamma = ChristoffelField::new(&m).unwrap();
        for &eps in s.grid().unwrap().values() {
            let pts = common::scenario_points(&s, eps, 20);
            let r = compatibility_residual(&gamma, &pts, eps).unwrap();
            assert!(r.max_relative <= 1e-8, "{} eps={eps}: {r:?}", s.name);
        }
    }
}

#[test]
fn torsion_free_by_construction() {
    for s in scenario::registry() {
        let gamma = ChristoffelField::new(&s.metric.build().unwrap()).unwrap();
        let d = gamma.dim();
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    assert!(gamma.symbol(k, i, j).ptr_eq(gamma.symbol(k, j, i)));
                }
            }
        }
    }
}

#[test]
fn smooth_metrics_give_classical_symbols() {
    let gamma = ChristoffelField::new(&common::metric("sphere2")).unwrap();
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let e = gamma.symbol(k, i, j);
                assert!(!e.contains_eps() && !e.contains_delta());
            }
        }
    }
    let delta = common::metric("sphere2").delta().clone();
    for th in [0.3, 0.9, 1.4, 2.5] {
        let b = Bindings::new(0.1, delta.clone()).with("theta", th).with("phi", 0.7);
        let g = |k, i, j| evaluate(gamma.symbol(k, i, j), &b).unwrap();
        assert!((g(0, 1, 1) + th.sin() * th.cos()).abs() <= 1e-12);
        assert!((g(1, 0, 1) - th.cos() / th.sin()).abs() <= 1e-12);
        assert_eq!(g(0, 0, 0), 0.0);
        assert_eq!(g(1, 1, 1), 0.0);
    }
    let flat = ChristoffelField::new(&common::metric("minkowski")).unwrap();
    assert!(flat.nonzero().is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Koszul also holds for a random smooth 2-metric.
    #[test]
    fn koszul_random_metric(a in 0.5f64..2.0, b in -0.3f64..0.3, c in 0.5f64..2.0, eps in 0.01f64..0.5) {
        let spec = gengeom::metric::MetricSpec {
            label: "random".into(),
            dim: 2,
            coords: vec!["x".into(), "y".into()],
            components: [
                ("xx".to_string(), format!("{a} + x^2*eps")),
                ("xy".to_string(), format!("{b}*sin(x*y)")),
                ("yy".to_string(), format!("{c} + cos(x)^2")),
            ]
            .into_iter()
            .collect(),
            parameters: Default::default(),
            delta: Default::default(),
        };
        let gamma = ChristoffelField::new(&spec.build().unwrap()).unwrap();
        let [xi, eta, zeta] = test_fields(&gamma);
        let pts = common::spread_points(&[(-1.0, 1.0), (-1.0, 1.0)], 10);
        prop_assert!(koszul_residual(&gamma, &xi, &eta, &zeta, &pts, eps).unwrap().max_relative <= 1e-8);
        prop_assert!(compatibility_residual(&gamma, &pts, eps).unwrap().max_relative <= 1e-8);
    }
}

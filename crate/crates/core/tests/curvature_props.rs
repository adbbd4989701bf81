mod common;

use gengeom::curvature::{curvature_diagnostics, CurvatureBundle};
use gengeom::levicivita::ChristoffelField;
use gengeom::metric::MetricSpec;
use proptest::prelude::*;

fn bundle_of(spec: &MetricSpec) -> CurvatureBundle {
    CurvatureBundle::new(&ChristoffelField::new(&spec.build().unwrap()).unwrap()).unwrap()
}

fn scaled(spec: &MetricSpec, c: f64) -> MetricSpec {
    let mut s = spec.clone();
    for v in s.components.values_mut() {
        *v = format!("{c}*({v})");
    }
    s
}

#[test]
fn identities_hold_on_every_scenario() {
    for s in common::regular_scenarios() {
        let b = bundle_of(&s.metric);
        for &eps in s.grid().unwrap().values() {
            let pts = common::scenario_points(&s, eps, 12);
            let diag = curvature_diagnostics(&b, &pts, eps).unwrap();
            assert!(diag.worst() <= 1e-8, "{} eps={eps}: {diag:?}", s.name);
            if s.name != "remark35" {
                assert!(diag.contracted_bianchi.is_some(), "{}: {:?}", s.name, diag.notes);
            }
        }
    }
}

#[test]
fn mixed_riemann_is_scale_covariant() {
    for name in ["sphere2", "ppwave"] {
        let s = gengeom::scenario::find(name).unwrap();
        let a = bundle_of(&s.metric);
        let b = bundle_of(&scaled(&s.metric, 4.0));
        for &eps in s.grid().unwrap().values() {
            for p in common::scenario_points(&s, eps, 8) {
                let va = a.evaluate(&p, eps).unwrap();
                let vb = b.evaluate(&p, eps).unwrap();
                let scale = va.riemann.iter().map(|x| x.abs()).fold(1.0, f64::max);
                for (x, y) in va.riemann.iter().zip(&vb.riemann) {
                    assert!((x - y).abs() <= 1e-9 * scale, "{name} {p:?} {eps}: {x} vs {y}");
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn constant_metrics_are_structurally_flat(
        diag in prop::collection::vec(prop_oneof![-3.0f64..-0.5, 0.5f64..3.0], 3),
        off in prop::collection::vec(-0.2f64..0.2, 3),
    ) {
        let coords = ["x", "y", "z"];
        let mut components = std::collections::BTreeMap::new();
        for i in 0..3 {
            components.insert(format!("{},{}", coords[i], coords[i]), format!("{}", diag[i]));
        }
        components.insert("x,y".into(), format!("{}", off[0]));
        components.insert("x,z".into(), format!("{}", off[1]));
        components.insert("y,z".into(), format!("{}", off[2]));
        let spec = MetricSpec {
            label: "constant".into(),
            dim: 3,
            coords: coords.iter().map(|c| c.to_string()).collect(),
            components,
            parameters: Default::default(),
            delta: Default::default(),
        };
        let b = bundle_of(&spec);
        prop_assert!(b.is_structurally_flat());
        for a in 0..3 {
            for c in 0..3 {
                prop_assert!(b.ricci(a, c).is_zero());
            }
        }
    }
}

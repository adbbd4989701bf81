use gengeom::fieldexpr::{evaluate, parse, Bindings, DeltaNet, Profile, Tape};
use gengeom::quadrature::{integrate, QuadOptions};
use proptest::prelude::*;

fn expr_text() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x".to_string()),
        Just("y".to_string()),
        (-3i32..=3).prop_map(|n| format!("({n})")),
        (1u32..20).prop_map(|n| format!("{}", n as f64 / 4.0)),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} * {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) / (2 + ({b})^2)")),
            (inner.clone(), 0u32..4).prop_map(|(a, n)| format!("({a})^{n}")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("tanh({a})")),
            inner.clone().prop_map(|a| format!("exp(tanh({a}))")),
            inner.clone().prop_map(|a| format!("sqrt(1 + ({a})^2)")),
            inner.clone().prop_map(|a| format!("log(2 + sin({a}))")),
            inner.prop_map(|a| format!("-{a}")),
        ]
    })
}

fn eval_xy(e: &gengeom::fieldexpr::FieldExpr, x: f64, y: f64) -> f64 {
    let b = Bindings::new(0.5, DeltaNet::bump()).with("x", x).with("y", y);
    evaluate(e, &b).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn derivative_matches_central_difference(
        text in expr_text(),
        pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 20),
    ) {
        let e = parse(&text).unwrap();
        let dx = e.differentiate("x").unwrap();
        let h = 1e-5;
        for (x, y) in pts {
            let exact = eval_xy(&dx, x, y);
            let fd = (eval_xy(&e, x + h, y) - eval_xy(&e, x - h, y)) / (2.0 * h);
            // central differences lose |f|·1e-11 to rounding, so the
            // function's own magnitude enters the scale
            let scale = 1f64.max(exact.abs()).max(eval_xy(&e, x, y).abs());
            prop_assert!((fd - exact).abs() <= 1e-6 * scale, "{text} at ({x}, {y}): {fd} vs {exact}");
        }
    }

    #[test]
    fn evaluation_is_deterministic(text in expr_text(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let e = parse(&text).unwrap();
        let b = Bindings::new(0.1, DeltaNet::bump()).with("x", x).with("y", y);
        let first = evaluate(&e, &b).unwrap();
        let again = evaluate(&e, &b.clone()).unwrap();
        prop_assert_eq!(first.to_bits(), again.to_bits());
        let tape = Tape::compile(&[e], &["x".to_string(), "y".to_string()]).unwrap();
        let delta = DeltaNet::bump().at(0.1).unwrap();
        prop_assert_eq!(tape.eval_vec(&[x, y], 0.1, &delta).unwrap()[0].to_bits(), first.to_bits());
    }

    #[test]
    fn display_round_trips(text in expr_text()) {
        let e = parse(&text).unwrap();
        let again = parse(&e.to_string()).unwrap();
        prop_assert_eq!(&again, &e);
    }
}

fn grid() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.025, 0.0125]
}

fn delta_moment(net: &DeltaNet, order: u8, power: i32, eps: f64) -> f64 {
    let d = net.at(eps).unwrap();
    let r = d.support_radius();
    let opts = QuadOptions { abs_tol: 1e-13, ..QuadOptions::default() };
    integrate(|u| Ok(u.powi(power) * d.value(order, u)), -r, r, &[0.0], opts).unwrap().value
}

#[test]
fn delta_integration_by_parts_identities() {
    let profiles = [Profile::Bump, Profile::GaussianTruncated, Profile::Signed, Profile::Oscillatory];
    for p in profiles {
        let net = DeltaNet::new(p.clone(), "eps").unwrap();
        for eps in grid() {
            let m0 = delta_moment(&net, 0, 0, eps);
            assert!((m0 - 1.0).abs() <= 1e-8, "{p}: ∫δ = {m0} at {eps}");
            let d0 = delta_moment(&net, 1, 0, eps);
            assert!(d0.abs() <= 1e-6, "{p}: ∫δ' = {d0} at {eps}");
            let d1 = delta_moment(&net, 1, 1, eps);
            assert!((d1 + 1.0).abs() <= 1e-6, "{p}: ∫uδ' = {d1} at {eps}");
        }
    }
}

#[test]
fn delta_symbols_evaluate_through_the_net() {
    let e = parse("delta(u) + 2*delta1(u) - delta2(u)").unwrap();
    let net = DeltaNet::bump();
    for eps in grid() {
        let d = net.at(eps).unwrap();
        for u in [-0.7 * eps, 0.0, 0.2 * eps, 2.0 * eps] {
            let b = Bindings::new(eps, net.clone()).with("u", u);
            let want = d.value(0, u) + 2.0 * d.value(1, u) - d.value(2, u);
            let got = evaluate(&e, &b).unwrap();
            assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
    }
}

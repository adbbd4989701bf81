use gengeom::asymptotics::{
    check_invertible_on, estimate_growth_order, is_strictly_nonzero, EpsilonGrid, FieldNet, NetSource, Region, ScalarNet,
};
use proptest::prelude::*;

fn grid_strategy() -> impl Strategy<Value = EpsilonGrid> {
    (0.05f64..0.5, 1.5f64..4.0, 6usize..12).prop_map(|(e_max, decades, n)| {
        EpsilonGrid::geometric(e_max, e_max * 10f64.powf(-decades), n).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn growth_order_of_inverse_powers(k in 0i32..=3, grid in grid_strategy()) {
        let net = ScalarNet::new("eps^-k", move |e| e.powi(-k));
        let r = estimate_growth_order(NetSource::Scalar(&net), &grid).unwrap();
        prop_assert!((r.estimated_order - k as f64).abs() <= 0.05, "{}", r.estimated_order);
    }

    #[test]
    fn strict_nonzero_decision_survives_scaling(
        k in 0i32..10,
        fast in any::<bool>(),
        c in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3],
    ) {
        let grid = EpsilonGrid::geometric(0.2, 0.0125, 6).unwrap();
        let r = if fast {
            ScalarNet::new("eps^(1/(2eps^2))", |e| e.powf(1.0 / (2.0 * e * e)))
        } else {
            ScalarNet::new("eps^k", move |e| e.powi(k))
        };
        let a = is_strictly_nonzero(&r, &grid);
        let b = is_strictly_nonzero(&r.scaled(c), &grid);
        prop_assert_eq!(a.decision, b.decision);
        prop_assert_eq!(a.decision, !fast);
    }

    #[test]
    fn uniform_bound_dominates_pointwise(
        c0 in -2.0f64..2.0,
        c1 in -2.0f64..2.0,
        k in 0i32..4,
    ) {
        let grid = EpsilonGrid::geometric(0.2, 0.0125, 5).unwrap();
        let f = FieldNet::new("field", 1, move |e, p| c0 + c1 * p[0] * p[0] + e.powi(k) * (3.0 * p[0]).sin());
        let region = Region::new(vec![(-1.0, 1.0)], 21).unwrap();
        let r = check_invertible_on(&f, &region, &grid).unwrap();
        if r.decision {
            for p in region.points() {
                prop_assert!(is_strictly_nonzero(&f.at_point(&p), &grid).decision, "{p:?}");
            }
        }
    }

    #[test]
    fn invertibility_passes_to_sub_boxes(
        c0 in 0.5f64..2.0,
        c1 in -0.4f64..0.4,
        lo in 0usize..8,
        width in 1usize..8,
        lo_y in 0usize..4,
    ) {
        let grid = EpsilonGrid::geometric(0.2, 0.0125, 5).unwrap();
        let f = FieldNet::new("field", 2, move |e, p| c0 + c1 * p[0] * p[1] + e * p[1].cos());
        let region = Region::with_counts(vec![(-1.0, 1.0), (0.0, 1.0)], vec![16, 6]).unwrap();
        let whole = check_invertible_on(&f, &region, &grid).unwrap();
        prop_assume!(whole.decision);
        let hi = (lo + width).min(15);
        let sub = region.sub_lattice(&[lo, lo_y], &[hi, 5]).unwrap();
        prop_assert!(check_invertible_on(&f, &sub, &grid).unwrap().decision);
    }
}

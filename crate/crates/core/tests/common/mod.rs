#![allow(dead_code)]

use gengeom::asymptotics::EpsilonGrid;
use gengeom::metric::GeneralizedMetric;
use gengeom::scenario::{self, Scenario};

/// Low-discrepancy points in a box (Kronecker sequence), deterministic.
pub fn spread_points(bounds: &[(f64, f64)], n: usize) -> Vec<Vec<f64>> {
    const ALPHA: [f64; 6] = [
        0.618_033_988_749_895,
        0.414_213_562_373_095,
        0.732_050_807_568_877,
        0.236_067_977_499_790,
        0.645_751_311_064_591,
        0.316_624_790_355_4,
    ];
    (1..=n)
        .map(|i| {
            bounds
                .iter()
                .zip(ALPHA)
                .map(|(&(a, b), al)| a + (b - a) * (i as f64 * al).fract())
                .collect()
        })
        .collect()
}

/// Sample points for a scenario at one eps. For the pp-wave half of them
/// are pushed inside the impulse window.
pub fn scenario_points(s: &Scenario, eps: f64, n: usize) -> Vec<Vec<f64>> {
    let mut pts = spread_points(&s.region, n);
    if s.name == "ppwave" {
        for p in pts.iter_mut().step_by(2) {
            p[0] *= 1.8 * eps;
        }
    }
    pts
}

pub fn standard_grid() -> EpsilonGrid {
    EpsilonGrid::geometric(0.2, 0.0125, 5).unwrap()
}

pub fn metric(name: &str) -> GeneralizedMetric {
    scenario::find(name).unwrap().metric.build().unwrap()
}

/// Scenarios whose metric is nondegenerate everywhere on their region.
pub fn regular_scenarios() -> Vec<Scenario> {
    scenario::registry().into_iter().filter(|s| s.name != "example24").collect()
}

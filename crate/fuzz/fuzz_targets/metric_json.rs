//! Metric scenario JSON: decode, build, and evaluate at one point.
//!
//! Run with: `cargo +nightly fuzz run metric_json`

#![no_main]

use gengeom::metric::MetricSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let Ok(spec) = MetricSpec::from_json(data) else {
        return;
    };
    if spec.dim > 4 || spec.components.values().map(String::len).sum::<usize>() > 512 {
        return;
    }
    let Ok(m) = spec.build() else {
        return;
    };
    let p = vec![0.25; m.dim()];
    let _ = m.evaluate(&p, 0.1);
    let _ = MetricSpec::from_json(&spec.to_json()).expect("encoded spec decodes");
});

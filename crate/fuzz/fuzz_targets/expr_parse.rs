//! Expression parser: anything that parses must print and re-parse to the
//! same tree, and differentiation must not panic.
//!
//! Run with: `cargo +nightly fuzz run expr_parse`

#![no_main]

use gengeom::fieldexpr::parse;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if data.len() > 512 {
        return;
    }
    let Ok(e) = parse(data) else {
        return;
    };
    let again = parse(&e.to_string()).expect("printed expression re-parses");
    assert_eq!(again, e);
    if e.node_count() < 64 {
        let _ = e.differentiate("x");
    }
});

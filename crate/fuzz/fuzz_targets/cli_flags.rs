//! CLI flag strings: the compact parsers and the full argument parser.
//!
//! Run with: `cargo +nightly fuzz run cli_flags`

#![no_main]

use gengeom_cli::{flags, Cli};
use libfuzzer_sys::fuzz_target;
use clap::Parser;

fuzz_target!(|data: &str| {
    let coords: Vec<String> = ["u", "v", "x", "y"].iter().map(|s| s.to_string()).collect();
    let _ = flags::parse_grid(data);
    let _ = flags::parse_region(data);
    let _ = flags::parse_counts(data);
    let _ = flags::parse_assignments(data);
    let _ = flags::parse_init(data, &coords);
    let _ = flags::parse_closed_forms(data);
    let _ = flags::parse_ids(data);
    let args = std::iter::once("gengeom").chain(data.split_whitespace());
    let _ = Cli::try_parse_from(args);
});

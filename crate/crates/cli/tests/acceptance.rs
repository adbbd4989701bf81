//! One PASS/FAIL line per acceptance criterion. Run with
//! `cargo test -p gengeom-cli --test acceptance -- --nocapture`.

use gengeom_cli::acceptance;

#[test]
fn acceptance_criteria() {
    let results = acceptance::run(&[]);
    assert_eq!(results.len(), 11);
    for r in &results {
        println!("{r}");
    }
    let failed: Vec<u8> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

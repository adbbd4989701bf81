//! Family CSV: whatever decodes must survive an encode/decode round trip.
//!
//! Run with: `cargo +nightly fuzz run family_csv`

#![no_main]

use gengeom::shadow::FamilyTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let Ok(table) = FamilyTable::from_csv(data) else {
        return;
    };
    let text = table.to_csv();
    let back = FamilyTable::from_csv(&text).expect("encoded table decodes");
    assert_eq!(back.to_csv(), text);
});

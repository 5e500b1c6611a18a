#![no_main]

use libfuzzer_sys::fuzz_target;

// Parsing arbitrary bytes must never panic, and anything that parses must
// survive a serialize/parse round trip unchanged.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(dataset) = dimq::data::dataset_from_str(text) {
        let encoded = dimq::data::dataset_to_string(&dataset);
        let back = dimq::data::dataset_from_str(&encoded).expect("round trip parses");
        assert_eq!(back, dataset);
    }
});

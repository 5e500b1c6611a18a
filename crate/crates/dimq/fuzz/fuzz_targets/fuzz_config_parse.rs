#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = dimq::config::RunConfig::from_toml(text) {
        let back = dimq::config::RunConfig::from_toml(&cfg.to_toml()).expect("round trip parses");
        assert_eq!(back, cfg);
    }
});

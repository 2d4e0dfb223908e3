#![no_main]

use libfuzzer_sys::fuzz_target;
use trisplat::train::TrainConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = TrainConfig::from_text(text) {
        let once = cfg.to_text();
        let again = TrainConfig::from_text(&once).expect("formatted config parses").to_text();
        assert_eq!(once, again);
    }
});

#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use trisplat::io::pfm::{encode_pfm, parse_pfm};

fuzz_target!(|data: &[u8]| {
    let path = Path::new("fuzz.pfm");
    if let Ok(img) = parse_pfm(data, path) {
        let once = encode_pfm(&img);
        let again = encode_pfm(&parse_pfm(&once, path).expect("re-encoded pfm parses"));
        assert_eq!(once, again);
    }
});

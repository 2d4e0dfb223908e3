#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use trisplat::io::text::{format_cameras, parse_cameras};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let path = Path::new("cameras.txt");
    if let Ok(parsed) = parse_cameras(text, path) {
        let once = format_cameras(&parsed);
        let again = format_cameras(&parse_cameras(&once, path).expect("formatted cameras parses"));
        assert_eq!(once, again);
    }
});

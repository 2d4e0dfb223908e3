#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use trisplat::io::text::{format_split, parse_split};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let path = Path::new("split.txt");
    if let Ok(parsed) = parse_split(text, path) {
        let once = format_split(&parsed);
        let again = format_split(&parse_split(&once, path).expect("formatted split parses"));
        assert_eq!(once, again);
    }
});

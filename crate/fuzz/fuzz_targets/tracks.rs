#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use trisplat::io::text::{format_tracks, parse_tracks};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let path = Path::new("tracks.txt");
    if let Ok(parsed) = parse_tracks(text, path) {
        let once = format_tracks(&parsed);
        let again = format_tracks(&parse_tracks(&once, path).expect("formatted tracks parses"));
        assert_eq!(once, again);
    }
});

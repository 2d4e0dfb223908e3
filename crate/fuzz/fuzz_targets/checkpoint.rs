#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use trisplat::io::checkpoint::{encode_checkpoint, parse_checkpoint};

fuzz_target!(|data: &[u8]| {
    let path = Path::new("fuzz.ckpt");
    if let Ok(soup) = parse_checkpoint(data, path) {
        let once = encode_checkpoint(&soup).expect("parsed soup encodes");
        let again = encode_checkpoint(&parse_checkpoint(&once, path).expect("re-encoded checkpoint parses")).unwrap();
        assert_eq!(once, again);
    }
});

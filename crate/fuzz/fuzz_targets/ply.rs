#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use trisplat::io::ply::{encode_ply, parse_ply, PlyFormat};

fuzz_target!(|data: &[u8]| {
    let path = Path::new("fuzz.ply");
    if let Ok(cloud) = parse_ply(data, path) {
        for format in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
            let once = encode_ply(&cloud, format);
            let again = encode_ply(&parse_ply(&once, path).expect("re-encoded ply parses"), format);
            assert_eq!(once, again);
        }
    }
});

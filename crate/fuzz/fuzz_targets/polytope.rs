#![no_main]

use libfuzzer_sys::fuzz_target;
use shockpath::io::parse_polytope;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(p) = parse_polytope(text) {
            let (lo, hi) = p.bounding_box();
            assert!(lo.iter().zip(&hi).all(|(a, b)| a <= b));
        }
    }
});

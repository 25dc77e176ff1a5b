#![no_main]

use libfuzzer_sys::fuzz_target;
use shockpath::io::{format_point_set, parse_point_set};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(k) = parse_point_set(text) {
        // Accepted sets survive a round trip.
        let again = parse_point_set(&format_point_set(&k)).expect("formatted set parses");
        assert_eq!(again.points(), k.points());
    }
});

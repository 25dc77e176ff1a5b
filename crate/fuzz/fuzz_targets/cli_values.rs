//! Small value parsers used by command-line flags.

#![no_main]

use libfuzzer_sys::fuzz_target;
use shockpath::action::Shape;
use shockpath_cli::config::parse_point_list;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(h) = Shape::parse(text) {
        let _ = h.validate();
        let _ = h.eval(1.0);
    }
    let _ = parse_point_list(text);
});

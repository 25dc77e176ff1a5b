#![no_main]

use libfuzzer_sys::fuzz_target;
use shockpath_cli::config::StabilityConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = StabilityConfig::from_toml(text) {
            let _ = cfg.validate();
        }
    }
});

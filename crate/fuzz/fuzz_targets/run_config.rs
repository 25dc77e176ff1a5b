#![no_main]

use libfuzzer_sys::fuzz_target;
use shockpath_cli::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::from_toml(text) {
        let _ = cfg.validate();
        let again = RunConfig::from_toml(&cfg.to_toml().expect("serializes")).expect("round trip");
        assert_eq!(again.name, cfg.name);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use weaklog::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_toml(text) {
        let _ = cfg.validate();
        let _ = cfg.train_config();
    }
});

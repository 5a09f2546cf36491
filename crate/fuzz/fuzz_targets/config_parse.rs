#![no_main]

use fvw::experiments::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_json(text) {
        let again = ExperimentConfig::from_json(&cfg.to_json()).expect("serialised config parses");
        assert_eq!(again.to_json(), cfg.to_json());
        let _ = cfg.resolve();
    }
});

#![no_main]
use libfuzzer_sys::fuzz_target;
use rfcache::SimConfig;

fuzz_target!(|data: &str| {
    if let Ok(cfg) = SimConfig::from_toml_str(data) {
        let again = SimConfig::from_toml_str(&cfg.to_toml_string()).expect("round trip");
        assert_eq!(again, cfg);
    }
    // `--set key=value` path.
    if let Some((k, v)) = data.split_once('=') {
        let mut cfg = SimConfig::default();
        let _ = cfg.set(k.trim(), v.trim());
    }
});

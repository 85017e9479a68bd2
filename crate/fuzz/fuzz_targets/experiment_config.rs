#![no_main]

use libfuzzer_sys::fuzz_target;
use specmult::config::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = ExperimentConfig::parse(text) else {
        return;
    };
    let again = serde_json::to_string(&cfg).expect("configs serialise");
    let back = ExperimentConfig::parse(&again).expect("a written config reparses");
    assert_eq!(back.hash(), cfg.hash());
});

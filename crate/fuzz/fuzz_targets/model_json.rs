#![no_main]

use libfuzzer_sys::fuzz_target;
use specmult_core::operator_model::{load_model, ModelDocument};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok((model, _)) = load_model(text) else {
        return;
    };
    let again = ModelDocument::from_model(&model, None).to_json();
    let (back, _) = load_model(&again).expect("a written model reloads");
    assert_eq!(back.operator.matrix(), model.operator.matrix());
    assert_eq!(back.blocks.len(), model.blocks.len());
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use specmult::tau::parse_tau;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(vectors) = parse_tau(text, None) else {
        return;
    };
    assert!(!vectors.is_empty());
    assert!(vectors
        .iter()
        .all(|v| !v.is_empty() && v.iter().all(|x| x.is_finite())));
    let n = vectors[0].len();
    let uniform = vectors.iter().all(|v| v.len() == n);
    assert_eq!(parse_tau(text, Some(n)).is_ok(), uniform);
});

#![no_main]

use dagfsa::length::LengthPredictor;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(p) = LengthPredictor::parse(text) {
        assert!(p.predict(0) >= 1);
        assert!(p.predict(1000) >= 1);
    }
});

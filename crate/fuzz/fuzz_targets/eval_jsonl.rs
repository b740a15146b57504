#![no_main]

use dagfsa::metrics::{evaluate, parse_eval_records};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(records) = parse_eval_records(text) {
        if let Ok(report) = evaluate(&records, None) {
            assert!((0.0..=1.0).contains(&report.ser));
            assert!((0.0..=1.0).contains(&report.eor));
        }
    }
});

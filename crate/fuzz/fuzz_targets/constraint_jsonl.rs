#![no_main]

use dagfsa::pipeline::parse_constraint_file;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = parse_constraint_file(text);
});

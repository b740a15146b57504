#![no_main]

use dagfsa::wfsa::parse_dump;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(w) = parse_dump(text) {
        let dump = w.to_dump();
        let again = parse_dump(&dump).expect("own output reparses");
        assert_eq!(again.to_dump(), dump);
    }
});

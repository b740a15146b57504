#![no_main]

use dagfsa::token::TokenTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(t) = TokenTable::parse(text) {
        let again = TokenTable::parse(&t.to_text()).expect("own output reparses");
        assert_eq!(again.to_text(), t.to_text());
    }
});

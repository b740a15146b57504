#![no_main]

use std::sync::OnceLock;

use dagfsa::constraints::{build_hlc_fsa, tokenize_phrase};
use dagfsa::token::TokenTable;
use libfuzzer_sys::fuzz_target;

fn table() -> &'static TokenTable {
    static T: OnceLock<TokenTable> = OnceLock::new();
    T.get_or_init(|| TokenTable::parse(include_str!("../../crates/core/tests/fixtures/tiny4.tokens")).unwrap())
}

fuzz_target!(|text: &str| {
    if let Ok(p) = tokenize_phrase(text, table()) {
        let fsa = build_hlc_fsa(&p).expect("non-empty phrase compiles");
        assert!(fsa.accepts(p.tokens()));
    }
});

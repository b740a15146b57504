#![no_main]

use dagfsa::constraints::StaticLexicon;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(lex) = StaticLexicon::from_cache_text(text) {
        let again = StaticLexicon::from_cache_text(&lex.to_cache_text()).expect("own output reparses");
        assert_eq!(again.to_cache_text(), lex.to_cache_text());
    }
});

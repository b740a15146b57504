#![no_main]

use dagfsa::dag::load_dag;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(dag) = load_dag(data) {
        let again = load_dag(dag.to_json().as_bytes()).expect("own output reloads");
        assert_eq!(again.to_json(), dag.to_json());
    }
});

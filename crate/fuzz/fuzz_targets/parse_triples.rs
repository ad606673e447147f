#![no_main]

use libfuzzer_sys::fuzz_target;
use weaklog::kb::KnowledgeBase;

fuzz_target!(|data: &[u8]| {
    let mut kb = KnowledgeBase::new();
    if let Ok(n) = kb.extend_triples(data) {
        assert_eq!(n, kb.facts.len());
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use weaklog::dataset::parse_dataset;
use weaklog::kb::Symbols;

fuzz_target!(|data: &[u8]| {
    let mut symbols = Symbols::new();
    if let Ok(examples) = parse_dataset(data, &mut symbols) {
        for ex in &examples {
            assert!(ex.candidates.contains(&ex.answer));
        }
    }
});

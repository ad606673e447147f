#![no_main]

use libfuzzer_sys::fuzz_target;
use weaklog::kb::parse_program;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(kb) = parse_program(text) else { return };
    let printed = kb.to_program_text();
    let again = parse_program(&printed).expect("printed program parses");
    assert_eq!(again.to_program_text(), printed);
    assert_eq!(again.facts.len(), kb.facts.len());
    assert_eq!(again.rules.len(), kb.rules.len());
});

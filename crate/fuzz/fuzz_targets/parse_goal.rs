#![no_main]

use libfuzzer_sys::fuzz_target;
use weaklog::kb::{parse_goal, Symbols};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let mut symbols = Symbols::new();
    if let Ok(goal) = parse_goal(text, &mut symbols) {
        let shown = symbols.show(&goal).to_string();
        let again = parse_goal(&shown, &mut symbols).expect("printed goal parses");
        assert_eq!(symbols.show(&again).to_string(), shown);
    }
});

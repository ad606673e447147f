#![no_main]

use libfuzzer_sys::fuzz_target;
use weaklog::templates::parse_templates;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ts) = parse_templates(text) {
        let printed: String = ts.iter().map(|t| format!("{t}\n")).collect();
        assert_eq!(parse_templates(&printed).expect("printed templates parse"), ts);
    }
});

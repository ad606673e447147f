#![no_main]

use libfuzzer_sys::fuzz_target;
use weaklog::embed::{load_pretrained, write_vectors};

fuzz_target!(|data: &[u8]| {
    let Ok(kv) = load_pretrained(data) else { return };
    let mut out = Vec::new();
    write_vectors(&mut out, kv.dim(), kv.iter()).unwrap();
    assert_eq!(load_pretrained(out.as_slice()).expect("written file loads"), kv);
});

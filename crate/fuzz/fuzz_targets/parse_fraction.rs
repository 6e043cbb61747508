#![no_main]

use dmmass::rational::{format_fraction, parse_fraction};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = parse_fraction(text) {
        assert_eq!(parse_fraction(&format_fraction(&r)).unwrap(), r);
    }
});

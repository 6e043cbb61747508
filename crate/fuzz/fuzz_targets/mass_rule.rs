#![no_main]

use dmmass::study::MassRule;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rule) = text.parse::<MassRule>() {
        assert_eq!(rule.to_string().parse::<MassRule>().unwrap(), rule);
    }
});

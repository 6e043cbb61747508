#![no_main]

use dmmass::assembly::SymBandMatrix;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = SymBandMatrix::from_coordinate(text) {
        let again = SymBandMatrix::from_coordinate(&m.to_coordinate()).expect("written matrix parses");
        assert_eq!(again, m);
    }
});

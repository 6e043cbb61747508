#![no_main]

use dmmass::study::StudyConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = StudyConfig::from_toml(text) {
        let again = StudyConfig::from_toml(&config.to_toml()).expect("serialized config parses");
        assert_eq!(again, config);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use wavescream::simharness::PowerConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = PowerConfig::parse(text) {
        config.validate().unwrap();
    }
});

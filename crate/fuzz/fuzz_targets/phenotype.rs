#![no_main]

use libfuzzer_sys::fuzz_target;
use wavescream::data::read_phenotype;

fuzz_target!(|data: &[u8]| {
    if let Ok(y) = read_phenotype(data) {
        assert!(y.iter().all(|v| v.is_finite()));
    }
});

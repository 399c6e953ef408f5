#![no_main]

use libfuzzer_sys::fuzz_target;
use wavescream::data::read_covariates;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_covariates(data) {
        if let Some(first) = rows.first() {
            assert!(rows.iter().all(|r| r.len() == first.len()));
        }
    }
});

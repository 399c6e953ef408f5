#![no_main]

use libfuzzer_sys::fuzz_target;
use wavescream::nullsim::CachedSample;

fuzz_target!(|data: &[u8]| {
    let Ok(cached) = CachedSample::read(data) else { return };
    assert_eq!(cached.sample.len(), cached.key.simulations);
    let mut out = Vec::new();
    cached.write(&mut out).unwrap();
    let again = CachedSample::read(&out[..]).unwrap();
    assert_eq!(again.sample, cached.sample);
});

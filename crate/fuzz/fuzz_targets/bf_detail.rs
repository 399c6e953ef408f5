#![no_main]

use libfuzzer_sys::fuzz_target;
use wavescream::screening::BfDetail;

fuzz_target!(|data: &[u8]| {
    let Ok(detail) = BfDetail::read_tsv(data) else { return };
    let mut out = Vec::new();
    detail.write_tsv(&mut out).unwrap();
    let again = BfDetail::read_tsv(&out[..]).unwrap();
    assert_eq!(again.entries.len(), detail.entries.len());
});

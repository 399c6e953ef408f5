#![no_main]

use libfuzzer_sys::fuzz_target;
use wavescream::data::{read_genotypes, CohortData};

fuzz_target!(|data: &[u8]| {
    let Ok(table) = read_genotypes(data, 0.0) else { return };
    for r in &table.records {
        assert_eq!(r.dosages.len(), table.sample_ids.len());
        assert!(r.dosages.iter().all(|d| (0.0..=2.0).contains(d)));
    }
    let n = table.sample_ids.len();
    let _ = CohortData::new(table.sample_ids, table.records, vec![0.0; n], vec![]);
});

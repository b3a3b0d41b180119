#![no_main]

use libfuzzer_sys::fuzz_target;
use malab::estimates::EstimateReport;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = EstimateReport::from_json(text);
    }
});

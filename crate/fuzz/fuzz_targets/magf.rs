#![no_main]

use libfuzzer_sys::fuzz_target;
use malab::magf::parse_bytes;

fuzz_target!(|data: &[u8]| {
    let _ = parse_bytes(data);
});

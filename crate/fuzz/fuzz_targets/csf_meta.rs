#![no_main]

use downscaler_core::swe::csf::CsfMeta;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(meta) = CsfMeta::from_json_bytes(data) {
        // anything accepted must also be internally consistent
        let _ = meta.cells();
        let _ = meta.cadence();
    }
});

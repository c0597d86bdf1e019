#![no_main]

use downscaler_core::trainer::AblationMatrix;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = AblationMatrix::from_json_bytes(data);
});

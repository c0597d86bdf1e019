#![no_main]

use downscaler_core::dataset::{decode_sample, SampleInfo};
use libfuzzer_sys::fuzz_target;

// Input: height and width bytes, then the sample file.
fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let (h, w) = (data[0] as usize, data[1] as usize);
    let info = SampleInfo {
        id: "000000".into(),
        coarse_index: 0,
        fine_index: 0,
        t0: 0.0,
        t1: 1.0,
    };
    if let Ok(s) = decode_sample(&data[2..], &info, h, w) {
        assert_eq!(s.mask.len(), h * w);
    }
});

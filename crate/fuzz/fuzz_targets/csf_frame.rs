#![no_main]

use downscaler_core::swe::csf::decode_frame;
use libfuzzer_sys::fuzz_target;

// Input: little-endian u16 cell count, then the raw frame bytes.
fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let cells = u16::from_le_bytes([data[0], data[1]]) as usize;
    if let Ok([xi, u, v]) = decode_frame(&data[2..], cells) {
        assert!(xi.len() == cells && u.len() == cells && v.len() == cells);
    }
});

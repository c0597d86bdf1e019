#![no_main]

use downscaler_core::config::load_bytes;
use downscaler_core::model::ModelConfig;
use downscaler_core::swe::SimConfig;
use downscaler_core::trainer::TrainConfig;
use libfuzzer_sys::fuzz_target;

// Input: an optional JSON file, a NUL byte, then one `key=value` override
// per line.
fuzz_target!(|data: &[u8]| {
    let (file, rest) = match data.iter().position(|&b| b == 0) {
        Some(i) => (&data[..i], &data[i + 1..]),
        None => (data, &[][..]),
    };
    let file = (!file.is_empty()).then_some(file);
    let overrides: Vec<String> = String::from_utf8_lossy(rest).lines().map(str::to_string).collect();
    let _ = load_bytes::<TrainConfig>(file, &overrides);
    let _ = load_bytes::<ModelConfig>(file, &overrides);
    let _ = load_bytes::<SimConfig>(file, &overrides);
});

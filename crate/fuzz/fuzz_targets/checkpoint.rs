#![no_main]

use downscaler_core::checkpoint::Checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ck) = Checkpoint::decode(data) {
        // a decoded checkpoint re-encodes to the same bytes
        let again = ck.encode().expect("re-encode");
        assert_eq!(Checkpoint::decode(&again).expect("decode again").encode().unwrap(), again);
    }
});

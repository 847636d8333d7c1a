#![no_main]
use libfuzzer_sys::fuzz_target;
use rehab_core::ingest::ppm::{decode_ppm, encode_ppm};

fuzz_target!(|data: &[u8]| {
    if let Ok(image) = decode_ppm(data) {
        assert_eq!(decode_ppm(&encode_ppm(&image)).unwrap(), image);
    }
});

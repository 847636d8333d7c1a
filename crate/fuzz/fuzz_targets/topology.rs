#![no_main]
use libfuzzer_sys::fuzz_target;
use rehab_core::LandmarkTopology;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(t) = LandmarkTopology::parse_table(text) {
        for i in 0..t.len() {
            assert_eq!(t.mirror_of(t.mirror_of(i)), i);
        }
    }
});

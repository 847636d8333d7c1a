#![no_main]
use libfuzzer_sys::fuzz_target;
use rehab_core::features::FeatureRegistry;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(reg) = FeatureRegistry::parse_table(text) {
        assert_eq!(FeatureRegistry::parse_table(&reg.to_table()).unwrap(), reg);
    }
});

#![no_main]
use libfuzzer_sys::fuzz_target;
use rehab_core::config::ConfigFile;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(c) = ConfigFile::parse(text) {
        for (k, v) in c.entries() {
            assert!(!k.is_empty() && !v.is_empty());
            assert_eq!(c.get(k), Some(v.as_str()));
        }
    }
});

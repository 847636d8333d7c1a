#![no_main]
use libfuzzer_sys::fuzz_target;
use rehab_core::manifest::Manifest;

fuzz_target!(|data: &[u8]| {
    let Ok(m) = Manifest::parse(data, "/base") else {
        return;
    };
    let mut out = Vec::new();
    m.write(&mut out).expect("parsed manifests write");
    let back = Manifest::parse(out.as_slice(), "/base").expect("written manifest parses");
    assert_eq!(back, m);
});

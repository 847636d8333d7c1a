#![no_main]
use libfuzzer_sys::fuzz_target;
use rehab_core::seqnet::Model;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = Model::from_text(text) {
        let written = model.to_text();
        assert_eq!(Model::from_text(&written).unwrap(), model);
    }
});

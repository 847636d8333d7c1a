#![no_main]
use libfuzzer_sys::fuzz_target;
use rehab_core::ingest::{parse_keypoints, render_keypoints};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(sample) = parse_keypoints(text, "fuzz") else {
        return;
    };
    // accepted input renders, and the rendering is a fixed point
    let once = render_keypoints(&sample).expect("parsed samples are valid");
    let again = parse_keypoints(&once, "fuzz").expect("rendered text parses");
    assert_eq!(render_keypoints(&again).unwrap(), once);
});

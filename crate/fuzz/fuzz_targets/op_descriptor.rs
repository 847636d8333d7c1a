#![no_main]
use libfuzzer_sys::fuzz_target;
use rehab_core::augment::{AugmentationOp, AugmentationPreset};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(op) = text.parse::<AugmentationOp>() {
        op.validate().expect("parsed ops are in range");
        assert_eq!(op.to_string().parse::<AugmentationOp>().unwrap(), op);
    }
    if let Ok(preset) = AugmentationPreset::from_descriptors("fuzz", text) {
        assert!(!preset.ops().is_empty());
    }
});

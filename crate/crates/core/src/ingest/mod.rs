//! Reading and writing keypoint data, synthetic recordings, and the marker
//! render/detect pair used as an ideal pose estimator.

pub mod keypoints;
pub mod markers;
pub mod ppm;
pub mod synth;

pub use keypoints::{
    load_keypoints, parse_keypoints, render_keypoints, save_keypoints, SCHEMA_TAG,
};
pub use markers::{detect_markers, render_markers, MarkerFrameImage};
pub use synth::{synth_dataset, synth_generate, SyntheticDatasetSpec, SyntheticMotionSpec};

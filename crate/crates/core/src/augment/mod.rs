//! Label-preserving geometric augmentation: horizontal flip and small
//! rotations, applied either to video frames (then re-extracting joints) or
//! directly to the joints.

mod image;
mod pipeline;

use std::fmt;
use std::str::FromStr;

pub use image::transform_image;
pub use pipeline::{
    augment_sample, augmented_id, frame_file_name, read_frame_dir, write_frame_dir,
    CommandPoseBackend, FrameDirSource, FrameSource, ImagePipeline, MarkerDetectBackend,
    MarkerRenderSource, PoseBackend, Space,
};

use crate::error::{Error, Result};
use crate::sample::{FrameSize, LandmarkFrame};
use crate::topology::{mirror_swap, LandmarkTopology};

/// Largest rotation magnitude accepted, in degrees.
pub const MAX_ROTATION_DEG: f64 = 10.0;

/// One geometric transform, applied identically to every frame.
///
/// Descriptor strings: `hflip`, `rot+N`, `rot-N` (degrees, e.g. `rot-1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AugmentationOp {
    HorizontalFlip,
    /// Counterclockwise rotation in image coordinates (y down), about the
    /// frame center. On screen this looks clockwise.
    Rotate {
        theta_deg: f64,
    },
}

impl AugmentationOp {
    /// A validated rotation: non-zero and at most 10 degrees either way.
    pub fn rotate(theta_deg: f64) -> Result<Self> {
        let op = AugmentationOp::Rotate { theta_deg };
        op.validate()?;
        Ok(op)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AugmentationOp::HorizontalFlip => Ok(()),
            AugmentationOp::Rotate { theta_deg } => {
                if !theta_deg.is_finite() || theta_deg == 0.0 || theta_deg.abs() > MAX_ROTATION_DEG
                {
                    Err(Error::Augment(format!(
                        "rotation must be non-zero and within ±{MAX_ROTATION_DEG}°, got {theta_deg}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }
}

impl fmt::Display for AugmentationOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            AugmentationOp::HorizontalFlip => f.write_str("hflip"),
            AugmentationOp::Rotate { theta_deg } => {
                let sign = if theta_deg < 0.0 { '-' } else { '+' };
                write!(f, "rot{sign}{}", theta_deg.abs())
            }
        }
    }
}

impl FromStr for AugmentationOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad augmentation descriptor {s:?}"));
        if s == "hflip" {
            return Ok(AugmentationOp::HorizontalFlip);
        }
        let rest = s.strip_prefix("rot").ok_or_else(bad)?;
        let (sign, magnitude) = match rest.as_bytes().first() {
            Some(b'+') => (1.0, &rest[1..]),
            Some(b'-') => (-1.0, &rest[1..]),
            _ => return Err(bad()),
        };
        if magnitude.is_empty() || !magnitude.bytes().all(|b| b.is_ascii_digit() || b == b'.') {
            return Err(bad());
        }
        let value: f64 = magnitude.parse().map_err(|_| bad())?;
        AugmentationOp::rotate(sign * value)
    }
}

/// A named, non-empty set of distinct ops. Each op yields one new sample.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationPreset {
    name: String,
    ops: Vec<AugmentationOp>,
}

impl AugmentationPreset {
    pub fn new(name: impl Into<String>, ops: Vec<AugmentationOp>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::Augment("preset must contain at least one op".into()));
        }
        for (i, op) in ops.iter().enumerate() {
            op.validate()?;
            if ops[..i].contains(op) {
                return Err(Error::Augment(format!("duplicate op {op} in preset")));
            }
        }
        Ok(Self {
            name: name.into(),
            ops,
        })
    }

    /// Flip plus ±1°.
    pub fn a1() -> Self {
        Self::from_descriptors("a1", "hflip,rot-1,rot+1").expect("valid preset")
    }

    /// Flip plus ±1°, ±2°, ±3°.
    pub fn a7() -> Self {
        Self::from_descriptors("a7", "hflip,rot-1,rot-2,rot-3,rot+1,rot+2,rot+3")
            .expect("valid preset")
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "a1" => Some(Self::a1()),
            "a7" => Some(Self::a7()),
            _ => None,
        }
    }

    /// Builds a preset from comma-separated descriptors, e.g. `hflip,rot-2`.
    pub fn from_descriptors(name: impl Into<String>, list: &str) -> Result<Self> {
        let ops = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        Self::new(name, ops)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ops(&self) -> &[AugmentationOp] {
        &self.ops
    }
}

/// Joint-space counterpart of [`transform_image`].
///
/// Flip is [`mirror_swap`]. Rotation maps normalized coordinates to pixels
/// (`u = x * W`, `v = y * H`), rotates by `theta` about
/// `((W - 1) / 2, (H - 1) / 2)` and maps back. `z` and visibility are
/// untouched.
pub fn transform_joints(
    frame: &LandmarkFrame,
    op: AugmentationOp,
    size: FrameSize,
    topology: &LandmarkTopology,
) -> LandmarkFrame {
    match op {
        AugmentationOp::HorizontalFlip => mirror_swap(frame, topology),
        AugmentationOp::Rotate { theta_deg } => {
            let (sin, cos) = theta_deg.to_radians().sin_cos();
            let (w, h) = (size.w(), size.h());
            let (cu, cv) = ((w - 1.0) / 2.0, (h - 1.0) / 2.0);
            let points = frame
                .points
                .iter()
                .map(|p| {
                    let du = p.x * w - cu;
                    let dv = p.y * h - cv;
                    let mut q = *p;
                    q.x = (cos * du - sin * dv + cu) / w;
                    q.y = (sin * du + cos * dv + cv) / h;
                    q
                })
                .collect();
            LandmarkFrame { points }
        }
    }
}

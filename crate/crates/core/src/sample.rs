//! Landmark frames, sequences, scores and labeled samples.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::augment::AugmentationOp;
use crate::error::{Error, Result};
use crate::topology::NUM_LANDMARKS;

/// Upper end of the clinical quality scale.
pub const MAX_SCORE: f64 = 50.0;

/// One landmark: normalized image coordinates (x right, y down), relative
/// depth and detector confidence.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LandmarkPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub visibility: f64,
}

impl LandmarkPoint {
    pub const fn new(x: f64, y: f64, z: f64, visibility: f64) -> Self {
        Self {
            x,
            y,
            z,
            visibility,
        }
    }
}

/// All landmarks of one video frame, in topology order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LandmarkFrame {
    pub points: Vec<LandmarkPoint>,
}

impl LandmarkFrame {
    pub fn new(points: Vec<LandmarkPoint>) -> Self {
        Self { points }
    }

    /// A frame with every landmark at the origin and visibility 0.
    pub fn empty() -> Self {
        Self {
            points: vec![LandmarkPoint::default(); NUM_LANDMARKS],
        }
    }
}

/// Source frame dimensions in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrameSize {
    pub width: u32,
    pub height: u32,
}

impl FrameSize {
    pub const fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    pub fn w(&self) -> f64 {
        self.width as f64
    }

    pub fn h(&self) -> f64 {
        self.height as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSequence {
    pub frames: Vec<LandmarkFrame>,
    pub fps: f64,
    pub frame_size: FrameSize,
}

impl LandmarkSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// One of the five rehabilitation exercises, numbered 1 to 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExerciseId(u8);

impl ExerciseId {
    pub const ALL: [ExerciseId; 5] = [
        ExerciseId(1),
        ExerciseId(2),
        ExerciseId(3),
        ExerciseId(4),
        ExerciseId(5),
    ];

    pub fn new(value: u8) -> Result<Self> {
        if (1..=5).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::InvalidArgument(format!(
                "exercise must be in 1..=5, got {value}"
            )))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn name(self) -> &'static str {
        match self.0 {
            1 => "lifting of the arms",
            2 => "lateral tilt of the trunk with the arms in extension",
            3 => "trunk rotation",
            4 => "pelvis rotations on the transverse plane",
            _ => "squatting",
        }
    }
}

impl fmt::Display for ExerciseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl TryFrom<i64> for ExerciseId {
    type Error = Error;

    fn try_from(v: i64) -> Result<Self> {
        u8::try_from(v)
            .map_err(|_| Error::InvalidArgument(format!("exercise must be in 1..=5, got {v}")))
            .and_then(Self::new)
    }
}

/// Clinical quality score on the 0–50 scale.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct QualityScore {
    raw: f64,
}

impl QualityScore {
    pub fn new(raw: f64) -> Result<Self> {
        if raw.is_finite() && (0.0..=MAX_SCORE).contains(&raw) {
            Ok(Self { raw })
        } else {
            Err(Error::InvalidArgument(format!(
                "quality score must be in [0, 50], got {raw}"
            )))
        }
    }

    pub fn from_normalized(normalized: f64) -> Result<Self> {
        Self::new(normalized * MAX_SCORE)
    }

    pub fn raw(self) -> f64 {
        self.raw
    }

    pub fn normalized(self) -> f64 {
        self.raw / MAX_SCORE
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Original,
    /// Derived from `parent` by a label-preserving transform. The parent's
    /// score is recorded so label drift can be detected without the parent.
    Augmented {
        parent: String,
        op: AugmentationOp,
        parent_score: Option<QualityScore>,
    },
}

impl Provenance {
    pub fn is_original(&self) -> bool {
        matches!(self, Provenance::Original)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub sample_id: String,
    pub subject_id: String,
    pub exercise: ExerciseId,
    pub sequence: LandmarkSequence,
    pub score: Option<QualityScore>,
    pub provenance: Provenance,
}

/// A broken invariant: which field, and which rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// Checks every sample-level invariant. Returns an empty list for a
/// well-formed sample.
pub fn validate_sample(sample: &Sample) -> Vec<Violation> {
    let mut out = Vec::new();
    if sample.sample_id.is_empty() {
        out.push(Violation::new("sample_id", "must not be empty"));
    }
    let seq = &sample.sequence;
    if seq.frames.len() < 2 {
        out.push(Violation::new(
            "sequence.frames",
            format!("need at least 2 frames, got {}", seq.frames.len()),
        ));
    }
    if !(seq.fps.is_finite() && seq.fps > 0.0) {
        out.push(Violation::new(
            "sequence.fps",
            format!("must be > 0, got {}", seq.fps),
        ));
    }
    if seq.frame_size.width == 0 || seq.frame_size.height == 0 {
        out.push(Violation::new(
            "sequence.frame_size",
            format!(
                "dimensions must be positive, got {}x{}",
                seq.frame_size.width, seq.frame_size.height
            ),
        ));
    }
    for (fi, frame) in seq.frames.iter().enumerate() {
        if frame.points.len() != NUM_LANDMARKS {
            out.push(Violation::new(
                format!("frames[{fi}]"),
                format!(
                    "expected {NUM_LANDMARKS} points, got {}",
                    frame.points.len()
                ),
            ));
        }
        for (li, p) in frame.points.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                out.push(Violation::new(
                    format!("frames[{fi}].landmark[{li}]"),
                    "x and y must be finite",
                ));
            }
            if !p.z.is_finite() {
                out.push(Violation::new(
                    format!("frames[{fi}].landmark[{li}]"),
                    "z must be finite",
                ));
            }
            if !(0.0..=1.0).contains(&p.visibility) {
                out.push(Violation::new(
                    format!("frames[{fi}].landmark[{li}]"),
                    format!("visibility must be in [0, 1], got {}", p.visibility),
                ));
            }
        }
    }
    if let Some(score) = sample.score {
        if !(0.0..=MAX_SCORE).contains(&score.raw()) {
            out.push(Violation::new("score", "must be in [0, 50]"));
        }
    }
    if let Provenance::Augmented {
        parent,
        parent_score,
        ..
    } = &sample.provenance
    {
        if parent.is_empty() {
            out.push(Violation::new("provenance.parent", "must not be empty"));
        }
        if parent == &sample.sample_id {
            out.push(Violation::new(
                "provenance.parent",
                "sample cannot be its own parent",
            ));
        }
        if *parent_score != sample.score {
            out.push(Violation::new("score", "label drift under augmentation"));
        }
    }
    out
}

/// Validates a set of samples together: each sample individually, unique
/// ids, and that every augmented sample's parent is a present original
/// carrying the same score.
pub fn validate_collection(samples: &[Sample]) -> Vec<Violation> {
    use std::collections::HashMap;

    let mut out = Vec::new();
    let mut by_id: HashMap<&str, &Sample> = HashMap::new();
    for s in samples {
        for v in validate_sample(s) {
            out.push(Violation::new(
                format!("{}.{}", s.sample_id, v.field),
                v.rule,
            ));
        }
        if by_id.insert(s.sample_id.as_str(), s).is_some() {
            out.push(Violation::new(
                format!("{}.sample_id", s.sample_id),
                "duplicate sample id",
            ));
        }
    }
    for s in samples {
        if let Provenance::Augmented { parent, .. } = &s.provenance {
            match by_id.get(parent.as_str()) {
                None => out.push(Violation::new(
                    format!("{}.provenance.parent", s.sample_id),
                    format!("parent {parent:?} not found"),
                )),
                Some(p) if !p.provenance.is_original() => out.push(Violation::new(
                    format!("{}.provenance.parent", s.sample_id),
                    "augmentation chains are not allowed",
                )),
                Some(p) if p.score != s.score => out.push(Violation::new(
                    format!("{}.score", s.sample_id),
                    "label drift under augmentation",
                )),
                Some(_) => {}
            }
        }
    }
    out
}

/// Fails with [`Error::Invariant`] when `validate_sample` reports anything.
pub fn ensure_valid(sample: &Sample) -> Result<()> {
    let violations = validate_sample(sample);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::Invariant {
            sample_id: sample.sample_id.clone(),
            violations: violations.iter().map(ToString::to_string).collect(),
        })
    }
}

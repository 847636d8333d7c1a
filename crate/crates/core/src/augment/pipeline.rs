use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;

use crate::augment::{transform_image, transform_joints, AugmentationOp, AugmentationPreset};
use crate::error::{Error, Result};
use crate::ingest::keypoints::load_keypoints;
use crate::ingest::markers::{detect_markers, render_markers, MarkerFrameImage};
use crate::ingest::ppm::{read_ppm, write_ppm};
use crate::sample::{LandmarkSequence, Provenance, Sample};
use crate::topology::LandmarkTopology;

/// Where augmentation is carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    /// Transform video frames, then re-run pose extraction.
    Image,
    /// Transform the extracted joints directly.
    Joints,
}

impl std::str::FromStr for Space {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "image" => Ok(Space::Image),
            "joints" => Ok(Space::Joints),
            _ => Err(Error::Parse(format!(
                "unknown space {s:?} (expected image or joints)"
            ))),
        }
    }
}

/// Supplies the video frames behind a sample.
pub trait FrameSource: Sync {
    fn frames(&self, sample: &Sample) -> Result<Vec<MarkerFrameImage>>;
}

/// Turns frames back into a landmark sequence.
pub trait PoseBackend: Sync {
    fn extract(&self, frames: &[MarkerFrameImage], fps: f64) -> Result<LandmarkSequence>;
}

/// Frames and pose backend for image-space augmentation.
#[derive(Clone, Copy)]
pub struct ImagePipeline<'a> {
    pub source: &'a dyn FrameSource,
    pub backend: &'a dyn PoseBackend,
}

/// Renders a sample's own landmarks as marker frames.
#[derive(Debug, Default, Clone, Copy)]
pub struct MarkerRenderSource;

impl FrameSource for MarkerRenderSource {
    fn frames(&self, sample: &Sample) -> Result<Vec<MarkerFrameImage>> {
        let size = sample.sequence.frame_size;
        Ok(sample
            .sequence
            .frames
            .iter()
            .map(|f| render_markers(f, size))
            .collect())
    }
}

/// Reads `<root>/<sample_id>/frame_%06d.ppm`.
#[derive(Debug, Clone)]
pub struct FrameDirSource {
    pub root: PathBuf,
}

impl FrameSource for FrameDirSource {
    fn frames(&self, sample: &Sample) -> Result<Vec<MarkerFrameImage>> {
        read_frame_dir(&self.root.join(&sample.sample_id))
    }
}

/// Reads consecutive `frame_%06d.ppm` files starting at index 0.
pub fn read_frame_dir(dir: &Path) -> Result<Vec<MarkerFrameImage>> {
    let mut frames = Vec::new();
    loop {
        let path = dir.join(frame_file_name(frames.len()));
        if !path.exists() {
            break;
        }
        frames.push(read_ppm(&path)?);
    }
    if frames.is_empty() {
        return Err(Error::Augment(format!(
            "no frame_000000.ppm in {}",
            dir.display()
        )));
    }
    Ok(frames)
}

pub fn write_frame_dir(dir: &Path, frames: &[MarkerFrameImage]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, f) in frames.iter().enumerate() {
        write_ppm(f, &dir.join(frame_file_name(i)))?;
    }
    Ok(())
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.ppm")
}

/// In-process marker detector.
#[derive(Debug, Default, Clone, Copy)]
pub struct MarkerDetectBackend;

impl PoseBackend for MarkerDetectBackend {
    fn extract(&self, frames: &[MarkerFrameImage], fps: f64) -> Result<LandmarkSequence> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Backend("no frames to extract".into()))?;
        Ok(LandmarkSequence {
            frames: frames.iter().map(detect_markers).collect(),
            fps,
            frame_size: first.size(),
        })
    }
}

/// An external pose estimator run as `<program> [args..] --frames <dir> --out <file>`,
/// producing a `kp-seq/1` file.
///
/// Calls are serialized per instance unless the backend is declared
/// reentrant.
#[derive(Debug)]
pub struct CommandPoseBackend {
    program: PathBuf,
    args: Vec<String>,
    reentrant: bool,
    lock: Mutex<()>,
}

impl CommandPoseBackend {
    pub fn new(program: impl Into<PathBuf>, args: Vec<String>) -> Self {
        Self {
            program: program.into(),
            args,
            reentrant: false,
            lock: Mutex::new(()),
        }
    }

    /// Splits a command line on whitespace into program and leading args.
    pub fn from_command_line(cmd: &str) -> Result<Self> {
        let mut parts = cmd.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| Error::InvalidArgument("empty pose command".into()))?;
        Ok(Self::new(program, parts.map(str::to_string).collect()))
    }

    pub fn reentrant(mut self, yes: bool) -> Self {
        self.reentrant = yes;
        self
    }

    fn run(&self, frames: &[MarkerFrameImage]) -> Result<LandmarkSequence> {
        let work = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
        let frame_dir = work.path().join("frames");
        let out = work.path().join("pose.json");
        write_frame_dir(&frame_dir, frames)?;
        let output = Command::new(&self.program)
            .args(&self.args)
            .arg("--frames")
            .arg(&frame_dir)
            .arg("--out")
            .arg(&out)
            .output()
            .map_err(|e| Error::Backend(format!("cannot run {}: {e}", self.program.display())))?;
        if !output.status.success() {
            return Err(Error::Backend(format!(
                "{} exited with {}: {}",
                self.program.display(),
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        Ok(load_keypoints(&out)?.sequence)
    }
}

impl PoseBackend for CommandPoseBackend {
    fn extract(&self, frames: &[MarkerFrameImage], fps: f64) -> Result<LandmarkSequence> {
        let mut seq = if self.reentrant {
            self.run(frames)?
        } else {
            let _guard = self.lock.lock().unwrap_or_else(|p| p.into_inner());
            self.run(frames)?
        };
        seq.fps = fps;
        Ok(seq)
    }
}

/// Id of the sample derived from `parent` by `op`.
pub fn augmented_id(parent: &str, op: AugmentationOp) -> String {
    format!("{parent}__{op}")
}

/// One new sample per preset op, carrying the parent's score.
///
/// Only original samples may be augmented. In image space the sample's
/// frames are transformed and passed through the pose backend; frame count,
/// fps and frame size of the parent are kept.
pub fn augment_sample(
    sample: &Sample,
    preset: &AugmentationPreset,
    space: Space,
    image: Option<ImagePipeline<'_>>,
) -> Result<Vec<Sample>> {
    if !sample.provenance.is_original() {
        return Err(Error::Augment(format!(
            "{} is already augmented; augmentation chains are not allowed",
            sample.sample_id
        )));
    }
    let topology = LandmarkTopology::canonical();
    let seq = &sample.sequence;
    let source_frames = match (space, image) {
        (Space::Joints, _) => None,
        (Space::Image, Some(pipe)) => Some((pipe.source.frames(sample)?, pipe.backend)),
        (Space::Image, None) => {
            return Err(Error::Augment(
                "image-space augmentation needs a frame source and pose backend".into(),
            ))
        }
    };
    if let Some((frames, _)) = &source_frames {
        if frames.len() != seq.len() {
            return Err(Error::Augment(format!(
                "{}: frame source has {} frames, sequence has {}",
                sample.sample_id,
                frames.len(),
                seq.len()
            )));
        }
    }

    preset
        .ops()
        .iter()
        .map(|&op| {
            let frames = match &source_frames {
                None => seq
                    .frames
                    .iter()
                    .map(|f| transform_joints(f, op, seq.frame_size, topology))
                    .collect(),
                Some((images, backend)) => {
                    let moved: Vec<MarkerFrameImage> =
                        images.iter().map(|im| transform_image(im, op)).collect();
                    let extracted = backend.extract(&moved, seq.fps)?;
                    if extracted.len() != seq.len() {
                        return Err(Error::Backend(format!(
                            "{}: backend returned {} frames for {}",
                            sample.sample_id,
                            extracted.len(),
                            seq.len()
                        )));
                    }
                    extracted.frames
                }
            };
            Ok(Sample {
                sample_id: augmented_id(&sample.sample_id, op),
                subject_id: sample.subject_id.clone(),
                exercise: sample.exercise,
                sequence: LandmarkSequence {
                    frames,
                    fps: seq.fps,
                    frame_size: seq.frame_size,
                },
                score: sample.score,
                provenance: Provenance::Augmented {
                    parent: sample.sample_id.clone(),
                    op,
                    parent_score: sample.score,
                },
            })
        })
        .collect()
}

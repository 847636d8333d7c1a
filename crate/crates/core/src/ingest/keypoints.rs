//! The `kp-seq/1` keypoint sequence file: JSON with one array of 33
//! `[x, y, z, visibility]` quadruples per frame.
//!
//! Coordinates are written as decimals with nine fractional digits. Bare
//! `NaN`/`Infinity` tokens (as emitted by some JSON writers) are accepted on
//! input and surface as invariant violations rather than parse failures.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::augment::AugmentationOp;
use crate::error::{Error, Result};
use crate::sample::{
    ensure_valid, ExerciseId, FrameSize, LandmarkFrame, LandmarkPoint, LandmarkSequence,
    Provenance, QualityScore, Sample,
};
use crate::topology::LandmarkTopology;

pub const SCHEMA_TAG: &str = "kp-seq/1";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    schema_tag: String,
    exercise: i64,
    subject_id: String,
    fps: f64,
    frame_size: (u32, u32),
    landmark_names: Vec<String>,
    frames: Vec<Vec<Vec<Option<f64>>>>,
    #[serde(default)]
    label: Option<RawLabel>,
    #[serde(default)]
    provenance: Option<RawProvenance>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLabel {
    quality_raw: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProvenance {
    parent: String,
    op: String,
    #[serde(default)]
    parent_quality_raw: Option<f64>,
}

/// Parses `kp-seq/1` text into a sample named `sample_id`.
pub fn parse_keypoints(text: &str, sample_id: &str) -> Result<Sample> {
    let cleaned = replace_non_finite_tokens(text);
    let raw: RawFile =
        serde_json::from_str(&cleaned).map_err(|e| Error::Parse(format!("kp-seq: {e}")))?;

    if raw.schema_tag != SCHEMA_TAG {
        return Err(Error::Schema(format!(
            "unsupported schema_tag {:?}, expected {SCHEMA_TAG:?}",
            raw.schema_tag
        )));
    }
    let topology = LandmarkTopology::canonical();
    if raw.landmark_names != topology.names() {
        return Err(Error::Schema(
            "landmark_names do not match the canonical topology order".into(),
        ));
    }
    let exercise = ExerciseId::try_from(raw.exercise).map_err(|e| Error::Schema(e.to_string()))?;

    let mut frames = Vec::with_capacity(raw.frames.len());
    for (fi, frame) in raw.frames.into_iter().enumerate() {
        if frame.len() != topology.len() {
            return Err(Error::Schema(format!(
                "frame {fi} has {} landmarks, expected {}",
                frame.len(),
                topology.len()
            )));
        }
        let mut points = Vec::with_capacity(frame.len());
        for (li, quad) in frame.into_iter().enumerate() {
            if quad.len() != 4 {
                return Err(Error::Schema(format!(
                    "frame {fi} landmark {li} has {} values, expected 4",
                    quad.len()
                )));
            }
            let v = |k: usize| quad[k].unwrap_or(f64::NAN);
            points.push(LandmarkPoint::new(v(0), v(1), v(2), v(3)));
        }
        frames.push(LandmarkFrame { points });
    }

    let score = raw
        .label
        .map(|l| QualityScore::new(l.quality_raw))
        .transpose()
        .map_err(|e| Error::Schema(e.to_string()))?;
    let provenance = match raw.provenance {
        None => Provenance::Original,
        Some(p) => Provenance::Augmented {
            parent: p.parent,
            op: p.op.parse::<AugmentationOp>()?,
            parent_score: p
                .parent_quality_raw
                .map(QualityScore::new)
                .transpose()
                .map_err(|e| Error::Schema(e.to_string()))?,
        },
    };

    let sample = Sample {
        sample_id: sample_id.to_string(),
        subject_id: raw.subject_id,
        exercise,
        sequence: LandmarkSequence {
            frames,
            fps: raw.fps,
            frame_size: FrameSize::new(raw.frame_size.0, raw.frame_size.1),
        },
        score,
        provenance,
    };
    ensure_valid(&sample)?;
    Ok(sample)
}

/// Loads a keypoint file; the sample id is the file stem.
pub fn load_keypoints(path: &Path) -> Result<Sample> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::InvalidArgument(format!("bad keypoint path {}", path.display())))?;
    parse_keypoints(&text, id)
}

pub fn render_keypoints(sample: &Sample) -> Result<String> {
    ensure_valid(sample)?;
    let topology = LandmarkTopology::canonical();
    let seq = &sample.sequence;
    let mut out = String::new();
    let js = |s: &str| serde_json::to_string(s).expect("string serialization cannot fail");
    out.push_str("{\n");
    let _ = writeln!(out, "  \"schema_tag\": {},", js(SCHEMA_TAG));
    let _ = writeln!(out, "  \"exercise\": {},", sample.exercise.get());
    let _ = writeln!(out, "  \"subject_id\": {},", js(&sample.subject_id));
    let _ = writeln!(out, "  \"fps\": {},", seq.fps);
    let _ = writeln!(
        out,
        "  \"frame_size\": [{}, {}],",
        seq.frame_size.width, seq.frame_size.height
    );
    let names: Vec<String> = topology.names().iter().map(|n| js(n)).collect();
    let _ = writeln!(out, "  \"landmark_names\": [{}],", names.join(", "));
    if let Some(score) = sample.score {
        let _ = writeln!(out, "  \"label\": {{\"quality_raw\": {}}},", score.raw());
    }
    if let Provenance::Augmented {
        parent,
        op,
        parent_score,
    } = &sample.provenance
    {
        let _ = write!(
            out,
            "  \"provenance\": {{\"parent\": {}, \"op\": {}",
            js(parent),
            js(&op.to_string())
        );
        if let Some(ps) = parent_score {
            let _ = write!(out, ", \"parent_quality_raw\": {}", ps.raw());
        }
        out.push_str("},\n");
    }
    out.push_str("  \"frames\": [\n");
    for (fi, frame) in seq.frames.iter().enumerate() {
        out.push_str("    [");
        for (li, p) in frame.points.iter().enumerate() {
            if li > 0 {
                out.push(',');
            }
            let _ = write!(
                out,
                "[{:.9},{:.9},{:.9},{:.9}]",
                p.x, p.y, p.z, p.visibility
            );
        }
        out.push(']');
        if fi + 1 < seq.frames.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("  ]\n}\n");
    Ok(out)
}

pub fn save_keypoints(sample: &Sample, path: &Path) -> Result<()> {
    let text = render_keypoints(sample)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Rewrites bare `NaN`, `Infinity` and `-Infinity` tokens outside string
/// literals as `null`.
fn replace_non_finite_tokens(text: &str) -> std::borrow::Cow<'_, str> {
    if !text.contains("NaN") && !text.contains("Infinity") {
        return text.into();
    }
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            rest = &rest[c.len_utf8()..];
            continue;
        }
        if c == '"' {
            in_string = true;
        }
        let token = ["-Infinity", "Infinity", "NaN"]
            .into_iter()
            .find(|t| rest.starts_with(t));
        match token {
            Some(t) => {
                out.push_str("null");
                rest = &rest[t.len()..];
            }
            None => {
                out.push(c);
                rest = &rest[c.len_utf8()..];
            }
        }
    }
    out.into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::tests::tiny_sample;

    #[test]
    fn minimal_file_round_trips() {
        let s = tiny_sample("clip01");
        let text = render_keypoints(&s).unwrap();
        let back = parse_keypoints(&text, "clip01").unwrap();
        assert_eq!(back.sequence.frames.len(), 2);
        assert_eq!(back.score, s.score);
        assert_eq!(back.provenance, Provenance::Original);
        for (a, b) in back.sequence.frames.iter().zip(&s.sequence.frames) {
            for (p, q) in a.points.iter().zip(&b.points) {
                assert!((p.x - q.x).abs() <= 1e-9 && (p.y - q.y).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn wrong_schema_tag_is_schema_error() {
        let text = render_keypoints(&tiny_sample("a"))
            .unwrap()
            .replace("kp-seq/1", "kp-seq/2");
        assert!(matches!(parse_keypoints(&text, "a"), Err(Error::Schema(_))));
    }

    #[test]
    fn reordered_landmarks_are_schema_error() {
        let text = render_keypoints(&tiny_sample("a"))
            .unwrap()
            .replacen("\"left_eye\"", "\"tmp\"", 1)
            .replacen("\"right_eye\"", "\"left_eye\"", 1)
            .replacen("\"tmp\"", "\"right_eye\"", 1);
        assert!(matches!(parse_keypoints(&text, "a"), Err(Error::Schema(_))));
    }

    #[test]
    fn nan_coordinate_is_invariant_error_naming_frame_and_landmark() {
        let text = render_keypoints(&tiny_sample("a")).unwrap();
        // first coordinate of frame 1, landmark 0
        let idx = text.find("    [[").unwrap();
        let idx2 = text[idx + 1..].find("    [[").unwrap() + idx + 1;
        let start = idx2 + "    [[".len();
        let end = start + text[start..].find(',').unwrap();
        let text = format!("{}NaN{}", &text[..start], &text[end..]);
        match parse_keypoints(&text, "a") {
            Err(Error::Invariant { violations, .. }) => {
                assert_eq!(violations.len(), 1);
                assert!(
                    violations[0].contains("frames[1].landmark[0]"),
                    "{violations:?}"
                );
            }
            other => panic!("expected invariant error, got {other:?}"),
        }
    }

    #[test]
    fn ragged_frame_is_schema_error() {
        let text = render_keypoints(&tiny_sample("a")).unwrap();
        let text = text.replacen("[[", "[[0.1,0.2,0.3,1.0],[", 1);
        assert!(matches!(parse_keypoints(&text, "a"), Err(Error::Schema(_))));
    }

    #[test]
    fn unlabeled_sample_omits_label_block() {
        let mut s = tiny_sample("a");
        s.score = None;
        let text = render_keypoints(&s).unwrap();
        assert!(!text.contains("label"));
        assert_eq!(parse_keypoints(&text, "a").unwrap().score, None);
    }

    #[test]
    fn provenance_is_preserved() {
        let mut s = tiny_sample("a__rot-2");
        s.provenance = Provenance::Augmented {
            parent: "a".into(),
            op: AugmentationOp::Rotate { theta_deg: -2.0 },
            parent_score: s.score,
        };
        let text = render_keypoints(&s).unwrap();
        assert!(text.contains("\"op\": \"rot-2\""));
        assert_eq!(
            parse_keypoints(&text, "a__rot-2").unwrap().provenance,
            s.provenance
        );
    }

    #[test]
    fn nan_inside_string_is_left_alone() {
        assert_eq!(
            replace_non_finite_tokens(r#"{"a": "NaN", "b": NaN, "c": -Infinity}"#),
            r#"{"a": "NaN", "b": null, "c": null}"#
        );
    }

    #[test]
    fn save_and_load_use_file_stem() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/s7.json");
        save_keypoints(&tiny_sample("s7"), &path).unwrap();
        assert_eq!(load_keypoints(&path).unwrap().sample_id, "s7");
    }
}

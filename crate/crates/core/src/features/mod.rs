//! Exercise-specific per-frame features.
//!
//! Landmarks are aspect-corrected to pixels (`x * W`, `y * H`), centered on
//! the pelvis and scaled by the torso length of the same frame. The feature
//! set of each exercise comes from a registry table (`data/features.txt`),
//! which also documents every formula. Depth is not used.

mod preprocess;
mod registry;

pub use preprocess::{preprocess_sequence, T_MAX, VISIBILITY_THRESHOLD};
pub use registry::{FeatureDef, FeatureRegistry, FeatureSpec, Formula};

use crate::error::{Error, Result};
use crate::sample::{FrameSize, LandmarkFrame, Sample};
use crate::topology::{idx, CORE_LANDMARKS};

/// Segments shorter than this (in pixels) have no usable direction.
pub const EPS: f64 = 1e-6;

type P2 = [f64; 2];

/// Per-frame feature vectors of one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub vectors: Vec<Vec<f64>>,
    pub spec: FeatureSpec,
}

impl FeatureSequence {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Values of one feature over time.
    pub fn channel(&self, j: usize) -> Vec<f64> {
        self.vectors.iter().map(|v| v[j]).collect()
    }
}

/// Angle at `b` in degrees, in `[0, 180]`. Points are normalized
/// coordinates; the angle is measured after scaling by the frame size.
pub fn joint_angle(a: P2, b: P2, c: P2, frame: FrameSize) -> Result<f64> {
    let px = |p: P2| [p[0] * frame.w(), p[1] * frame.h()];
    angle_px(px(a), px(b), px(c))
}

fn angle_px(a: P2, b: P2, c: P2) -> Result<f64> {
    let u = sub(a, b);
    let v = sub(c, b);
    let (nu, nv) = (norm(u), norm(v));
    if nu <= EPS || nv <= EPS {
        return Err(Error::DegenerateGeometry(
            "zero-length segment in joint angle",
        ));
    }
    let cos = (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0);
    Ok(cos.acos().to_degrees())
}

fn sub(a: P2, b: P2) -> P2 {
    [a[0] - b[0], a[1] - b[1]]
}

fn mid(a: P2, b: P2) -> P2 {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

fn dot(a: P2, b: P2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm(a: P2) -> f64 {
    a[0].hypot(a[1])
}

/// One frame in pixel coordinates plus its body reference.
struct FrameGeom {
    px: Vec<P2>,
    pelvis: P2,
    torso: f64,
}

impl FrameGeom {
    fn new(frame: &LandmarkFrame, size: FrameSize) -> Result<Self> {
        let px: Vec<P2> = frame
            .points
            .iter()
            .map(|p| [p.x * size.w(), p.y * size.h()])
            .collect();
        let pelvis = mid(px[idx::LEFT_HIP], px[idx::RIGHT_HIP]);
        let shoulders = mid(px[idx::LEFT_SHOULDER], px[idx::RIGHT_SHOULDER]);
        let torso = norm(sub(shoulders, pelvis));
        if torso <= EPS {
            return Err(Error::DegenerateGeometry("zero torso length"));
        }
        Ok(Self { px, pelvis, torso })
    }

    fn p(&self, j: usize) -> P2 {
        self.px[j]
    }

    fn mid(&self, a: usize, b: usize) -> P2 {
        mid(self.px[a], self.px[b])
    }

    /// Pelvis-centered, torso-normalized position.
    fn body(&self, p: P2) -> P2 {
        let d = sub(p, self.pelvis);
        [d[0] / self.torso, d[1] / self.torso]
    }

    /// Raw pixel quantity a sequence statistic is taken over.
    fn sequence_quantity(&self, def: &FeatureDef) -> f64 {
        let m = self.mid(def.landmarks[0], def.landmarks[1]);
        match def.formula {
            Formula::DisplacementFromMean => m[0],
            // height grows upward on screen
            _ => -m[1],
        }
    }

    fn eval(&self, def: &FeatureDef, stat: f64) -> Result<f64> {
        let l = &def.landmarks;
        let value = match def.formula {
            Formula::Angle => angle_px(self.p(l[0]), self.p(l[1]), self.p(l[2]))?,
            Formula::Distance => norm(sub(self.body(self.p(l[0])), self.body(self.p(l[1])))),
            Formula::HeightAboveLine => {
                let (a, b) = (self.body(self.p(l[0])), self.body(self.p(l[1])));
                let dir = sub(b, a);
                let len = norm(dir);
                if len * self.torso <= EPS {
                    return Err(Error::DegenerateGeometry("zero-length reference line"));
                }
                let mut n = [-dir[1] / len, dir[0] / len];
                // the pelvis is the body origin; point the normal away from it
                if dot(n, sub([0.0, 0.0], a)) > 0.0 {
                    n = [-n[0], -n[1]];
                }
                let pts = &l[2..];
                pts.iter()
                    .map(|&j| dot(n, sub(self.body(self.p(j)), a)))
                    .sum::<f64>()
                    / pts.len() as f64
            }
            Formula::Tilt | Formula::Inclination => {
                let v = sub(self.mid(l[2], l[3]), self.mid(l[0], l[1]));
                if norm(v) <= EPS {
                    return Err(Error::DegenerateGeometry("zero-length segment in tilt"));
                }
                let signed = v[0].atan2(-v[1]).to_degrees();
                if def.formula == Formula::Tilt {
                    signed
                } else {
                    signed.abs()
                }
            }
            Formula::LineAngle => {
                let v = sub(self.p(l[1]), self.p(l[0]));
                if norm(v) <= EPS {
                    return Err(Error::DegenerateGeometry(
                        "zero-length segment in line angle",
                    ));
                }
                (-v[1]).atan2(v[0]).to_degrees()
            }
            Formula::ProjectedRatio => (self.p(l[0])[0] - self.p(l[1])[0]).abs() / self.torso,
            Formula::LateralOffset => {
                (self.mid(l[2], l[3])[0] - self.mid(l[0], l[1])[0]) / self.torso
            }
            Formula::DisplacementFromMean | Formula::HeightVsP95 => {
                (self.sequence_quantity(def) - stat) / self.torso
            }
        };
        Ok(value)
    }
}

/// Computes the spec's features for every retained frame.
///
/// The sequence is first cleaned by [`preprocess_sequence`]. A feature that
/// is geometrically undefined in some frame holds its previous value;
/// leading frames are skipped until every feature is defined.
pub fn extract_features(sample: &Sample, spec: &FeatureSpec) -> Result<FeatureSequence> {
    if sample.exercise != spec.exercise() {
        return Err(Error::InvalidArgument(format!(
            "{}: sample is exercise {}, feature spec is for exercise {}",
            sample.sample_id,
            sample.exercise,
            spec.exercise()
        )));
    }
    let seq = preprocess_sequence(&sample.sequence, &CORE_LANDMARKS)?;
    let geoms: Vec<Option<FrameGeom>> = seq
        .frames
        .iter()
        .map(|f| FrameGeom::new(f, seq.frame_size).ok())
        .collect();
    let stats: Vec<f64> = spec
        .defs()
        .iter()
        .map(|d| sequence_stat(d, &geoms))
        .collect();

    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(geoms.len());
    for g in &geoms {
        let values: Vec<Option<f64>> = spec
            .defs()
            .iter()
            .zip(&stats)
            .map(|(d, &s)| {
                g.as_ref()
                    .and_then(|g| g.eval(d, s).ok())
                    .filter(|v| v.is_finite())
            })
            .collect();
        match vectors.last() {
            None if values.iter().all(Option::is_some) => {
                vectors.push(values.into_iter().flatten().collect());
            }
            None => {}
            Some(prev) => {
                let v = values
                    .iter()
                    .zip(prev)
                    .map(|(v, &p)| v.unwrap_or(p))
                    .collect();
                vectors.push(v);
            }
        }
    }
    if vectors.len() < 2 {
        return Err(Error::TooShort {
            context: sample.sample_id.clone(),
            frames: vectors.len(),
        });
    }
    Ok(FeatureSequence {
        vectors,
        spec: spec.clone(),
    })
}

fn sequence_stat(def: &FeatureDef, geoms: &[Option<FrameGeom>]) -> f64 {
    if !def.formula.is_sequence_relative() {
        return 0.0;
    }
    let mut q: Vec<f64> = geoms
        .iter()
        .flatten()
        .map(|g| g.sequence_quantity(def))
        .collect();
    if q.is_empty() {
        return 0.0;
    }
    match def.formula {
        Formula::DisplacementFromMean => q.iter().sum::<f64>() / q.len() as f64,
        _ => percentile(&mut q, 0.95),
    }
}

/// Linear interpolation between order statistics.
fn percentile(values: &mut [f64], p: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let pos = p * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    values[lo] + (pos - lo as f64) * (values[hi] - values[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::{transform_joints, AugmentationOp};
    use crate::ingest::synth::{synth_generate, SyntheticMotionSpec};
    use crate::sample::{ExerciseId, LandmarkPoint, LandmarkSequence, Provenance};
    use crate::topology::{LandmarkTopology, NUM_LANDMARKS};

    const SQUARE: FrameSize = FrameSize::new(100, 100);

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn joint_angle_examples() {
        assert_eq!(
            joint_angle([0.0, 1.0], [0.0, 0.0], [1.0, 0.0], SQUARE).unwrap(),
            90.0
        );
        assert_eq!(
            joint_angle([0.0, 1.0], [0.0, 0.0], [0.0, -1.0], SQUARE).unwrap(),
            180.0
        );
        let a = joint_angle([1.0, 0.0], [0.0, 0.0], [1.0, 1.0], SQUARE).unwrap();
        assert!(close(a, 45.0, 1e-12), "{a}");
        assert!(matches!(
            joint_angle([0.5, 0.5], [0.5, 0.5], [1.0, 1.0], SQUARE),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn joint_angle_uses_pixel_aspect() {
        // 45 degrees in normalized units, but the frame is twice as wide
        let a = joint_angle([1.0, 0.0], [0.0, 0.0], [1.0, 1.0], FrameSize::new(200, 100)).unwrap();
        assert!(close(a, 0.5f64.atan().to_degrees(), 1e-12));
    }

    fn sample_from(exercise: u8, frames: Vec<LandmarkFrame>, size: FrameSize) -> Sample {
        Sample {
            sample_id: "t".into(),
            subject_id: "s".into(),
            exercise: ExerciseId::new(exercise).unwrap(),
            sequence: LandmarkSequence {
                frames,
                fps: 30.0,
                frame_size: size,
            },
            score: None,
            provenance: Provenance::Original,
        }
    }

    /// Arms straight out to the sides, in a square frame.
    fn t_pose() -> LandmarkFrame {
        let mut pts = vec![LandmarkPoint::new(0.5, 0.3, 0.0, 1.0); NUM_LANDMARKS];
        let mut put = |j: usize, x: f64, y: f64| pts[j] = LandmarkPoint::new(x, y, 0.0, 1.0);
        put(idx::LEFT_SHOULDER, 0.6, 0.3);
        put(idx::RIGHT_SHOULDER, 0.4, 0.3);
        put(idx::LEFT_ELBOW, 0.72, 0.3);
        put(idx::RIGHT_ELBOW, 0.28, 0.3);
        put(idx::LEFT_WRIST, 0.84, 0.3);
        put(idx::RIGHT_WRIST, 0.16, 0.3);
        put(idx::LEFT_HIP, 0.6, 0.55);
        put(idx::RIGHT_HIP, 0.4, 0.55);
        put(idx::LEFT_KNEE, 0.56, 0.7);
        put(idx::RIGHT_KNEE, 0.44, 0.7);
        put(idx::LEFT_ANKLE, 0.56, 0.85);
        put(idx::RIGHT_ANKLE, 0.44, 0.85);
        LandmarkFrame::new(pts)
    }

    fn ex1() -> &'static FeatureSpec {
        FeatureSpec::for_exercise(ExerciseId::new(1).unwrap())
    }

    #[test]
    fn static_t_pose_gives_constant_features() {
        let s = sample_from(1, vec![t_pose(); 20], SQUARE);
        let f = extract_features(&s, ex1()).unwrap();
        assert_eq!(f.len(), 20);
        for v in &f.vectors {
            assert_eq!(v, &f.vectors[0]);
        }
        let v = &f.vectors[0];
        assert!(close(v[0], 180.0, 1e-12) && close(v[1], 180.0, 1e-12));
        assert!(close(v[2], 90.0, 1e-9) && close(v[3], 90.0, 1e-9));
        // wrists 68 px apart, torso 25 px
        assert!(close(v[4], 68.0 / 25.0, 1e-12));
        assert!(close(v[5], 0.0, 1e-12));
    }

    fn synth(exercise: u8, amplitude: f64, noise_px: f64) -> Sample {
        let spec = SyntheticMotionSpec {
            exercise: ExerciseId::new(exercise).unwrap(),
            amplitude,
            tempo_hz: 0.5,
            noise_px,
            n_frames: 60,
            seed: 11,
        };
        synth_generate(&spec, "a", "s").unwrap()
    }

    fn transformed(s: &Sample, op: AugmentationOp) -> Sample {
        let mut out = s.clone();
        for f in &mut out.sequence.frames {
            *f = transform_joints(f, op, s.sequence.frame_size, LandmarkTopology::canonical());
        }
        out
    }

    #[test]
    fn flip_swaps_lateral_channels() {
        let s = synth(1, 0.8, 2.0);
        let a = extract_features(&s, ex1()).unwrap();
        let b = extract_features(&transformed(&s, AugmentationOp::HorizontalFlip), ex1()).unwrap();
        for (va, vb) in a.vectors.iter().zip(&b.vectors) {
            for (i, j) in [(0, 1), (1, 0), (2, 3), (3, 2), (4, 4), (5, 5)] {
                assert!(close(va[i], vb[j], 1e-9), "{i}: {} vs {}", va[i], vb[j]);
            }
        }
    }

    #[test]
    fn ex1_features_are_rotation_invariant() {
        let s = synth(1, 0.7, 0.0);
        let a = extract_features(&s, ex1()).unwrap();
        for theta in [-3.0, 1.0, 2.0] {
            let r = transformed(&s, AugmentationOp::rotate(theta).unwrap());
            let b = extract_features(&r, ex1()).unwrap();
            for (va, vb) in a.vectors.iter().zip(&b.vectors) {
                for j in 0..6 {
                    assert!(close(va[j], vb[j], 1e-6), "theta {theta}, feature {j}");
                }
                // distances are exact up to rounding
                assert!(close(va[4], vb[4], 1e-9));
            }
        }
    }

    #[test]
    fn wrist_height_grows_with_amplitude() {
        let mean_height = |amp: f64| {
            let f = extract_features(&synth(1, amp, 0.0), ex1()).unwrap();
            let h = f.channel(5);
            h.iter().sum::<f64>() / h.len() as f64
        };
        assert!(mean_height(1.0) > mean_height(0.3));
    }

    #[test]
    fn dims_match_spec_for_every_exercise() {
        for e in 1..=5 {
            let spec = FeatureSpec::for_exercise(ExerciseId::new(e).unwrap());
            let f = extract_features(&synth(e, 0.6, 3.0), spec).unwrap();
            assert_eq!(f.len(), 60);
            assert!(f.vectors.iter().all(|v| v.len() == spec.dim()));
            assert!(f.vectors.iter().flatten().all(|x| x.is_finite()));
        }
    }

    #[test]
    fn squat_lowers_hip_height_and_bends_knees() {
        let spec = FeatureSpec::for_exercise(ExerciseId::new(5).unwrap());
        let f = extract_features(&synth(5, 1.0, 0.0), spec).unwrap();
        let knee = f.channel(0);
        let hip = f.channel(2);
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = knee.iter().copied().fold(0.0, f64::max);
        // seen from the front the bend is foreshortened
        assert!(max > 170.0 && min(&knee) < 140.0);
        assert!(min(&hip) < -0.5);
        assert!(hip.iter().all(|&h| h < 0.05));
    }

    #[test]
    fn wrong_exercise_is_rejected() {
        let s = synth(2, 0.5, 0.0);
        assert!(matches!(
            extract_features(&s, ex1()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn degenerate_frames_hold_or_skip() {
        let mut frames = vec![t_pose(); 5];
        // elbow collapsed onto the shoulder: left elbow angle undefined
        let collapse = |f: &mut LandmarkFrame| {
            f.points[idx::LEFT_ELBOW] = f.points[idx::LEFT_SHOULDER];
        };
        collapse(&mut frames[0]);
        collapse(&mut frames[3]);
        frames[2].points[idx::LEFT_WRIST].y = 0.2;
        let f = extract_features(&sample_from(1, frames, SQUARE), ex1()).unwrap();
        assert_eq!(f.len(), 4);
        // frame 3 holds frame 2's left elbow angle
        assert_eq!(f.vectors[2][0], f.vectors[1][0]);
        assert!(f.vectors[1][0] < 180.0);
    }

    #[test]
    fn percentile_interpolates() {
        let mut v = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(percentile(&mut v, 0.5), 3.0);
        assert!(close(percentile(&mut v, 0.95), 4.8, 1e-12));
    }
}

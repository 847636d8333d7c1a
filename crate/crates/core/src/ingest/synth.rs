//! Synthetic labeled exercise recordings.
//!
//! A stylized frontal skeleton performs one of the five exercises with a
//! range of motion scaled by `amplitude`. Landmarks get Gaussian pixel
//! jitter. The label is `clamp(50 * (amplitude - min(0.5, noise_px / 20)), 0, 50)`,
//! monotone in amplitude for fixed noise.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::sample::{
    ExerciseId, FrameSize, LandmarkFrame, LandmarkPoint, LandmarkSequence, Provenance,
    QualityScore, Sample, MAX_SCORE,
};
use crate::seed::{derive_seed, rng_for};
use crate::topology::{idx, NUM_LANDMARKS};

/// Frame size of every synthetic recording.
pub const SYNTH_FRAME_SIZE: FrameSize = FrameSize::new(512, 640);
pub const SYNTH_FPS: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticMotionSpec {
    pub exercise: ExerciseId,
    /// Range-of-motion scale in `[0, 1]`.
    pub amplitude: f64,
    /// Repetition frequency in Hz.
    pub tempo_hz: f64,
    /// Per-landmark jitter standard deviation in pixels.
    pub noise_px: f64,
    pub n_frames: usize,
    pub seed: u64,
}

impl SyntheticMotionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.amplitude) {
            return Err(Error::InvalidArgument(format!(
                "amplitude must be in [0, 1], got {}",
                self.amplitude
            )));
        }
        if self.n_frames < 2 {
            return Err(Error::InvalidArgument("n_frames must be >= 2".into()));
        }
        if !(self.noise_px >= 0.0 && self.noise_px.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise_px must be >= 0, got {}",
                self.noise_px
            )));
        }
        if !(self.tempo_hz > 0.0 && self.tempo_hz.is_finite()) {
            return Err(Error::InvalidArgument("tempo_hz must be > 0".into()));
        }
        Ok(())
    }
}

/// The label assigned to a synthetic recording.
pub fn synthetic_quality(amplitude: f64, noise_px: f64) -> f64 {
    let penalty = (noise_px / 20.0).min(0.5);
    (MAX_SCORE * (amplitude - penalty)).clamp(0.0, MAX_SCORE)
}

/// Generates one labeled recording. Pure in `spec`.
pub fn synth_generate(
    spec: &SyntheticMotionSpec,
    sample_id: &str,
    subject_id: &str,
) -> Result<Sample> {
    spec.validate()?;
    let mut rng = rng_for(spec.seed, 0x5359_4e54);
    let body = Body {
        scale: rng.random_range(0.88..1.0),
        offset: (rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0)),
        shoulder_half: 48.0 * rng.random_range(0.92..1.08),
        hip_half: 32.0 * rng.random_range(0.92..1.08),
    };
    let jitter = Normal::new(0.0, spec.noise_px.max(0.0)).expect("finite std");
    let size = SYNTH_FRAME_SIZE;

    let frames = (0..spec.n_frames)
        .map(|f| {
            let phase = 2.0 * PI * spec.tempo_hz * f as f64 / SYNTH_FPS;
            let pose = body.pose(spec.exercise, spec.amplitude, phase);
            let points = pose
                .iter()
                .map(|&[px, py, pz]| {
                    let (mut u, mut v) = body.to_pixels(px, py);
                    if spec.noise_px > 0.0 {
                        u += jitter.sample(&mut rng);
                        v += jitter.sample(&mut rng);
                    }
                    LandmarkPoint::new(u / size.w(), v / size.h(), pz * body.scale / size.w(), 1.0)
                })
                .collect();
            LandmarkFrame { points }
        })
        .collect();

    Ok(Sample {
        sample_id: sample_id.to_string(),
        subject_id: subject_id.to_string(),
        exercise: spec.exercise,
        sequence: LandmarkSequence {
            frames,
            fps: SYNTH_FPS,
            frame_size: size,
        },
        score: Some(QualityScore::new(synthetic_quality(
            spec.amplitude,
            spec.noise_px,
        ))?),
        provenance: Provenance::Original,
    })
}

/// Parameters for a whole amplitude-graded synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDatasetSpec {
    pub exercise: ExerciseId,
    pub count: usize,
    pub amplitude_range: (f64, f64),
    pub noise_px: f64,
    pub n_frames: usize,
    pub tempo_hz: f64,
    pub seed: u64,
}

impl SyntheticDatasetSpec {
    pub fn new(exercise: ExerciseId, count: usize, seed: u64) -> Self {
        Self {
            exercise,
            count,
            amplitude_range: (0.2, 1.0),
            noise_px: 4.0,
            n_frames: 60,
            tempo_hz: 0.5,
            seed,
        }
    }
}

/// `count` recordings with amplitudes evenly spaced over the range, one
/// subject each. Sample `i` is named `ex{e}_s{i:03}`.
pub fn synth_dataset(spec: &SyntheticDatasetSpec) -> Result<Vec<Sample>> {
    let (lo, hi) = spec.amplitude_range;
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
        return Err(Error::InvalidArgument(format!(
            "amplitude range must satisfy 0 <= lo <= hi <= 1, got {lo}:{hi}"
        )));
    }
    if spec.count == 0 {
        return Err(Error::InvalidArgument("count must be >= 1".into()));
    }
    (0..spec.count)
        .map(|i| {
            let t = if spec.count == 1 {
                0.0
            } else {
                i as f64 / (spec.count - 1) as f64
            };
            let motion = SyntheticMotionSpec {
                exercise: spec.exercise,
                amplitude: lo + (hi - lo) * t,
                tempo_hz: spec.tempo_hz,
                noise_px: spec.noise_px,
                n_frames: spec.n_frames,
                seed: derive_seed(spec.seed, i as u64),
            };
            synth_generate(
                &motion,
                &format!("ex{}_s{i:03}", spec.exercise),
                &format!("subj{i:03}"),
            )
        })
        .collect()
}

struct Body {
    scale: f64,
    offset: (f64, f64),
    shoulder_half: f64,
    hip_half: f64,
}

const TORSO: f64 = 150.0;
const NECK: f64 = 60.0;
const UPPER_ARM: f64 = 75.0;
const FOREARM: f64 = 70.0;
const THIGH: f64 = 100.0;
const SHIN: f64 = 100.0;
const ELBOW_BEND: f64 = 8.0 * PI / 180.0;

type V2 = [f64; 2];

fn add(a: V2, b: V2) -> V2 {
    [a[0] + b[0], a[1] + b[1]]
}

fn scale(a: V2, s: f64) -> V2 {
    [a[0] * s, a[1] * s]
}

fn rot(a: V2, ang: f64) -> V2 {
    let (s, c) = ang.sin_cos();
    [c * a[0] - s * a[1], s * a[0] + c * a[1]]
}

impl Body {
    /// Body coordinates (x toward image right, y up, origin at the standing
    /// pelvis center) to pixels.
    fn to_pixels(&self, x: f64, y: f64) -> (f64, f64) {
        let size = SYNTH_FRAME_SIZE;
        let u = size.w() / 2.0 + self.offset.0 + self.scale * x;
        let v = 0.6 * size.h() + self.offset.1 - self.scale * y;
        (u, v)
    }

    /// Landmark positions `[x, y, z]` in body coordinates. The subject faces
    /// the camera, so their left side is on the image right (+x).
    fn pose(&self, exercise: ExerciseId, amp: f64, phase: f64) -> [[f64; 3]; NUM_LANDMARKS] {
        let deg = PI / 180.0;
        let rest = 0.5 * (1.0 - phase.cos()); // 0 at rest, 1 at peak
        let mut abduction = 8.0 * deg;
        let mut tilt = 0.0;
        let mut trunk_yaw = 0.0;
        let mut pelvis_yaw = 0.0;
        let mut pelvis_shift = 0.0;
        let mut knee_flex = 0.0;
        match exercise.get() {
            1 => abduction += (170.0 * deg - abduction) * amp * rest,
            2 => {
                tilt = 28.0 * deg * amp * phase.sin();
                abduction = 165.0 * deg;
            }
            3 => trunk_yaw = 60.0 * deg * amp * phase.sin(),
            4 => {
                pelvis_yaw = 45.0 * deg * amp * phase.sin();
                pelvis_shift = 18.0 * amp * phase.sin();
            }
            _ => knee_flex = 100.0 * deg * amp * rest,
        }
        let lean = 0.35 * knee_flex;

        let mut p = [[0.0; 3]; NUM_LANDMARKS];
        let mut set = |i: usize, xy: V2, z: f64| p[i] = [xy[0], xy[1], z];

        // legs: ankles planted, pelvis drops as the knees flex
        let leg = THIGH + SHIN;
        let ground = -leg;
        let half_flex = knee_flex / 2.0;
        let pelvis = [pelvis_shift, ground + leg * half_flex.cos()];
        let hip_w = self.hip_half * pelvis_yaw.cos();
        let hip_z = self.hip_half * pelvis_yaw.sin();
        let hip_l = add(pelvis, [hip_w, 0.0]);
        let hip_r = add(pelvis, [-hip_w, 0.0]);
        set(idx::LEFT_HIP, hip_l, -hip_z);
        set(idx::RIGHT_HIP, hip_r, hip_z);
        for (side, hip, knee_i, ankle_i, heel_i, foot_i) in [
            (
                1.0,
                hip_l,
                idx::LEFT_KNEE,
                idx::LEFT_ANKLE,
                idx::LEFT_HEEL,
                idx::LEFT_FOOT_INDEX,
            ),
            (
                -1.0,
                hip_r,
                idx::RIGHT_KNEE,
                idx::RIGHT_ANKLE,
                idx::RIGHT_HEEL,
                idx::RIGHT_FOOT_INDEX,
            ),
        ] {
            let ankle = [side * (self.hip_half + 4.0), ground];
            let splay = 0.45 * SHIN * half_flex.sin();
            let knee = [
                0.5 * (hip[0] + ankle[0]) + side * splay,
                ankle[1] + SHIN * half_flex.cos(),
            ];
            set(knee_i, knee, 0.0);
            set(ankle_i, ankle, 0.0);
            set(heel_i, add(ankle, [0.0, -12.0]), 0.0);
            set(foot_i, add(ankle, [side * 14.0, -18.0]), -10.0);
        }

        // trunk: unit up vector tilted sideways, foreshortened by forward lean
        let up = [tilt.sin(), tilt.cos()];
        let right = [tilt.cos(), -tilt.sin()];
        let mid_shoulder = add(pelvis, scale(up, TORSO * lean.cos()));
        let sh_w = self.shoulder_half * trunk_yaw.cos();
        let sh_z = self.shoulder_half * trunk_yaw.sin();
        let sh_l = add(mid_shoulder, scale(right, sh_w));
        let sh_r = add(mid_shoulder, scale(right, -sh_w));
        set(idx::LEFT_SHOULDER, sh_l, -sh_z);
        set(idx::RIGHT_SHOULDER, sh_r, sh_z);

        // face, drawn in the trunk frame
        let nose = add(mid_shoulder, scale(up, NECK));
        let face = |dx: f64, dy: f64| add(nose, add(scale(right, dx), scale(up, dy)));
        set(idx::NOSE, nose, -20.0);
        for (side, inner, eye, outer, ear, mouth) in [
            (
                1.0,
                idx::LEFT_EYE_INNER,
                idx::LEFT_EYE,
                idx::LEFT_EYE_OUTER,
                idx::LEFT_EAR,
                idx::MOUTH_LEFT,
            ),
            (
                -1.0,
                idx::RIGHT_EYE_INNER,
                idx::RIGHT_EYE,
                idx::RIGHT_EYE_OUTER,
                idx::RIGHT_EAR,
                idx::MOUTH_RIGHT,
            ),
        ] {
            set(inner, face(side * 9.0, 12.0), -15.0);
            set(eye, face(side * 20.0, 14.0), -14.0);
            set(outer, face(side * 31.0, 12.0), -12.0);
            set(ear, face(side * 40.0, 4.0), 0.0);
            set(mouth, face(side * 12.0, -14.0), -15.0);
        }

        // arms: abduction in the frontal plane, slight elbow bend
        for (side, sh, z, elbow_i, wrist_i, pinky_i, index_i, thumb_i) in [
            (
                1.0,
                sh_l,
                -sh_z,
                idx::LEFT_ELBOW,
                idx::LEFT_WRIST,
                idx::LEFT_PINKY,
                idx::LEFT_INDEX,
                idx::LEFT_THUMB,
            ),
            (
                -1.0,
                sh_r,
                sh_z,
                idx::RIGHT_ELBOW,
                idx::RIGHT_WRIST,
                idx::RIGHT_PINKY,
                idx::RIGHT_INDEX,
                idx::RIGHT_THUMB,
            ),
        ] {
            let down = scale(up, -1.0);
            let upper = rot(down, side * abduction);
            let fore = rot(upper, side * ELBOW_BEND);
            let elbow = add(sh, scale(upper, UPPER_ARM));
            let wrist = add(elbow, scale(fore, FOREARM));
            let perp = scale([fore[1], -fore[0]], -side);
            set(elbow_i, elbow, z);
            set(wrist_i, wrist, z);
            set(index_i, add(wrist, scale(fore, 22.0)), z);
            set(
                pinky_i,
                add(wrist, add(scale(fore, 12.0), scale(perp, 10.0))),
                z,
            );
            set(
                thumb_i,
                add(wrist, add(scale(fore, 12.0), scale(perp, -10.0))),
                z,
            );
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(exercise: u8, amplitude: f64, noise_px: f64) -> SyntheticMotionSpec {
        SyntheticMotionSpec {
            exercise: ExerciseId::new(exercise).unwrap(),
            amplitude,
            tempo_hz: 0.5,
            noise_px,
            n_frames: 60,
            seed: 11,
        }
    }

    #[test]
    fn label_formula_boundaries() {
        assert_eq!(synthetic_quality(1.0, 0.0), 50.0);
        assert_eq!(synthetic_quality(0.0, 0.0), 0.0);
        // 50 * (0.8 - 4/20) = 30
        assert!((synthetic_quality(0.8, 4.0) - 30.0).abs() < 1e-12);
        // penalty caps at 0.5
        assert_eq!(synthetic_quality(0.7, 100.0), synthetic_quality(0.7, 10.0));
    }

    #[test]
    fn generated_sample_is_valid_and_labeled() {
        let s = synth_generate(&spec(1, 0.8, 4.0), "a", "subj").unwrap();
        assert!(crate::sample::validate_sample(&s).is_empty());
        assert_eq!(s.sequence.len(), 60);
        assert!((s.score.unwrap().raw() - 30.0).abs() < 1e-12);
    }

    #[test]
    fn pure_in_spec() {
        for e in 1..=5 {
            let a = synth_generate(&spec(e, 0.6, 2.0), "a", "s").unwrap();
            let b = synth_generate(&spec(e, 0.6, 2.0), "a", "s").unwrap();
            assert_eq!(a, b);
        }
        let mut other = spec(1, 0.6, 2.0);
        other.seed += 1;
        assert_ne!(
            synth_generate(&spec(1, 0.6, 2.0), "a", "s")
                .unwrap()
                .sequence,
            synth_generate(&other, "a", "s").unwrap().sequence
        );
    }

    #[test]
    fn score_is_monotone_in_amplitude() {
        for noise in [0.0, 2.0, 4.0, 12.0] {
            let mut prev = -1.0;
            for k in 0..=20 {
                let s = synth_generate(&spec(3, k as f64 / 20.0, noise), "a", "s").unwrap();
                let q = s.score.unwrap().raw();
                assert!(q >= prev);
                prev = q;
            }
        }
    }

    #[test]
    fn landmarks_stay_inside_frame_with_margin() {
        for e in 1..=5 {
            for seed in 0..5 {
                let mut sp = spec(e, 1.0, 0.0);
                sp.seed = seed;
                let s = synth_generate(&sp, "a", "s").unwrap();
                for f in &s.sequence.frames {
                    for p in &f.points {
                        let (u, v) = (p.x * 512.0, p.y * 640.0);
                        assert!(
                            u > 15.0 && u < 497.0 && v > 15.0 && v < 625.0,
                            "ex{e}: {u},{v}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn markers_do_not_touch() {
        // rendered discs must stay separable for the marker detector
        for e in 1..=5 {
            let s = synth_generate(&spec(e, 1.0, 0.0), "a", "s").unwrap();
            for f in &s.sequence.frames {
                for i in 0..NUM_LANDMARKS {
                    for j in 0..i {
                        let (a, b) = (f.points[i], f.points[j]);
                        let d = ((a.x - b.x) * 512.0).hypot((a.y - b.y) * 640.0);
                        assert!(
                            d >= 9.0,
                            "ex{e}: landmarks {i} and {j} only {d:.2} px apart"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn dataset_is_graded_and_named() {
        let mut ds = SyntheticDatasetSpec::new(ExerciseId::new(1).unwrap(), 5, 3);
        ds.n_frames = 10;
        let samples = synth_dataset(&ds).unwrap();
        assert_eq!(samples.len(), 5);
        assert_eq!(samples[0].sample_id, "ex1_s000");
        let scores: Vec<f64> = samples.iter().map(|s| s.score.unwrap().raw()).collect();
        assert!(scores.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(scores[0], 0.0);
        assert!((scores[4] - 40.0).abs() < 1e-9);
        ds.amplitude_range = (0.9, 0.1);
        assert!(synth_dataset(&ds).is_err());
    }
}

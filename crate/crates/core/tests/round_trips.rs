use proptest::prelude::*;
use rehab_core::augment::{transform_joints, AugmentationOp};
use rehab_core::ingest::{parse_keypoints, render_keypoints};
use rehab_core::manifest::{Cohort, EntryOrigin, Manifest, ManifestEntry};
use rehab_core::topology::{mirror_swap, NUM_LANDMARKS};
use rehab_core::{
    ExerciseId, FrameSize, LandmarkFrame, LandmarkPoint, LandmarkSequence, LandmarkTopology,
    Provenance, QualityScore, Sample,
};

fn point() -> impl Strategy<Value = LandmarkPoint> {
    (0.0f64..1.0, 0.0f64..1.0, -1.0f64..1.0, 0.0f64..=1.0)
        .prop_map(|(x, y, z, v)| LandmarkPoint::new(x, y, z, v))
}

fn frame() -> impl Strategy<Value = LandmarkFrame> {
    prop::collection::vec(point(), NUM_LANDMARKS).prop_map(LandmarkFrame::new)
}

fn close(a: &LandmarkFrame, b: &LandmarkFrame, tol: f64) -> bool {
    a.points.iter().zip(&b.points).all(|(p, q)| {
        (p.x - q.x).abs() <= tol
            && (p.y - q.y).abs() <= tol
            && (p.z - q.z).abs() <= tol
            && (p.visibility - q.visibility).abs() <= tol
    })
}

proptest! {
    #[test]
    fn mirror_swap_is_an_involution(f in frame()) {
        let t = LandmarkTopology::canonical();
        let back = mirror_swap(&mirror_swap(&f, t), t);
        prop_assert!(close(&back, &f, 1e-15));
        // z and visibility travel with the swapped label unchanged
        prop_assert_eq!(back.points.iter().map(|p| p.visibility).collect::<Vec<_>>(),
                        f.points.iter().map(|p| p.visibility).collect::<Vec<_>>());
    }

    #[test]
    fn opposite_rotations_cancel(f in frame(), theta in -10.0f64..10.0) {
        let t = LandmarkTopology::canonical();
        let size = FrameSize::new(512, 640);
        let there = transform_joints(&f, AugmentationOp::Rotate { theta_deg: theta }, size, t);
        let back = transform_joints(&there, AugmentationOp::Rotate { theta_deg: -theta }, size, t);
        prop_assert!(close(&back, &f, 1e-12));
    }

    #[test]
    fn keypoint_files_round_trip(
        frames in prop::collection::vec(frame(), 2..6),
        fps in 1.0f64..120.0,
        score in proptest::option::of(0.0f64..=50.0),
        exercise in 1u8..=5,
    ) {
        let sample = Sample {
            sample_id: "clip".into(),
            subject_id: "subject, \"quoted\"".into(),
            exercise: ExerciseId::new(exercise).unwrap(),
            sequence: LandmarkSequence { frames, fps, frame_size: FrameSize::new(640, 480) },
            score: score.map(|s| QualityScore::new(s).unwrap()),
            provenance: Provenance::Original,
        };
        let text = render_keypoints(&sample).unwrap();
        let back = parse_keypoints(&text, "clip").unwrap();
        prop_assert_eq!(&back.subject_id, &sample.subject_id);
        prop_assert_eq!(back.exercise, sample.exercise);
        prop_assert_eq!(back.sequence.fps, fps);
        prop_assert_eq!(back.score, sample.score);
        prop_assert_eq!(back.sequence.len(), sample.sequence.len());
        for (a, b) in back.sequence.frames.iter().zip(&sample.sequence.frames) {
            prop_assert!(close(a, b, 1e-9));
        }
        // a second pass is exact
        prop_assert_eq!(render_keypoints(&back).unwrap(), text);
    }

    #[test]
    fn manifests_reach_a_fixed_point(
        rows in prop::collection::vec(("[a-z0-9_]{1,8}", 1u8..=5, 0.0f64..=50.0, 0usize..3, any::<bool>()), 1..12),
    ) {
        let mut m = Manifest::new("/data");
        let mut seen = std::collections::HashSet::new();
        for (id, ex, score, cohort, augmented) in rows {
            if !seen.insert(id.clone()) {
                continue;
            }
            let origin = if augmented {
                EntryOrigin::Augmented { parent: format!("{id}p"), op: AugmentationOp::Rotate { theta_deg: -2.0 } }
            } else {
                EntryOrigin::Original
            };
            m.entries.push(ManifestEntry {
                sample_id: id.clone(),
                subject_id: format!("s,{id}"),
                exercise: ExerciseId::new(ex).unwrap(),
                keypoints: format!("kp/{id}.json"),
                score_raw: score,
                cohort: [Cohort::Healthy, Cohort::Patient, Cohort::Synthetic][cohort],
                origin,
            });
        }
        let mut first = Vec::new();
        m.write(&mut first).unwrap();
        let loaded = Manifest::parse(first.as_slice(), "/data").unwrap();
        prop_assert_eq!(&loaded, &m);
        let mut second = Vec::new();
        loaded.write(&mut second).unwrap();
        prop_assert_eq!(first, second);
    }
}

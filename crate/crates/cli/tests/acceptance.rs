//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Built without the libtest harness so the lines always show.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use rehab_core::augment::{
    augmented_id, transform_image, transform_joints, AugmentationPreset, Space,
};
use rehab_core::evalcv::{fold_split, make_folds, run_cv, spearman, CvSetup, FoldStrategy};
use rehab_core::features::FeatureSpec;
use rehab_core::ingest::synth::synth_generate;
use rehab_core::ingest::{
    detect_markers, render_markers, synth_dataset, SyntheticDatasetSpec, SyntheticMotionSpec,
};
use rehab_core::seed::rng_for;
use rehab_core::seqnet::{
    backward, forward, DropoutMasks, LstmConfig, LstmParams, Mode, TrainConfig,
};
use rehab_core::{ExerciseId, LandmarkTopology};

const BIN: &str = env!("CARGO_BIN_EXE_rehab");

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(name: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let mut out = f();
    let took = start.elapsed();
    if let Some(limit) = limit {
        if took > limit {
            out.pass = false;
            out.detail
                .push_str(&format!("; over the {}s limit", limit.as_secs()));
        }
    }
    println!(
        "{} {name}: {} ({:.1}s)",
        if out.pass { "PASS" } else { "FAIL" },
        out.detail,
        took.as_secs_f64()
    );
    out.pass
}

fn jobs() -> String {
    std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .to_string()
}

fn rehab(args: &[&str]) -> Result<String, String> {
    let out = Command::new(BIN)
        .args(args)
        .env_remove("REHAB_OUT_ROOT")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn p(path: &Path) -> &str {
    path.to_str().expect("UTF-8 temp path")
}

/// Brute-force Spearman: count-based average ranks, then the textbook
/// Pearson sums.
fn oracle_spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    let ranks = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|a| {
                let below = v.iter().filter(|b| *b < a).count() as f64;
                let tied = v.iter().filter(|b| *b == a).count() as f64;
                below + (tied + 1.0) / 2.0
            })
            .collect()
    };
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (sx, sy) = (rx.iter().sum::<f64>(), ry.iter().sum::<f64>());
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| a * b).sum();
    let sxx: f64 = rx.iter().map(|a| a * a).sum();
    let syy: f64 = ry.iter().map(|b| b * b).sum();
    let den = ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt();
    (den > 0.0).then(|| (n * sxy - sx * sy) / den)
}

fn spearman_oracle() -> Outcome {
    let mut compared = 0u64;
    let mut worst = 0.0f64;
    let mut mismatches = Vec::new();
    for n in 1..=6u32 {
        let total = 3usize.pow(n);
        let decode = |mut k: usize| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    let v = (k % 3 + 1) as f64;
                    k /= 3;
                    v
                })
                .collect()
        };
        for a in 0..total {
            let x = decode(a);
            for b in 0..total {
                let y = decode(b);
                compared += 1;
                match (
                    spearman(&x, &y).ok(),
                    oracle_spearman(&x, &y).filter(|_| n >= 2),
                ) {
                    (Some(r), Some(o)) => worst = worst.max((r - o).abs()),
                    (None, None) => {}
                    (r, o) => mismatches.push(format!("{x:?}/{y:?}: {r:?} vs {o:?}")),
                }
            }
        }
    }
    Outcome {
        pass: mismatches.is_empty() && worst <= 1e-12,
        detail: format!(
            "{compared} pairs, max |diff| {worst:.1e}, {} definedness mismatches",
            mismatches.len()
        ),
    }
}

fn gradient_check() -> Outcome {
    let config = LstmConfig {
        input_dim: 5,
        hidden_dim: 4,
        num_layers: 2,
        dropout_p: 0.17,
    };
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for seed in [11u64, 12, 13] {
        let mut rng = rng_for(seed, 0);
        let params = LstmParams::init(config, &mut rng).expect("valid config");
        let seq: Vec<Vec<f64>> = (0..7)
            .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let masks = DropoutMasks::sample(&config, 7, &mut rng);
        for mode in [Mode::Eval, Mode::Train(&masks)] {
            let target = forward(&params, &seq, mode).unwrap() - 0.5;
            let (_, grads) = backward(&params, &seq, target, mode).unwrap();
            for k in 0..params.len() {
                let loss_at = |delta: f64| {
                    let mut q = params.clone();
                    q.values[k] += delta;
                    (forward(&q, &seq, mode).unwrap() - target).abs()
                };
                let numeric = (loss_at(h) - loss_at(-h)) / (2.0 * h);
                let analytic = grads.values[k];
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
                worst = worst.max(rel);
                checked += 1;
            }
        }
    }
    Outcome {
        pass: worst <= 1e-4,
        detail: format!(
            "{checked} gradients over 3 seeds, eval and dropout modes, max rel err {worst:.2e}"
        ),
    }
}

fn cross_modal() -> Outcome {
    let topology = LandmarkTopology::canonical();
    let preset = AugmentationPreset::a7();
    let mut rng = rng_for(2024, 0);
    let mut worst = 0.0f64;
    let mut lost = 0;
    let mut compared = 0;
    for i in 0..50 {
        let spec = SyntheticMotionSpec {
            exercise: ExerciseId::new(rng.random_range(1..=5)).unwrap(),
            amplitude: rng.random_range(0.2..1.0),
            tempo_hz: rng.random_range(0.2..1.0),
            // jitter lets neighbouring discs overlap, which no detector can undo
            noise_px: 0.0,
            n_frames: 40,
            seed: rng.random(),
        };
        let sample = synth_generate(&spec, &format!("frame{i}"), "s").unwrap();
        let frame = &sample.sequence.frames[rng.random_range(0..40)];
        let size = sample.sequence.frame_size;
        let image = render_markers(frame, size);
        for &op in preset.ops() {
            let detected = detect_markers(&transform_image(&image, op));
            let expected = transform_joints(frame, op, size, topology);
            for (a, b) in detected.points.iter().zip(&expected.points) {
                if b.visibility < 0.5 {
                    continue;
                }
                compared += 1;
                if a.visibility < 0.5 {
                    lost += 1;
                    continue;
                }
                worst = worst.max(((a.x - b.x) * size.w()).hypot((a.y - b.y) * size.h()));
            }
        }
    }
    Outcome {
        pass: lost == 0 && worst <= 1.5,
        detail: format!("{compared} landmarks over 50 noise-free frames x 7 ops, max error {worst:.3} px, {lost} lost"),
    }
}

fn leakage() -> Outcome {
    let mut rng = rng_for(77, 0);
    let mut problems: Vec<String> = Vec::new();
    for trial in 0..100 {
        let n = rng.random_range(8..25);
        let k = rng.random_range(2..=5);
        let strategy = if rng.random_bool(0.5) {
            FoldStrategy::Stratified
        } else {
            FoldStrategy::Random
        };
        let preset = match rng.random_range(0..3) {
            0 => AugmentationPreset::a1(),
            1 => AugmentationPreset::a7(),
            _ => AugmentationPreset::from_descriptors("custom", "hflip,rot+4").unwrap(),
        };
        let mut spec = SyntheticDatasetSpec::new(ExerciseId::new(1).unwrap(), n, rng.random());
        spec.n_frames = 4;
        let originals = synth_dataset(&spec).unwrap();
        let scores: Vec<(String, f64)> = originals
            .iter()
            .map(|s| (s.sample_id.clone(), s.score.unwrap().raw()))
            .collect();
        let plan = make_folds(&scores, k, strategy, rng.random()).unwrap();

        // what each fold trains on, as ids
        let mut validated: Vec<&str> = Vec::new();
        for fold in 0..k {
            let split = fold_split(&plan, &originals, fold);
            let held: HashSet<&str> = split
                .validation
                .iter()
                .map(|&i| originals[i].sample_id.as_str())
                .collect();
            let mut trained: Vec<String> = Vec::new();
            for &i in &split.train {
                trained.push(originals[i].sample_id.clone());
                trained.extend(
                    preset
                        .ops()
                        .iter()
                        .map(|&op| augmented_id(&originals[i].sample_id, op)),
                );
            }
            for id in &trained {
                let root = id.split("__").next().unwrap();
                if held.contains(root) {
                    problems.push(format!("trial {trial} fold {fold}: trains on {id}"));
                }
            }
            if split.train.len() + split.validation.len() != n {
                problems.push(format!(
                    "trial {trial} fold {fold}: split does not cover the originals"
                ));
            }
            validated.extend(held);
        }
        let mut sorted = validated.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != validated.len() || sorted.len() != n {
            problems.push(format!(
                "trial {trial}: validation sets do not partition the originals"
            ));
        }

        // the full pipeline with a throwaway model
        let feature_spec = FeatureSpec::for_exercise(spec.exercise);
        let setup = CvSetup {
            originals: &originals,
            space: Space::Joints,
            pipeline: None,
            feature_spec,
            model: LstmConfig {
                input_dim: feature_spec.dim(),
                hidden_dim: 2,
                num_layers: 1,
                dropout_p: 0.0,
            },
            train: TrainConfig {
                epochs: 1,
                ..TrainConfig::paper(trial)
            },
            plan: &plan,
            jobs: 1,
        };
        match run_cv(&setup, Some(&preset)) {
            Ok(report) => {
                let ids: Vec<&str> = report.rows().map(|r| r.1).collect();
                let unique: HashSet<&str> = ids.iter().copied().collect();
                let original_ids: HashSet<&str> =
                    originals.iter().map(|s| s.sample_id.as_str()).collect();
                if ids.len() != n
                    || unique != original_ids
                    || ids.iter().any(|id| id.contains("__"))
                {
                    problems.push(format!("trial {trial}: report validates {ids:?}"));
                }
            }
            Err(e) => problems.push(format!("trial {trial}: {e}")),
        }
    }
    Outcome {
        pass: problems.is_empty(),
        detail: if problems.is_empty() {
            "100 plans, no augmented or parent-linked ids in validation, exact partitions".into()
        } else {
            format!("{} problems, first: {}", problems.len(), problems[0])
        },
    }
}

fn spearman_line(stdout: &str, preset: &str) -> Option<f64> {
    stdout
        .lines()
        .filter_map(|l| l.strip_prefix("spearman "))
        .find_map(|l| l.strip_prefix(preset)?.trim().parse().ok())
}

fn synthetic_ablation(work: &Path) -> Outcome {
    let data = work.join("ablation-data");
    let run = || -> Result<String, String> {
        rehab(&[
            "synth",
            "--exercise",
            "1",
            "--count",
            "60",
            "--noise-px",
            "4",
            "--seed",
            "7",
            "--out-dir",
            p(&data),
        ])?;
        rehab(&[
            "ablate",
            "--manifest",
            p(&data.join("manifest.csv")),
            "--exercise",
            "1",
            "--presets",
            "none,a1",
            "--space",
            "image",
            "--pose-cmd",
            "builtin:markers",
            "--epochs",
            "100",
            "--folds",
            "5",
            "--seed",
            "7",
            "--jobs",
            &jobs(),
            "--out-dir",
            p(&work.join("ablation")),
        ])
    };
    match run() {
        Err(e) => Outcome {
            pass: false,
            detail: e,
        },
        Ok(stdout) => {
            let none = spearman_line(&stdout, "none");
            let a1 = spearman_line(&stdout, "a1");
            let pass = matches!((none, a1), (Some(n), Some(a)) if a >= 0.80 && a >= n - 0.05);
            Outcome {
                pass,
                detail: format!(
                    "image space, pooled Spearman none {} a1 {} (need a1 >= 0.80 and >= none - 0.05)",
                    none.map_or("NA".into(), |v| format!("{v:.4}")),
                    a1.map_or("NA".into(), |v| format!("{v:.4}"))
                ),
            }
        }
    }
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).into_iter().flatten().flatten() {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path).unwrap_or_default();
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), bytes);
            }
        }
    }
    out
}

fn determinism(work: &Path) -> Outcome {
    let data = work.join("determinism-data");
    let cv = |out: &Path| {
        rehab(&[
            "cv",
            "--manifest",
            p(&data.join("manifest.csv")),
            "--exercise",
            "2",
            "--preset",
            "a1",
            "--space",
            "image",
            "--pose-cmd",
            "builtin:markers",
            "--epochs",
            "15",
            "--seed",
            "3",
            "--jobs",
            &jobs(),
            "--out-dir",
            p(out),
        ])
    };
    let run = || -> Result<(String, String), String> {
        rehab(&[
            "synth",
            "--exercise",
            "2",
            "--count",
            "15",
            "--frames",
            "40",
            "--seed",
            "3",
            "--out-dir",
            p(&data),
        ])?;
        Ok((cv(&work.join("cv-a"))?, cv(&work.join("cv-b"))?))
    };
    match run() {
        Err(e) => Outcome {
            pass: false,
            detail: e,
        },
        Ok((out_a, out_b)) => {
            let (a, b) = (snapshot(&work.join("cv-a")), snapshot(&work.join("cv-b")));
            let differing: Vec<_> = a
                .keys()
                .chain(b.keys())
                .filter(|k| a.get(*k) != b.get(*k))
                .collect();
            Outcome {
                pass: differing.is_empty() && out_a == out_b && a.len() >= 5,
                detail: format!("{} files compared, {} differ", a.len(), differing.len()),
            }
        }
    }
}

fn preset_cardinality(work: &Path) -> Outcome {
    let data = work.join("cardinality-data");
    let mut counts = Vec::new();
    let run = |counts: &mut Vec<(String, usize, usize)>| -> Result<(), String> {
        rehab(&[
            "synth",
            "--count",
            "10",
            "--frames",
            "6",
            "--out-dir",
            p(&data),
        ])?;
        for preset in ["a1", "a7"] {
            let out = work.join(format!("cardinality-{preset}"));
            rehab(&[
                "augment",
                "--manifest",
                p(&data.join("manifest.csv")),
                "--preset",
                preset,
                "--out-dir",
                p(&out),
            ])?;
            let files = std::fs::read_dir(out.join("keypoints"))
                .map_err(|e| e.to_string())?
                .count();
            let lib = AugmentationPreset::by_name(preset).unwrap().ops().len();
            counts.push((preset.to_string(), files, lib));
        }
        Ok(())
    };
    if let Err(e) = run(&mut counts) {
        return Outcome {
            pass: false,
            detail: e,
        };
    }
    let pass = counts == [("a1".to_string(), 30, 3), ("a7".to_string(), 70, 7)];
    Outcome {
        pass,
        detail: counts
            .iter()
            .map(|(name, files, ops)| format!("{name}: {ops} ops, {files} files from 10 originals"))
            .collect::<Vec<_>>()
            .join(", "),
    }
}

fn main() {
    let work = tempfile::tempdir().expect("temp dir");
    let minute = Duration::from_secs(60);
    let results = [
        check(
            "spearman_oracle",
            Some(Duration::from_secs(10)),
            spearman_oracle,
        ),
        check("gradient_check", Some(minute), gradient_check),
        check("cross_modal_equivalence", Some(2 * minute), cross_modal),
        check("leakage_invariant", None, leakage),
        check("synthetic_ablation", Some(10 * minute), || {
            synthetic_ablation(work.path())
        }),
        check("determinism", None, || determinism(work.path())),
        check("preset_cardinality", None, || {
            preset_cardinality(work.path())
        }),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

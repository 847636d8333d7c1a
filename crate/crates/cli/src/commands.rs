use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;
use rehab_core::augment::{
    augment_sample, augmented_id, read_frame_dir, write_frame_dir, AugmentationPreset,
    CommandPoseBackend, FrameDirSource, FrameSource, ImagePipeline, MarkerDetectBackend,
    MarkerRenderSource, PoseBackend, Space,
};
use rehab_core::evalcv::{
    make_folds, preset_name, run_ablation, run_cv, scatter_svg_points, spearman,
    write_ablation_outputs, write_cv_outputs, CvSetup, FoldStrategy,
};
use rehab_core::features::{extract_features, FeatureRegistry, FeatureSpec};
use rehab_core::ingest::{load_keypoints, save_keypoints, synth_dataset, SyntheticDatasetSpec};
use rehab_core::manifest::{Cohort, EntryOrigin, Manifest, ManifestEntry};
use rehab_core::seqnet::{fit_model, write_loss_history, LstmConfig, TrainConfig};
use rehab_core::{Error, ExerciseId, Provenance, Sample};

use crate::args::*;
use crate::Failure;

pub const BUILTIN_MARKERS: &str = "builtin:markers";
pub const OUT_ROOT_ENV: &str = "REHAB_OUT_ROOT";

type CmdResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Invalid-argument errors from configuration checks are usage errors.
fn config_error(e: Error) -> Failure {
    match e {
        Error::InvalidArgument(m) | Error::Parse(m) => Failure::Usage(m),
        other => other.into(),
    }
}

fn out_dir(out: &OutArgs, command: &str) -> PathBuf {
    out.out_dir.clone().unwrap_or_else(|| {
        std::env::var_os(OUT_ROOT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("rehab-out"))
            .join(command)
    })
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn exercise(n: u8) -> ExerciseId {
    ExerciseId::new(n).expect("clap restricts the range")
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, Failure> {
    if jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::Runtime(e.into()))
}

/// Frame source and pose backend behind `--space image`.
struct ImageStack {
    source: Box<dyn FrameSource>,
    backend: Box<dyn PoseBackend>,
}

impl ImageStack {
    fn from_args(a: &AugmentationArgs) -> Result<Option<Self>, Failure> {
        match a.space {
            SpaceArg::Joints => {
                if a.pose_cmd.is_some() || a.frames_root.is_some() {
                    return Err(usage(
                        "--pose-cmd and --frames-root only apply to --space image",
                    ));
                }
                Ok(None)
            }
            SpaceArg::Image => {
                let cmd = a
                    .pose_cmd
                    .as_deref()
                    .ok_or_else(|| usage("--space image requires --pose-cmd"))?;
                let backend: Box<dyn PoseBackend> = if cmd == BUILTIN_MARKERS {
                    Box::new(MarkerDetectBackend)
                } else {
                    Box::new(
                        CommandPoseBackend::from_command_line(cmd)
                            .map_err(config_error)?
                            .reentrant(a.pose_reentrant),
                    )
                };
                let source: Box<dyn FrameSource> = match &a.frames_root {
                    Some(root) => Box::new(FrameDirSource { root: root.clone() }),
                    None => Box::new(MarkerRenderSource),
                };
                Ok(Some(Self { source, backend }))
            }
        }
    }

    fn pipeline(&self) -> ImagePipeline<'_> {
        ImagePipeline {
            source: self.source.as_ref(),
            backend: self.backend.as_ref(),
        }
    }
}

fn space(a: &AugmentationArgs) -> Space {
    match a.space {
        SpaceArg::Joints => Space::Joints,
        SpaceArg::Image => Space::Image,
    }
}

fn custom_preset(ops: &str) -> Result<AugmentationPreset, Failure> {
    AugmentationPreset::from_descriptors("custom", ops).map_err(|e| usage(format!("--ops: {e}")))
}

fn parse_range(s: &str) -> Result<(f64, f64), Failure> {
    let bad = || usage(format!("--amplitude-range must look like LO:HI, got {s:?}"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    Ok((lo, hi))
}

pub fn synth(a: &SynthArgs) -> CmdResult {
    let mut spec = SyntheticDatasetSpec::new(exercise(a.exercise), a.count, a.seed);
    spec.amplitude_range = parse_range(&a.amplitude_range)?;
    spec.noise_px = a.noise_px;
    spec.n_frames = a.frames;
    spec.tempo_hz = a.tempo_hz;
    let samples = synth_dataset(&spec).map_err(config_error)?;

    let dir = out_dir(&a.out, "synth");
    create_dir(&dir)?;
    let mut manifest = Manifest::new(&dir);
    for s in &samples {
        let rel = format!("keypoints/{}.json", s.sample_id);
        save_keypoints(s, &dir.join(&rel))?;
        if a.render_frames {
            write_frame_dir(
                &dir.join("frames").join(&s.sample_id),
                &MarkerRenderSource.frames(s)?,
            )?;
        }
        manifest.entries.push(ManifestEntry {
            sample_id: s.sample_id.clone(),
            subject_id: s.subject_id.clone(),
            exercise: s.exercise,
            keypoints: rel,
            score_raw: s.score.map_or(0.0, |q| q.raw()),
            cohort: Cohort::Synthetic,
            origin: EntryOrigin::Original,
        });
    }
    let path = dir.join("manifest.csv");
    manifest.save(&path)?;
    println!("wrote {} samples to {}", samples.len(), path.display());
    Ok(())
}

/// `path` as seen from `dir`: relative if inside it, absolute otherwise.
fn rebase(path: &Path, dir: &Path) -> anyhow::Result<String> {
    let abs = std::path::absolute(path)?;
    let dir = std::path::absolute(dir)?;
    let shown = abs.strip_prefix(&dir).unwrap_or(&abs);
    shown
        .to_str()
        .map(str::to_string)
        .with_context(|| format!("non-UTF-8 path {}", abs.display()))
}

pub fn augment(a: &AugmentArgs) -> CmdResult {
    let preset = match (&a.preset, &a.aug.ops) {
        (_, Some(ops)) => custom_preset(ops)?,
        (Some(name), None) => AugmentationPreset::by_name(name).expect("clap restricts the name"),
        (None, None) => unreachable!("clap requires --preset or --ops"),
    };
    let stack = ImageStack::from_args(&a.aug)?;
    let pool = thread_pool(a.jobs)?;
    let manifest = Manifest::load(&a.manifest)?;
    let wanted = |e: &ManifestEntry| a.exercise.is_none_or(|n| e.exercise == exercise(n));

    let existing: HashSet<&str> = manifest
        .entries
        .iter()
        .map(|e| e.sample_id.as_str())
        .collect();
    let parents: Vec<&ManifestEntry> = manifest.originals().filter(|e| wanted(e)).collect();
    for p in &parents {
        for &op in preset.ops() {
            let id = augmented_id(&p.sample_id, op);
            if existing.contains(id.as_str()) {
                return Err(Failure::Runtime(anyhow::anyhow!(
                    "{id} is already in the manifest; augment the original manifest instead"
                )));
            }
        }
    }

    let space = space(&a.aug);
    let pipeline = stack.as_ref().map(ImageStack::pipeline);
    let children: Vec<Vec<Sample>> = pool.install(|| {
        parents
            .par_iter()
            .map(|e| {
                let parent = manifest.load_sample(e)?;
                augment_sample(&parent, &preset, space, pipeline)
            })
            .collect::<rehab_core::Result<_>>()
    })?;

    let dir = out_dir(&a.out, "augment");
    create_dir(&dir)?;
    let mut out = Manifest::new(&dir);
    for e in &manifest.entries {
        let mut e = e.clone();
        e.keypoints = rebase(&manifest.resolve(&e), &dir)?;
        out.entries.push(e);
    }
    let mut written = 0;
    for (parent, kids) in parents.iter().zip(&children) {
        for kid in kids {
            let rel = format!("keypoints/{}.json", kid.sample_id);
            save_keypoints(kid, &dir.join(&rel))?;
            let Provenance::Augmented { op, .. } = kid.provenance else {
                unreachable!("augment_sample marks its output")
            };
            out.entries.push(ManifestEntry {
                sample_id: kid.sample_id.clone(),
                subject_id: kid.subject_id.clone(),
                exercise: kid.exercise,
                keypoints: rel,
                score_raw: parent.score_raw,
                cohort: parent.cohort,
                origin: EntryOrigin::Augmented {
                    parent: parent.sample_id.clone(),
                    op,
                },
            });
            written += 1;
        }
    }
    let path = dir.join("manifest.csv");
    out.save(&path)?;
    println!(
        "wrote {written} augmented samples ({} x {}) to {}",
        parents.len(),
        preset.ops().len(),
        path.display()
    );
    Ok(())
}

pub fn features(a: &FeaturesArgs) -> CmdResult {
    if a.registry {
        print!("{}", FeatureRegistry::canonical().to_table());
        return Ok(());
    }
    let path = a.manifest.as_ref().expect("clap requires --manifest");
    let manifest = Manifest::load(path)?;
    let dir = out_dir(&a.out, "features");
    create_dir(&dir)?;
    let mut count = 0;
    for e in &manifest.entries {
        if a.exercise.is_some_and(|n| e.exercise != exercise(n)) {
            continue;
        }
        let sample = manifest.load_sample(e)?;
        let feats = extract_features(&sample, FeatureSpec::for_exercise(sample.exercise))?;
        let mut csv = feats.spec.feature_names().join(",");
        csv.push('\n');
        for v in &feats.vectors {
            let row: Vec<String> = v.iter().map(f64::to_string).collect();
            let _ = writeln!(csv, "{}", row.join(","));
        }
        let file = dir.join(format!("{}.csv", e.sample_id));
        std::fs::write(&file, csv).with_context(|| format!("cannot write {}", file.display()))?;
        count += 1;
    }
    println!("wrote features for {count} samples to {}", dir.display());
    Ok(())
}

fn model_configs(m: &ModelArgs, input_dim: usize) -> Result<(LstmConfig, TrainConfig), Failure> {
    let model = LstmConfig {
        input_dim,
        hidden_dim: m.hidden,
        num_layers: m.layers,
        dropout_p: m.dropout,
    };
    model.validate().map_err(config_error)?;
    let train = TrainConfig {
        epochs: m.epochs,
        batch_size: m.batch_size,
        learning_rate: m.lr,
        ..TrainConfig::paper(m.seed)
    };
    train.validate().map_err(config_error)?;
    Ok((model, train))
}

pub fn train(a: &TrainArgs) -> CmdResult {
    let ex = exercise(a.exercise);
    let spec = FeatureSpec::for_exercise(ex);
    let (model_config, train_config) = model_configs(&a.model, spec.dim())?;
    let manifest = Manifest::load(&a.manifest)?;
    let mut data = Vec::new();
    for e in manifest.entries.iter().filter(|e| e.exercise == ex) {
        let sample = manifest.load_sample(e)?;
        let target = sample
            .score
            .expect("manifest rows are labelled")
            .normalized();
        data.push((extract_features(&sample, spec)?.vectors, target));
    }
    if data.is_empty() {
        return Err(Failure::Runtime(anyhow::anyhow!(
            "no samples of exercise {ex} in the manifest"
        )));
    }
    let items: Vec<(&[Vec<f64>], f64)> = data.iter().map(|(v, y)| (v.as_slice(), *y)).collect();
    let (model, history) = fit_model(&items, model_config, &train_config)?;

    let dir = out_dir(&a.out, "train");
    create_dir(&dir)?;
    model.save(&dir.join("model.ckpt"))?;
    write_loss_history(&dir.join("loss.csv"), &history)?;
    println!(
        "trained on {} samples; final mean MAE {}",
        items.len(),
        history.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn fmt_spearman(r: Option<f64>) -> String {
    r.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

/// Loads originals and runs `f` on the assembled setup.
fn with_setup<T>(
    e: &EvalArgs,
    f: impl FnOnce(&CvSetup<'_>) -> Result<T, Failure>,
) -> Result<T, Failure> {
    let ex = exercise(e.exercise);
    let spec = FeatureSpec::for_exercise(ex);
    let (model, train) = model_configs(&e.model, spec.dim())?;
    let stack = ImageStack::from_args(&e.aug)?;
    if e.jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    let manifest = Manifest::load(&e.manifest)?;
    let originals = manifest.load_originals(ex)?;
    if originals.is_empty() {
        return Err(Failure::Runtime(anyhow::anyhow!(
            "no original samples of exercise {ex} in {}",
            e.manifest.display()
        )));
    }
    let scores: Vec<(String, f64)> = originals
        .iter()
        .map(|s| (s.sample_id.clone(), s.score.map_or(0.0, |q| q.raw())))
        .collect();
    let strategy = match e.fold_strategy {
        StrategyArg::Stratified => FoldStrategy::Stratified,
        StrategyArg::Random => FoldStrategy::Random,
    };
    let plan = make_folds(&scores, e.folds, strategy, e.model.seed).map_err(config_error)?;
    let setup = CvSetup {
        originals: &originals,
        space: space(&e.aug),
        pipeline: stack.as_ref().map(ImageStack::pipeline),
        feature_spec: spec,
        model,
        train,
        plan: &plan,
        jobs: e.jobs,
    };
    f(&setup)
}

pub fn cv(a: &CvArgs) -> CmdResult {
    let preset = match (&a.eval.aug.ops, a.preset.as_str()) {
        (Some(ops), _) => Some(custom_preset(ops)?),
        (None, "none") => None,
        (None, name) => Some(AugmentationPreset::by_name(name).expect("clap restricts the name")),
    };
    let report = with_setup(&a.eval, |setup| Ok(run_cv(setup, preset.as_ref())?))?;
    let dir = out_dir(&a.eval.out, "cv");
    write_cv_outputs(&report, &dir)?;
    println!(
        "spearman {} {}",
        report.preset(),
        fmt_spearman(report.pooled_spearman())
    );
    Ok(())
}

const PRESET_NAMES: &str = "none, a1, a7, custom";

fn parse_presets(
    list: &str,
    ops: Option<&str>,
) -> Result<Vec<Option<AugmentationPreset>>, Failure> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if !seen.insert(name) {
            return Err(usage(format!("preset {name:?} listed twice")));
        }
        out.push(match name {
            "none" => None,
            "custom" => Some(custom_preset(
                ops.ok_or_else(|| usage("preset custom needs --ops"))?,
            )?),
            _ => Some(AugmentationPreset::by_name(name).ok_or_else(|| {
                usage(format!(
                    "unknown preset {name:?}; valid presets: {PRESET_NAMES}"
                ))
            })?),
        });
    }
    if out.is_empty() {
        return Err(usage(format!(
            "--presets is empty; valid presets: {PRESET_NAMES}"
        )));
    }
    if ops.is_some() && !seen.contains("custom") {
        return Err(usage("--ops given but `custom` is not in --presets"));
    }
    Ok(out)
}

pub fn ablate(a: &AblateArgs) -> CmdResult {
    let presets = parse_presets(&a.presets, a.eval.aug.ops.as_deref())?;
    let ablation = with_setup(&a.eval, |setup| Ok(run_ablation(setup, &presets)?))?;
    let dir = out_dir(&a.eval.out, "ablate");
    write_ablation_outputs(&ablation, &dir)?;
    for (p, r) in presets.iter().zip(&ablation.reports) {
        println!(
            "spearman {} {}",
            preset_name(p.as_ref()),
            fmt_spearman(r.pooled_spearman())
        );
    }
    Ok(())
}

pub fn plot(a: &PlotArgs) -> CmdResult {
    let text = std::fs::read_to_string(&a.predictions)
        .with_context(|| format!("cannot read {}", a.predictions.display()))?;
    let fingerprint = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# "))
        .unwrap_or_default()
        .to_string();
    let name = fingerprint
        .split_whitespace()
        .find_map(|t| t.strip_prefix("preset="))
        .unwrap_or("predictions")
        .to_string();

    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = rdr.headers().context("predictions header")?.clone();
    if headers.iter().collect::<Vec<_>>() != ["fold", "sample_id", "target_raw", "prediction_raw"] {
        return Err(Failure::Runtime(anyhow::anyhow!(
            "{} is not a cv_predictions.csv file",
            a.predictions.display()
        )));
    }
    let mut rows: Vec<(String, f64, f64)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("predictions row {}", i + 1))?;
        let num = |j: usize| -> anyhow::Result<f64> {
            rec[j]
                .parse()
                .with_context(|| format!("predictions row {}: bad number {:?}", i + 1, &rec[j]))
        };
        rows.push((rec[1].to_string(), num(2)?, num(3)?));
    }
    if rows.is_empty() {
        return Err(Failure::Runtime(anyhow::anyhow!("no predictions to plot")));
    }
    let (t, p): (Vec<f64>, Vec<f64>) = rows.iter().map(|r| (r.1, r.2)).unzip();
    let pooled = spearman(&t, &p).ok();
    let points: Vec<(&str, f64, f64)> = rows.iter().map(|r| (r.0.as_str(), r.1, r.2)).collect();

    let stem = a.out.clone().unwrap_or_else(|| {
        a.predictions
            .parent()
            .unwrap_or(Path::new("."))
            .join("scatter")
    });
    if let Some(d) = stem.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(d)?;
    }
    let mut csv = format!("# {fingerprint}\ntarget_raw,prediction_raw\n");
    for (_, t, p) in &rows {
        let _ = writeln!(csv, "{t},{p}");
    }
    let svg_path = stem.with_extension("svg");
    std::fs::write(stem.with_extension("csv"), csv)?;
    std::fs::write(&svg_path, scatter_svg_points(&name, pooled, &points))?;
    println!("wrote {}", svg_path.display());
    println!("spearman {name} {}", fmt_spearman(pooled));
    Ok(())
}

pub fn validate(a: &ValidateArgs) -> CmdResult {
    if a.files.is_empty() && a.manifest.is_none() {
        return Err(usage("give keypoint files and/or --manifest"));
    }
    let mut problems = 0usize;
    let mut checked = 0usize;
    let mut report = |label: &str, outcome: rehab_core::Result<Sample>| {
        checked += 1;
        match outcome {
            Ok(_) => println!("ok {label}"),
            Err(Error::Invariant { violations, .. }) => {
                for v in violations {
                    println!("violation {label}: {v}");
                    problems += 1;
                }
            }
            Err(e) => {
                println!("violation {label}: {e}");
                problems += 1;
            }
        }
    };
    for f in &a.files {
        report(&f.display().to_string(), load_keypoints(f));
    }
    if let Some(path) = &a.manifest {
        let manifest = Manifest::load(path)?;
        for e in &manifest.entries {
            report(&e.sample_id, manifest.load_sample(e));
        }
    }
    println!("checked {checked} files, {problems} violations");
    if problems > 0 {
        return Err(Failure::Runtime(anyhow::anyhow!("{problems} violations")));
    }
    Ok(())
}

pub fn marker_pose(a: &MarkerPoseArgs) -> CmdResult {
    if !(a.fps.is_finite() && a.fps > 0.0) {
        return Err(usage(format!("--fps must be positive, got {}", a.fps)));
    }
    let frames = read_frame_dir(&a.frames)?;
    let sequence = MarkerDetectBackend.extract(&frames, a.fps)?;
    let sample_id = a
        .out
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("pose")
        .to_string();
    let sample = Sample {
        sample_id,
        subject_id: a.subject.clone(),
        exercise: exercise(a.exercise),
        sequence,
        score: None,
        provenance: Provenance::Original,
    };
    save_keypoints(&sample, &a.out)?;
    Ok(())
}

use std::collections::HashSet;

use rayon::prelude::*;

use super::folds::FoldPlan;
use super::spearman::spearman;
use crate::augment::{augment_sample, AugmentationPreset, ImagePipeline, Space};
use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureSequence, FeatureSpec};
use crate::sample::{Sample, MAX_SCORE};
use crate::seed::derive_seed;
use crate::seqnet::{fit_model, LstmConfig, TrainConfig};

/// Everything a cross-validation run needs besides the augmentation preset.
#[derive(Clone, Copy)]
pub struct CvSetup<'a> {
    /// Original, labelled samples of one exercise.
    pub originals: &'a [Sample],
    pub space: Space,
    pub pipeline: Option<ImagePipeline<'a>>,
    pub feature_spec: &'a FeatureSpec,
    pub model: LstmConfig,
    pub train: TrainConfig,
    pub plan: &'a FoldPlan,
    /// Worker threads for feature extraction, augmentation and folds.
    pub jobs: usize,
}

impl CvSetup<'_> {
    /// Model seed of one fold; shared by every preset.
    pub fn fold_seed(&self, fold: usize) -> u64 {
        derive_seed(self.train.seed, fold as u64)
    }

    pub fn fingerprint(&self, preset: Option<&AugmentationPreset>) -> String {
        let m = &self.model;
        let t = &self.train;
        let ops = preset
            .map(|p| {
                p.ops()
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join("+")
            })
            .unwrap_or_default();
        format!(
            "preset={} ops={} space={} exercise={} features={} \
             model=lstm(in={},hidden={},layers={},dropout={}) \
             train=(epochs={},batch={},lr={},seed={}) folds=(k={},{},seed={})",
            preset_name(preset),
            if ops.is_empty() { "-" } else { &ops },
            match self.space {
                Space::Image => "image",
                Space::Joints => "joints",
            },
            self.feature_spec.exercise(),
            self.feature_spec.feature_names().join("+"),
            m.input_dim,
            m.hidden_dim,
            m.num_layers,
            m.dropout_p,
            t.epochs,
            t.batch_size,
            t.learning_rate,
            t.seed,
            self.plan.k(),
            self.plan.strategy(),
            self.plan.seed(),
        )
    }
}

/// Indices into the originals that one fold trains on and holds out.
/// Augmented variants enter training only through their parent's index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

pub fn fold_split(plan: &FoldPlan, originals: &[Sample], fold: usize) -> FoldSplit {
    let (validation, train) =
        (0..originals.len()).partition(|&i| plan.fold_of(&originals[i].sample_id) == Some(fold));
    FoldSplit { train, validation }
}

pub fn preset_name(preset: Option<&AugmentationPreset>) -> &str {
    preset.map_or("none", |p| p.name())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub sample_ids: Vec<String>,
    pub targets: Vec<f64>,
    pub predictions: Vec<f64>,
    /// `None` when undefined (e.g. constant predictions).
    pub spearman: Option<f64>,
    pub loss_history: Vec<f64>,
}

/// Validated outcome of one cross-validation run.
#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    preset: String,
    fingerprint: String,
    folds: Vec<FoldResult>,
    pooled_spearman: Option<f64>,
    mean_fold_spearman: Option<f64>,
}

impl CvReport {
    /// Assembles a report, enforcing that validation sets contain only
    /// original samples and partition them exactly.
    pub fn new(
        preset: impl Into<String>,
        fingerprint: impl Into<String>,
        folds: Vec<FoldResult>,
        originals: &[Sample],
    ) -> Result<Self> {
        let original_ids: HashSet<&str> = originals
            .iter()
            .filter(|s| s.provenance.is_original())
            .map(|s| s.sample_id.as_str())
            .collect();
        let mut seen: HashSet<&str> = HashSet::new();
        for f in &folds {
            if f.sample_ids.len() != f.targets.len() || f.sample_ids.len() != f.predictions.len() {
                return Err(Error::InvalidArgument(format!(
                    "fold {}: ragged results",
                    f.fold
                )));
            }
            for id in &f.sample_ids {
                if !original_ids.contains(id.as_str()) {
                    return Err(Error::Leakage(format!(
                        "fold {}: validation sample {id:?} is not an original sample",
                        f.fold
                    )));
                }
                if !seen.insert(id) {
                    return Err(Error::Leakage(format!(
                        "sample {id:?} is validated in more than one fold"
                    )));
                }
            }
        }
        if let Some(missing) = original_ids.iter().find(|id| !seen.contains(*id)) {
            return Err(Error::Leakage(format!(
                "original {missing:?} is never validated"
            )));
        }
        let (targets, predictions): (Vec<f64>, Vec<f64>) = folds
            .iter()
            .flat_map(|f| f.targets.iter().copied().zip(f.predictions.iter().copied()))
            .unzip();
        let pooled_spearman = spearman(&targets, &predictions).ok();
        let per_fold: Vec<f64> = folds.iter().filter_map(|f| f.spearman).collect();
        let mean_fold_spearman = (per_fold.len() == folds.len() && !folds.is_empty())
            .then(|| per_fold.iter().sum::<f64>() / per_fold.len() as f64);
        Ok(Self {
            preset: preset.into(),
            fingerprint: fingerprint.into(),
            folds,
            pooled_spearman,
            mean_fold_spearman,
        })
    }

    pub fn preset(&self) -> &str {
        &self.preset
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn folds(&self) -> &[FoldResult] {
        &self.folds
    }

    /// Spearman over all folds' predictions concatenated.
    pub fn pooled_spearman(&self) -> Option<f64> {
        self.pooled_spearman
    }

    /// Mean of the per-fold values; `None` if any fold is undefined.
    pub fn mean_fold_spearman(&self) -> Option<f64> {
        self.mean_fold_spearman
    }

    pub fn len(&self) -> usize {
        self.folds.iter().map(|f| f.sample_ids.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(fold, sample_id, target_raw, prediction_raw)` in fold order.
    pub fn rows(&self) -> impl Iterator<Item = (usize, &str, f64, f64)> {
        self.folds.iter().flat_map(|f| {
            f.sample_ids
                .iter()
                .zip(f.targets.iter().zip(&f.predictions))
                .map(move |(id, (&t, &p))| (f.fold, id.as_str(), t, p))
        })
    }
}

fn check_setup(setup: &CvSetup) -> Result<()> {
    if setup.model.input_dim != setup.feature_spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: setup.feature_spec.dim(),
            actual: setup.model.input_dim,
        });
    }
    if setup.plan.assignments().len() != setup.originals.len() {
        return Err(Error::InvalidArgument(format!(
            "fold plan covers {} samples, {} given",
            setup.plan.assignments().len(),
            setup.originals.len()
        )));
    }
    for s in setup.originals {
        if !s.provenance.is_original() {
            return Err(Error::Leakage(format!(
                "{} is augmented; cross-validation takes original samples only",
                s.sample_id
            )));
        }
        if s.score.is_none() {
            return Err(Error::InvalidArgument(format!(
                "{} has no label",
                s.sample_id
            )));
        }
        if !setup.plan.contains(&s.sample_id) {
            return Err(Error::InvalidArgument(format!(
                "{} is not in the fold plan",
                s.sample_id
            )));
        }
    }
    Ok(())
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

/// Runs k-fold cross-validation.
///
/// For each fold a fresh model is trained on the originals of the other
/// folds plus, when a preset is given, their augmented variants. Only the
/// held-out originals are predicted. Fold `f` trains with seed
/// [`CvSetup::fold_seed`]`(f)` whatever the preset.
pub fn run_cv(setup: &CvSetup, preset: Option<&AugmentationPreset>) -> Result<CvReport> {
    check_setup(setup)?;
    let pool = thread_pool(setup.jobs)?;
    pool.install(|| run_cv_inner(setup, preset))
}

fn run_cv_inner(setup: &CvSetup, preset: Option<&AugmentationPreset>) -> Result<CvReport> {
    let spec = setup.feature_spec;
    let originals = setup.originals;
    let features: Vec<FeatureSequence> = originals
        .par_iter()
        .map(|s| extract_features(s, spec))
        .collect::<Result<_>>()?;
    // variants of every original; each is used only in folds where its
    // parent trains
    let variants: Vec<Vec<FeatureSequence>> = match preset {
        None => vec![Vec::new(); originals.len()],
        Some(p) => originals
            .par_iter()
            .map(|s| {
                augment_sample(s, p, setup.space, setup.pipeline)?
                    .iter()
                    .map(|v| extract_features(v, spec))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?,
    };
    let target = |s: &Sample| s.score.map_or(0.0, |q| q.normalized());

    let folds: Vec<FoldResult> = (0..setup.plan.k())
        .into_par_iter()
        .map(|fold| {
            let split = fold_split(setup.plan, originals, fold);
            let mut items: Vec<(&[Vec<f64>], f64)> = Vec::new();
            for &i in &split.train {
                items.push((&features[i].vectors, target(&originals[i])));
                for v in &variants[i] {
                    items.push((&v.vectors, target(&originals[i])));
                }
            }
            let train = TrainConfig {
                seed: setup.fold_seed(fold),
                ..setup.train
            };
            let (model, loss_history) =
                fit_model(&items, setup.model, &train).map_err(|e| e.in_fold(fold))?;
            let mut result = FoldResult {
                fold,
                sample_ids: Vec::new(),
                targets: Vec::new(),
                predictions: Vec::new(),
                spearman: None,
                loss_history,
            };
            for &i in &split.validation {
                let s = &originals[i];
                let pred = model
                    .predict(&features[i].vectors)
                    .map_err(|e| e.in_fold(fold))?;
                result.sample_ids.push(s.sample_id.clone());
                result.targets.push(target(s) * MAX_SCORE);
                result.predictions.push(pred.raw());
            }
            result.spearman = spearman(&result.targets, &result.predictions).ok();
            Ok(result)
        })
        .collect::<Result<_>>()?;

    CvReport::new(
        preset_name(preset),
        setup.fingerprint(preset),
        folds,
        originals,
    )
}

/// Reports for several presets over the same folds and model seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Ablation {
    pub reports: Vec<CvReport>,
}

/// Runs [`run_cv`] once per preset (`None` = no augmentation) with the
/// setup's shared fold plan and seeds.
pub fn run_ablation(setup: &CvSetup, presets: &[Option<AugmentationPreset>]) -> Result<Ablation> {
    let reports = presets
        .iter()
        .map(|p| run_cv(setup, p.as_ref()))
        .collect::<Result<_>>()?;
    Ok(Ablation { reports })
}

/// `+85.4%` style relative change; `NA` when undefined.
pub fn percent_change(from: Option<f64>, to: Option<f64>) -> String {
    match (from, to) {
        (Some(a), Some(b)) if a != 0.0 => format!("{:+.1}%", (b - a) / a.abs() * 100.0),
        _ => "NA".into(),
    }
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |v| v.to_string())
}

impl Ablation {
    /// `preset,pooled_spearman,mean_fold_spearman,change_vs_<first>` rows.
    pub fn comparison_csv(&self) -> String {
        let base = self.reports.first();
        let mut out = format!(
            "preset,pooled_spearman,mean_fold_spearman,change_vs_{}\n",
            base.map_or("none", |r| r.preset())
        );
        for r in &self.reports {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.preset(),
                fmt_opt(r.pooled_spearman()),
                fmt_opt(r.mean_fold_spearman()),
                percent_change(base.and_then(|b| b.pooled_spearman()), r.pooled_spearman())
            ));
        }
        out
    }
}

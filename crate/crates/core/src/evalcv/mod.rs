//! Spearman rank correlation, k-fold cross-validation with training-only
//! augmentation, preset ablations and report files.

mod cv;
mod folds;
mod report;
mod spearman;

pub use cv::{
    fold_split, percent_change, preset_name, run_ablation, run_cv, Ablation, CvReport, CvSetup,
    FoldResult, FoldSplit,
};
pub use folds::{make_folds, FoldPlan, FoldStrategy};
pub use report::{
    emit_scatter, predictions_csv, scatter_svg, scatter_svg_points, summary_csv,
    write_ablation_outputs, write_cv_outputs,
};
pub use spearman::{average_ranks, pearson, spearman};

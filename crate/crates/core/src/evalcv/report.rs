use std::fmt::Write as _;
use std::path::Path;

use super::cv::{fmt_opt, Ablation, CvReport};
use crate::error::{Error, Result};
use crate::sample::MAX_SCORE;

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `fold,sample_id,target_raw,prediction_raw`, preceded by a `#`
/// fingerprint line.
pub fn predictions_csv(report: &CvReport) -> String {
    let mut out = format!(
        "# {}\nfold,sample_id,target_raw,prediction_raw\n",
        report.fingerprint()
    );
    for (fold, id, t, p) in report.rows() {
        let _ = writeln!(out, "{fold},{},{t},{p}", csv_field(id));
    }
    out
}

/// Rows of `preset,fold,spearman` plus `pooled` and `mean` rows, without
/// header.
fn summary_rows(report: &CvReport, out: &mut String) {
    let name = csv_field(report.preset());
    for f in report.folds() {
        let _ = writeln!(out, "{name},{},{}", f.fold, fmt_opt(f.spearman));
    }
    let _ = writeln!(out, "{name},pooled,{}", fmt_opt(report.pooled_spearman()));
    let _ = writeln!(out, "{name},mean,{}", fmt_opt(report.mean_fold_spearman()));
}

pub fn summary_csv(report: &CvReport) -> String {
    let mut out = format!("# {}\npreset,fold,spearman\n", report.fingerprint());
    summary_rows(report, &mut out);
    out
}

/// Writes the predictions and target pairs as `<stem>.csv` and a
/// standalone scatter plot with identity line as `<stem>.svg`.
pub fn emit_scatter(report: &CvReport, stem: &Path) -> Result<()> {
    if report.is_empty() {
        return Err(Error::InvalidArgument(
            "empty report has nothing to plot".into(),
        ));
    }
    let mut csv = format!("# {}\ntarget_raw,prediction_raw\n", report.fingerprint());
    for (_, _, t, p) in report.rows() {
        let _ = writeln!(csv, "{t},{p}");
    }
    write(&stem.with_extension("csv"), &csv)?;
    write(&stem.with_extension("svg"), &scatter_svg(report))
}

const PLOT: f64 = 340.0;
const LEFT: f64 = 60.0;
const TOP: f64 = 40.0;

fn sx(v: f64) -> f64 {
    LEFT + v.clamp(0.0, MAX_SCORE) / MAX_SCORE * PLOT
}

fn sy(v: f64) -> f64 {
    TOP + PLOT - v.clamp(0.0, MAX_SCORE) / MAX_SCORE * PLOT
}

pub fn scatter_svg(report: &CvReport) -> String {
    let points: Vec<(&str, f64, f64)> = report.rows().map(|(_, id, t, p)| (id, t, p)).collect();
    scatter_svg_points(report.preset(), report.pooled_spearman(), &points)
}

/// Scatter of `(label, target, prediction)` points on the 0..50 score
/// square.
pub fn scatter_svg_points(name: &str, pooled: Option<f64>, points: &[(&str, f64, f64)]) -> String {
    let mut s = String::new();
    let size = LEFT + PLOT + 30.0;
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{h}" viewBox="0 0 {size} {h}" font-family="sans-serif" font-size="12">"#,
        h = TOP + PLOT + 50.0
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let title = format!(
        "{}: pooled Spearman {}",
        name,
        pooled.map_or("NA".into(), |r| format!("{r:.3}"))
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + PLOT / 2.0,
        xml_escape(&title)
    );
    for tick in (0..=50).step_by(10) {
        let v = tick as f64;
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{b}" stroke="#e0e0e0"/><line x1="{LEFT}" y1="{y:.2}" x2="{r}" y2="{y:.2}" stroke="#e0e0e0"/>"##,
            x = sx(v),
            y = sy(v),
            b = TOP + PLOT,
            r = LEFT + PLOT
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{ty}" text-anchor="middle">{tick}</text><text x="{lx}" y="{y:.2}" text-anchor="end" dominant-baseline="middle">{tick}</text>"#,
            x = sx(v),
            ty = TOP + PLOT + 18.0,
            lx = LEFT - 8.0,
            y = sy(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{PLOT}" height="{PLOT}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888888" stroke-dasharray="5,4"/>"##,
        sx(0.0),
        sy(0.0),
        sx(MAX_SCORE),
        sy(MAX_SCORE)
    );
    for &(id, t, p) in points {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="#1f77b4" fill-opacity="0.7"><title>{}</title></circle>"##,
            sx(t),
            sy(p),
            xml_escape(id)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">ground truth</text>"#,
        LEFT + PLOT / 2.0,
        TOP + PLOT + 40.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{y}" text-anchor="middle" transform="rotate(-90 18 {y})">prediction</text>"#,
        y = TOP + PLOT / 2.0
    );
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Writes `cv_predictions.csv`, `cv_summary.csv`, `scatter.{csv,svg}` and
/// `loss_fold<k>.csv` (`epoch,mean_mae`) into `dir`.
pub fn write_cv_outputs(report: &CvReport, dir: &Path) -> Result<()> {
    write(&dir.join("cv_predictions.csv"), &predictions_csv(report))?;
    write(&dir.join("cv_summary.csv"), &summary_csv(report))?;
    emit_scatter(report, &dir.join("scatter"))?;
    for f in report.folds() {
        let mut text = String::from("epoch,mean_mae\n");
        for (i, l) in f.loss_history.iter().enumerate() {
            let _ = writeln!(text, "{},{l}", i + 1);
        }
        write(&dir.join(format!("loss_fold{}.csv", f.fold)), &text)?;
    }
    Ok(())
}

/// One subdirectory per preset, plus a combined `cv_summary.csv` and the
/// `ablation.csv` comparison table.
pub fn write_ablation_outputs(ablation: &Ablation, dir: &Path) -> Result<()> {
    let mut summary = String::new();
    for r in &ablation.reports {
        let _ = writeln!(summary, "# {}", r.fingerprint());
    }
    summary.push_str("preset,fold,spearman\n");
    for r in &ablation.reports {
        write_cv_outputs(r, &dir.join(r.preset()))?;
        summary_rows(r, &mut summary);
    }
    write(&dir.join("cv_summary.csv"), &summary)?;
    write(&dir.join("ablation.csv"), &ablation.comparison_csv())
}

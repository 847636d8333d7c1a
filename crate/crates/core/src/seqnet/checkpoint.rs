//! Text checkpoint:
//!
//! ```text
//! rehab-ckpt/1
//! input_dim 6
//! hidden_dim 16
//! num_layers 4
//! dropout_p 0.17
//! scaler_mean <input_dim values>
//! scaler_std <input_dim values>
//! params <count>
//! <one value per line, flat layout order>
//! ```
//!
//! Values use the shortest decimal form that parses back to the same
//! `f64`, so save/load is exact.

use std::path::Path;

use super::lstm::{forward, Mode};
use super::train::Scaler;
use super::{LstmConfig, LstmParams};
use crate::error::{Error, Result};
use crate::sample::QualityScore;

pub const CHECKPOINT_TAG: &str = "rehab-ckpt/1";

// generous bounds so a hostile header cannot request a huge allocation
const MAX_DIM: usize = 4096;
const MAX_LAYERS: usize = 64;

/// A trained network plus the feature scaling it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub scaler: Scaler,
    pub params: LstmParams,
}

impl Model {
    pub fn new(scaler: Scaler, params: LstmParams) -> Result<Self> {
        if scaler.dim() != params.config.input_dim {
            return Err(Error::DimensionMismatch {
                expected: params.config.input_dim,
                actual: scaler.dim(),
            });
        }
        Ok(Self { scaler, params })
    }

    pub fn config(&self) -> &LstmConfig {
        &self.params.config
    }

    /// Eval-mode output on raw features, normalized scale, unclamped.
    pub fn predict_raw(&self, features: &[Vec<f64>]) -> Result<f64> {
        forward(&self.params, &self.scaler.transform(features), Mode::Eval)
    }

    pub fn predict(&self, features: &[Vec<f64>]) -> Result<QualityScore> {
        super::predict(&self.params, &self.scaler.transform(features))
    }

    pub fn to_text(&self) -> String {
        let c = self.config();
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
        let mut out = format!(
            "{CHECKPOINT_TAG}\ninput_dim {}\nhidden_dim {}\nnum_layers {}\ndropout_p {}\n\
             scaler_mean {}\nscaler_std {}\nparams {}\n",
            c.input_dim,
            c.hidden_dim,
            c.num_layers,
            c.dropout_p,
            join(&self.scaler.mean),
            join(&self.scaler.std),
            self.params.len()
        );
        for v in &self.params.values {
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::Parse(format!("checkpoint truncated before {what}")))
        };
        if next("header")? != CHECKPOINT_TAG {
            return Err(Error::Schema(format!(
                "checkpoint must start with {CHECKPOINT_TAG}"
            )));
        }
        let mut field = |key: &str| -> Result<String> {
            let line = next(key)?;
            let rest = line
                .strip_prefix(key)
                .filter(|r| r.is_empty() || r.starts_with(' '))
                .ok_or_else(|| Error::Parse(format!("checkpoint: expected {key}, got {line:?}")))?;
            Ok(rest.trim().to_string())
        };
        let int = |s: String, key: &str, max: usize| -> Result<usize> {
            s.parse::<usize>()
                .ok()
                .filter(|&v| v <= max)
                .ok_or_else(|| Error::Parse(format!("checkpoint: bad {key} {s:?}")))
        };
        let input_dim = int(field("input_dim")?, "input_dim", MAX_DIM)?;
        let hidden_dim = int(field("hidden_dim")?, "hidden_dim", MAX_DIM)?;
        let num_layers = int(field("num_layers")?, "num_layers", MAX_LAYERS)?;
        let dropout_p = parse_f64(&field("dropout_p")?)?;
        let config = LstmConfig {
            input_dim,
            hidden_dim,
            num_layers,
            dropout_p,
        };
        config.validate()?;
        let floats =
            |s: String| -> Result<Vec<f64>> { s.split_whitespace().map(parse_f64).collect() };
        let mean = floats(field("scaler_mean")?)?;
        let std = floats(field("scaler_std")?)?;
        if mean.len() != input_dim || std.len() != input_dim {
            return Err(Error::Schema(
                "checkpoint: scaler width differs from input_dim".into(),
            ));
        }
        if std.iter().any(|&s| s <= 0.0) {
            return Err(Error::Schema(
                "checkpoint: scaler std must be positive".into(),
            ));
        }
        let count = int(field("params")?, "params", usize::MAX)?;
        if count != config.param_count() {
            return Err(Error::Schema(format!(
                "checkpoint: {count} params, config needs {}",
                config.param_count()
            )));
        }
        let values = lines
            .by_ref()
            .take(count)
            .map(|l| parse_f64(l.trim()))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != count {
            return Err(Error::Parse("checkpoint truncated in params".into()));
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(Error::Parse("checkpoint: trailing data".into()));
        }
        Model::new(Scaler { mean, std }, LstmParams { config, values })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse(format!("checkpoint: bad number {s:?}")))
}

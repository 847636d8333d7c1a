//! Many-to-one stacked LSTM regressor trained with MAE loss and Adam.
//!
//! Parameters live in one flat `f64` vector. For each layer `l`, in order:
//! input weights `W_l` (`4H x in_l`, row-major), recurrent weights `U_l`
//! (`4H x H`), bias `b_l` (`4H`); gate rows are ordered input, forget,
//! cell, output. The head follows: `w_out` (`H`) then `b_out`.

mod adam;
mod checkpoint;
mod lstm;
mod train;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{Model, CHECKPOINT_TAG};
pub use lstm::{backward, forward, DropoutMasks, Mode};
pub use train::{
    fit_model, predict, predict_raw, train, write_loss_history, Scaler, TrainConfig, TrainOutcome,
};

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LstmConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    /// Drop probability between stacked layers (not after the last).
    pub dropout_p: f64,
}

impl LstmConfig {
    /// Four layers of 16 units with dropout 0.17.
    pub fn paper(input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim: 16,
            num_layers: 4,
            dropout_p: 0.17,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.num_layers == 0 {
            return Err(Error::InvalidArgument(format!(
                "LSTM dims must be positive: {self:?}"
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::InvalidArgument(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout_p
            )));
        }
        Ok(())
    }

    pub fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_dim
        } else {
            self.hidden_dim
        }
    }

    fn layer_len(&self, layer: usize) -> usize {
        let g = 4 * self.hidden_dim;
        g * self.layer_input(layer) + g * self.hidden_dim + g
    }

    pub(crate) fn span(&self, layer: usize) -> LayerSpan {
        let start: usize = (0..layer).map(|l| self.layer_len(l)).sum();
        let g = 4 * self.hidden_dim;
        let input = self.layer_input(layer);
        LayerSpan {
            w: start,
            u: start + g * input,
            b: start + g * input + g * self.hidden_dim,
            input,
        }
    }

    pub(crate) fn head_offset(&self) -> usize {
        (0..self.num_layers).map(|l| self.layer_len(l)).sum()
    }

    pub fn param_count(&self) -> usize {
        self.head_offset() + self.hidden_dim + 1
    }
}

/// Offsets of one layer's tensors in the flat parameter vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LayerSpan {
    pub w: usize,
    pub u: usize,
    pub b: usize,
    pub input: usize,
}

/// Weights of an LSTM, or gradients with the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub config: LstmConfig,
    pub values: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(config: LstmConfig) -> Self {
        Self {
            config,
            values: vec![0.0; config.param_count()],
        }
    }

    /// Xavier-uniform weights (bound `sqrt(6 / (fan_in + fan_out))`), zero
    /// biases except the forget gate at 1.
    pub fn init<R: Rng>(config: LstmConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut p = Self::zeros(config);
        let h = config.hidden_dim;
        let g = 4 * h;
        let mut fill = |values: &mut [f64], fan_in: usize, fan_out: usize| {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in values {
                *v = rng.random_range(-bound..=bound);
            }
        };
        for l in 0..config.num_layers {
            let s = config.span(l);
            fill(&mut p.values[s.w..s.u], s.input, g);
            fill(&mut p.values[s.u..s.b], h, g);
            p.values[s.b + h..s.b + 2 * h].fill(1.0);
        }
        let head = config.head_offset();
        fill(&mut p.values[head..head + h], h, 1);
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn head_bias(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Human-readable name of a flat index, e.g. `layer1.U[3,7]`.
    pub fn describe(&self, index: usize) -> String {
        let c = &self.config;
        let head = c.head_offset();
        if index >= head {
            return if index == head + c.hidden_dim {
                "head.b".into()
            } else {
                format!("head.w[{}]", index - head)
            };
        }
        let layer = (0..c.num_layers)
            .rfind(|&l| c.span(l).w <= index)
            .unwrap_or(0);
        let s = c.span(layer);
        if index >= s.b {
            format!("layer{layer}.b[{}]", index - s.b)
        } else if index >= s.u {
            let k = index - s.u;
            format!("layer{layer}.U[{},{}]", k / c.hidden_dim, k % c.hidden_dim)
        } else {
            let k = index - s.w;
            format!("layer{layer}.W[{},{}]", k / s.input, k % s.input)
        }
    }
}

use rand::Rng;

use super::{LstmConfig, LstmParams};
use crate::error::{Error, Result};

/// Inverted-dropout masks for the outputs of every layer but the last, one
/// independent draw per timestep. Entries are `0` or `1 / (1 - p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    hidden: usize,
    len: usize,
    // masks[l] is T x H for the output of layer l
    masks: Vec<Vec<f64>>,
}

impl DropoutMasks {
    pub fn sample<R: Rng>(config: &LstmConfig, len: usize, rng: &mut R) -> Self {
        let keep = 1.0 - config.dropout_p;
        let h = config.hidden_dim;
        let masks = (0..config.num_layers.saturating_sub(1))
            .map(|_| {
                (0..len * h)
                    .map(|_| {
                        if config.dropout_p == 0.0 || rng.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            hidden: h,
            len,
            masks,
        }
    }

    /// Masks that keep everything (equivalent to eval mode).
    pub fn keep_all(config: &LstmConfig, len: usize) -> Self {
        Self {
            hidden: config.hidden_dim,
            len,
            masks: vec![vec![1.0; len * config.hidden_dim]; config.num_layers.saturating_sub(1)],
        }
    }

    /// Mask row applied to layer `layer`'s output at time `t`.
    pub fn row(&self, layer: usize, t: usize) -> &[f64] {
        &self.masks[layer][t * self.hidden..(t + 1) * self.hidden]
    }

    pub fn row_mut(&mut self, layer: usize, t: usize) -> &mut [f64] {
        &mut self.masks[layer][t * self.hidden..(t + 1) * self.hidden]
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Mode<'a> {
    Eval,
    Train(&'a DropoutMasks),
}

/// Activations of one layer over the whole sequence, kept for BPTT.
pub(crate) struct LayerCache {
    /// layer input at each step (T x in)
    pub xs: Vec<f64>,
    /// activated gates i, f, g, o (T x 4H)
    pub gates: Vec<f64>,
    pub cs: Vec<f64>,
    pub tanh_cs: Vec<f64>,
    pub hs: Vec<f64>,
}

pub(crate) struct Cache {
    pub layers: Vec<LayerCache>,
    pub output: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn check_input(config: &LstmConfig, seq: &[Vec<f64>], mode: Mode) -> Result<()> {
    if seq.is_empty() {
        return Err(Error::InvalidArgument("empty feature sequence".into()));
    }
    if let Some(v) = seq.iter().find(|v| v.len() != config.input_dim) {
        return Err(Error::DimensionMismatch {
            expected: config.input_dim,
            actual: v.len(),
        });
    }
    if let Mode::Train(m) = mode {
        if m.len < seq.len()
            || m.hidden != config.hidden_dim
            || m.masks.len() != config.num_layers.saturating_sub(1)
        {
            return Err(Error::InvalidArgument(
                "dropout masks do not fit the model".into(),
            ));
        }
    }
    Ok(())
}

pub(crate) fn forward_cached(params: &LstmParams, seq: &[Vec<f64>], mode: Mode) -> Result<Cache> {
    let c = &params.config;
    check_input(c, seq, mode)?;
    let p = &params.values;
    let h = c.hidden_dim;
    let g4 = 4 * h;
    let t_len = seq.len();

    let mut layers: Vec<LayerCache> = Vec::with_capacity(c.num_layers);
    let mut input: Vec<f64> = seq.iter().flatten().copied().collect();
    for l in 0..c.num_layers {
        let s = c.span(l);
        let w = &p[s.w..s.u];
        let u = &p[s.u..s.b];
        let b = &p[s.b..s.b + g4];
        let mut gates = vec![0.0; t_len * g4];
        let mut cs = vec![0.0; t_len * h];
        let mut tanh_cs = vec![0.0; t_len * h];
        let mut hs = vec![0.0; t_len * h];
        let mut z = vec![0.0; g4];
        for t in 0..t_len {
            let x = &input[t * s.input..(t + 1) * s.input];
            z.copy_from_slice(b);
            for (r, zr) in z.iter_mut().enumerate() {
                let wr = &w[r * s.input..(r + 1) * s.input];
                *zr += wr.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            }
            if t > 0 {
                let h_prev = &hs[(t - 1) * h..t * h];
                for (r, zr) in z.iter_mut().enumerate() {
                    let ur = &u[r * h..(r + 1) * h];
                    *zr += ur.iter().zip(h_prev).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            let gt = &mut gates[t * g4..(t + 1) * g4];
            for k in 0..h {
                gt[k] = sigmoid(z[k]);
                gt[h + k] = sigmoid(z[h + k]);
                gt[2 * h + k] = z[2 * h + k].tanh();
                gt[3 * h + k] = sigmoid(z[3 * h + k]);
            }
            for k in 0..h {
                let c_prev = if t > 0 { cs[(t - 1) * h + k] } else { 0.0 };
                let ct = gt[h + k] * c_prev + gt[k] * gt[2 * h + k];
                let tc = ct.tanh();
                cs[t * h + k] = ct;
                tanh_cs[t * h + k] = tc;
                hs[t * h + k] = gt[3 * h + k] * tc;
            }
        }
        let mut next = hs.clone();
        if let (Mode::Train(m), true) = (mode, l + 1 < c.num_layers) {
            for t in 0..t_len {
                for (v, k) in next[t * h..(t + 1) * h].iter_mut().zip(m.row(l, t)) {
                    *v *= k;
                }
            }
        }
        layers.push(LayerCache {
            xs: std::mem::replace(&mut input, next),
            gates,
            cs,
            tanh_cs,
            hs,
        });
    }
    let head = c.head_offset();
    let last = &input[(t_len - 1) * h..t_len * h];
    let output = p[head..head + h]
        .iter()
        .zip(last)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        + p[head + h];
    Ok(Cache { layers, output })
}

/// Runs the network over the whole sequence and applies the head to the
/// top layer's final hidden state. The result is on the normalized score
/// scale and is not clamped.
pub fn forward(params: &LstmParams, seq: &[Vec<f64>], mode: Mode) -> Result<f64> {
    Ok(forward_cached(params, seq, mode)?.output)
}

/// Loss `|y - target|` and its gradient by backpropagation through time.
/// Dropout masks in `mode` are replayed exactly. The subgradient at zero
/// error is zero.
pub fn backward(
    params: &LstmParams,
    seq: &[Vec<f64>],
    target: f64,
    mode: Mode,
) -> Result<(f64, LstmParams)> {
    let mut grads = LstmParams::zeros(params.config);
    let loss = backward_into(params, seq, target, mode, &mut grads.values)?;
    Ok((loss, grads))
}

/// As [`backward`], accumulating into `grads` instead of allocating.
pub(crate) fn backward_into(
    params: &LstmParams,
    seq: &[Vec<f64>],
    target: f64,
    mode: Mode,
    grads: &mut [f64],
) -> Result<f64> {
    let cache = forward_cached(params, seq, mode)?;
    let c = &params.config;
    let p = &params.values;
    let h = c.hidden_dim;
    let g4 = 4 * h;
    let t_len = seq.len();
    let err = cache.output - target;
    let loss = err.abs();
    let dy = if err > 0.0 {
        1.0
    } else if err < 0.0 {
        -1.0
    } else {
        0.0
    };
    if dy == 0.0 {
        return Ok(loss);
    }

    let head = c.head_offset();
    let top = &cache.layers[c.num_layers - 1];
    let h_last = &top.hs[(t_len - 1) * h..t_len * h];
    for k in 0..h {
        grads[head + k] += dy * h_last[k];
    }
    grads[head + h] += dy;

    // gradient w.r.t. each layer's output h (before dropout of the next layer)
    let mut dh_out = vec![0.0; t_len * h];
    for k in 0..h {
        dh_out[(t_len - 1) * h + k] = dy * p[head + k];
    }

    let mut dz = vec![0.0; g4];
    let mut dh_carry = vec![0.0; h];
    let mut dc_carry = vec![0.0; h];
    for l in (0..c.num_layers).rev() {
        let s = c.span(l);
        let lc = &cache.layers[l];
        let mut dx_all = vec![0.0; t_len * s.input];
        dh_carry.fill(0.0);
        dc_carry.fill(0.0);
        for t in (0..t_len).rev() {
            let gt = &lc.gates[t * g4..(t + 1) * g4];
            for k in 0..h {
                let dh = dh_out[t * h + k] + dh_carry[k];
                let (i, f, g, o) = (gt[k], gt[h + k], gt[2 * h + k], gt[3 * h + k]);
                let tc = lc.tanh_cs[t * h + k];
                let dc = dc_carry[k] + dh * o * (1.0 - tc * tc);
                let c_prev = if t > 0 { lc.cs[(t - 1) * h + k] } else { 0.0 };
                dz[k] = dc * g * i * (1.0 - i);
                dz[h + k] = dc * c_prev * f * (1.0 - f);
                dz[2 * h + k] = dc * i * (1.0 - g * g);
                dz[3 * h + k] = dh * tc * o * (1.0 - o);
                dc_carry[k] = dc * f;
            }
            let x = &lc.xs[t * s.input..(t + 1) * s.input];
            let dx = &mut dx_all[t * s.input..(t + 1) * s.input];
            dh_carry.fill(0.0);
            for (r, &d) in dz.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let gw = &mut grads[s.w + r * s.input..s.w + (r + 1) * s.input];
                let wr = &p[s.w + r * s.input..s.w + (r + 1) * s.input];
                for j in 0..s.input {
                    gw[j] += d * x[j];
                    dx[j] += d * wr[j];
                }
                grads[s.b + r] += d;
                if t > 0 {
                    let h_prev = &lc.hs[(t - 1) * h..t * h];
                    let gu = &mut grads[s.u + r * h..s.u + (r + 1) * h];
                    let ur = &p[s.u + r * h..s.u + (r + 1) * h];
                    for j in 0..h {
                        gu[j] += d * h_prev[j];
                        dh_carry[j] += d * ur[j];
                    }
                }
            }
        }
        if l > 0 {
            // the input of layer l is the (masked) output of layer l - 1
            if let Mode::Train(m) = mode {
                for t in 0..t_len {
                    for (v, k) in dx_all[t * h..(t + 1) * h].iter_mut().zip(m.row(l - 1, t)) {
                        *v *= k;
                    }
                }
            }
            dh_out = dx_all;
        }
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;
    use rand::Rng;

    fn random_params(config: LstmConfig, seed: u64) -> LstmParams {
        let mut rng = rng_for(seed, 1);
        let mut p = LstmParams::init(config, &mut rng).unwrap();
        for v in &mut p.values {
            *v += rng.random_range(-0.3..0.3);
        }
        p
    }

    fn random_seq(len: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rng_for(seed, 2);
        (0..len)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect()
    }

    #[test]
    fn zero_params_predict_zero() {
        let p = LstmParams::zeros(LstmConfig::paper(3));
        assert_eq!(forward(&p, &random_seq(9, 3, 0), Mode::Eval).unwrap(), 0.0);
    }

    #[test]
    fn single_cell_step_matches_hand_evaluation() {
        let c = LstmConfig {
            input_dim: 1,
            hidden_dim: 1,
            num_layers: 1,
            dropout_p: 0.0,
        };
        // W = [wi, wf, wg, wo], U unused at t = 0, b, head
        let (wi, wf, wg, wo) = (0.5, -0.3, 0.8, 0.2);
        let (bi, bf, bg, bo) = (0.1, 1.0, -0.2, 0.05);
        let (hw, hb) = (1.7, -0.4);
        let p = LstmParams {
            config: c,
            values: vec![wi, wf, wg, wo, 9.0, 9.0, 9.0, 9.0, bi, bf, bg, bo, hw, hb],
        };
        let x = 0.9;
        let s = |z: f64| 1.0 / (1.0 + (-z).exp());
        let i = s(wi * x + bi);
        let g = (wg * x + bg).tanh();
        let o = s(wo * x + bo);
        let expected = hw * o * (i * g).tanh() + hb;
        let y = forward(&p, &[vec![x]], Mode::Eval).unwrap();
        assert!((y - expected).abs() < 1e-15, "{y} vs {expected}");
    }

    #[test]
    fn eval_is_deterministic() {
        let p = random_params(LstmConfig::paper(4), 3);
        let x = random_seq(20, 4, 3);
        let a = forward(&p, &x, Mode::Eval).unwrap();
        assert_eq!(a.to_bits(), forward(&p, &x, Mode::Eval).unwrap().to_bits());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = LstmParams::zeros(LstmConfig::paper(4));
        assert!(matches!(
            forward(&p, &random_seq(5, 3, 0), Mode::Eval),
            Err(Error::DimensionMismatch {
                expected: 4,
                actual: 3
            })
        ));
        assert!(forward(&p, &[], Mode::Eval).is_err());
    }

    #[test]
    fn keep_all_masks_match_eval() {
        let c = LstmConfig::paper(3);
        let p = random_params(c, 5);
        let x = random_seq(12, 3, 5);
        let masks = DropoutMasks::keep_all(&c, x.len());
        assert_eq!(
            forward(&p, &x, Mode::Eval).unwrap(),
            forward(&p, &x, Mode::Train(&masks)).unwrap()
        );
    }

    #[test]
    fn exact_target_has_zero_gradient() {
        let c = LstmConfig::paper(3);
        let p = random_params(c, 6);
        let x = random_seq(8, 3, 6);
        let y = forward(&p, &x, Mode::Eval).unwrap();
        let (loss, g) = backward(&p, &x, y, Mode::Eval).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn head_bias_gradient_is_sign_of_error() {
        let c = LstmConfig::paper(3);
        let p = random_params(c, 7);
        let x = random_seq(8, 3, 7);
        let y = forward(&p, &x, Mode::Eval).unwrap();
        assert_eq!(
            backward(&p, &x, y - 0.3, Mode::Eval).unwrap().1.head_bias(),
            1.0
        );
        assert_eq!(
            backward(&p, &x, y + 0.3, Mode::Eval).unwrap().1.head_bias(),
            -1.0
        );
    }

    #[test]
    fn gradients_match_finite_differences() {
        let c = LstmConfig {
            input_dim: 5,
            hidden_dim: 4,
            num_layers: 2,
            dropout_p: 0.3,
        };
        for seed in 0..3 {
            let p = random_params(c, seed);
            let x = random_seq(7, 5, seed);
            let masks = DropoutMasks::sample(&c, 7, &mut rng_for(seed, 3));
            let mode = Mode::Train(&masks);
            let target = forward(&p, &x, mode).unwrap() + 0.7;
            let (_, g) = backward(&p, &x, target, mode).unwrap();
            let step = 1e-5;
            for k in 0..p.len() {
                let mut plus = p.clone();
                plus.values[k] += step;
                let mut minus = p.clone();
                minus.values[k] -= step;
                let lp = (forward(&plus, &x, mode).unwrap() - target).abs();
                let lm = (forward(&minus, &x, mode).unwrap() - target).abs();
                let numeric = (lp - lm) / (2.0 * step);
                let analytic = g.values[k];
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
                assert!(
                    rel <= 1e-4,
                    "seed {seed} {}: {analytic} vs {numeric}",
                    p.describe(k)
                );
            }
        }
    }

    #[test]
    fn dropout_is_unbiased_on_linear_probe() {
        // The first-step pre-activation of layer 1 is linear in the masked
        // output of layer 0; averaging it over every mask with its
        // probability must give the unmasked value.
        let c = LstmConfig {
            input_dim: 2,
            hidden_dim: 3,
            num_layers: 2,
            dropout_p: 0.17,
        };
        let p = random_params(c, 9);
        let x = random_seq(1, 2, 9);
        let eval = forward_cached(&p, &x, Mode::Eval).unwrap();
        let probe = |cache: &Cache| -> Vec<f64> {
            let s = c.span(1);
            let xs = &cache.layers[1].xs;
            (0..12)
                .map(|r| {
                    p.values[s.b + r]
                        + (0..3)
                            .map(|j| p.values[s.w + r * 3 + j] * xs[j])
                            .sum::<f64>()
                })
                .collect()
        };
        let expected = probe(&eval);
        let keep = 1.0 - c.dropout_p;
        let mut mean = [0.0; 12];
        for bits in 0..8u32 {
            let mut m = DropoutMasks::keep_all(&c, 1);
            let mut prob = 1.0;
            for j in 0..3 {
                let kept = bits >> j & 1 == 1;
                m.row_mut(0, 0)[j] = if kept { 1.0 / keep } else { 0.0 };
                prob *= if kept { keep } else { c.dropout_p };
            }
            let cache = forward_cached(&p, &x, Mode::Train(&m)).unwrap();
            for (acc, v) in mean.iter_mut().zip(probe(&cache)) {
                *acc += prob * v;
            }
        }
        for (a, b) in mean.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_masks_have_unit_mean() {
        let c = LstmConfig::paper(2);
        let m = DropoutMasks::sample(&c, 2000, &mut rng_for(4, 0));
        let all: Vec<f64> = (0..3).flat_map(|l| m.masks[l].clone()).collect();
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
        let dropped = all.iter().filter(|&&v| v == 0.0).count() as f64 / all.len() as f64;
        assert!((dropped - 0.17).abs() < 0.01);
    }

    #[test]
    fn sequences_are_end_anchored() {
        let c = LstmConfig::paper(3);
        let p = random_params(c, 8);
        let x = random_seq(10, 3, 8);
        let mut padded = vec![vec![0.0; 3]; 5];
        padded.extend(x.iter().cloned());
        let a = forward(&p, &x, Mode::Eval).unwrap();
        let b = forward(&p, &padded, Mode::Eval).unwrap();
        assert_ne!(a, b);
    }
}

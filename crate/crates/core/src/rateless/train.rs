//! Nested-mask training with Adam and a cosine-annealed step size.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{flatten, CodecConfig, RatelessCodec};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, RMatrix};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean weighted training loss per epoch, in normalized units.
    pub loss_history: Vec<f64>,
    pub steps: usize,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * grad[i];
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + ADAM_EPS);
        }
    }
}

fn cosine_lr(cfg: &CodecConfig, step: usize, total: usize) -> f64 {
    if total <= 1 {
        return cfg.lr_max;
    }
    let t = step as f64 / (total - 1) as f64;
    cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + (PI * t).cos())
}

/// Root mean square of the complex entries of every basis.
fn rms(data: &[CMatrix]) -> f64 {
    let (sum, count) = data.iter().fold((0.0, 0usize), |(s, n), c| {
        (s + c.norm_squared(), n + c.len())
    });
    if count == 0 || sum == 0.0 {
        1.0
    } else {
        (sum / count as f64).sqrt()
    }
}

impl RatelessCodec {
    /// Normalized `D x B` input block for `batch`.
    pub(crate) fn input_block(&self, batch: &[&CMatrix]) -> Result<RMatrix> {
        let d = self.input_dim();
        let mut x = RMatrix::zeros(d, batch.len());
        for (j, c) in batch.iter().enumerate() {
            if 2 * c.len() != d {
                return Err(Error::Dimension(format!(
                    "codec expects {d} real inputs, basis has {}",
                    2 * c.len()
                )));
            }
            x.column_mut(j).copy_from_slice(&flatten(c));
        }
        Ok(x / self.norm_scale)
    }

    /// Flat parameter vector (see [`set_parameters`](Self::set_parameters)).
    pub fn parameters(&self) -> Vec<f64> {
        self.params.to_flat()
    }

    pub fn set_parameters(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.params.len() {
            return Err(Error::Dimension(format!(
                "{} parameters supplied, codec has {}",
                flat.len(),
                self.params.len()
            )));
        }
        self.params.set_flat(flat);
        Ok(())
    }

    /// `sum_m w_m * mean_b ||x_b - decode(prefix_{l_m}(encode(x_b)))||^2`
    /// on normalized inputs, with its gradient in the order of
    /// [`parameters`](Self::parameters).
    pub fn loss_and_gradient(
        &self,
        batch: &[CMatrix],
        masks: &[(usize, f64)],
    ) -> Result<(f64, Vec<f64>)> {
        if let Some(&(l, _)) = masks.iter().find(|(l, _)| *l == 0 || *l > self.m()) {
            return Err(Error::config(format!(
                "mask length {l} outside [1, {}]",
                self.m()
            )));
        }
        let refs: Vec<&CMatrix> = batch.iter().collect();
        let x = self.input_block(&refs)?;
        let (loss, _, g) = self.params.loss_and_grad(&x, masks);
        Ok((loss, g.to_flat()))
    }
}

/// Train a codec on `data` (one `C5` basis per entry).
pub fn train(data: &[CMatrix], cfg: CodecConfig) -> Result<(RatelessCodec, TrainReport)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InsufficientData("training set is empty".into()));
    }
    let mut codec = RatelessCodec::new(cfg.clone())?;
    codec.norm_scale = rms(data);
    let refs: Vec<&CMatrix> = data.iter().collect();
    let x_all = codec.input_block(&refs)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let batches_per_epoch = data.len().div_ceil(cfg.batch_size);
    let total = cfg.epochs * batches_per_epoch;
    let mut adam = Adam::new(codec.params.len());
    let mut flat = codec.params.to_flat();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut step = 0;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let x = x_all.select_columns(chunk);
            let masks: Vec<(usize, f64)> = cfg
                .intervals
                .iter()
                .zip(&cfg.weights)
                .map(|(&(lo, hi), &w)| (rng.random_range(lo..=hi), w))
                .collect();
            let (loss, _, grad) = codec.params.loss_and_grad(&x, &masks);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            epoch_loss += loss * chunk.len() as f64;
            adam.step(&mut flat, &grad.to_flat(), cosine_lr(&cfg, step, total));
            codec.params.set_flat(&flat);
            step += 1;
        }
        history.push(epoch_loss / data.len() as f64);
    }
    codec.trained = true;
    Ok((
        codec,
        TrainReport {
            loss_history: history,
            steps: step,
        },
    ))
}

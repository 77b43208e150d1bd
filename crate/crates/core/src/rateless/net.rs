//! Parameter tensors of the codec and the batched forward/backward passes.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use super::CodecConfig;
use crate::linalg::RMatrix;

const LEAK: f64 = 0.1;
/// Standard deviation multiplier for the last layer of the nonlinear branch.
const OUTPUT_INIT_GAIN: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Params {
    /// `M x D`
    pub enc_w: RMatrix,
    pub enc_b: DVector<f64>,
    /// `D x M` affine part of the decoder.
    pub skip_w: RMatrix,
    pub out_b: DVector<f64>,
    /// Hidden layers of the nonlinear branch.
    pub hidden: Vec<(RMatrix, DVector<f64>)>,
    /// `D x h_last`; zero columns when there is no branch.
    pub out_w: RMatrix,
}

fn gaussian(rows: usize, cols: usize, std: f64, rng: &mut impl Rng) -> RMatrix {
    RMatrix::from_fn(rows, cols, |_, _| {
        std * rng.sample::<f64, _>(StandardNormal)
    })
}

fn leaky(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAK * x
    }
}

fn add_bias(m: &mut RMatrix, b: &DVector<f64>) {
    for mut col in m.column_iter_mut() {
        col += b;
    }
}

/// Zero every row at or beyond `l`.
pub(crate) fn mask_rows(m: &RMatrix, l: usize) -> RMatrix {
    let mut out = m.clone();
    let n = out.nrows();
    if l < n {
        out.rows_mut(l, n - l).fill(0.0);
    }
    out
}

impl Params {
    /// All-zero parameters with the shapes implied by `cfg`.
    pub fn zeros(cfg: &CodecConfig) -> Self {
        let (d, m) = (cfg.input_dim, cfg.m);
        let mut hidden = Vec::with_capacity(cfg.hidden_dims.len());
        let mut fan_in = m;
        for &h in &cfg.hidden_dims {
            hidden.push((RMatrix::zeros(h, fan_in), DVector::zeros(h)));
            fan_in = h;
        }
        let out_cols = if cfg.hidden_dims.is_empty() {
            0
        } else {
            fan_in
        };
        Self {
            enc_w: RMatrix::zeros(m, d),
            enc_b: DVector::zeros(m),
            skip_w: RMatrix::zeros(d, m),
            out_b: DVector::zeros(d),
            hidden,
            out_w: RMatrix::zeros(d, out_cols),
        }
    }

    pub fn init(cfg: &CodecConfig, rng: &mut impl Rng) -> Self {
        let (d, m) = (cfg.input_dim, cfg.m);
        let enc_w = gaussian(m, d, (1.0 / d as f64).sqrt(), rng);
        let skip_w = gaussian(d, m, (1.0 / m as f64).sqrt(), rng);
        let mut hidden = Vec::with_capacity(cfg.hidden_dims.len());
        let mut fan_in = m;
        for &h in &cfg.hidden_dims {
            hidden.push((
                gaussian(h, fan_in, (2.0 / fan_in as f64).sqrt(), rng),
                DVector::zeros(h),
            ));
            fan_in = h;
        }
        let out_w = if cfg.hidden_dims.is_empty() {
            RMatrix::zeros(d, 0)
        } else {
            gaussian(d, fan_in, OUTPUT_INIT_GAIN / (fan_in as f64).sqrt(), rng)
        };
        Self {
            enc_w,
            enc_b: DVector::zeros(m),
            skip_w,
            out_b: DVector::zeros(d),
            hidden,
            out_w,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            enc_w: RMatrix::identity(dim, dim),
            enc_b: DVector::zeros(dim),
            skip_w: RMatrix::identity(dim, dim),
            out_b: DVector::zeros(dim),
            hidden: Vec::new(),
            out_w: RMatrix::zeros(dim, 0),
        }
    }

    /// Same encoder and shapes, every decoder parameter zero.
    #[cfg(test)]
    pub fn zeroed_decoder(&self) -> Self {
        let mut p = self.clone();
        p.skip_w.fill(0.0);
        p.out_b.fill(0.0);
        p.out_w.fill(0.0);
        for (w, b) in &mut p.hidden {
            w.fill(0.0);
            b.fill(0.0);
        }
        p
    }

    pub fn hidden_dims(&self) -> Vec<usize> {
        self.hidden.iter().map(|(w, _)| w.nrows()).collect()
    }

    fn slices(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = vec![
            self.enc_w.as_slice(),
            self.enc_b.as_slice(),
            self.skip_w.as_slice(),
            self.out_b.as_slice(),
        ];
        for (w, b) in &self.hidden {
            v.push(w.as_slice());
            v.push(b.as_slice());
        }
        v.push(self.out_w.as_slice());
        v
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = vec![
            self.enc_w.as_mut_slice(),
            self.enc_b.as_mut_slice(),
            self.skip_w.as_mut_slice(),
            self.out_b.as_mut_slice(),
        ];
        for (w, b) in &mut self.hidden {
            v.push(w.as_mut_slice());
            v.push(b.as_mut_slice());
        }
        v.push(self.out_w.as_mut_slice());
        v
    }

    pub fn len(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    /// All parameters in a fixed order: encoder weight and bias, affine
    /// decoder weight and bias, hidden layers, branch output weight.
    /// Matrices are column-major.
    pub fn to_flat(&self) -> Vec<f64> {
        self.slices().concat()
    }

    /// Inverse of [`to_flat`](Self::to_flat); `flat` must have [`len`](Self::len) entries.
    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.len(), "parameter vector length");
        let mut off = 0;
        for s in self.slices_mut() {
            s.copy_from_slice(&flat[off..off + s.len()]);
            off += s.len();
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut p = self.clone();
        for s in p.slices_mut() {
            s.fill(0.0);
        }
        p
    }

    /// `D x B` normalized inputs to `M x B` codewords.
    pub fn encode(&self, x: &RMatrix) -> RMatrix {
        let mut z = &self.enc_w * x;
        add_bias(&mut z, &self.enc_b);
        z
    }

    /// Decoder output plus the branch pre-activations and activations
    /// (`acts[0]` is the input codeword).
    fn decode_traced(&self, z: &RMatrix) -> (RMatrix, Vec<RMatrix>, Vec<RMatrix>) {
        let mut y = &self.skip_w * z;
        add_bias(&mut y, &self.out_b);
        let mut pre = Vec::with_capacity(self.hidden.len());
        let mut acts = vec![z.clone()];
        for (w, b) in &self.hidden {
            let mut p = w * acts.last().unwrap();
            add_bias(&mut p, b);
            acts.push(p.map(leaky));
            pre.push(p);
        }
        if !self.hidden.is_empty() {
            y += &self.out_w * acts.last().unwrap();
        }
        (y, pre, acts)
    }

    pub fn decode(&self, z: &RMatrix) -> RMatrix {
        self.decode_traced(z).0
    }

    /// Weighted sum over `masks` of the batch-mean squared error of the
    /// masked reconstruction of `x`, and its gradient.
    pub fn loss_and_grad(&self, x: &RMatrix, masks: &[(usize, f64)]) -> (f64, Vec<f64>, Params) {
        let batch = x.ncols() as f64;
        let z = self.encode(x);
        let mut g = self.zeros_like();
        let mut dz_total = RMatrix::zeros(z.nrows(), z.ncols());
        let mut total = 0.0;
        let mut parts = Vec::with_capacity(masks.len());
        for &(l, weight) in masks {
            let zm = mask_rows(&z, l);
            let (y, pre, acts) = self.decode_traced(&zm);
            let r = y - x;
            let loss = r.norm_squared() / batch;
            parts.push(loss);
            total += weight * loss;

            let dy = r * (2.0 * weight / batch);
            g.skip_w += &dy * zm.transpose();
            g.out_b += dy.column_sum();
            let mut dzm = self.skip_w.transpose() * &dy;
            if !self.hidden.is_empty() {
                g.out_w += &dy * acts.last().unwrap().transpose();
                let mut da = self.out_w.transpose() * &dy;
                for i in (0..self.hidden.len()).rev() {
                    let dp = da.zip_map(&pre[i], |d, p| if p > 0.0 { d } else { LEAK * d });
                    g.hidden[i].0 += &dp * acts[i].transpose();
                    g.hidden[i].1 += dp.column_sum();
                    da = self.hidden[i].0.transpose() * dp;
                }
                dzm += da;
            }
            dz_total += mask_rows(&dzm, l);
        }
        g.enc_w += &dz_total * x.transpose();
        g.enc_b += dz_total.column_sum();
        (total, parts, g)
    }
}

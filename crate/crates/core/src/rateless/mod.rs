//! Rateless spatial codec.
//!
//! The encoder maps the flattened basis to an `M`-entry real codeword whose
//! entries are ordered by importance, so any prefix can be decoded after
//! zero padding. Training draws one prefix length per interval per batch and
//! minimizes the weighted sum of the masked reconstruction errors.
//!
//! The encoder is affine. The decoder is an affine map plus an optional
//! leaky-ReLU branch whose widths are given by `hidden_dims`.

mod io;
mod net;
mod train;

pub use io::{load_codec, read_codec, save_codec, write_codec, CODEC_MAGIC};
pub use train::{train, TrainReport};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, RMatrix, C64};
use net::Params;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Paper loss weights, truncated to the number of intervals.
pub const DEFAULT_WEIGHTS: [f64; 7] = [25.0, 20.0, 10.0, 5.0, 1.0, 1.0, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct CodecConfig {
    pub input_dim: usize,
    pub m: usize,
    /// Inclusive `(L_min, L_max)` prefix-length intervals.
    pub intervals: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
    pub hidden_dims: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    pub seed: u64,
}

/// `n` back-to-back intervals of `delta_l + 1` lengths starting at `l1_min`.
pub fn contiguous_intervals(l1_min: usize, delta_l: usize, n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .map(|i| {
            let lo = l1_min + i * (delta_l + 1);
            (lo, lo + delta_l)
        })
        .collect()
}

/// First `n` default weights, repeating the last one past seven intervals.
pub fn default_weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| DEFAULT_WEIGHTS[i.min(DEFAULT_WEIGHTS.len() - 1)])
        .collect()
}

impl CodecConfig {
    /// Placeholder shapes with the default optimizer settings; callers fill
    /// in dimensions and intervals.
    pub fn training_defaults() -> Self {
        Self {
            input_dim: 0,
            m: 0,
            intervals: Vec::new(),
            weights: Vec::new(),
            hidden_dims: Vec::new(),
            epochs: 60,
            batch_size: 64,
            lr_max: 2e-3,
            lr_min: 1e-5,
            seed: 0,
        }
    }

    /// Four equal intervals of `m / 4 - 4` lengths ending at `m`, and one
    /// 128-wide hidden layer.
    pub fn desk(input_dim: usize, m: usize) -> Self {
        let n = 4;
        let width = m / n - 4;
        let first = m + 1 - n * width;
        Self {
            input_dim,
            m,
            intervals: contiguous_intervals(first, width - 1, n),
            weights: default_weights(n),
            hidden_dims: vec![128],
            ..Self::training_defaults()
        }
    }

    /// Seven intervals `[256k, 256k + 255]`, `M = N_t r_f`.
    pub fn paper_scale(n_tx: usize, r_f: usize) -> Self {
        Self {
            input_dim: 2 * n_tx * r_f,
            m: n_tx * r_f,
            intervals: contiguous_intervals(256, 255, 7),
            weights: default_weights(7),
            hidden_dims: vec![512],
            epochs: 100,
            batch_size: 200,
            lr_max: 1e-3,
            lr_min: 1e-6,
            seed: 0,
        }
    }

    pub fn n_intervals(&self) -> usize {
        self.intervals.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.m == 0 {
            return Err(Error::config("input_dim and M must be positive"));
        }
        if self.intervals.is_empty() {
            return Err(Error::config("at least one mask interval is required"));
        }
        if self.weights.len() != self.intervals.len() {
            return Err(Error::config(format!(
                "{} weights for {} intervals",
                self.weights.len(),
                self.intervals.len()
            )));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::config("weights must be positive"));
        }
        let width = self.intervals[0].1.checked_sub(self.intervals[0].0);
        for (i, &(lo, hi)) in self.intervals.iter().enumerate() {
            if lo == 0 || hi < lo {
                return Err(Error::config(format!(
                    "interval {i} [{lo}, {hi}] is empty or starts at 0"
                )));
            }
            if Some(hi - lo) != width {
                return Err(Error::config("intervals must have equal width"));
            }
            if hi > self.m {
                return Err(Error::config(format!(
                    "interval {i} ends at {hi}, beyond M = {}",
                    self.m
                )));
            }
            if i > 0 && lo <= self.intervals[i - 1].1 {
                return Err(Error::config(
                    "intervals must be increasing and non-overlapping",
                ));
            }
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::config("hidden widths must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        if !(self.lr_max.is_finite()
            && self.lr_max > 0.0
            && self.lr_min >= 0.0
            && self.lr_min <= self.lr_max)
        {
            return Err(Error::config("need 0 <= lr_min <= lr_max and lr_max > 0"));
        }
        Ok(())
    }
}

/// Parse `a-b,c-d,...` into inclusive intervals.
pub fn parse_intervals(s: &str) -> Result<Vec<(usize, usize)>> {
    s.split(',')
        .map(|part| {
            let (a, b) = part.trim().split_once('-').ok_or_else(|| {
                Error::config(format!("interval {part:?} is not of the form LO-HI"))
            })?;
            let lo = a
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("bad interval bound {a:?}")))?;
            let hi = b
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("bad interval bound {b:?}")))?;
            Ok((lo, hi))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codeword {
    pub values: Vec<f64>,
    pub full_length: usize,
}

impl Codeword {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatelessCodec {
    pub config: CodecConfig,
    params: Params,
    /// Inputs are divided by this before encoding and outputs multiplied
    /// after decoding.
    pub norm_scale: f64,
    pub trained: bool,
}

/// Column-major flattening with real parts at even offsets.
pub fn flatten(c: &CMatrix) -> Vec<f64> {
    c.iter().flat_map(|z| [z.re, z.im]).collect()
}

pub fn unflatten(v: &[f64], n_rows: usize, n_cols: usize) -> Result<CMatrix> {
    if v.len() != 2 * n_rows * n_cols {
        return Err(Error::Dimension(format!(
            "{} values cannot fill a {n_rows}x{n_cols} complex matrix",
            v.len()
        )));
    }
    Ok(CMatrix::from_iterator(
        n_rows,
        n_cols,
        v.chunks_exact(2).map(|p| C64::new(p[0], p[1])),
    ))
}

impl RatelessCodec {
    /// Freshly initialized, untrained codec.
    pub fn new(config: CodecConfig) -> Result<Self> {
        config.validate()?;
        let params = Params::init(&config, &mut ChaCha8Rng::seed_from_u64(config.seed));
        Ok(Self {
            config,
            params,
            norm_scale: 1.0,
            trained: false,
        })
    }

    /// Exact pass-through codec with `M = input_dim`.
    pub fn identity(dim: usize) -> Self {
        let config = CodecConfig {
            input_dim: dim,
            m: dim,
            intervals: vec![(dim, dim)],
            weights: vec![1.0],
            hidden_dims: Vec::new(),
            epochs: 0,
            batch_size: 1,
            lr_max: 1.0,
            lr_min: 0.0,
            seed: 0,
        };
        Self {
            params: Params::identity(dim),
            config,
            norm_scale: 1.0,
            trained: true,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn m(&self) -> usize {
        self.config.m
    }

    fn check_input(&self, c5: &CMatrix) -> Result<()> {
        if 2 * c5.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "codec expects {} real inputs, basis has {}",
                self.input_dim(),
                2 * c5.len()
            )));
        }
        Ok(())
    }

    /// Full codeword of length `M` without the trained check.
    pub(crate) fn encode_full(&self, c5: &CMatrix) -> Result<Vec<f64>> {
        self.check_input(c5)?;
        let x = RMatrix::from_column_slice(self.input_dim(), 1, &flatten(c5)) / self.norm_scale;
        Ok(self.params.encode(&x).iter().copied().collect())
    }

    pub fn encode(&self, c5: &CMatrix, l_t: usize) -> Result<Codeword> {
        if !self.trained {
            return Err(Error::Untrained);
        }
        if l_t == 0 || l_t > self.m() {
            return Err(Error::config(format!(
                "prefix length {l_t} outside [1, {}]",
                self.m()
            )));
        }
        let mut values = self.encode_full(c5)?;
        values.truncate(l_t);
        Ok(Codeword {
            values,
            full_length: self.m(),
        })
    }

    /// Zero-pad `values` to `M` and decode into an `n_rows x n_cols` basis.
    pub(crate) fn decode_values(&self, values: &[f64], n_rows: usize) -> Result<CMatrix> {
        if values.len() > self.m() {
            return Err(Error::Dimension(format!(
                "codeword of {} exceeds M = {}",
                values.len(),
                self.m()
            )));
        }
        if n_rows == 0 || !self.input_dim().is_multiple_of(2 * n_rows) {
            return Err(Error::Dimension(format!(
                "{} real outputs do not split into {n_rows} rows",
                self.input_dim()
            )));
        }
        let mut z = RMatrix::zeros(self.m(), 1);
        z.view_mut((0, 0), (values.len(), 1))
            .copy_from_slice(values);
        let y = self.params.decode(&z) * self.norm_scale;
        unflatten(y.as_slice(), n_rows, self.input_dim() / (2 * n_rows))
    }

    pub fn decode(&self, cw: &Codeword, n_rows: usize) -> Result<CMatrix> {
        if !self.trained {
            return Err(Error::Untrained);
        }
        self.decode_values(&cw.values, n_rows)
    }

    /// Mean over `batch` of `||C5 - decode(prefix_l(encode(C5)))||^2`.
    pub fn masked_loss(&self, batch: &[CMatrix], l: usize) -> Result<f64> {
        if l == 0 || l > self.m() {
            return Err(Error::config(format!(
                "mask length {l} outside [1, {}]",
                self.m()
            )));
        }
        if batch.is_empty() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for c5 in batch {
            let mut z = self.encode_full(c5)?;
            z.truncate(l);
            let hat = self.decode_values(&z, c5.nrows())?;
            total += (&hat - c5).norm_squared();
        }
        Ok(total / batch.len() as f64)
    }

    /// Number of trainable scalars.
    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub(crate) fn params(&self) -> &Params {
        &self.params
    }

    pub(crate) fn from_parts(
        config: CodecConfig,
        params: Params,
        norm_scale: f64,
        trained: bool,
    ) -> Self {
        Self {
            config,
            params,
            norm_scale,
            trained,
        }
    }
}

//! Synthetic wideband multipath channels and rational test channels.
//!
//! A slice is the `2*N_t x N_f` channel seen by one receive antenna. Row
//! `a + pol*N_t` holds transmit element `a` of polarization `pol`; column
//! `k` is subcarrier index `k + 1`.

mod dataset;

pub use dataset::{load_dataset, read_dataset, save_dataset, write_dataset, DATASET_MAGIC};

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64, ZERO};

/// Channel generator parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    /// Transmit elements per polarization.
    pub n_tx: usize,
    /// Always 2 (dual polarization).
    pub n_pol: usize,
    pub n_sub: usize,
    pub n_rx: usize,
    pub n_paths: usize,
    /// RMS delay spread in seconds.
    pub delay_spread: f64,
    /// Subcarrier spacing in Hz.
    pub subcarrier_spacing: f64,
    pub seed: u64,
}

impl ChannelConfig {
    /// Small profile used by tests and the default CLI settings.
    pub fn desk() -> Self {
        Self {
            n_tx: 32,
            n_pol: 2,
            n_sub: 256,
            n_rx: 2,
            n_paths: 6,
            delay_spread: 30e-9,
            subcarrier_spacing: 30e3,
            seed: 0,
        }
    }

    /// 16x8 array flattened to 128 elements per polarization, 275 resource
    /// blocks of 12 subcarriers at 30 kHz, 30 ns delay spread, 2 receive
    /// antennas.
    pub fn paper_scale() -> Self {
        Self {
            n_tx: 128,
            n_pol: 2,
            n_sub: 3300,
            n_rx: 2,
            n_paths: 24,
            delay_spread: 30e-9,
            subcarrier_spacing: 30e3,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tx < 2 {
            return Err(Error::config(format!(
                "n_tx must be >= 2, got {}",
                self.n_tx
            )));
        }
        if self.n_pol != 2 {
            return Err(Error::config(format!(
                "n_pol must be 2, got {}",
                self.n_pol
            )));
        }
        if self.n_sub < 2 {
            return Err(Error::config(format!(
                "n_sub must be >= 2, got {}",
                self.n_sub
            )));
        }
        if self.n_rx < 1 {
            return Err(Error::config("n_rx must be >= 1"));
        }
        if self.n_paths < 1 {
            return Err(Error::config("n_paths must be >= 1"));
        }
        if !(self.delay_spread > 0.0 && self.delay_spread.is_finite()) {
            return Err(Error::config(format!(
                "delay_spread must be > 0, got {}",
                self.delay_spread
            )));
        }
        if !(self.subcarrier_spacing > 0.0 && self.subcarrier_spacing.is_finite()) {
            return Err(Error::config("subcarrier_spacing must be > 0"));
        }
        Ok(())
    }
}

/// One receive antenna's channel over all transmit elements and subcarriers.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSlice {
    pub data: CMatrix,
    pub config: ChannelConfig,
}

impl ChannelSlice {
    pub fn n_tx(&self) -> usize {
        self.data.nrows() / 2
    }

    pub fn n_sub(&self) -> usize {
        self.data.ncols()
    }

    /// Column `k` reshaped to `N_t x 2`, polarization on the second axis.
    pub fn block(&self, k: usize) -> CMatrix {
        column_to_block(&self.data.column(k).into_owned(), self.n_tx())
    }

    /// Build a slice from per-subcarrier `N_t x 2` blocks.
    pub fn from_blocks(blocks: &[CMatrix], config: ChannelConfig) -> Self {
        let n_tx = blocks.first().map_or(config.n_tx, |b| b.nrows());
        let mut data = CMatrix::zeros(2 * n_tx, blocks.len());
        for (k, b) in blocks.iter().enumerate() {
            for pol in 0..2 {
                for a in 0..n_tx {
                    data[(a + pol * n_tx, k)] = b[(a, pol)];
                }
            }
        }
        Self { data, config }
    }
}

pub(crate) fn column_to_block(col: &nalgebra::DVector<C64>, n_tx: usize) -> CMatrix {
    CMatrix::from_fn(n_tx, 2, |a, pol| col[a + pol * n_tx])
}

/// A single propagation path.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    /// Complex gain for each polarization.
    pub gain: [C64; 2],
    /// Delay in seconds.
    pub delay: f64,
    /// Departure angle at the transmit array, radians.
    pub departure: f64,
    /// Arrival angle at the receive array, radians.
    pub arrival: f64,
}

/// Draw `n_paths` random paths.
///
/// Delays are uniform in `[0, 4 * delay_spread]`; mean path power follows
/// `exp(-tau / delay_spread)` normalized to unit total; gains are circular
/// complex Gaussian per polarization; angles uniform in `[-pi/2, pi/2)`.
pub fn draw_paths(cfg: &ChannelConfig, rng: &mut impl Rng) -> Vec<Path> {
    let delays: Vec<f64> = (0..cfg.n_paths)
        .map(|_| rng.random::<f64>() * 4.0 * cfg.delay_spread)
        .collect();
    let raw: Vec<f64> = delays
        .iter()
        .map(|t| (-t / cfg.delay_spread).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    delays
        .iter()
        .zip(&raw)
        .map(|(&delay, &p)| {
            let sigma = (p / total / 2.0).sqrt();
            let mut cn = || {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                C64::new(re * sigma, im * sigma)
            };
            let gain = [cn(), cn()];
            let departure = (rng.random::<f64>() - 0.5) * PI;
            let arrival = (rng.random::<f64>() - 0.5) * PI;
            Path {
                gain,
                delay,
                departure,
                arrival,
            }
        })
        .collect()
}

/// Half-wavelength ULA steering entry `exp(-j pi a sin(theta))`.
fn steering(index: usize, angle: f64) -> C64 {
    C64::from_polar(1.0, -PI * index as f64 * angle.sin())
}

/// Channel of receive antenna `rx` for an explicit set of paths.
pub fn synthesize_from_paths(cfg: &ChannelConfig, paths: &[Path], rx: usize) -> ChannelSlice {
    let n_tx = cfg.n_tx;
    let mut data = CMatrix::from_element(2 * n_tx, cfg.n_sub, ZERO);
    for path in paths {
        let rx_phase = steering(rx, path.arrival);
        let freq: Vec<C64> = (0..cfg.n_sub)
            .map(|k| {
                let f = (k + 1) as f64;
                C64::from_polar(1.0, -2.0 * PI * f * cfg.subcarrier_spacing * path.delay)
            })
            .collect();
        for pol in 0..2 {
            let g = path.gain[pol] * rx_phase;
            for a in 0..n_tx {
                let sa = g * steering(a, path.departure);
                let row = a + pol * n_tx;
                for (k, fk) in freq.iter().enumerate() {
                    data[(row, k)] += sa * fk;
                }
            }
        }
    }
    ChannelSlice {
        data,
        config: cfg.clone(),
    }
}

/// All `n_rx` receive-antenna slices of one random channel realization.
pub fn synthesize_tensor(cfg: &ChannelConfig) -> Result<Vec<ChannelSlice>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let paths = draw_paths(cfg, &mut rng);
    let slices: Vec<ChannelSlice> = (0..cfg.n_rx)
        .map(|rx| synthesize_from_paths(cfg, &paths, rx))
        .collect();
    for s in &slices {
        let n = s.data.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Numerical(format!("synthesized slice has norm {n}")));
        }
    }
    Ok(slices)
}

/// Slice of the first receive antenna for the configured seed.
pub fn synthesize_slice(cfg: &ChannelConfig) -> Result<ChannelSlice> {
    let mut one = cfg.clone();
    one.n_rx = 1;
    Ok(synthesize_tensor(&one)?.remove(0))
}

/// `count` independent first-antenna slices with seeds `seed, seed+1, ...`.
pub fn synthesize_many(cfg: &ChannelConfig, count: usize) -> Result<Vec<ChannelSlice>> {
    (0..count)
        .map(|i| synthesize_slice(&cfg.clone().with_seed(cfg.seed.wrapping_add(i as u64))))
        .collect()
}

/// Rational channel `C diag(1/(f - pole)) B` used as an exact-recovery oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalGroundTruth {
    pub poles: Vec<C64>,
    /// `r x 2`
    pub residues_b: CMatrix,
    /// `N_t x r`
    pub residues_c: CMatrix,
}

impl RationalGroundTruth {
    /// Random oracle with poles scattered over the band `[1, n_sub]` and
    /// kept at least `min_imag` away from the real axis.
    pub fn random(n_tx: usize, order: usize, n_sub: usize, rng: &mut impl Rng) -> Self {
        let min_imag = 2.0;
        let poles = (0..order)
            .map(|_| {
                let re = 1.0 + rng.random::<f64>() * (n_sub as f64 - 1.0);
                let im = min_imag + rng.random::<f64>() * 0.1 * n_sub as f64;
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                C64::new(re, sign * im)
            })
            .collect();
        let mut cn = || {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im)
        };
        let residues_b = CMatrix::from_fn(order, 2, |_, _| cn());
        let residues_c = CMatrix::from_fn(n_tx, order, |_, _| cn());
        Self {
            poles,
            residues_b,
            residues_c,
        }
    }

    pub fn order(&self) -> usize {
        self.poles.len()
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.poles.len();
        if r == 0 {
            return Err(Error::config(
                "rational ground truth needs at least one pole",
            ));
        }
        if self.residues_b.shape() != (r, 2) || self.residues_c.ncols() != r {
            return Err(Error::Dimension(format!(
                "residues B {:?} / C {:?} inconsistent with {r} poles",
                self.residues_b.shape(),
                self.residues_c.shape()
            )));
        }
        for i in 0..r {
            for j in (i + 1)..r {
                if self.poles[i] == self.poles[j] {
                    return Err(Error::config(format!("poles {i} and {j} coincide")));
                }
            }
        }
        Ok(())
    }

    /// Value at real frequency `f` as an `N_t x 2` block.
    pub fn evaluate(&self, f: f64) -> Result<CMatrix> {
        let mut scaled = self.residues_b.clone();
        for (k, &p) in self.poles.iter().enumerate() {
            let d = C64::new(f, 0.0) - p;
            if d.norm() < 1e-9 * (1.0 + f.abs()) {
                return Err(Error::Singular(format!(
                    "frequency {f} coincides with pole {k} ({p})"
                )));
            }
            let inv = d.inv();
            scaled.row_mut(k).iter_mut().for_each(|z| *z *= inv);
        }
        Ok(&self.residues_c * scaled)
    }
}

/// Evaluate a rational oracle at each frequency and stack the results as a slice.
pub fn synthesize_rational(gt: &RationalGroundTruth, freqs: &[f64]) -> Result<ChannelSlice> {
    gt.validate()?;
    let blocks = freqs
        .iter()
        .map(|&f| gt.evaluate(f))
        .collect::<Result<Vec<_>>>()?;
    let n_tx = gt.residues_c.nrows();
    let config = ChannelConfig {
        n_tx,
        n_sub: freqs.len(),
        n_paths: gt.order(),
        ..ChannelConfig::desk()
    };
    Ok(ChannelSlice::from_blocks(&blocks, config))
}

/// Subcarrier indices `1..=n` as real frequencies.
pub fn subcarrier_freqs(n_sub: usize) -> Vec<f64> {
    (1..=n_sub).map(|k| k as f64).collect()
}

//! Sample sets and Loewner pencils.
//!
//! Every sampled subcarrier column is reshaped to an `N_t x 2` block. The
//! samples are split into a left set (block rows of the pencil) and a right
//! set (block columns). Block `(i, j)` of the Loewner matrix is the divided
//! difference `(h(l_i) - h(m_j)) / (l_i - m_j)`, and of the shifted Loewner
//! matrix `(l_i h(l_i) - m_j h(m_j)) / (l_i - m_j)`.

use crate::channel::ChannelSlice;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::mor::ReducedRealization;

/// One sampled subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub freq: f64,
    /// `N_t x 2` block.
    pub value: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub left: Vec<Sample>,
    pub right: Vec<Sample>,
    pub n_total: usize,
    pub stride: usize,
}

impl SampleSet {
    pub fn n_tx(&self) -> usize {
        self.left.first().map_or(0, |s| s.value.nrows())
    }

    /// All samples in increasing frequency order.
    pub fn ordered(&self) -> Vec<&Sample> {
        let mut all: Vec<&Sample> = self.left.iter().chain(&self.right).collect();
        all.sort_by(|a, b| a.freq.total_cmp(&b.freq));
        all
    }

    pub fn freqs(&self) -> Vec<f64> {
        self.ordered().iter().map(|s| s.freq).collect()
    }
}

/// Uniform sample frequencies `1, 1 + stride, ...` (`n` of them).
pub fn sample_freqs(n_samples: usize, stride: usize) -> Vec<f64> {
    (0..n_samples).map(|i| (1 + i * stride) as f64).collect()
}

/// Take `n_samples` uniformly spaced columns of `slice` and split them
/// alternately: positions 1, 3, 5, ... go left, 2, 4, 6, ... go right.
pub fn build_sample_set(
    slice: &ChannelSlice,
    n_samples: usize,
    stride: usize,
) -> Result<SampleSet> {
    if n_samples < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 samples, got {n_samples}"
        )));
    }
    if stride == 0 {
        return Err(Error::config("stride must be >= 1"));
    }
    if n_samples * stride > slice.n_sub() {
        return Err(Error::config(format!(
            "{n_samples} samples at stride {stride} exceed {} subcarriers",
            slice.n_sub()
        )));
    }
    let mut left = Vec::with_capacity(n_samples.div_ceil(2));
    let mut right = Vec::with_capacity(n_samples / 2);
    for (pos, freq) in sample_freqs(n_samples, stride).into_iter().enumerate() {
        let sample = Sample {
            freq,
            value: slice.block(freq as usize - 1),
        };
        if pos % 2 == 0 {
            left.push(sample);
        } else {
            right.push(sample);
        }
    }
    Ok(SampleSet {
        left,
        right,
        n_total: n_samples,
        stride,
    })
}

/// Loewner data matrices built from a sample set.
#[derive(Debug, Clone)]
pub struct LoewnerPencil {
    /// Left samples stacked vertically, `p*N_t x 2`.
    pub v: CMatrix,
    /// Right samples side by side, `N_t x 2q`.
    pub w: CMatrix,
    pub l: CMatrix,
    pub l_sigma: CMatrix,
    pub samples: SampleSet,
}

pub fn assemble_pencil(s: &SampleSet) -> Result<LoewnerPencil> {
    let n_tx = s.n_tx();
    let p = s.left.len();
    let q = s.right.len();
    if p == 0 || q == 0 {
        return Err(Error::InsufficientData(
            "both left and right sets must be non-empty".into(),
        ));
    }
    for smp in s.left.iter().chain(&s.right) {
        if smp.value.shape() != (n_tx, 2) {
            return Err(Error::Dimension(format!(
                "sample block {:?}, expected ({n_tx}, 2)",
                smp.value.shape()
            )));
        }
    }
    for (i, li) in s.left.iter().enumerate() {
        for (j, mj) in s.right.iter().enumerate() {
            if li.freq == mj.freq {
                return Err(Error::Singular(format!(
                    "left sample {i} and right sample {j} share frequency {}",
                    li.freq
                )));
            }
        }
    }

    let mut v = CMatrix::zeros(p * n_tx, 2);
    for (i, li) in s.left.iter().enumerate() {
        v.view_mut((i * n_tx, 0), (n_tx, 2)).copy_from(&li.value);
    }
    let mut w = CMatrix::zeros(n_tx, 2 * q);
    for (j, mj) in s.right.iter().enumerate() {
        w.view_mut((0, 2 * j), (n_tx, 2)).copy_from(&mj.value);
    }

    let mut l = CMatrix::zeros(p * n_tx, 2 * q);
    let mut l_sigma = CMatrix::zeros(p * n_tx, 2 * q);
    for (i, li) in s.left.iter().enumerate() {
        for (j, mj) in s.right.iter().enumerate() {
            let inv = 1.0 / (li.freq - mj.freq);
            for a in 0..n_tx {
                for c in 0..2 {
                    let hl = li.value[(a, c)];
                    let hm = mj.value[(a, c)];
                    l[(i * n_tx + a, 2 * j + c)] = (hl - hm) * inv;
                    l_sigma[(i * n_tx + a, 2 * j + c)] = (hl * li.freq - hm * mj.freq) * inv;
                }
            }
        }
    }
    Ok(LoewnerPencil {
        v,
        w,
        l,
        l_sigma,
        samples: s.clone(),
    })
}

impl LoewnerPencil {
    pub fn n_tx(&self) -> usize {
        self.w.nrows()
    }

    /// `L_sigma - x L`.
    pub fn shifted(&self, x: f64) -> CMatrix {
        &self.l_sigma - &self.l * C64::new(x, 0.0)
    }

    /// Largest relative residual of `block_row_i(L_sigma - l_i L) = W` over all `i`.
    pub fn row_identity_residual(&self) -> f64 {
        let n_tx = self.n_tx();
        let wn = self.w.norm().max(f64::MIN_POSITIVE);
        self.samples
            .left
            .iter()
            .enumerate()
            .map(|(i, li)| {
                let rows = self.shifted(li.freq).rows(i * n_tx, n_tx).into_owned();
                (rows - &self.w).norm() / wn
            })
            .fold(0.0, f64::max)
    }

    /// Largest relative residual of `block_col_j(L_sigma - m_j L) = V` over all `j`.
    pub fn column_identity_residual(&self) -> f64 {
        let vn = self.v.norm().max(f64::MIN_POSITIVE);
        self.samples
            .right
            .iter()
            .enumerate()
            .map(|(j, mj)| {
                let cols = self.shifted(mj.freq).columns(2 * j, 2).into_owned();
                (cols - &self.v).norm() / vn
            })
            .fold(0.0, f64::max)
    }
}

/// Relative Frobenius error of `realization` at every sample, in increasing
/// frequency order. Samples with a zero block report the absolute error.
pub fn interpolation_defect(
    pencil: &LoewnerPencil,
    realization: &ReducedRealization,
) -> Result<Vec<f64>> {
    pencil
        .samples
        .ordered()
        .into_iter()
        .map(|s| {
            let h = realization.evaluate(s.freq)?;
            let d = (h - &s.value).norm();
            let n = s.value.norm();
            Ok(if n > 0.0 { d / n } else { d })
        })
        .collect()
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::channel::{synthesize_slice, ChannelConfig};
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn pencil_satisfies_sylvester_identities(
            seed in any::<u64>(),
            n_tx in 2usize..=6,
            n in 2usize..=12,
            stride in 1usize..=3,
        ) {
            let cfg = ChannelConfig {
                n_tx,
                n_sub: n * stride,
                ..ChannelConfig::desk()
            }
            .with_seed(seed);
            let slice = synthesize_slice(&cfg).unwrap();
            let pencil = assemble_pencil(&build_sample_set(&slice, n, stride).unwrap()).unwrap();
            prop_assert!(pencil.row_identity_residual() < 1e-12);
            prop_assert!(pencil.column_identity_residual() < 1e-12);
        }
    }
}

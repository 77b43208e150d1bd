//! Basis change that makes spatial-domain errors in the output basis map
//! one-to-one onto errors at the sampled subcarriers, followed by a DFT
//! across antennas to concentrate energy.
//!
//! With `Y = [(f_1 I - A3)^{-1} B3, ..., (f_N I - A3)^{-1} B3]` and its thin
//! SVD `Y = U_Y S_Y V_Y^H`, the sampled response is
//! `H_s = C3 Y = C4 V_Y^H` where `C4 = C3 U_Y S_Y`. Because `V_Y^H` has
//! orthonormal rows, `||dC4 V_Y^H|| = ||dC4||`.

use crate::error::{Error, Result};
use crate::linalg::{dft_matrix, thin_svd, CMatrix, C64};
use crate::mor::ReducedRealization;

/// Relative floor on the singular values of `Y`.
pub const GRAM_RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct FrequencyGram {
    /// `r_f x 2N`
    pub y: CMatrix,
    pub freqs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TransformedBasis {
    pub c4: CMatrix,
    pub c5: CMatrix,
    pub u_y: CMatrix,
    pub sigma_y: Vec<f64>,
    pub v_y_h: CMatrix,
}

pub fn build_gram(r: &ReducedRealization, freqs: &[f64]) -> Result<FrequencyGram> {
    let r_f = r.order();
    if r_f >= 2 * freqs.len() {
        return Err(Error::config(format!(
            "order {r_f} must be below twice the sample count {}",
            freqs.len()
        )));
    }
    let mut y = CMatrix::zeros(r_f, 2 * freqs.len());
    for (j, &f) in freqs.iter().enumerate() {
        y.columns_mut(2 * j, 2).copy_from(&r.resolvent_times_b(f)?);
    }
    Ok(FrequencyGram {
        y,
        freqs: freqs.to_vec(),
    })
}

/// Thin SVD `(U_Y, S_Y, V_Y^H)` of `Y` with the shared phase convention,
/// after the rank check.
pub fn gram_factors(gram: &FrequencyGram) -> Result<(CMatrix, Vec<f64>, CMatrix)> {
    let mut svd = thin_svd(&gram.y);
    svd.normalize_phases();
    let hi = svd.s.first().copied().unwrap_or(0.0);
    let lo = svd.s.last().copied().unwrap_or(0.0);
    if !(hi > 0.0) || !(lo > GRAM_RANK_TOLERANCE * hi) {
        return Err(Error::RankDeficient {
            sigma_min: lo,
            sigma_max: hi,
        });
    }
    Ok((svd.u, svd.s, svd.v_h))
}

pub fn forward_transform(c3: &CMatrix, gram: &FrequencyGram) -> Result<TransformedBasis> {
    if c3.ncols() != gram.y.nrows() {
        return Err(Error::Dimension(format!(
            "C3 has {} columns, gram has order {}",
            c3.ncols(),
            gram.y.nrows()
        )));
    }
    let (u_y, sigma_y, v_y_h) = gram_factors(gram)?;
    let mut c4 = c3 * &u_y;
    for (k, &s) in sigma_y.iter().enumerate() {
        c4.column_mut(k).iter_mut().for_each(|z| *z *= s);
    }
    let c5 = dft_matrix(c3.nrows()) * &c4;
    Ok(TransformedBasis {
        c4,
        c5,
        u_y,
        sigma_y,
        v_y_h,
    })
}

/// Undo the DFT and the basis change. `U_Y` and `S_Y` are recomputed from
/// the receiver's own copy of the realization.
pub fn inverse_transform(
    c5_hat: &CMatrix,
    r_hat: &ReducedRealization,
    freqs: &[f64],
) -> Result<CMatrix> {
    let gram = build_gram(r_hat, freqs)?;
    if c5_hat.ncols() != gram.y.nrows() {
        return Err(Error::Dimension(format!(
            "C5 has {} columns, realization has order {}",
            c5_hat.ncols(),
            gram.y.nrows()
        )));
    }
    let (u_y, sigma_y, _) = gram_factors(&gram)?;
    let mut c4 = dft_matrix(c5_hat.nrows()).adjoint() * c5_hat;
    for (k, &s) in sigma_y.iter().enumerate() {
        let inv = C64::new(1.0 / s, 0.0);
        c4.column_mut(k).iter_mut().for_each(|z| *z *= inv);
    }
    Ok(c4 * u_y.adjoint())
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::channel::RationalGroundTruth;
    use crate::linalg::rel_diff;
    use crate::loewner::sample_freqs;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn output_basis_errors_map_isometrically(
            seed in any::<u64>(),
            n_tx in 2usize..=8,
            r_f in 1usize..=6,
            n in 4usize..=16,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gt = RationalGroundTruth::random(n_tx, r_f, 4 * n, &mut rng);
            let r = ReducedRealization {
                a_diag: gt.poles,
                b: gt.residues_b,
                c: gt.residues_c,
                lambda_ref: 0.0,
            };
            let gram = build_gram(&r, &sample_freqs(n, 4)).unwrap();
            let t = forward_transform(&r.c, &gram).unwrap();
            let v = &t.v_y_h * t.v_y_h.adjoint();
            prop_assert!((v - CMatrix::identity(r_f, r_f)).norm() < 1e-10);
            prop_assert!(rel_diff(&(&t.c4 * &t.v_y_h), &(&r.c * &gram.y)) < 1e-10);
            prop_assert!((t.c5.norm() - t.c4.norm()).abs() <= 1e-12 * t.c4.norm());

            let mut cn = || C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let dc4 = CMatrix::from_fn(n_tx, r_f, |_, _| cn());
            let dh = (&dc4 * &t.v_y_h).norm_squared();
            prop_assert!((dh - dc4.norm_squared()).abs() <= 1e-10 * dc4.norm_squared());
        }
    }
}

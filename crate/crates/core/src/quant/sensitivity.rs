//! First-order sensitivity of the sampled-response error to quantization
//! of the poles and residues, and the adaptive bit allocation built on it.
//!
//! With `dH = H_s - (C4 + dC4)(V_Y + dV_Y)^H`, the gradient of `||dH||^2`
//! with respect to `dV_Y` splits into `G1 = (C4^H C4 dV_Y^H)^T`, which only
//! depends on the pole/residue error, and `G2 = (C4^H dC4 V_Y^H)^T`.
//! Derivatives follow the Wirtinger convention, so the steepest directional
//! derivative of the objective along a unit step is `2 ||G||`.

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::mor::ReducedRealization;
use crate::quant::{QuantSpec, QuantizedCodewords};
use crate::transform::{build_gram, gram_factors};

/// Highest bit width the allocator will raise a field to.
pub const BIT_CAP: u8 = 16;

/// `(C4^H C4 dV_Y^H)^T`, a `2N x r_f` matrix.
pub fn gradient_g1(c4: &CMatrix, delta_v_y_h: &CMatrix) -> CMatrix {
    (c4.adjoint() * c4 * delta_v_y_h).transpose()
}

/// `(C4^H dC4 V_Y^H)^T`, a `2N x r_f` matrix.
pub fn gradient_g2(c4: &CMatrix, delta_c4: &CMatrix, v_y_h: &CMatrix) -> CMatrix {
    (c4.adjoint() * delta_c4 * v_y_h).transpose()
}

/// Frobenius norms of the two block Hessians of `||dH||^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianNorms {
    pub wrt_c4: f64,
    pub wrt_v_y: f64,
}

impl HessianNorms {
    pub fn v_y_dominates(&self) -> bool {
        self.wrt_v_y > self.wrt_c4
    }
}

/// Closed-form Hessian norms.
///
/// The Hessian in `dC4` is `diag(conj(M) (x) I_Nt, M (x) I_Nt)` with
/// `M = V^H V`, and in `dV_Y` it is the same shape with `M = C4^H C4` and
/// `I_2N`, so each squared norm is `2 * dim(I) * ||M||^2`.
pub fn hessian_sensitivity(c4_hat: &CMatrix, v_y_h_hat: &CMatrix) -> HessianNorms {
    let n_tx = c4_hat.nrows() as f64;
    let two_n = v_y_h_hat.ncols() as f64;
    let vv = v_y_h_hat * v_y_h_hat.adjoint();
    let cc = c4_hat.adjoint() * c4_hat;
    HessianNorms {
        wrt_c4: (2.0 * n_tx).sqrt() * vv.norm(),
        wrt_v_y: (2.0 * two_n).sqrt() * cc.norm(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    /// `||G1||` before any adjustment.
    pub initial_g1_norm: f64,
    /// `||G1||` at the final bit widths.
    pub g1_norm: f64,
    /// `||G1|| + ||G2||` at the final bit widths (`G2 = 0` without a `dC4`).
    pub g_norm_bound: f64,
    /// True when `||G1||` is still at or above the threshold.
    pub flagged: bool,
    /// True when the loop stopped because widths reached [`BIT_CAP`].
    pub saturated: bool,
    pub iterations: usize,
    pub final_spec: QuantSpec,
}

fn right_basis(a_diag: Vec<C64>, b: CMatrix, freqs: &[f64]) -> Result<CMatrix> {
    let r = ReducedRealization {
        a_diag,
        b,
        c: CMatrix::zeros(0, 0),
        lambda_ref: 0.0,
    };
    Ok(gram_factors(&build_gram(&r, freqs)?)?.2)
}

/// `||G1||` for the pole/residue error at `spec`; infinite when the
/// quantized realization no longer yields a full-rank gram.
fn g1_at(
    c4: &CMatrix,
    v_y_h: &CMatrix,
    a_diag: &[C64],
    b: &CMatrix,
    freqs: &[f64],
    spec: QuantSpec,
) -> (f64, Option<CMatrix>) {
    let q = QuantizedCodewords::quantize(a_diag, b, &[], spec);
    match right_basis(q.a_diag(), q.b(), freqs) {
        Ok(v_hat) => {
            let dv = &v_hat - v_y_h;
            (gradient_g1(c4, &dv).norm(), Some(v_hat))
        }
        Err(_) => (f64::INFINITY, None),
    }
}

/// Raise pole/residue bit widths by `(delta_mag, delta_phase)` until
/// `||G1|| < eps` or the widths reach [`BIT_CAP`].
#[allow(clippy::too_many_arguments)]
pub fn robust_allocate(
    c4: &CMatrix,
    a_diag: &[C64],
    b: &CMatrix,
    freqs: &[f64],
    eps: f64,
    spec0: QuantSpec,
    delta: (u8, u8),
    delta_c4: Option<&CMatrix>,
) -> Result<SensitivityReport> {
    if !(eps > 0.0) {
        return Err(Error::config(format!(
            "threshold must be positive, got {eps}"
        )));
    }
    spec0.validate()?;
    let v_y_h = right_basis(a_diag.to_vec(), b.clone(), freqs)?;

    let mut spec = spec0;
    let (mut g1, mut v_hat) = g1_at(c4, &v_y_h, a_diag, b, freqs, spec);
    let initial = g1;
    let mut iterations = 0;
    let mut saturated = false;
    while g1 >= eps {
        let at_cap = [
            spec.a_bits_mag,
            spec.a_bits_phase,
            spec.b_bits_mag,
            spec.b_bits_phase,
        ]
        .iter()
        .all(|&b| b >= BIT_CAP);
        if at_cap || delta == (0, 0) {
            saturated = true;
            break;
        }
        spec.a_bits_mag = (spec.a_bits_mag + delta.0).min(BIT_CAP);
        spec.b_bits_mag = (spec.b_bits_mag + delta.0).min(BIT_CAP);
        spec.a_bits_phase = (spec.a_bits_phase + delta.1).min(BIT_CAP);
        spec.b_bits_phase = (spec.b_bits_phase + delta.1).min(BIT_CAP);
        (g1, v_hat) = g1_at(c4, &v_y_h, a_diag, b, freqs, spec);
        iterations += 1;
    }

    let g2 = match (delta_c4, &v_hat) {
        (Some(d), Some(v)) => gradient_g2(c4, d, v).norm(),
        _ => 0.0,
    };
    Ok(SensitivityReport {
        initial_g1_norm: initial,
        g1_norm: g1,
        g_norm_bound: g1 + g2,
        flagged: g1 >= eps,
        saturated,
        iterations,
        final_spec: spec,
    })
}

/// Linear-interpolation percentile (`q` in `[0, 1]`) of finite values.
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

/// Threshold at the 95th percentile of the observed `||G1||` values.
pub fn calibrate_epsilon(g1_norms: &[f64]) -> Result<f64> {
    match percentile(g1_norms, 0.95) {
        Some(e) if e > 0.0 => Ok(e),
        Some(e) => Err(Error::Numerical(format!(
            "calibrated threshold {e} is not positive"
        ))),
        None => Err(Error::InsufficientData(
            "no finite gradient norms to calibrate on".into(),
        )),
    }
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::channel::RationalGroundTruth;
    use crate::loewner::sample_freqs;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(m: usize, n: usize, rng: &mut impl Rng) -> CMatrix {
        CMatrix::from_fn(m, n, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn gradient_norm_bound(seed in any::<u64>(), n_tx in 1usize..=8, r_f in 1usize..=6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let two_n = 16;
            let c4 = random(n_tx, r_f, &mut rng);
            let dc4 = random(n_tx, r_f, &mut rng);
            let v = random(r_f, two_n, &mut rng);
            let dv = random(r_f, two_n, &mut rng);
            let g1 = gradient_g1(&c4, &dv);
            let g2 = gradient_g2(&c4, &dc4, &v);
            prop_assert!((&g1 + &g2).norm() <= g1.norm() + g2.norm() + 1e-12);
        }

        #[test]
        fn each_step_adds_fixed_side_info(seed in any::<u64>(), r_f in 1usize..=5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gt = RationalGroundTruth::random(4, r_f, 64, &mut rng);
            let c4 = random(4, r_f, &mut rng);
            let freqs = sample_freqs(16, 4);
            let spec = QuantSpec::default();
            let rep = robust_allocate(&c4, &gt.poles, &gt.residues_b, &freqs, 1e-300, spec, (2, 2), None).unwrap();
            let grown = rep.final_spec.body_bits(r_f, 0) - spec.body_bits(r_f, 0);
            prop_assert_eq!(grown, rep.iterations * (r_f * 4 + 2 * r_f * 4));
        }
    }
}

//! Model-order reduction of a Loewner pencil to a diagonal realization.
//!
//! The pencil is projected onto the leading `r_f` singular subspaces of
//! `L_sigma - x L` (with `x` the left sample nearest the middle of the
//! band), the projected `E` is absorbed through its SVD, and the resulting
//! state matrix is diagonalized. The output `{a, B, C}` evaluates as
//! `H(f) = C diag(1 / (f - a_k)) B`.

use crate::channel::{ChannelConfig, ChannelSlice};
use crate::error::{Error, Result};
use crate::linalg::{condition_number, eig, thin_svd, CMatrix, C64};
use crate::loewner::LoewnerPencil;

/// Reject reductions whose projected `E` has `sigma_min / sigma_max` below this.
pub const E_CONDITION_FLOOR: f64 = 1e-12;
/// Reject diagonalizations whose eigenvector matrix is worse conditioned than this.
pub const EIGVEC_CONDITION_LIMIT: f64 = 1e10;
/// Relative tolerance for frequency/pole collisions: `|f - a| < tol * (1 + |f|)`.
pub const POLE_TOLERANCE: f64 = 1e-9;

/// Order-`r_f` realization with diagonal state matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedRealization {
    /// Diagonal of `A3` (the poles), sorted by decreasing magnitude.
    pub a_diag: Vec<C64>,
    /// `r_f x 2`
    pub b: CMatrix,
    /// `N_t x r_f`
    pub c: CMatrix,
    /// Frequency the projection SVD was taken at.
    pub lambda_ref: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionDiagnostics {
    /// All singular values of `L_sigma - x L`, non-increasing.
    pub singular_values: Vec<f64>,
    /// Sum of squared discarded singular values.
    pub discarded_energy: f64,
    /// Smallest singular value of the projected `E`.
    pub sigma_e_min: f64,
    /// Condition number of the eigenvector matrix used to diagonalize.
    pub eigvec_condition: f64,
}

impl ReducedRealization {
    pub fn order(&self) -> usize {
        self.a_diag.len()
    }

    pub fn n_tx(&self) -> usize {
        self.c.nrows()
    }

    /// `(f I - A3)^{-1} B3` as an `r_f x 2` matrix.
    pub fn resolvent_times_b(&self, f: f64) -> Result<CMatrix> {
        let mut out = self.b.clone();
        for (k, &a) in self.a_diag.iter().enumerate() {
            let d = C64::new(f, 0.0) - a;
            if d.norm() < POLE_TOLERANCE * (1.0 + f.abs()) {
                return Err(Error::NearPole {
                    index: k,
                    freq: f,
                    pole: a,
                });
            }
            let inv = d.inv();
            out.row_mut(k).iter_mut().for_each(|z| *z *= inv);
        }
        Ok(out)
    }

    /// `C3 (f I - A3)^{-1} B3`, an `N_t x 2` block.
    pub fn evaluate(&self, f: f64) -> Result<CMatrix> {
        Ok(&self.c * self.resolvent_times_b(f)?)
    }

    /// Evaluate at each frequency and stack as a `2 N_t x len` slice.
    pub fn evaluate_slice(&self, freqs: &[f64]) -> Result<ChannelSlice> {
        let n_tx = self.n_tx();
        let mut data = CMatrix::zeros(2 * n_tx, freqs.len());
        for (k, &f) in freqs.iter().enumerate() {
            let block = self.evaluate(f)?;
            for pol in 0..2 {
                for a in 0..n_tx {
                    data[(a + pol * n_tx, k)] = block[(a, pol)];
                }
            }
        }
        let config = ChannelConfig {
            n_tx,
            n_sub: freqs.len(),
            ..ChannelConfig::desk()
        };
        Ok(ChannelSlice { data, config })
    }
}

/// Left sample frequency closest to the median of all sample frequencies;
/// the lower one wins a tie.
pub fn reference_frequency(pencil: &LoewnerPencil) -> f64 {
    let freqs = pencil.samples.freqs();
    let n = freqs.len();
    let median = 0.5 * (freqs[(n - 1) / 2] + freqs[n / 2]);
    let mut best = f64::NAN;
    let mut best_d = f64::INFINITY;
    for s in &pencil.samples.left {
        let d = (s.freq - median).abs();
        if d < best_d || (d == best_d && s.freq < best) {
            best = s.freq;
            best_d = d;
        }
    }
    best
}

/// Number of singular values of `L_sigma - x_mid L` above `rel_tol` times the largest.
pub fn numerical_rank(pencil: &LoewnerPencil, rel_tol: f64) -> usize {
    let x = reference_frequency(pencil);
    thin_svd(&pencil.shifted(x)).rank(rel_tol)
}

fn scale_rows(m: &mut CMatrix, s: &[f64]) {
    for (i, &si) in s.iter().enumerate() {
        m.row_mut(i).iter_mut().for_each(|z| *z *= si);
    }
}

fn scale_cols(m: &mut CMatrix, s: &[f64]) {
    for (j, &sj) in s.iter().enumerate() {
        m.column_mut(j).iter_mut().for_each(|z| *z *= sj);
    }
}

pub fn reduce_order(
    pencil: &LoewnerPencil,
    r_f: usize,
) -> Result<(ReducedRealization, ReductionDiagnostics)> {
    let (rows, cols) = pencil.l.shape();
    let max_order = rows.min(cols);
    if r_f == 0 || r_f > max_order {
        return Err(Error::config(format!(
            "r_f must be in [1, {max_order}], got {r_f}"
        )));
    }
    let lambda_ref = reference_frequency(pencil);
    let svd = thin_svd(&pencil.shifted(lambda_ref));
    let discarded_energy = svd.s[r_f..].iter().map(|s| s * s).sum();

    let y_p = svd.u.columns(0, r_f).into_owned();
    let x_p = svd.v_h.rows(0, r_f).adjoint();
    let y_ph = y_p.adjoint();

    let e1 = -(&y_ph * &pencil.l * &x_p);
    let a1 = -(&y_ph * &pencil.l_sigma * &x_p);
    let b1 = &y_ph * &pencil.v;
    let c1 = &pencil.w * &x_p;

    let e_svd = thin_svd(&e1);
    let sigma_e_max = e_svd.s[0];
    let sigma_e_min = *e_svd.s.last().unwrap();
    let ratio = if sigma_e_max > 0.0 {
        sigma_e_min / sigma_e_max
    } else {
        0.0
    };
    if !(ratio >= E_CONDITION_FLOOR) {
        return Err(Error::IllConditioned {
            sigma_min: sigma_e_min,
            ratio,
        });
    }
    let inv_sqrt: Vec<f64> = e_svd.s.iter().map(|s| 1.0 / s.sqrt()).collect();
    let u_eh = e_svd.u.adjoint();
    let v_e = e_svd.v_h.adjoint();

    let mut c2 = c1 * &v_e;
    scale_cols(&mut c2, &inv_sqrt);
    let mut a2 = &u_eh * a1 * &v_e;
    scale_rows(&mut a2, &inv_sqrt);
    scale_cols(&mut a2, &inv_sqrt);
    let mut b2 = u_eh * b1;
    scale_rows(&mut b2, &inv_sqrt);

    let eigen = eig(&a2)
        .ok_or_else(|| Error::Numerical("Schur iteration for A2 did not converge".into()))?;
    let mut order: Vec<usize> = (0..r_f).collect();
    order.sort_by(|&i, &j| {
        eigen.values[j]
            .norm()
            .total_cmp(&eigen.values[i].norm())
            .then(i.cmp(&j))
    });
    let a_diag: Vec<C64> = order.iter().map(|&i| eigen.values[i]).collect();
    let u_a = CMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eigen.vectors.column(i))
            .collect::<Vec<_>>(),
    );

    let eigvec_condition = condition_number(&u_a);
    if !(eigvec_condition <= EIGVEC_CONDITION_LIMIT) {
        return Err(Error::Defective {
            cond: eigvec_condition,
            limit: EIGVEC_CONDITION_LIMIT,
        });
    }
    let b3 = u_a
        .clone()
        .lu()
        .solve(&b2)
        .ok_or_else(|| Error::Numerical("eigenvector matrix is singular".into()))?;
    let c3 = c2 * u_a;

    let realization = ReducedRealization {
        a_diag,
        b: b3,
        c: c3,
        lambda_ref,
    };
    let diagnostics = ReductionDiagnostics {
        singular_values: svd.s,
        discarded_energy,
        sigma_e_min,
        eigvec_condition,
    };
    Ok((realization, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{
        subcarrier_freqs, synthesize_from_paths, synthesize_rational, synthesize_slice, Path,
        RationalGroundTruth,
    };
    use crate::linalg::{rel_diff, ZERO};
    use crate::loewner::{assemble_pencil, build_sample_set, interpolation_defect};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn oracle_pencil(
        seed: u64,
        n_tx: usize,
        order: usize,
    ) -> (RationalGroundTruth, LoewnerPencil, ChannelSlice) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gt = RationalGroundTruth::random(n_tx, order, 128, &mut rng);
        let slice = synthesize_rational(&gt, &subcarrier_freqs(128)).unwrap();
        let pencil = assemble_pencil(&build_sample_set(&slice, 32, 4).unwrap()).unwrap();
        (gt, pencil, slice)
    }

    fn matched_pole_error(found: &[C64], truth: &[C64]) -> f64 {
        let mut used = vec![false; truth.len()];
        let mut worst: f64 = 0.0;
        for f in found {
            let (k, d) = truth
                .iter()
                .enumerate()
                .filter(|(k, _)| !used[*k])
                .map(|(k, t)| (k, (f - t).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            used[k] = true;
            worst = worst.max(d);
        }
        worst
    }

    #[test]
    fn recovers_oracle_poles() {
        for seed in 0..5 {
            let (gt, pencil, _) = oracle_pencil(seed, 8, 5);
            let (r, diag) = reduce_order(&pencil, 5).unwrap();
            assert!(
                matched_pole_error(&r.a_diag, &gt.poles) < 1e-8,
                "seed {seed}"
            );
            assert!(diag.singular_values.windows(2).all(|w| w[0] >= w[1]));
            assert!(r.a_diag.windows(2).all(|w| w[0].norm() >= w[1].norm()));
        }
    }

    #[test]
    fn oracle_full_band_reconstruction() {
        let (_, pencil, slice) = oracle_pencil(7, 6, 4);
        let (r, _) = reduce_order(&pencil, 4).unwrap();
        let rec = r.evaluate_slice(&subcarrier_freqs(128)).unwrap();
        assert!(rel_diff(&rec.data, &slice.data) < 1e-10);
        let defects = interpolation_defect(&pencil, &r).unwrap();
        assert_eq!(defects.len(), 32);
        assert!(defects.iter().all(|&d| d < 1e-10));
    }

    // A frequency-flat response has an identically zero Loewner matrix, so
    // no strictly proper realization exists and the E guard must fire.
    #[test]
    fn flat_channel_is_rejected_as_ill_conditioned() {
        let cfg = ChannelConfig {
            n_tx: 4,
            n_sub: 32,
            ..ChannelConfig::desk()
        };
        let path = Path {
            gain: [C64::new(0.7, 0.2), C64::new(-0.1, 0.4)],
            delay: 0.0,
            departure: 0.3,
            arrival: 0.0,
        };
        let slice = synthesize_from_paths(&cfg, &[path], 0);
        let pencil = assemble_pencil(&build_sample_set(&slice, 8, 4).unwrap()).unwrap();
        assert!(pencil.l.iter().all(|z| *z == ZERO));
        assert!(matches!(
            reduce_order(&pencil, 1),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn single_pole_channel_rank_one() {
        let gt = RationalGroundTruth {
            poles: vec![C64::new(40.0, -12.0)],
            residues_b: CMatrix::from_row_slice(1, 2, &[C64::new(0.7, 0.2), C64::new(-0.1, 0.4)]),
            residues_c: CMatrix::from_fn(4, 1, |a, _| C64::from_polar(1.0, -0.9 * a as f64)),
        };
        let slice = synthesize_rational(&gt, &subcarrier_freqs(32)).unwrap();
        let pencil = assemble_pencil(&build_sample_set(&slice, 8, 4).unwrap()).unwrap();
        let (r, _) = reduce_order(&pencil, 1).unwrap();
        let rec = r.evaluate_slice(&subcarrier_freqs(32)).unwrap();
        let nmse = (&rec.data - &slice.data).norm_squared() / slice.data.norm_squared();
        assert!(nmse < 1e-10, "{nmse}");
    }

    #[test]
    fn scalar_evaluation_and_collision() {
        let r = ReducedRealization {
            a_diag: vec![ZERO],
            b: CMatrix::from_row_slice(1, 2, &[C64::new(1.0, 0.0), ZERO]),
            c: CMatrix::from_element(3, 1, C64::new(1.0, 0.0)),
            lambda_ref: 0.0,
        };
        let h = r.evaluate(2.0).unwrap();
        for a in 0..3 {
            assert_eq!(h[(a, 0)], C64::new(0.5, 0.0));
            assert_eq!(h[(a, 1)], ZERO);
        }
        assert!(matches!(
            r.evaluate(0.0),
            Err(Error::NearPole { index: 0, .. })
        ));
    }

    #[test]
    fn evaluation_is_linear_in_c() {
        let (_, pencil, _) = oracle_pencil(3, 5, 3);
        let (r, _) = reduce_order(&pencil, 3).unwrap();
        let s = C64::new(-1.5, 0.25);
        let mut scaled = r.clone();
        scaled.c *= s;
        let f = 17.5;
        assert!(rel_diff(&scaled.evaluate(f).unwrap(), &(r.evaluate(f).unwrap() * s)) < 1e-15);
    }

    #[test]
    fn rank_of_oracle_and_zero() {
        let (_, pencil, _) = oracle_pencil(11, 8, 6);
        assert_eq!(numerical_rank(&pencil, 1e-8), 6);
        assert!(numerical_rank(&pencil, 1.0) <= 1);
        let mut zero = pencil.clone();
        zero.l.fill(ZERO);
        zero.l_sigma.fill(ZERO);
        assert_eq!(numerical_rank(&zero, 1e-8), 0);
    }

    #[test]
    fn discarded_energy_non_increasing_in_order() {
        let slice = synthesize_slice(
            &ChannelConfig {
                n_tx: 6,
                n_sub: 64,
                ..ChannelConfig::desk()
            }
            .with_seed(4),
        )
        .unwrap();
        let pencil = assemble_pencil(&build_sample_set(&slice, 16, 4).unwrap()).unwrap();
        let mut prev = f64::INFINITY;
        for r_f in 1..=6 {
            match reduce_order(&pencil, r_f) {
                Ok((_, d)) => {
                    assert!(d.discarded_energy <= prev);
                    prev = d.discarded_energy;
                }
                Err(Error::IllConditioned { .. }) | Err(Error::Defective { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn order_out_of_range() {
        let (_, pencil, _) = oracle_pencil(1, 4, 2);
        assert!(matches!(reduce_order(&pencil, 0), Err(Error::Config(_))));
        assert!(matches!(reduce_order(&pencil, 33), Err(Error::Config(_))));
    }

    #[test]
    fn right_permutation_keeps_poles() {
        let (gt, pencil, _) = oracle_pencil(21, 6, 4);
        let mut s = pencil.samples.clone();
        s.right.reverse();
        s.right.swap(0, 3);
        let p2 = assemble_pencil(&s).unwrap();
        let (r1, _) = reduce_order(&pencil, 4).unwrap();
        let (r2, _) = reduce_order(&p2, 4).unwrap();
        assert!(matched_pole_error(&r1.a_diag, &r2.a_diag) < 1e-8);
        assert!(matched_pole_error(&r2.a_diag, &gt.poles) < 1e-8);
    }
}

//! Dense complex linear-algebra helpers shared by the reduction and
//! transform stages: thin SVD with a fixed phase convention, complex
//! eigendecomposition, and the unitary DFT.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type RMatrix = DMatrix<f64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Thin SVD `a = u * diag(s) * v_h` with `s` sorted non-increasing.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v_h: CMatrix,
}

impl ThinSvd {
    /// Keep the leading `k` triplets.
    pub fn truncate(&self, k: usize) -> ThinSvd {
        ThinSvd {
            u: self.u.columns(0, k).into_owned(),
            s: self.s[..k].to_vec(),
            v_h: self.v_h.rows(0, k).into_owned(),
        }
    }

    pub fn rank(&self, rel_tol: f64) -> usize {
        match self.s.first() {
            Some(&s0) if s0 > 0.0 => self.s.iter().filter(|&&s| s > rel_tol * s0).count(),
            _ => 0,
        }
    }

    /// Rotate each singular pair so the largest-magnitude entry of every
    /// left singular vector is real and positive. The first index wins ties.
    pub fn normalize_phases(&mut self) {
        for k in 0..self.u.ncols() {
            let mut best = 0;
            let mut best_mag = -1.0;
            for i in 0..self.u.nrows() {
                let m = self.u[(i, k)].norm();
                if m > best_mag {
                    best_mag = m;
                    best = i;
                }
            }
            if best_mag <= 0.0 {
                continue;
            }
            let phase = self.u[(best, k)] / best_mag;
            let conj = phase.conj();
            self.u.column_mut(k).iter_mut().for_each(|z| *z *= conj);
            self.u[(best, k)] = C64::new(self.u[(best, k)].re, 0.0);
            self.v_h.row_mut(k).iter_mut().for_each(|z| *z *= phase);
        }
    }
}

/// Thin SVD of an arbitrary complex matrix.
///
/// Tall inputs are first reduced by a QR factorization so the bidiagonal
/// iteration only runs on the small triangular factor.
pub fn thin_svd(a: &CMatrix) -> ThinSvd {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return ThinSvd {
            u: CMatrix::zeros(m, 0),
            s: Vec::new(),
            v_h: CMatrix::zeros(0, n),
        };
    }
    if n > m {
        let t = thin_svd(&a.adjoint());
        return ThinSvd {
            u: t.v_h.adjoint(),
            s: t.s,
            v_h: t.u.adjoint(),
        };
    }
    if m >= 2 * n {
        let qr = a.clone().qr();
        let q = qr.q();
        let r = qr.r();
        let inner = svd_small(r);
        return ThinSvd {
            u: q * inner.u,
            s: inner.s,
            v_h: inner.v_h,
        };
    }
    svd_small(a.clone())
}

fn svd_small(a: CMatrix) -> ThinSvd {
    let svd = a.svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_h = svd.v_t.expect("right singular vectors requested");
    ThinSvd {
        u,
        s: svd.singular_values.iter().copied().collect(),
        v_h,
    }
}

/// Largest over smallest singular value; infinite for singular input.
pub fn condition_number(a: &CMatrix) -> f64 {
    let s = thin_svd(a).s;
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Eigenpairs of a general complex square matrix.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<C64>,
    /// Unit-norm eigenvectors stored column-wise.
    pub vectors: CMatrix,
}

/// Complex eigendecomposition through the Schur form `a = q t q^H`.
///
/// Eigenvectors of the triangular factor are obtained by back substitution;
/// tiny pivots are clamped the way LAPACK's `ztrevc` does.
pub fn eig(a: &CMatrix) -> Option<Eigen> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eig requires a square matrix");
    if n == 0 {
        return Some(Eigen {
            values: Vec::new(),
            vectors: CMatrix::zeros(0, 0),
        });
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 100 * n.max(10))?;
    let (q, t) = schur.unpack();
    let values: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();

    let scale = t
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * scale;
    let mut x = CMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        x[(k, k)] = ONE;
        for j in (0..k).rev() {
            let mut acc = ZERO;
            for i in (j + 1)..=k {
                acc += t[(j, i)] * x[(i, k)];
            }
            let mut pivot = t[(j, j)] - lambda;
            if pivot.norm() < small {
                pivot = C64::new(small, 0.0);
            }
            x[(j, k)] = -acc / pivot;
        }
    }
    let mut vectors = q * x;
    for k in 0..n {
        let nrm = vectors.column(k).norm();
        if nrm > 0.0 && nrm.is_finite() {
            vectors.column_mut(k).iter_mut().for_each(|z| *z /= nrm);
        } else {
            return None;
        }
    }
    Some(Eigen { values, vectors })
}

/// Unitary DFT matrix with entries `exp(-j 2 pi i k / n) / sqrt(n)`.
pub fn dft_matrix(n: usize) -> CMatrix {
    let norm = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(n, n, |i, k| {
        let idx = (i * k) % n;
        let ang = -2.0 * std::f64::consts::PI * idx as f64 / n as f64;
        C64::from_polar(norm, ang)
    })
}

/// Relative Frobenius distance `||a - b|| / ||b||` (absolute when `b` is zero).
pub fn rel_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    let d = (a - b).norm();
    let r = b.norm();
    if r > 0.0 {
        d / r
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(m: usize, n: usize, rng: &mut impl Rng) -> CMatrix {
        CMatrix::from_fn(m, n, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn thin_svd_reconstructs_all_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(m, n) in &[(40, 5), (7, 7), (5, 30), (9, 6), (1, 4)] {
            let a = random(m, n, &mut rng);
            let svd = thin_svd(&a);
            let k = m.min(n);
            assert_eq!(svd.u.shape(), (m, k));
            assert_eq!(svd.v_h.shape(), (k, n));
            assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
            let s = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                k,
                svd.s.iter().map(|&x| C64::new(x, 0.0)),
            ));
            let back = &svd.u * s * &svd.v_h;
            assert!(rel_diff(&back, &a) < 1e-12);
            let uu = svd.u.adjoint() * &svd.u;
            assert!(rel_diff(&uu, &CMatrix::identity(k, k)) < 1e-12);
        }
    }

    #[test]
    fn phase_normalization_keeps_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(4, 12, &mut rng);
        let mut svd = thin_svd(&a);
        svd.normalize_phases();
        for k in 0..4 {
            let col = svd.u.column(k);
            let (imax, _) = col.iter().enumerate().fold((0, -1.0), |acc, (i, z)| {
                if z.norm() > acc.1 {
                    (i, z.norm())
                } else {
                    acc
                }
            });
            assert_eq!(col[imax].im, 0.0);
            assert!(col[imax].re > 0.0);
        }
        let s = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            4,
            svd.s.iter().map(|&x| C64::new(x, 0.0)),
        ));
        assert!(rel_diff(&(&svd.u * s * &svd.v_h), &a) < 1e-12);
    }

    #[test]
    fn eig_satisfies_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1, 2, 5, 16] {
            let a = random(n, n, &mut rng);
            let e = eig(&a).unwrap();
            for k in 0..n {
                let v = e.vectors.column(k).into_owned();
                let res = (&a * &v - v.map(|z| z * e.values[k])).norm();
                assert!(res < 1e-11 * a.norm(), "n={n} k={k} res={res}");
            }
        }
    }

    #[test]
    fn dft_is_unitary() {
        let f = dft_matrix(8);
        let id = f.adjoint() * &f;
        assert!(rel_diff(&id, &CMatrix::identity(8, 8)) < 1e-14);
        assert!(
            (f[(1, 1)] - C64::from_polar(8f64.sqrt().recip(), -std::f64::consts::PI / 4.0)).norm()
                < 1e-15
        );
    }
}

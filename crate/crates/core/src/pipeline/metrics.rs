//! Reconstruction accuracy, spectral efficiency and feedback accounting.

use crate::channel::ChannelSlice;
use crate::error::{Error, Result};
use crate::linalg::{thin_svd, CMatrix};

/// Reported in place of `-inf` for an exact reconstruction.
pub const NMSE_DB_FLOOR: f64 = -300.0;

/// `||H_hat - H||^2 / ||H||^2`.
pub fn nmse(h: &CMatrix, h_hat: &CMatrix) -> Result<f64> {
    if h.shape() != h_hat.shape() {
        return Err(Error::Dimension(format!(
            "truth is {:?}, reconstruction is {:?}",
            h.shape(),
            h_hat.shape()
        )));
    }
    let den = h.norm_squared();
    if !(den > 0.0) {
        return Err(Error::Numerical("reference channel has zero norm".into()));
    }
    Ok((h_hat - h).norm_squared() / den)
}

/// Per-slice NMSE averaged over pairs.
pub fn nmse_many(pairs: &[(&ChannelSlice, &ChannelSlice)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InsufficientData("no slices to compare".into()));
    }
    let mut sum = 0.0;
    for (h, h_hat) in pairs {
        sum += nmse(&h.data, &h_hat.data)?;
    }
    Ok(sum / pairs.len() as f64)
}

pub fn nmse_db(linear: f64) -> f64 {
    if linear > 0.0 {
        (10.0 * linear.log10()).max(NMSE_DB_FLOOR)
    } else {
        NMSE_DB_FLOOR
    }
}

/// `l_t / (2 N_t r_f)`.
pub fn cr_spatial(l_t: usize, n_tx: usize, r_f: usize) -> f64 {
    l_t as f64 / (2 * n_tx * r_f) as f64
}

/// Complex feedback values `d = N_t r_f CR_s + 3 r_f`.
pub fn feedback_complex_count(n_tx: usize, r_f: usize, cr_s: f64) -> f64 {
    (n_tx * r_f) as f64 * cr_s + (3 * r_f) as f64
}

/// `d / (2 N_t N_f)`.
pub fn cr_overall(d: f64, n_tx: usize, n_sub: usize) -> f64 {
    d / (2 * n_tx * n_sub) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub nmse_db: f64,
    pub nmse_linear: f64,
    pub overhead_bits: f64,
    pub overhead_complex: f64,
    pub cr_spatial: f64,
    pub cr_overall: f64,
    pub se_bits_per_hz: Option<f64>,
}

impl MetricsReport {
    /// Accounting for an `(N_t, r_f, N_f, l_t)` configuration with the given
    /// measured NMSE and overhead.
    pub fn new(
        n_tx: usize,
        r_f: usize,
        n_sub: usize,
        l_t: usize,
        overhead_bits: f64,
        nmse_linear: f64,
        se_bits_per_hz: Option<f64>,
    ) -> Self {
        let cr_s = cr_spatial(l_t, n_tx, r_f);
        let d = feedback_complex_count(n_tx, r_f, cr_s);
        Self {
            nmse_db: nmse_db(nmse_linear),
            nmse_linear,
            overhead_bits,
            overhead_complex: d,
            cr_spatial: cr_s,
            cr_overall: cr_overall(d, n_tx, n_sub),
            se_bits_per_hz,
        }
    }
}

/// Interference term in the per-layer SINR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interference {
    /// Leakage of the other layers into layer `l`: `|u_l^H H v_j|^2`, `j != l`.
    #[default]
    CrossLeakage,
    /// The other layers' own gains `|u_j^H H v_j|^2`, `j != l`.
    OtherLayerGain,
}

impl std::str::FromStr for Interference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cross" | "cross-leakage" | "leakage" => Ok(Self::CrossLeakage),
            "other-gain" | "other-layer-gain" => Ok(Self::OtherLayerGain),
            _ => Err(Error::config(format!("unknown interference model {s:?}"))),
        }
    }
}

/// `N_r x 2N_t` matrix of subcarrier `k` across receive-antenna slices.
fn subcarrier_matrix(slices: &[ChannelSlice], k: usize) -> CMatrix {
    let cols = slices[0].data.nrows();
    CMatrix::from_fn(slices.len(), cols, |r, c| slices[r].data[(c, k)])
}

/// Mean over subcarriers of the summed per-layer `log2(1 + SINR)` with
/// combiners from the true channel, precoders from the reconstruction and
/// equal power per layer.
pub fn spectral_efficiency(
    h: &[ChannelSlice],
    h_hat: &[ChannelSlice],
    n_layers: usize,
    snr_db: f64,
    interference: Interference,
) -> Result<f64> {
    let Some(first) = h.first() else {
        return Err(Error::InsufficientData("no receive antennas".into()));
    };
    let (rows, n_sub) = first.data.shape();
    if h_hat.len() != h.len()
        || h.iter()
            .chain(h_hat)
            .any(|s| s.data.shape() != (rows, n_sub))
    {
        return Err(Error::Dimension(
            "true and reconstructed tensors differ in shape".into(),
        ));
    }
    if n_layers == 0 || n_layers > h.len().min(rows) {
        return Err(Error::config(format!(
            "{n_layers} layers exceed the rank bound min(N_r, 2N_t) = {}",
            h.len().min(rows)
        )));
    }
    if h.iter()
        .chain(h_hat)
        .any(|s| s.data.iter().any(|z| !z.is_finite()))
    {
        return Err(Error::Numerical("channel tensor is not finite".into()));
    }
    let noise = n_layers as f64 * 10f64.powf(-snr_db / 10.0);
    let mut total = 0.0;
    for k in 0..n_sub {
        let hf = subcarrier_matrix(h, k);
        let u = thin_svd(&hf).u;
        let v_hat = thin_svd(&subcarrier_matrix(h_hat, k)).v_h.adjoint();
        if u.ncols() < n_layers || v_hat.ncols() < n_layers {
            return Err(Error::config(format!(
                "subcarrier {} has fewer than {n_layers} layers",
                k + 1
            )));
        }
        // gain[(l, j)] = u_l^H H v_j
        let gain = u.columns(0, n_layers).adjoint() * &hf * v_hat.columns(0, n_layers);
        for l in 0..n_layers {
            let signal = gain[(l, l)].norm_sqr();
            let interf: f64 = (0..n_layers)
                .filter(|&j| j != l)
                .map(|j| match interference {
                    Interference::CrossLeakage => gain[(l, j)].norm_sqr(),
                    Interference::OtherLayerGain => gain[(j, j)].norm_sqr(),
                })
                .sum();
            let u_norm = u.column(l).norm_squared();
            total += (1.0 + signal / (interf + noise * u_norm)).log2();
        }
    }
    Ok(total / n_sub as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelConfig;
    use crate::linalg::C64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn slice(data: CMatrix) -> ChannelSlice {
        let config = ChannelConfig {
            n_tx: data.nrows() / 2,
            n_sub: data.ncols(),
            ..ChannelConfig::desk()
        };
        ChannelSlice { data, config }
    }

    fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    #[test]
    fn nmse_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random(4, 5, &mut rng);
        assert_eq!(nmse(&h, &h).unwrap(), 0.0);
        assert_eq!(nmse_db(0.0), NMSE_DB_FLOOR);
        assert!((nmse(&h, &CMatrix::zeros(4, 5)).unwrap() - 1.0).abs() < 1e-15);
        assert!((nmse(&h, &(&h * C64::new(2.0, 0.0))).unwrap() - 1.0).abs() < 1e-14);
        assert!(nmse_db(1.0).abs() < 1e-15);
        assert!(nmse(&CMatrix::zeros(4, 5), &h).is_err());
        assert!(nmse(&h, &CMatrix::zeros(4, 4)).is_err());
    }

    #[test]
    fn accounting() {
        let m = MetricsReport::new(32, 8, 256, 256, 1000.0, 1e-3, None);
        assert_eq!(m.cr_spatial, 0.5);
        assert_eq!(m.overhead_complex, 128.0 + 24.0);
        assert_eq!(m.cr_overall, 152.0 / (64.0 * 256.0));
        assert!((m.nmse_db + 30.0).abs() < 1e-12);
    }

    #[test]
    fn rank_one_matched_filter() {
        // one receive antenna: H_f is a row vector, capacity log2(1 + snr |h|^2)
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = slice(random(6, 3, &mut rng));
        let snr_db = 7.0;
        let snr = 10f64.powf(snr_db / 10.0);
        let expect: f64 = (0..3)
            .map(|k| (1.0 + snr * h.data.column(k).norm_squared()).log2())
            .sum::<f64>()
            / 3.0;
        let se = spectral_efficiency(
            std::slice::from_ref(&h),
            std::slice::from_ref(&h),
            1,
            snr_db,
            Interference::default(),
        )
        .unwrap();
        assert!((se - expect).abs() < 1e-12, "{se} vs {expect}");
        let low = spectral_efficiency(
            std::slice::from_ref(&h),
            std::slice::from_ref(&h),
            1,
            -200.0,
            Interference::default(),
        )
        .unwrap();
        assert!(low < 1e-6);
    }

    #[test]
    fn mismatched_precoder_loses_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let h: Vec<ChannelSlice> = (0..2).map(|_| slice(random(8, 4, &mut rng))).collect();
            let other: Vec<ChannelSlice> = (0..2).map(|_| slice(random(8, 4, &mut rng))).collect();
            let matched = spectral_efficiency(&h, &h, 2, 10.0, Interference::CrossLeakage).unwrap();
            let wrong =
                spectral_efficiency(&h, &other, 2, 10.0, Interference::CrossLeakage).unwrap();
            assert!(wrong < matched);
        }
    }

    #[test]
    fn layer_count_is_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = vec![slice(random(4, 2, &mut rng))];
        assert!(spectral_efficiency(&h, &h, 2, 0.0, Interference::default()).is_err());
        assert!(spectral_efficiency(&h, &h, 0, 0.0, Interference::default()).is_err());
    }
}

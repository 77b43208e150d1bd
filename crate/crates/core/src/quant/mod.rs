//! Scalar quantizers for the feedback codewords.
//!
//! Poles are bias-removed and quantized in polar form, the residue matrix
//! is normalized by its largest magnitude and quantized in polar form, and
//! the real codeword uses a uniform or mu-law quantizer. Range parameters
//! travel as exact side information.
//!
//! Magnitude-style quantizers place `2^b` levels on a closed interval, both
//! endpoints included, so the cell width is `(hi - lo) / (2^b - 1)`. Phase
//! quantizers split `[-pi, pi)` into `2^b` equal cells and reconstruct at the
//! cell centre, so the wrap at `+-pi` needs no special cell.

mod sensitivity;

pub use sensitivity::{
    calibrate_epsilon, gradient_g1, gradient_g2, hessian_sensitivity, percentile, robust_allocate,
    HessianNorms, SensitivityReport, BIT_CAP,
};

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

/// Codeword quantization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VScheme {
    Uniform,
    MuLaw,
}

impl VScheme {
    pub fn to_u8(self) -> u8 {
        match self {
            VScheme::Uniform => 0,
            VScheme::MuLaw => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(VScheme::Uniform),
            1 => Some(VScheme::MuLaw),
            _ => None,
        }
    }
}

impl std::fmt::Display for VScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VScheme::Uniform => "uniform",
            VScheme::MuLaw => "mulaw",
        })
    }
}

impl std::str::FromStr for VScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(VScheme::Uniform),
            "mulaw" | "mu-law" | "mu_law" => Ok(VScheme::MuLaw),
            other => Err(Error::config(format!("unknown codeword scheme {other:?}"))),
        }
    }
}

/// Bit widths and codeword scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantSpec {
    pub a_bits_mag: u8,
    pub a_bits_phase: u8,
    pub b_bits_mag: u8,
    pub b_bits_phase: u8,
    pub v_bits: u8,
    pub v_scheme: VScheme,
    pub mu: f64,
}

impl Default for QuantSpec {
    fn default() -> Self {
        Self {
            a_bits_mag: 8,
            a_bits_phase: 8,
            b_bits_mag: 8,
            b_bits_phase: 8,
            v_bits: 6,
            v_scheme: VScheme::MuLaw,
            mu: 255.0,
        }
    }
}

impl QuantSpec {
    /// Every field at `bits` with a uniform codeword quantizer.
    pub fn uniform(bits: u8) -> Self {
        Self {
            a_bits_mag: bits,
            a_bits_phase: bits,
            b_bits_mag: bits,
            b_bits_phase: bits,
            v_bits: bits,
            v_scheme: VScheme::Uniform,
            mu: 255.0,
        }
    }

    pub fn widths(&self) -> [u8; 5] {
        [
            self.a_bits_mag,
            self.a_bits_phase,
            self.b_bits_mag,
            self.b_bits_phase,
            self.v_bits,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, b) in [
            "a_bits_mag",
            "a_bits_phase",
            "b_bits_mag",
            "b_bits_phase",
            "v_bits",
        ]
        .iter()
        .zip(self.widths())
        {
            if !(1..=16).contains(&b) {
                return Err(Error::config(format!("{name} must be in [1, 16], got {b}")));
            }
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::config(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        Ok(())
    }

    /// Body bits for an order-`r_f` realization and `l_t` codeword entries.
    pub fn body_bits(&self, r_f: usize, l_t: usize) -> usize {
        r_f * (self.a_bits_mag + self.a_bits_phase) as usize
            + 2 * r_f * (self.b_bits_mag + self.b_bits_phase) as usize
            + l_t * self.v_bits as usize
    }
}

fn top(bits: u8) -> u32 {
    ((1u64 << bits) - 1) as u32
}

/// Width of one cell of the closed-interval quantizer; zero for a point range.
pub fn uniform_cell(lo: f64, hi: f64, bits: u8) -> f64 {
    (hi - lo) / top(bits) as f64
}

/// Width of one phase cell.
pub fn phase_cell(bits: u8) -> f64 {
    2.0 * PI / (1u64 << bits) as f64
}

pub fn uniform_code(x: f64, lo: f64, hi: f64, bits: u8) -> u32 {
    if !(hi > lo) {
        return 0;
    }
    let t = top(bits);
    let c = ((x - lo) / (hi - lo) * t as f64).round();
    c.clamp(0.0, t as f64) as u32
}

pub fn uniform_value(code: u32, lo: f64, hi: f64, bits: u8) -> f64 {
    let t = top(bits);
    if !(hi > lo) || code == 0 {
        lo
    } else if code >= t {
        hi
    } else {
        lo + (hi - lo) * (code as f64 / t as f64)
    }
}

pub fn phase_code(phi: f64, bits: u8) -> u32 {
    let n = 1u64 << bits;
    let c = ((phi + PI) / phase_cell(bits)).floor() as i64;
    c.rem_euclid(n as i64) as u32
}

pub fn phase_value(code: u32, bits: u8) -> f64 {
    -PI + (code as f64 + 0.5) * phase_cell(bits)
}

/// Distance between two angles on the circle.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// `sign(x) ln(1 + mu |x| / x_max) / ln(1 + mu)`.
pub fn compand(x: f64, x_max: f64, mu: f64) -> f64 {
    if x_max <= 0.0 {
        return 0.0;
    }
    x.signum() * (mu * x.abs() / x_max).ln_1p() / mu.ln_1p()
}

/// Inverse of [`compand`].
pub fn expand(y: f64, x_max: f64, mu: f64) -> f64 {
    if x_max <= 0.0 {
        return 0.0;
    }
    if y.abs() >= 1.0 {
        return y.signum() * x_max;
    }
    y.signum() * x_max * (y.abs() * mu.ln_1p()).exp_m1() / mu
}

/// Magnitude and phase codes of a polar-quantized complex vector.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PolarCodes {
    pub mag: Vec<u32>,
    pub phase: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AQuant {
    pub codes: PolarCodes,
    pub bias: C64,
    pub mag_min: f64,
    pub mag_max: f64,
}

pub fn quantize_a(a: &[C64], bits_mag: u8, bits_phase: u8) -> AQuant {
    let bias = if a.is_empty() {
        C64::new(0.0, 0.0)
    } else {
        a.iter().sum::<C64>() / a.len() as f64
    };
    let res: Vec<C64> = a.iter().map(|&z| z - bias).collect();
    let mag_min = res.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    let mag_max = res.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mag_min = if mag_min.is_finite() { mag_min } else { 0.0 };
    let codes = PolarCodes {
        mag: res
            .iter()
            .map(|z| uniform_code(z.norm(), mag_min, mag_max, bits_mag))
            .collect(),
        phase: res
            .iter()
            .map(|z| phase_code(z.arg(), bits_phase))
            .collect(),
    };
    AQuant {
        codes,
        bias,
        mag_min,
        mag_max,
    }
}

pub fn dequantize_a(q: &AQuant, bits_mag: u8, bits_phase: u8) -> Vec<C64> {
    q.codes
        .mag
        .iter()
        .zip(&q.codes.phase)
        .map(|(&m, &p)| {
            let r = uniform_value(m, q.mag_min, q.mag_max, bits_mag);
            q.bias + C64::from_polar(r, phase_value(p, bits_phase))
        })
        .collect()
}

/// Entries are coded row-major: entry `(k, pol)` sits at index `2k + pol`.
#[derive(Debug, Clone, PartialEq)]
pub struct BQuant {
    pub codes: PolarCodes,
    pub scale: f64,
}

pub fn quantize_b(b: &CMatrix, bits_mag: u8, bits_phase: u8) -> BQuant {
    let max = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scale = if max > 0.0 { max } else { 1.0 };
    let mut codes = PolarCodes::default();
    for k in 0..b.nrows() {
        for pol in 0..b.ncols() {
            let z = b[(k, pol)] / scale;
            codes.mag.push(uniform_code(z.norm(), 0.0, 1.0, bits_mag));
            codes.phase.push(phase_code(z.arg(), bits_phase));
        }
    }
    BQuant { codes, scale }
}

pub fn dequantize_b(q: &BQuant, n_rows: usize, bits_mag: u8, bits_phase: u8) -> CMatrix {
    let n_cols = q.codes.mag.len().checked_div(n_rows).unwrap_or(0);
    CMatrix::from_fn(n_rows, n_cols, |k, pol| {
        let i = k * n_cols + pol;
        let r = uniform_value(q.codes.mag[i], 0.0, 1.0, bits_mag);
        C64::from_polar(r * q.scale, phase_value(q.codes.phase[i], bits_phase))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VQuant {
    pub codes: Vec<u32>,
    pub min: f64,
    pub max: f64,
}

/// Observed range of `values`; `(0, 0)` when empty.
fn range(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

pub fn mu_law_peak(min: f64, max: f64) -> f64 {
    min.abs().max(max.abs())
}

pub fn quantize_v(values: &[f64], bits: u8, scheme: VScheme, mu: f64) -> VQuant {
    let (min, max) = range(values);
    if !(max > min) {
        return VQuant {
            codes: vec![0; values.len()],
            min,
            max,
        };
    }
    let codes = match scheme {
        VScheme::Uniform => values
            .iter()
            .map(|&x| uniform_code(x, min, max, bits))
            .collect(),
        VScheme::MuLaw => {
            let x_max = mu_law_peak(min, max);
            values
                .iter()
                .map(|&x| uniform_code(compand(x, x_max, mu), -1.0, 1.0, bits))
                .collect()
        }
    };
    VQuant { codes, min, max }
}

pub fn dequantize_v(q: &VQuant, bits: u8, scheme: VScheme, mu: f64) -> Vec<f64> {
    if !(q.max > q.min) {
        return vec![q.min; q.codes.len()];
    }
    match scheme {
        VScheme::Uniform => q
            .codes
            .iter()
            .map(|&c| uniform_value(c, q.min, q.max, bits))
            .collect(),
        VScheme::MuLaw => {
            let x_max = mu_law_peak(q.min, q.max);
            q.codes
                .iter()
                .map(|&c| expand(uniform_value(c, -1.0, 1.0, bits), x_max, mu).clamp(q.min, q.max))
                .collect()
        }
    }
}

/// All quantized feedback codewords of one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedCodewords {
    pub a: AQuant,
    pub b: BQuant,
    pub v: VQuant,
    pub spec: QuantSpec,
}

impl QuantizedCodewords {
    pub fn quantize(a_diag: &[C64], b: &CMatrix, v: &[f64], spec: QuantSpec) -> Self {
        Self {
            a: quantize_a(a_diag, spec.a_bits_mag, spec.a_bits_phase),
            b: quantize_b(b, spec.b_bits_mag, spec.b_bits_phase),
            v: quantize_v(v, spec.v_bits, spec.v_scheme, spec.mu),
            spec,
        }
    }

    pub fn order(&self) -> usize {
        self.a.codes.mag.len()
    }

    pub fn a_diag(&self) -> Vec<C64> {
        dequantize_a(&self.a, self.spec.a_bits_mag, self.spec.a_bits_phase)
    }

    pub fn b(&self) -> CMatrix {
        dequantize_b(
            &self.b,
            self.order(),
            self.spec.b_bits_mag,
            self.spec.b_bits_phase,
        )
    }

    pub fn v(&self) -> Vec<f64> {
        dequantize_v(&self.v, self.spec.v_bits, self.spec.v_scheme, self.spec.mu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn equal_poles_recover_exactly() {
        let a = vec![C64::new(3.0, -2.0); 5];
        let q = quantize_a(&a, 8, 8);
        assert_eq!(q.bias, a[0]);
        assert!(q.codes.mag.iter().all(|&c| c == 0));
        assert_eq!(dequantize_a(&q, 8, 8), a);
    }

    #[test]
    fn ring_poles_within_half_cell() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let centre = C64::new(120.0, 40.0);
        let a: Vec<C64> = (0..32)
            .map(|_| {
                centre + C64::from_polar(rng.random_range(5.0..9.0), rng.random_range(-PI..PI))
            })
            .collect();
        for bits in [1u8, 8] {
            let q = quantize_a(&a, bits, bits);
            let back = dequantize_a(&q, bits, bits);
            let mag_half = uniform_cell(q.mag_min, q.mag_max, bits) / 2.0;
            let ph_half = phase_cell(bits) / 2.0;
            for (x, y) in a.iter().zip(&back) {
                let (rx, ry) = (x - q.bias, y - q.bias);
                assert!((rx.norm() - ry.norm()).abs() <= mag_half * (1.0 + 1e-12));
                assert!(phase_distance(rx.arg(), ry.arg()) <= ph_half * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn full_scale_residue_hits_top_code() {
        let b = CMatrix::from_fn(3, 2, |k, p| C64::from_polar(2.5, 0.3 * (k + p) as f64));
        let q = quantize_b(&b, 8, 8);
        assert_eq!(q.scale, 2.5);
        assert!(q.codes.mag.iter().all(|&c| c == 255));
        let back = dequantize_b(&q, 3, 8, 8);
        for (x, y) in b.iter().zip(back.iter()) {
            assert!((x.norm() - y.norm()).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_residues_recover_exactly() {
        let b = CMatrix::zeros(4, 2);
        let q = quantize_b(&b, 5, 5);
        assert_eq!(q.scale, 1.0);
        assert!(q.codes.mag.iter().all(|&c| c == 0));
        assert_eq!(dequantize_b(&q, 4, 5, 5), b);
    }

    #[test]
    fn mu_law_origin_and_endpoints() {
        let v = [-3.0, 0.0, 1.0, 3.0];
        let q = quantize_v(&v, 6, VScheme::MuLaw, 255.0);
        assert_eq!(q.codes[1], 32);
        let back = dequantize_v(&q, 6, VScheme::MuLaw, 255.0);
        let half = uniform_cell(-1.0, 1.0, 6) / 2.0;
        assert!(compand(back[1], 3.0, 255.0).abs() <= half);
        assert_eq!(back[0], -3.0);
        assert_eq!(back[3], 3.0);
    }

    #[test]
    fn uniform_max_is_exact() {
        let v = [0.1, -0.7, 2.3, 1.1];
        let q = quantize_v(&v, 8, VScheme::Uniform, 255.0);
        assert_eq!(q.codes[2], 255);
        assert_eq!(dequantize_v(&q, 8, VScheme::Uniform, 255.0)[2], 2.3);
    }

    #[test]
    fn constant_codeword_is_exact() {
        for scheme in [VScheme::Uniform, VScheme::MuLaw] {
            for c in [0.0, -1.5] {
                let v = vec![c; 7];
                let q = quantize_v(&v, 4, scheme, 255.0);
                assert!(q.codes.iter().all(|&x| x == 0));
                assert_eq!(dequantize_v(&q, 4, scheme, 255.0), v);
            }
        }
    }

    #[test]
    fn phase_wraps_at_pi() {
        assert_eq!(phase_code(PI, 3), 0);
        assert_eq!(phase_code(-PI, 3), 0);
        assert!(phase_distance(phase_value(0, 3), PI) <= phase_cell(3) / 2.0 + 1e-15);
    }

    #[test]
    fn spec_validation() {
        assert!(QuantSpec::default().validate().is_ok());
        let mut s = QuantSpec {
            v_bits: 0,
            ..Default::default()
        };
        assert!(s.validate().is_err());
        s = QuantSpec::default();
        s.a_bits_phase = 17;
        assert!(s.validate().is_err());
        s = QuantSpec::default();
        s.mu = 0.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn body_bit_accounting() {
        let s = QuantSpec::default();
        assert_eq!(s.body_bits(8, 256) - s.body_bits(8, 17), (256 - 17) * 6);
        assert_eq!(s.body_bits(8, 0), 8 * 16 + 16 * 16);
    }
}

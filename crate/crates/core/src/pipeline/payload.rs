//! Feedback payload wire format.
//!
//! Header (little-endian): magic `LICSIP01`; `u16` version, `N_t`, `r_f`,
//! `N`, stride, `l_t`; five `u8` bit widths (pole magnitude, pole phase,
//! residue magnitude, residue phase, codeword); `u8` codeword scheme; eight
//! `f64` side-information values (pole bias real and imaginary, pole
//! magnitude min and max, residue scale, codeword min and max, mu).
//!
//! Body: five bit-packed fields in the same order as the widths, each
//! written most-significant bit first and zero-padded to a byte boundary.

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::quant::{AQuant, BQuant, PolarCodes, QuantSpec, QuantizedCodewords, VQuant, VScheme};
use crate::wire::{BitReader, BitWriter, ByteReader, ByteWriter};

pub const PAYLOAD_MAGIC: &[u8; 8] = b"LICSIP01";
const VERSION: u16 = 1;
pub const HEADER_BYTES: usize = 8 + 2 * 6 + 5 + 1 + 8 * 8;
/// Largest `N * stride` a payload may describe.
pub const MAX_SUBCARRIERS: usize = 1 << 16;
/// Side-information magnitudes are confined to `[SIDE_INFO_MIN, SIDE_INFO_MAX]`
/// (zero allowed where noted) so reconstruction arithmetic cannot overflow.
pub const SIDE_INFO_MAX: f64 = 1e64;
pub const SIDE_INFO_MIN: f64 = 1e-64;

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackPayload {
    pub n_tx: usize,
    pub r_f: usize,
    pub n_samples: usize,
    pub stride: usize,
    pub l_t: usize,
    pub codes: QuantizedCodewords,
}

fn u16_of(v: usize, what: &str) -> Result<u16> {
    u16::try_from(v)
        .map_err(|_| Error::config(format!("{what} = {v} does not fit the payload header")))
}

fn packed_bytes(count: usize, bits: u8) -> usize {
    (count * bits as usize).div_ceil(8)
}

impl FeedbackPayload {
    /// Subcarrier count the receiver reconstructs.
    pub fn n_sub(&self) -> usize {
        self.n_samples * self.stride
    }

    /// Header bits plus unpadded body bits.
    pub fn bit_count(&self) -> usize {
        HEADER_BYTES * 8 + self.codes.spec.body_bits(self.r_f, self.l_t)
    }

    /// Zero bits appended to reach byte boundaries.
    pub fn padding_bits(&self) -> usize {
        let s = &self.codes.spec;
        [
            (self.r_f, s.a_bits_mag),
            (self.r_f, s.a_bits_phase),
            (2 * self.r_f, s.b_bits_mag),
            (2 * self.r_f, s.b_bits_phase),
            (self.l_t, s.v_bits),
        ]
        .iter()
        .map(|&(n, b)| packed_bytes(n, b) * 8 - n * b as usize)
        .sum()
    }

    fn check_shape(&self) -> Result<()> {
        let c = &self.codes;
        let ok = c.a.codes.mag.len() == self.r_f
            && c.a.codes.phase.len() == self.r_f
            && c.b.codes.mag.len() == 2 * self.r_f
            && c.b.codes.phase.len() == 2 * self.r_f
            && c.v.codes.len() == self.l_t;
        if !ok {
            return Err(Error::Dimension(
                "code counts disagree with r_f and l_t".into(),
            ));
        }
        c.spec.validate()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.check_shape()?;
        let s = &self.codes.spec;
        let mut w = ByteWriter::new();
        w.bytes(PAYLOAD_MAGIC);
        w.u16(VERSION);
        w.u16(u16_of(self.n_tx, "N_t")?);
        w.u16(u16_of(self.r_f, "r_f")?);
        w.u16(u16_of(self.n_samples, "N")?);
        w.u16(u16_of(self.stride, "stride")?);
        w.u16(u16_of(self.l_t, "l_t")?);
        for b in s.widths() {
            w.u8(b);
        }
        w.u8(s.v_scheme.to_u8());
        let a = &self.codes.a;
        for x in [
            a.bias.re,
            a.bias.im,
            a.mag_min,
            a.mag_max,
            self.codes.b.scale,
            self.codes.v.min,
            self.codes.v.max,
            s.mu,
        ] {
            w.f64(x);
        }
        for (codes, bits) in [
            (&a.codes.mag, s.a_bits_mag),
            (&a.codes.phase, s.a_bits_phase),
            (&self.codes.b.codes.mag, s.b_bits_mag),
            (&self.codes.b.codes.phase, s.b_bits_phase),
            (&self.codes.v.codes, s.v_bits),
        ] {
            let mut bw = BitWriter::new();
            for &c in codes.iter() {
                if bits < 32 && c >> bits != 0 {
                    return Err(Error::config(format!(
                        "code {c} does not fit in {bits} bits"
                    )));
                }
                bw.put(c, bits);
            }
            w.bytes(&bw.finish());
        }
        Ok(w.into_inner())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.expect_magic(PAYLOAD_MAGIC)?;
        let version = r.u16("version")?;
        if version != VERSION {
            return Err(Error::format(
                8,
                format!("unsupported payload version {version}"),
            ));
        }
        let mut dims = [0usize; 5];
        for (d, name) in dims.iter_mut().zip(["N_t", "r_f", "N", "stride", "l_t"]) {
            *d = r.u16(name)? as usize;
        }
        let [n_tx, r_f, n_samples, stride, l_t] = dims;
        if n_tx == 0 || r_f == 0 || n_samples < 2 || stride == 0 || l_t == 0 {
            return Err(Error::format(10, format!("invalid dimensions {dims:?}")));
        }
        if n_samples * stride > MAX_SUBCARRIERS {
            return Err(Error::format(
                16,
                format!(
                    "N * stride = {} exceeds {MAX_SUBCARRIERS}",
                    n_samples * stride
                ),
            ));
        }
        if r_f >= 2 * n_samples {
            return Err(Error::format(
                12,
                format!("order {r_f} must be below 2N = {}", 2 * n_samples),
            ));
        }

        let mut widths = [0u8; 5];
        for (i, w) in widths.iter_mut().enumerate() {
            *w = r.u8("bit width")?;
            if !(1..=16).contains(w) {
                return Err(Error::format(
                    (20 + i) as u64,
                    format!("bit width {w} outside [1, 16]"),
                ));
            }
        }
        let scheme_byte = r.u8("codeword scheme")?;
        let v_scheme = VScheme::from_u8(scheme_byte)
            .ok_or_else(|| Error::format(25, format!("unknown codeword scheme {scheme_byte}")))?;

        let mut side = [0f64; 8];
        for (i, x) in side.iter_mut().enumerate() {
            *x = r.f64("side information")?;
            if !(x.is_finite() && x.abs() <= SIDE_INFO_MAX) {
                return Err(Error::format(
                    (26 + 8 * i) as u64,
                    format!("side information {x} out of range"),
                ));
            }
        }
        let [bias_re, bias_im, mag_min, mag_max, b_scale, v_min, v_max, mu] = side;
        let bad = |i: usize, what: &str| Err(Error::format((26 + 8 * i) as u64, what.to_string()));
        if !(mag_min >= 0.0 && mag_min <= mag_max) {
            return bad(2, "pole magnitude range is invalid");
        }
        if !(b_scale >= SIDE_INFO_MIN) {
            return bad(4, "residue scale must be positive");
        }
        if !(v_min <= v_max) {
            return bad(5, "codeword range is inverted");
        }
        if !(mu >= SIDE_INFO_MIN) {
            return bad(7, "mu must be positive");
        }

        let spec = QuantSpec {
            a_bits_mag: widths[0],
            a_bits_phase: widths[1],
            b_bits_mag: widths[2],
            b_bits_phase: widths[3],
            v_bits: widths[4],
            v_scheme,
            mu,
        };
        let mut fields: Vec<Vec<u32>> = Vec::with_capacity(5);
        for (count, bits) in [
            (r_f, widths[0]),
            (r_f, widths[1]),
            (2 * r_f, widths[2]),
            (2 * r_f, widths[3]),
            (l_t, widths[4]),
        ] {
            let start = r.position();
            let chunk = r.take(packed_bytes(count, bits), "packed codes")?;
            let mut br = BitReader::new(chunk);
            let codes: Vec<u32> = (0..count)
                .map(|_| br.get(bits).expect("chunk sized for codes"))
                .collect();
            if !br.padding_is_zero() {
                return Err(Error::format(
                    (start + chunk.len() - 1) as u64,
                    "non-zero padding bits",
                ));
            }
            fields.push(codes);
        }
        r.finish()?;

        let v_codes = fields.pop().unwrap();
        let b_phase = fields.pop().unwrap();
        let b_mag = fields.pop().unwrap();
        let a_phase = fields.pop().unwrap();
        let a_mag = fields.pop().unwrap();
        Ok(Self {
            n_tx,
            r_f,
            n_samples,
            stride,
            l_t,
            codes: QuantizedCodewords {
                a: AQuant {
                    codes: PolarCodes {
                        mag: a_mag,
                        phase: a_phase,
                    },
                    bias: C64::new(bias_re, bias_im),
                    mag_min,
                    mag_max,
                },
                b: BQuant {
                    codes: PolarCodes {
                        mag: b_mag,
                        phase: b_phase,
                    },
                    scale: b_scale,
                },
                v: VQuant {
                    codes: v_codes,
                    min: v_min,
                    max: v_max,
                },
                spec,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMatrix;

    fn sample() -> FeedbackPayload {
        let a: Vec<C64> = (0..3)
            .map(|k| C64::new(10.0 + k as f64, -(k as f64)))
            .collect();
        let b = CMatrix::from_fn(3, 2, |i, j| C64::new(i as f64 - 1.0, j as f64 + 0.5));
        let v = [0.3, -1.2, 2.0, 0.0, 0.7];
        let spec = QuantSpec {
            a_bits_mag: 5,
            a_bits_phase: 7,
            b_bits_mag: 3,
            b_bits_phase: 9,
            v_bits: 6,
            v_scheme: VScheme::MuLaw,
            mu: 255.0,
        };
        FeedbackPayload {
            n_tx: 4,
            r_f: 3,
            n_samples: 8,
            stride: 2,
            l_t: 5,
            codes: QuantizedCodewords::quantize(&a, &b, &v, spec),
        }
    }

    #[test]
    fn header_layout() {
        let p = sample();
        let bytes = p.to_bytes().unwrap();
        assert_eq!(&bytes[..8], PAYLOAD_MAGIC);
        assert_eq!(u16::from_le_bytes([bytes[10], bytes[11]]), 4);
        assert_eq!(HEADER_BYTES, 90);
        assert_eq!(&bytes[20..26], &[5, 7, 3, 9, 6, 1]);
        assert_eq!(f64::from_le_bytes(bytes[82..90].try_into().unwrap()), 255.0);
        let body = 2 + 3 + 3 + 7 + 4;
        assert_eq!(bytes.len(), HEADER_BYTES + body);
        assert_eq!(p.bit_count(), bytes.len() * 8 - p.padding_bits());
    }

    #[test]
    fn round_trip_is_canonical() {
        let p = sample();
        let bytes = p.to_bytes().unwrap();
        let back = FeedbackPayload::from_bytes(&bytes).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn rejects_malformed_input() {
        let bytes = sample().to_bytes().unwrap();
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(
            FeedbackPayload::from_bytes(&extra),
            Err(Error::Format { .. })
        ));
        assert!(matches!(
            FeedbackPayload::from_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::Format { .. })
        ));
        let mut width = bytes.clone();
        width[20] = 17;
        assert!(matches!(
            FeedbackPayload::from_bytes(&width),
            Err(Error::Format { offset: 20, .. })
        ));
        let mut pad = bytes.clone();
        let last = pad.len() - 1;
        pad[last] |= 1;
        assert!(matches!(
            FeedbackPayload::from_bytes(&pad),
            Err(Error::Format { .. })
        ));
        let mut nan = bytes.clone();
        nan[26..34].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(
            FeedbackPayload::from_bytes(&nan),
            Err(Error::Format { offset: 26, .. })
        ));
        let mut scheme = bytes;
        scheme[25] = 9;
        assert!(matches!(
            FeedbackPayload::from_bytes(&scheme),
            Err(Error::Format { offset: 25, .. })
        ));
    }

    #[test]
    fn prefix_length_changes_only_codeword_bits() {
        let p = sample();
        let mut short = p.clone();
        short.l_t = 2;
        short.codes.v.codes.truncate(2);
        assert_eq!(p.bit_count() - short.bit_count(), 3 * 6);
    }
}

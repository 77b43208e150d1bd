//! Overhead-versus-accuracy sweep over prefix lengths, orders and bit widths.

use std::io::Write;

use rayon::prelude::*;

use super::metrics::{nmse, spectral_efficiency, Interference, MetricsReport};
use super::{
    compress_codewords, decompress_slice, quantize_codewords, Codewords, PipelineParams, QuantMode,
};
use crate::channel::ChannelSlice;
use crate::error::{Error, ErrorKind, Result};
use crate::quant::QuantSpec;
use crate::rateless::RatelessCodec;

pub const CSV_HEADER: &str = "r_f,l_t,a_bits_mag,a_bits_phase,b_bits_mag,b_bits_phase,v_bits,v_scheme,\
slices,failures,overhead_bits,overhead_complex,cr_spatial,cr_overall,nmse_linear,nmse_db,se_bits_per_hz";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub l_t: Vec<usize>,
    pub r_f: Vec<usize>,
    pub specs: Vec<QuantSpec>,
    pub n_samples: usize,
    pub stride: usize,
    /// Consecutive slices grouped into one multi-antenna channel for the
    /// spectral efficiency; zero disables it.
    pub se_rx: usize,
    pub se_layers: usize,
    pub snr_db: f64,
    pub interference: Interference,
}

impl SweepGrid {
    pub fn desk() -> Self {
        let p = PipelineParams::desk();
        Self {
            l_t: vec![p.l_t],
            r_f: vec![p.r_f],
            specs: vec![QuantSpec::default()],
            n_samples: p.n_samples,
            stride: p.stride,
            se_rx: 1,
            se_layers: 1,
            snr_db: 10.0,
            interference: Interference::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.l_t.is_empty() || self.r_f.is_empty() || self.specs.is_empty() {
            return Err(Error::config("sweep grid is empty"));
        }
        if self.se_rx > 0 && (self.se_layers == 0 || self.se_layers > self.se_rx) {
            return Err(Error::config(format!(
                "{} layers do not fit {} receive antennas",
                self.se_layers, self.se_rx
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub r_f: usize,
    pub l_t: usize,
    pub spec: QuantSpec,
    pub slices: usize,
    /// Slices whose compression or reconstruction failed numerically.
    pub failures: usize,
    pub metrics: MetricsReport,
}

/// Numerical failures are counted per slice; anything else aborts.
fn tolerate<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if e.kind() == ErrorKind::Numerical => Ok(None),
        Err(e) => Err(e),
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// One row per `(r_f, l_t, spec)` cell, each aggregated over every slice.
/// `codecs` must contain one codec per order in the grid, matched by input
/// dimension.
pub fn evaluate_sweep(
    slices: &[ChannelSlice],
    codecs: &[RatelessCodec],
    grid: &SweepGrid,
) -> Result<Vec<SweepRow>> {
    grid.validate()?;
    let Some(first) = slices.first() else {
        return Err(Error::InsufficientData("dataset is empty".into()));
    };
    let n_tx = first.n_tx();
    let n_sub = grid.n_samples * grid.stride;
    let mut rows = Vec::new();
    for &r_f in &grid.r_f {
        let codec = codecs
            .iter()
            .find(|c| c.input_dim() == 2 * n_tx * r_f)
            .ok_or_else(|| {
                Error::config(format!(
                    "no codec with input dimension {} for r_f = {r_f}",
                    2 * n_tx * r_f
                ))
            })?;
        if let Some(&l) = grid.l_t.iter().find(|&&l| l == 0 || l > codec.m()) {
            return Err(Error::config(format!(
                "l_t = {l} outside [1, {}]",
                codec.m()
            )));
        }
        let full = PipelineParams {
            n_samples: grid.n_samples,
            stride: grid.stride,
            r_f,
            l_t: codec.m(),
            quant: QuantMode::Fixed(grid.specs[0]),
        };
        let analyzed: Vec<_> = slices
            .par_iter()
            .map(|s| tolerate(compress_codewords(s, codec, &full)))
            .collect::<Result<_>>()?;

        for &l_t in &grid.l_t {
            for &spec in &grid.specs {
                let results: Vec<Option<(usize, f64, ChannelSlice)>> = analyzed
                    .par_iter()
                    .zip(slices.par_iter())
                    .map(|(a, h)| {
                        let Some((cw, an)) = a else { return Ok(None) };
                        let cw = Codewords {
                            v: cw.v[..l_t].to_vec(),
                            ..cw.clone()
                        };
                        let (payload, _) = quantize_codewords(&cw, an, QuantMode::Fixed(spec))?;
                        let bits = payload.bit_count();
                        let Some(h_hat) = tolerate(decompress_slice(&payload, codec))? else {
                            return Ok(None);
                        };
                        let e = tolerate(nmse(&h.data, &h_hat.data))?;
                        Ok(e.map(|e| (bits, e, h_hat)))
                    })
                    .collect::<Result<_>>()?;

                let ok: Vec<_> = results.iter().flatten().collect();
                let se = if grid.se_rx > 0 {
                    let groups: Vec<f64> = slices
                        .chunks_exact(grid.se_rx)
                        .zip(results.chunks_exact(grid.se_rx))
                        .filter_map(|(h, r)| {
                            let hat: Option<Vec<ChannelSlice>> =
                                r.iter().map(|x| x.as_ref().map(|x| x.2.clone())).collect();
                            let hat = hat?;
                            spectral_efficiency(
                                h,
                                &hat,
                                grid.se_layers,
                                grid.snr_db,
                                grid.interference,
                            )
                            .ok()
                        })
                        .collect();
                    (!groups.is_empty()).then(|| mean(groups.into_iter()))
                } else {
                    None
                };
                rows.push(SweepRow {
                    r_f,
                    l_t,
                    spec,
                    slices: slices.len(),
                    failures: slices.len() - ok.len(),
                    metrics: MetricsReport::new(
                        n_tx,
                        r_f,
                        n_sub,
                        l_t,
                        mean(ok.iter().map(|x| x.0 as f64)),
                        mean(ok.iter().map(|x| x.1)),
                        se,
                    ),
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_csv(rows: &[SweepRow], out: &mut impl Write) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        let s = &r.spec;
        let m = &r.metrics;
        let se = m.se_bits_per_hz.map(|x| x.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.r_f,
            r.l_t,
            s.a_bits_mag,
            s.a_bits_phase,
            s.b_bits_mag,
            s.b_bits_phase,
            s.v_bits,
            s.v_scheme,
            r.slices,
            r.failures,
            m.overhead_bits,
            m.overhead_complex,
            m.cr_spatial,
            m.cr_overall,
            m.nmse_linear,
            m.nmse_db,
            se
        )?;
    }
    Ok(())
}

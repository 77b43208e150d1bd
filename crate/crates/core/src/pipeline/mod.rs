//! UE-side compression and BS-side reconstruction of one receive-antenna
//! slice, plus the metrics and sweep harness built on them.

mod metrics;
mod payload;
mod sweep;

pub use metrics::{
    cr_overall, cr_spatial, feedback_complex_count, nmse, nmse_db, nmse_many, spectral_efficiency,
    Interference, MetricsReport, NMSE_DB_FLOOR,
};
pub use payload::{
    FeedbackPayload, HEADER_BYTES, MAX_SUBCARRIERS, PAYLOAD_MAGIC, SIDE_INFO_MAX, SIDE_INFO_MIN,
};
pub use sweep::{evaluate_sweep, write_csv, SweepGrid, SweepRow, CSV_HEADER};

use rayon::prelude::*;

use crate::channel::{subcarrier_freqs, ChannelConfig, ChannelSlice};
use crate::error::{Error, Result, Stage, StageExt};
use crate::linalg::{CMatrix, C64};
use crate::loewner::{assemble_pencil, build_sample_set, sample_freqs};
use crate::mor::{reduce_order, ReducedRealization, ReductionDiagnostics};
use crate::quant::{robust_allocate, QuantSpec, QuantizedCodewords, SensitivityReport};
use crate::rateless::{CodecConfig, RatelessCodec};
use crate::transform::{
    build_gram, forward_transform, gram_factors, inverse_transform, TransformedBasis,
};

/// How pole, residue and codeword bit widths are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuantMode {
    Fixed(QuantSpec),
    /// Start at `spec` and raise pole/residue widths by `delta`
    /// (magnitude, phase) until `||G1|| < eps`.
    Robust {
        spec: QuantSpec,
        eps: f64,
        delta: (u8, u8),
    },
}

impl QuantMode {
    pub fn spec(&self) -> QuantSpec {
        match *self {
            QuantMode::Fixed(s) | QuantMode::Robust { spec: s, .. } => s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineParams {
    pub n_samples: usize,
    pub stride: usize,
    pub r_f: usize,
    pub l_t: usize,
    pub quant: QuantMode,
}

impl PipelineParams {
    pub fn desk() -> Self {
        Self {
            n_samples: 64,
            stride: 4,
            r_f: 8,
            l_t: 256,
            quant: QuantMode::Fixed(QuantSpec::default()),
        }
    }

    /// `N_t = 128`, `r_f = 32`, 275 samples at stride 12, `CR_s = 1/2`.
    pub fn paper_scale() -> Self {
        Self {
            n_samples: 275,
            stride: 12,
            r_f: 32,
            l_t: 4096,
            quant: QuantMode::Fixed(QuantSpec::default()),
        }
    }

    pub fn n_sub(&self) -> usize {
        self.n_samples * self.stride
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 || self.stride == 0 {
            return Err(Error::config(format!(
                "need at least 2 samples and a positive stride, got N = {} stride = {}",
                self.n_samples, self.stride
            )));
        }
        if self.n_sub() > MAX_SUBCARRIERS {
            return Err(Error::config(format!(
                "N * stride = {} exceeds {MAX_SUBCARRIERS}",
                self.n_sub()
            )));
        }
        if self.r_f == 0 || self.r_f >= 2 * self.n_samples {
            return Err(Error::config(format!(
                "r_f = {} must lie in [1, {})",
                self.r_f,
                2 * self.n_samples
            )));
        }
        if self.l_t == 0 {
            return Err(Error::config("l_t must be >= 1"));
        }
        match self.quant {
            QuantMode::Fixed(s) => s.validate(),
            QuantMode::Robust { spec, eps, .. } => {
                if !(eps > 0.0) {
                    return Err(Error::config(format!(
                        "robust threshold must be positive, got {eps}"
                    )));
                }
                spec.validate()
            }
        }
    }
}

/// Matching channel, pipeline and codec settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub channel: ChannelConfig,
    pub params: PipelineParams,
    pub codec: CodecConfig,
}

impl Profile {
    pub fn desk() -> Self {
        let channel = ChannelConfig::desk();
        let params = PipelineParams::desk();
        let codec = CodecConfig::desk(2 * channel.n_tx * params.r_f, params.l_t);
        Self {
            channel,
            params,
            codec,
        }
    }

    pub fn paper_scale() -> Self {
        let channel = ChannelConfig::paper_scale();
        let params = PipelineParams::paper_scale();
        let codec = CodecConfig::paper_scale(channel.n_tx, params.r_f);
        Self {
            channel,
            params,
            codec,
        }
    }
}

/// UE-side intermediate results for one slice.
#[derive(Debug, Clone)]
pub struct SliceAnalysis {
    pub realization: ReducedRealization,
    pub diagnostics: ReductionDiagnostics,
    pub basis: TransformedBasis,
    pub freqs: Vec<f64>,
}

/// Unquantized feedback: poles, residues and the codeword prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct Codewords {
    pub n_tx: usize,
    pub n_samples: usize,
    pub stride: usize,
    pub a_diag: Vec<C64>,
    /// `r_f x 2`
    pub b: CMatrix,
    pub v: Vec<f64>,
}

impl Codewords {
    pub fn r_f(&self) -> usize {
        self.a_diag.len()
    }

    pub fn l_t(&self) -> usize {
        self.v.len()
    }
}

/// Sampling, order reduction and basis transform.
pub fn analyze_slice(slice: &ChannelSlice, params: &PipelineParams) -> Result<SliceAnalysis> {
    params.validate()?;
    let samples =
        build_sample_set(slice, params.n_samples, params.stride).stage(Stage::Sampling)?;
    let pencil = assemble_pencil(&samples).stage(Stage::Pencil)?;
    let (realization, diagnostics) = reduce_order(&pencil, params.r_f).stage(Stage::Reduction)?;
    let freqs = sample_freqs(params.n_samples, params.stride);
    let gram = build_gram(&realization, &freqs).stage(Stage::Gram)?;
    let basis = forward_transform(&realization.c, &gram).stage(Stage::Transform)?;
    Ok(SliceAnalysis {
        realization,
        diagnostics,
        basis,
        freqs,
    })
}

/// Output bases `C5` of many slices, computed in parallel, in input order.
pub fn prepare_bases(slices: &[ChannelSlice], params: &PipelineParams) -> Vec<Result<CMatrix>> {
    slices
        .par_iter()
        .map(|s| analyze_slice(s, params).map(|a| a.basis.c5))
        .collect()
}

fn check_codec(codec: &RatelessCodec, n_tx: usize, r_f: usize) -> Result<()> {
    if codec.input_dim() != 2 * n_tx * r_f {
        return Err(Error::Dimension(format!(
            "codec input dimension {} does not match 2 * N_t * r_f = {}",
            codec.input_dim(),
            2 * n_tx * r_f
        )));
    }
    Ok(())
}

/// Everything up to and including the codeword prefix.
pub fn compress_codewords(
    slice: &ChannelSlice,
    codec: &RatelessCodec,
    params: &PipelineParams,
) -> Result<(Codewords, SliceAnalysis)> {
    params.validate()?;
    check_codec(codec, slice.n_tx(), params.r_f)?;
    let analysis = analyze_slice(slice, params)?;
    let cw = codec
        .encode(&analysis.basis.c5, params.l_t)
        .stage(Stage::Encode)?;
    Ok((
        Codewords {
            n_tx: slice.n_tx(),
            n_samples: params.n_samples,
            stride: params.stride,
            a_diag: analysis.realization.a_diag.clone(),
            b: analysis.realization.b.clone(),
            v: cw.values,
        },
        analysis,
    ))
}

/// Choose bit widths per `mode` and quantize.
pub fn quantize_codewords(
    cw: &Codewords,
    analysis: &SliceAnalysis,
    mode: QuantMode,
) -> Result<(FeedbackPayload, Option<SensitivityReport>)> {
    let (spec, report) = match mode {
        QuantMode::Fixed(spec) => (spec, None),
        QuantMode::Robust { spec, eps, delta } => {
            let rep = robust_allocate(
                &analysis.basis.c4,
                &cw.a_diag,
                &cw.b,
                &analysis.freqs,
                eps,
                spec,
                delta,
                None,
            )
            .stage(Stage::Allocate)?;
            (rep.final_spec, Some(rep))
        }
    };
    spec.validate().stage(Stage::Quantize)?;
    let codes = QuantizedCodewords::quantize(&cw.a_diag, &cw.b, &cw.v, spec);
    // a payload is only valid if its realization keeps full order
    let r_hat = ReducedRealization {
        a_diag: codes.a_diag(),
        b: codes.b(),
        c: CMatrix::zeros(0, 0),
        lambda_ref: 0.0,
    };
    build_gram(&r_hat, &analysis.freqs)
        .and_then(|g| gram_factors(&g))
        .stage(Stage::Quantize)?;
    Ok((
        FeedbackPayload {
            n_tx: cw.n_tx,
            r_f: cw.r_f(),
            n_samples: cw.n_samples,
            stride: cw.stride,
            l_t: cw.l_t(),
            codes,
        },
        report,
    ))
}

pub fn compress_slice_with_report(
    slice: &ChannelSlice,
    codec: &RatelessCodec,
    params: &PipelineParams,
) -> Result<(FeedbackPayload, Option<SensitivityReport>)> {
    let (cw, analysis) = compress_codewords(slice, codec, params)?;
    quantize_codewords(&cw, &analysis, params.quant)
}

pub fn compress_slice(
    slice: &ChannelSlice,
    codec: &RatelessCodec,
    params: &PipelineParams,
) -> Result<FeedbackPayload> {
    compress_slice_with_report(slice, codec, params).map(|(p, _)| p)
}

pub fn dequantize_payload(p: &FeedbackPayload) -> Codewords {
    Codewords {
        n_tx: p.n_tx,
        n_samples: p.n_samples,
        stride: p.stride,
        a_diag: p.codes.a_diag(),
        b: p.codes.b(),
        v: p.codes.v(),
    }
}

/// Decode, undo the basis change and evaluate at subcarriers `1..=N*stride`.
pub fn decompress_codewords(cw: &Codewords, codec: &RatelessCodec) -> Result<ChannelSlice> {
    if !codec.trained {
        return Err(Error::Untrained);
    }
    check_codec(codec, cw.n_tx, cw.r_f())?;
    let c5_hat = codec.decode_values(&cw.v, cw.n_tx).stage(Stage::Decode)?;
    let mut r_hat = ReducedRealization {
        a_diag: cw.a_diag.clone(),
        b: cw.b.clone(),
        c: CMatrix::zeros(0, 0),
        lambda_ref: 0.0,
    };
    let freqs = sample_freqs(cw.n_samples, cw.stride);
    r_hat.c = inverse_transform(&c5_hat, &r_hat, &freqs).stage(Stage::InverseTransform)?;
    let n_sub = cw.n_samples * cw.stride;
    let mut out = r_hat
        .evaluate_slice(&subcarrier_freqs(n_sub))
        .stage(Stage::Evaluate)?;
    if out.data.iter().any(|z| !z.is_finite()) {
        return Err(Error::Numerical("reconstruction is not finite".into())).stage(Stage::Evaluate);
    }
    out.config.n_tx = cw.n_tx;
    Ok(out)
}

/// Header dimensions are checked against the codec before any arithmetic;
/// a mismatch means the payload does not belong to this codec and is
/// reported as a format error.
pub fn decompress_slice(payload: &FeedbackPayload, codec: &RatelessCodec) -> Result<ChannelSlice> {
    if codec.input_dim() != 2 * payload.n_tx * payload.r_f {
        return Err(Error::format(
            10,
            format!(
                "header N_t = {}, r_f = {} does not match codec input dimension {}",
                payload.n_tx,
                payload.r_f,
                codec.input_dim()
            ),
        ))
        .stage(Stage::Parse);
    }
    if payload.l_t > codec.m() {
        return Err(Error::format(
            18,
            format!(
                "header l_t = {} exceeds codec length {}",
                payload.l_t,
                codec.m()
            ),
        ))
        .stage(Stage::Parse);
    }
    let cw = dequantize_payload(payload);
    decompress_codewords(&cw, codec).map_err(|e| match e {
        Error::Stage {
            stage: Stage::InverseTransform,
            ref source,
        } if matches!(**source, Error::RankDeficient { .. }) => Error::Stage {
            stage: Stage::Dequantize,
            source: Box::new(Error::format(
                HEADER_BYTES as u64,
                format!(
                    "poles and residues do not define an order-{} realization: {source}",
                    payload.r_f
                ),
            )),
        },
        e => e,
    })
}

/// Parse and decompress raw payload bytes.
pub fn decompress_bytes(bytes: &[u8], codec: &RatelessCodec) -> Result<ChannelSlice> {
    let payload = FeedbackPayload::from_bytes(bytes).stage(Stage::Parse)?;
    decompress_slice(&payload, codec)
}

//! Shared inputs for the benchmarks.

use licsi_core::channel::{synthesize_slice, ChannelConfig, ChannelSlice};
use licsi_core::pipeline::{PipelineParams, QuantMode};
use licsi_core::quant::QuantSpec;
use licsi_core::rateless::RatelessCodec;

/// One desk-scale slice (32 elements per polarization, 256 subcarriers).
pub fn desk_slice(seed: u64) -> ChannelSlice {
    synthesize_slice(&ChannelConfig::desk().with_seed(seed)).expect("desk channel")
}

/// Desk pipeline settings with an identity spatial codec, so the numbers
/// measure interpolation, reduction and quantization rather than training.
pub fn desk_identity() -> (PipelineParams, RatelessCodec) {
    let mut params = PipelineParams::desk();
    let codec = RatelessCodec::identity(2 * ChannelConfig::desk().n_tx * params.r_f);
    params.l_t = codec.m();
    params.quant = QuantMode::Fixed(QuantSpec::default());
    (params, codec)
}

//! Codec files.
//!
//! Layout: magic `LICSIC01`, `version u16, input_dim u32, M u32, n u32`,
//! `n` interval bounds as `u32` pairs, `u32` hidden-layer count and widths,
//! `f64` input scale, then every parameter as a little-endian `f64` in the
//! order of [`RatelessCodec::parameters`].

use std::fs;
use std::path::Path;

use super::{default_weights, net::Params, CodecConfig, RatelessCodec};
use crate::error::{Error, Result};
use crate::wire::{ByteReader, ByteWriter};

pub const CODEC_MAGIC: &[u8; 8] = b"LICSIC01";
const VERSION: u16 = 1;

fn u32_of(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::config(format!("{what} exceeds u32")))
}

pub fn write_codec(codec: &RatelessCodec) -> Result<Vec<u8>> {
    let cfg = &codec.config;
    let mut w = ByteWriter::new();
    w.bytes(CODEC_MAGIC);
    w.u16(VERSION);
    w.u32(u32_of(cfg.input_dim, "input_dim")?);
    w.u32(u32_of(cfg.m, "M")?);
    w.u32(u32_of(cfg.intervals.len(), "interval count")?);
    for &(lo, hi) in &cfg.intervals {
        w.u32(u32_of(lo, "interval bound")?);
        w.u32(u32_of(hi, "interval bound")?);
    }
    let hidden = codec.params().hidden_dims();
    w.u32(u32_of(hidden.len(), "hidden layer count")?);
    for h in hidden {
        w.u32(u32_of(h, "hidden width")?);
    }
    w.f64(codec.norm_scale);
    for p in codec.parameters() {
        w.f64(p);
    }
    Ok(w.into_inner())
}

pub fn read_codec(bytes: &[u8]) -> Result<RatelessCodec> {
    let mut r = ByteReader::new(bytes);
    r.expect_magic(CODEC_MAGIC)?;
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(Error::format(
            8,
            format!("unsupported codec version {version}"),
        ));
    }
    let input_dim = r.u32("input_dim")? as usize;
    let m = r.u32("M")? as usize;
    let at = r.position();
    let n = r.u32("interval count")? as usize;
    if n > r.remaining() / 8 {
        return Err(Error::format(
            at as u64,
            format!("interval count {n} exceeds file size"),
        ));
    }
    let mut intervals = Vec::with_capacity(n);
    for _ in 0..n {
        let lo = r.u32("interval bound")? as usize;
        let hi = r.u32("interval bound")? as usize;
        intervals.push((lo, hi));
    }
    let at = r.position();
    let n_hidden = r.u32("hidden layer count")? as usize;
    if n_hidden > r.remaining() / 4 {
        return Err(Error::format(
            at as u64,
            format!("hidden layer count {n_hidden} exceeds file size"),
        ));
    }
    let mut hidden_dims = Vec::with_capacity(n_hidden);
    for _ in 0..n_hidden {
        hidden_dims.push(r.u32("hidden width")? as usize);
    }
    let scale_at = r.position();
    let norm_scale = r.f64("input scale")?;
    if !(norm_scale.is_finite() && norm_scale > 0.0) {
        return Err(Error::format(
            scale_at as u64,
            format!("input scale {norm_scale} must be positive"),
        ));
    }

    let config = CodecConfig {
        input_dim,
        m,
        weights: default_weights(intervals.len()),
        intervals,
        hidden_dims,
        ..CodecConfig::training_defaults()
    };
    config
        .validate()
        .map_err(|e| Error::format(8, format!("invalid codec header: {e}")))?;

    let count = expected_len(&config, r.remaining()).ok_or_else(|| {
        Error::format(
            bytes.len() as u64,
            "truncated: header implies more parameters than the file holds",
        )
    })?;
    if r.remaining() != count * 8 {
        let offset = r.position() + count * 8;
        return Err(Error::format(
            offset as u64,
            format!("expected {count} parameters, found {} bytes", r.remaining()),
        ));
    }
    let mut flat = Vec::with_capacity(count);
    for _ in 0..count {
        let at = r.position();
        let v = r.f64("parameter")?;
        if !v.is_finite() {
            return Err(Error::format(at as u64, "non-finite parameter"));
        }
        flat.push(v);
    }
    r.finish()?;
    let mut params = Params::zeros(&config);
    params.set_flat(&flat);
    Ok(RatelessCodec::from_parts(config, params, norm_scale, true))
}

/// Parameter count implied by a config, `None` on overflow or when the
/// file could not possibly hold that many.
fn expected_len(cfg: &CodecConfig, available: usize) -> Option<usize> {
    let (d, m) = (cfg.input_dim, cfg.m);
    let mut n = m
        .checked_mul(d)?
        .checked_add(m)?
        .checked_add(d.checked_mul(m)?)?
        .checked_add(d)?;
    let mut fan_in = m;
    for &h in &cfg.hidden_dims {
        n = n.checked_add(h.checked_mul(fan_in)?)?.checked_add(h)?;
        fan_in = h;
    }
    if !cfg.hidden_dims.is_empty() {
        n = n.checked_add(d.checked_mul(fan_in)?)?;
    }
    (n <= available / 8).then_some(n)
}

pub fn save_codec(codec: &RatelessCodec, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_codec(codec)?)?;
    Ok(())
}

pub fn load_codec(path: impl AsRef<Path>) -> Result<RatelessCodec> {
    read_codec(&fs::read(path)?)
}

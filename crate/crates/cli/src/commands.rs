use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use licsi_core::channel::{
    load_dataset, save_dataset, subcarrier_freqs, synthesize_rational, synthesize_tensor,
    ChannelSlice, RationalGroundTruth,
};
use licsi_core::pipeline::{
    compress_codewords, compress_slice_with_report, decompress_bytes, evaluate_sweep, nmse,
    nmse_db, prepare_bases, quantize_codewords, spectral_efficiency, write_csv, Interference,
    PipelineParams, Profile, QuantMode, SweepGrid,
};
use licsi_core::quant::{calibrate_epsilon, QuantSpec, VScheme};
use licsi_core::rateless::{
    default_weights, load_codec, parse_intervals, save_codec, train, CodecConfig, RatelessCodec,
};
use licsi_core::{Error, ErrorKind, Result};

use crate::settings::Settings;

/// Slices used to calibrate an automatic robust threshold.
const CALIBRATION_SLICES: usize = 200;

fn profile(s: &Settings) -> Result<Profile> {
    match s.raw("profile").unwrap_or("desk") {
        "desk" => Ok(Profile::desk()),
        "paper" => Ok(Profile::paper_scale()),
        other => Err(Error::Config(format!(
            "unknown profile {other:?} (desk or paper)"
        ))),
    }
}

fn out_writer(s: &Settings) -> Result<Box<dyn Write>> {
    Ok(match s.raw("out") {
        Some(p) if p != "-" => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        _ => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

fn quant_spec(s: &Settings) -> Result<QuantSpec> {
    let v_bits = s.get_or("v_bits", QuantSpec::default().v_bits)?;
    quant_spec_with(s, v_bits)
}

/// Every width but `v_bits` from the settings.
fn quant_spec_with(s: &Settings, v_bits: u8) -> Result<QuantSpec> {
    let d = QuantSpec::default();
    let spec = QuantSpec {
        a_bits_mag: s.get_or("a_bits_mag", d.a_bits_mag)?,
        a_bits_phase: s.get_or("a_bits_phase", d.a_bits_phase)?,
        b_bits_mag: s.get_or("b_bits_mag", d.b_bits_mag)?,
        b_bits_phase: s.get_or("b_bits_phase", d.b_bits_phase)?,
        v_bits,
        v_scheme: s.get_or::<VScheme>("v_scheme", d.v_scheme)?,
        mu: s.get_or("mu", d.mu)?,
    };
    spec.validate()?;
    Ok(spec)
}

fn pipeline_params(
    s: &Settings,
    base: PipelineParams,
    codec: &RatelessCodec,
) -> Result<PipelineParams> {
    let p = PipelineParams {
        n_samples: s.get_or("n_samples", base.n_samples)?,
        stride: s.get_or("stride", base.stride)?,
        r_f: s.get_or("r_f", base.r_f)?,
        l_t: s.get_or("l_t", codec.m())?,
        quant: QuantMode::Fixed(quant_spec(s)?),
    };
    p.validate()?;
    Ok(p)
}

/// Fixed bits, or robust allocation with an explicit or calibrated threshold.
fn quant_mode(
    s: &Settings,
    params: &PipelineParams,
    slices: &[ChannelSlice],
    codec: &RatelessCodec,
) -> Result<QuantMode> {
    let spec = params.quant.spec();
    let Some(eps) = s.raw("robust_eps") else {
        return Ok(QuantMode::Fixed(spec));
    };
    let delta = (s.get_or("delta_mag", 2u8)?, s.get_or("delta_phase", 2u8)?);
    let eps = if eps == "auto" {
        let probe = QuantMode::Robust {
            spec,
            eps: f64::INFINITY,
            delta,
        };
        let mut norms = Vec::new();
        for slice in slices.iter().take(CALIBRATION_SLICES) {
            let Ok((cw, an)) = compress_codewords(slice, codec, params) else {
                continue;
            };
            if let Ok((_, Some(rep))) = quantize_codewords(&cw, &an, probe) {
                norms.push(rep.initial_g1_norm);
            }
        }
        let eps = calibrate_epsilon(&norms)?;
        eprintln!(
            "calibrated robust threshold {eps:e} from {} slices",
            norms.len()
        );
        eps
    } else {
        s.get::<f64>("robust_eps")?.unwrap()
    };
    if !(eps > 0.0) {
        return Err(Error::Config(format!(
            "robust_eps must be positive, got {eps}"
        )));
    }
    Ok(QuantMode::Robust { spec, eps, delta })
}

fn load_slices(s: &Settings) -> Result<Vec<ChannelSlice>> {
    let slices = load_dataset(s.require::<PathBuf>("data")?)?;
    if slices.is_empty() {
        return Err(Error::InsufficientData("dataset holds no slices".into()));
    }
    Ok(slices)
}

pub fn synth(s: &Settings) -> Result<()> {
    let mut cfg = profile(s)?.channel;
    cfg.seed = s.get_or("seed", cfg.seed)?;
    cfg.n_tx = s.get_or("n_tx", cfg.n_tx)?;
    cfg.n_sub = s.get_or("n_sub", cfg.n_sub)?;
    cfg.n_rx = s.get_or("n_rx", cfg.n_rx)?;
    cfg.n_paths = s.get_or("paths", cfg.n_paths)?;
    cfg.delay_spread = s.get_or("delay_spread", cfg.delay_spread)?;
    cfg.subcarrier_spacing = s.get_or("subcarrier_spacing", cfg.subcarrier_spacing)?;
    cfg.validate()?;
    let count: usize = s.get_or("count", 100)?;
    let out: PathBuf = s.require("out")?;

    let mut slices = Vec::new();
    match s.get::<usize>("rational_order")? {
        Some(order) => {
            if order == 0 {
                return Err(Error::Config("rational_order must be >= 1".into()));
            }
            let freqs = subcarrier_freqs(cfg.n_sub);
            for i in 0..count {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(i as u64));
                let gt = RationalGroundTruth::random(cfg.n_tx, order, cfg.n_sub, &mut rng);
                slices.push(synthesize_rational(&gt, &freqs)?);
            }
        }
        None => {
            for i in 0..count {
                slices.extend(synthesize_tensor(
                    &cfg.clone().with_seed(cfg.seed.wrapping_add(i as u64)),
                )?);
            }
        }
    }
    save_dataset(&slices, &out)?;
    eprintln!(
        "wrote {} slices of {}x{} to {}",
        slices.len(),
        2 * cfg.n_tx,
        cfg.n_sub,
        out.display()
    );
    Ok(())
}

pub fn train_cmd(s: &Settings) -> Result<()> {
    let prof = profile(s)?;
    let slices = load_slices(s)?;
    let n_tx = slices[0].n_tx();
    let out: PathBuf = s.require("out")?;
    let params = PipelineParams {
        n_samples: s.get_or("n_samples", prof.params.n_samples)?,
        stride: s.get_or("stride", prof.params.stride)?,
        r_f: s.get_or("r_f", prof.params.r_f)?,
        ..prof.params
    };
    params.validate()?;
    let m: usize = s.get_or("m", n_tx * params.r_f)?;
    let input_dim = 2 * n_tx * params.r_f;
    let mut cfg = if s.raw("profile") == Some("paper") {
        CodecConfig {
            input_dim,
            m,
            ..CodecConfig::paper_scale(n_tx, params.r_f)
        }
    } else if s.raw("intervals").is_none() && m < 32 {
        return Err(Error::Config(format!(
            "m = {m} is too short for the default intervals; set intervals"
        )));
    } else {
        CodecConfig::desk(input_dim, m.max(32))
    };
    cfg.m = m;
    if let Some(iv) = s.raw("intervals") {
        cfg.intervals = parse_intervals(iv)?;
        cfg.weights = default_weights(cfg.intervals.len());
    }
    if let Some(h) = s.list::<usize>("hidden")? {
        cfg.hidden_dims = h;
    }
    cfg.epochs = s.get_or("epochs", cfg.epochs)?;
    cfg.batch_size = s.get_or("batch_size", cfg.batch_size)?;
    cfg.lr_max = s.get_or("lr_max", cfg.lr_max)?;
    cfg.lr_min = s.get_or("lr_min", cfg.lr_min)?;
    cfg.seed = s.get_or("seed", cfg.seed)?;
    cfg.validate()?;

    let mut bases = Vec::with_capacity(slices.len());
    let mut skipped = 0;
    for r in prepare_bases(&slices, &params) {
        match r {
            Ok(c5) => bases.push(c5),
            Err(e) if e.kind() == ErrorKind::Numerical => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if skipped > 0 {
        eprintln!("skipped {skipped} slices that failed reduction");
    }
    let (codec, report) = train(&bases, cfg)?;
    save_codec(&codec, &out)?;
    eprintln!(
        "trained on {} slices, {} steps, final loss {:.4e}; wrote {}",
        bases.len(),
        report.steps,
        report.loss_history.last().copied().unwrap_or(f64::NAN),
        out.display()
    );
    Ok(())
}

pub fn compress(s: &Settings) -> Result<()> {
    let prof = profile(s)?;
    let slices = load_slices(s)?;
    let codec = load_codec(s.require::<PathBuf>("codec")?)?;
    let mut params = pipeline_params(s, prof.params, &codec)?;
    params.quant = quant_mode(s, &params, &slices, &codec)?;

    let targets: Vec<(usize, PathBuf)> = match (s.raw("out"), s.raw("out_dir")) {
        (_, Some(dir)) => {
            fs::create_dir_all(dir)?;
            (0..slices.len())
                .map(|i| (i, Path::new(dir).join(format!("payload_{i:05}.bin"))))
                .collect()
        }
        (Some(out), None) => {
            let i: usize = s.get_or("index", 0)?;
            if i >= slices.len() {
                return Err(Error::Config(format!(
                    "index {i} out of range ({} slices)",
                    slices.len()
                )));
            }
            vec![(i, PathBuf::from(out))]
        }
        (None, None) => return Err(Error::Config("compress needs --out or --out-dir".into())),
    };
    for (i, path) in targets {
        let (payload, report) = compress_slice_with_report(&slices[i], &codec, &params)?;
        fs::write(&path, payload.to_bytes()?)?;
        let extra = report
            .map(|r| format!(", |G1| {:.3e} after {} steps", r.g1_norm, r.iterations))
            .unwrap_or_default();
        eprintln!(
            "slice {i}: {} bits{extra} -> {}",
            payload.bit_count(),
            path.display()
        );
    }
    Ok(())
}

pub fn decompress(s: &Settings) -> Result<()> {
    let codec = load_codec(s.require::<PathBuf>("codec")?)?;
    let bytes = fs::read(s.require::<PathBuf>("payload")?)?;
    let out: PathBuf = s.require("out")?;
    let h = decompress_bytes(&bytes, &codec)?;
    save_dataset(&[h], &out)?;
    eprintln!("wrote reconstruction to {}", out.display());
    Ok(())
}

fn se_settings(s: &Settings) -> Result<(f64, Interference)> {
    Ok((
        s.get_or("snr_db", 10.0)?,
        s.get_or("interference", Interference::default())?,
    ))
}

pub fn eval(s: &Settings) -> Result<()> {
    let prof = profile(s)?;
    let slices = load_slices(s)?;
    let codec = load_codec(s.require::<PathBuf>("codec")?)?;
    let mut params = pipeline_params(s, prof.params, &codec)?;
    params.quant = quant_mode(s, &params, &slices, &codec)?;
    let (snr_db, interference) = se_settings(s)?;

    let mut out = out_writer(s)?;
    writeln!(
        out,
        "index,status,overhead_bits,nmse_linear,nmse_db,se_bits_per_hz"
    )?;
    for (i, h) in slices.iter().enumerate() {
        let result = compress_slice_with_report(h, &codec, &params).and_then(|(payload, _)| {
            let bits = payload.bit_count();
            let h_hat = decompress_bytes(&payload.to_bytes()?, &codec)?;
            let e = nmse(&h.data, &h_hat.data)?;
            let se =
                spectral_efficiency(std::slice::from_ref(h), &[h_hat], 1, snr_db, interference)?;
            Ok((bits, e, se))
        });
        match result {
            Ok((bits, e, se)) => writeln!(out, "{i},ok,{bits},{e},{},{se}", nmse_db(e))?,
            Err(e) if e.kind() == ErrorKind::Numerical => {
                eprintln!("slice {i}: {e}");
                writeln!(out, "{i},failed,,,,")?
            }
            Err(e) => return Err(e),
        }
    }
    out.flush()?;
    Ok(())
}

pub fn sweep(s: &Settings) -> Result<()> {
    let prof = profile(s)?;
    let slices = load_slices(s)?;
    let codec_paths = s
        .list::<PathBuf>("codec")?
        .filter(|v| !v.is_empty())
        .ok_or_else(|| Error::Config("missing required setting --codec".into()))?;
    let codecs = codec_paths
        .iter()
        .map(load_codec)
        .collect::<Result<Vec<_>>>()?;
    let v_bits = s
        .list::<u8>("v_bits")?
        .unwrap_or_else(|| vec![QuantSpec::default().v_bits]);
    let specs = v_bits
        .into_iter()
        .map(|b| quant_spec_with(s, b))
        .collect::<Result<Vec<_>>>()?;
    let (snr_db, interference) = se_settings(s)?;
    let grid = SweepGrid {
        l_t: s.list("l_t")?.unwrap_or_else(|| vec![codecs[0].m()]),
        r_f: s.list("r_f")?.unwrap_or_else(|| vec![prof.params.r_f]),
        specs,
        n_samples: s.get_or("n_samples", prof.params.n_samples)?,
        stride: s.get_or("stride", prof.params.stride)?,
        se_rx: s.get_or("se_rx", 1)?,
        se_layers: s.get_or("se_layers", 1)?,
        snr_db,
        interference,
    };
    let rows = evaluate_sweep(&slices, &codecs, &grid)?;
    let mut out = out_writer(s)?;
    write_csv(&rows, &mut out)?;
    out.flush()?;
    Ok(())
}

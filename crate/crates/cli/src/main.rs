#![allow(clippy::neg_cmp_op_on_partial_ord)]
mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgMatches, Command};

use licsi_core::{Error, ErrorKind, Result};
use settings::{load_config, normalize, Settings};

const EXIT_IO: u8 = 1;
const EXIT_FORMAT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_CONFIG: u8 = 4;

const CHANNEL: &[(&str, &str)] = &[
    ("count", "channel realizations to draw"),
    ("n-tx", "transmit elements per polarization"),
    ("n-sub", "subcarriers"),
    ("n-rx", "receive antennas per realization"),
    ("paths", "propagation paths"),
    ("delay-spread", "RMS delay spread in seconds"),
    ("subcarrier-spacing", "subcarrier spacing in Hz"),
    (
        "rational-order",
        "draw rational channels of this order instead",
    ),
];

const PIPELINE: &[(&str, &str)] = &[
    ("n-samples", "frequency samples N"),
    ("stride", "subcarrier stride between samples"),
    ("r-f", "reduced order"),
    ("l-t", "transmitted codeword prefix length"),
];

const QUANT: &[(&str, &str)] = &[
    ("a-bits-mag", "pole magnitude bits"),
    ("a-bits-phase", "pole phase bits"),
    ("b-bits-mag", "residue magnitude bits"),
    ("b-bits-phase", "residue phase bits"),
    ("v-bits", "codeword bits (comma list for sweep)"),
    ("v-scheme", "codeword quantizer: uniform or mulaw"),
    ("mu", "mu-law parameter"),
    (
        "robust-eps",
        "enable robust allocation with this |G1| threshold, or 'auto'",
    ),
    ("delta-mag", "magnitude bits added per robust step"),
    ("delta-phase", "phase bits added per robust step"),
];

const TRAIN: &[(&str, &str)] = &[
    ("m", "full codeword length M"),
    ("intervals", "mask intervals, e.g. 17-76,77-136"),
    (
        "hidden",
        "hidden widths of the decoder branch, comma separated",
    ),
    ("epochs", "training epochs"),
    ("batch-size", "minibatch size"),
    ("lr-max", "initial learning rate"),
    ("lr-min", "final learning rate"),
];

const METRICS: &[(&str, &str)] = &[
    ("snr-db", "SNR for spectral efficiency"),
    (
        "interference",
        "SINR interference model: cross-leakage or other-layer-gain",
    ),
];

fn args(list: &[(&'static str, &'static str)]) -> Vec<Arg> {
    list.iter()
        .map(|&(name, help)| {
            let arg = Arg::new(name).long(name).value_name("VALUE").help(help);
            match settings::alias_of(name) {
                Some(alias) => arg.visible_alias(alias),
                None => arg,
            }
        })
        .collect()
}

fn path_arg(name: &'static str, help: &'static str) -> Arg {
    Arg::new(name).long(name).value_name("PATH").help(help)
}

fn cli() -> Command {
    let common = [
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .global(true)
            .help("key = value settings; flags take precedence"),
        Arg::new("profile")
            .long("profile")
            .value_name("NAME")
            .global(true)
            .help("default settings: desk or paper"),
        Arg::new("seed")
            .long("seed")
            .value_name("VALUE")
            .global(true)
            .help("random seed"),
    ];
    let out = path_arg("out", "output file");
    Command::new("licsi")
        .about("Wideband CSI compression with Loewner interpolation and a rateless spatial codec")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .args(common)
        .subcommand(
            Command::new("synth")
                .about("Synthesize a channel dataset")
                .args(args(CHANNEL))
                .arg(out.clone()),
        )
        .subcommand(
            Command::new("train")
                .about("Train a rateless codec on a dataset")
                .arg(path_arg("data", "dataset file"))
                .args(args(PIPELINE))
                .args(args(TRAIN))
                .arg(out.clone()),
        )
        .subcommand(
            Command::new("compress")
                .about("Compress dataset slices into feedback payloads")
                .arg(path_arg("data", "dataset file"))
                .arg(path_arg("codec", "codec file"))
                .args(args(PIPELINE))
                .args(args(QUANT))
                .arg(Arg::new("index").long("index").value_name("VALUE").help("slice to compress with --out"))
                .arg(out.clone())
                .arg(path_arg("out-dir", "write one payload per slice here")),
        )
        .subcommand(
            Command::new("decompress")
                .about("Reconstruct a slice from a payload")
                .arg(path_arg("payload", "payload file"))
                .arg(path_arg("codec", "codec file"))
                .arg(out.clone()),
        )
        .subcommand(
            Command::new("eval")
                .about("Per-slice overhead, NMSE and spectral efficiency as CSV")
                .arg(path_arg("data", "dataset file"))
                .arg(path_arg("codec", "codec file"))
                .args(args(PIPELINE))
                .args(args(QUANT))
                .args(args(METRICS))
                .arg(out.clone()),
        )
        .subcommand(
            Command::new("sweep")
                .about("Aggregate metrics over a grid of prefix lengths, orders and codeword bits as CSV")
                .arg(path_arg("data", "dataset file"))
                .arg(path_arg("codec", "codec files, comma separated, one per order"))
                .args(args(PIPELINE))
                .args(args(QUANT))
                .args(args(METRICS))
                .arg(Arg::new("se-rx").long("se-rx").value_name("VALUE").help("consecutive slices per spectral-efficiency channel (0 disables)"))
                .arg(Arg::new("se-layers").long("se-layers").value_name("VALUE").help("spatial layers"))
                .arg(out),
        )
}

fn flag_values(m: &ArgMatches) -> Vec<(String, String)> {
    m.ids()
        .filter(|id| id.as_str() != "config")
        .filter_map(|id| {
            let v = m.get_one::<String>(id.as_str())?;
            Some((normalize(id.as_str()), v.clone()))
        })
        .collect()
}

fn run(m: &ArgMatches) -> Result<()> {
    let (name, sub) = m.subcommand().expect("subcommand required");
    let config_path = sub
        .get_one::<String>("config")
        .or_else(|| m.get_one::<String>("config"));
    let config = match config_path {
        Some(p) => load_config(&PathBuf::from(p))?,
        None => Default::default(),
    };
    let mut flags = flag_values(m);
    flags.extend(flag_values(sub));
    let s = Settings::new(config, flags);
    match name {
        "synth" => commands::synth(&s),
        "train" => commands::train_cmd(&s),
        "compress" => commands::compress(&s),
        "decompress" => commands::decompress(&s),
        "eval" => commands::eval(&s),
        "sweep" => commands::sweep(&s),
        other => Err(Error::Config(format!("unknown command {other}"))),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Format => EXIT_FORMAT,
        ErrorKind::Numerical => EXIT_NUMERICAL,
        ErrorKind::Config => EXIT_CONFIG,
        ErrorKind::Io => EXIT_IO,
    }
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("licsi: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_definition_is_valid() {
        cli().debug_assert();
    }

    #[test]
    fn every_flag_is_a_config_key() {
        let c = cli();
        for sub in c.get_subcommands() {
            for a in sub.get_arguments().chain(c.get_arguments()) {
                let id = normalize(a.get_id().as_str());
                if id != "config" {
                    assert!(settings::KNOWN_KEYS.contains(&id.as_str()), "{id}");
                }
            }
        }
    }
}

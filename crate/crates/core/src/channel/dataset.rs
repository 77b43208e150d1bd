//! Binary dataset files.
//!
//! Layout: magic `LICSID01`, then `version u16, count u32, n_tx u16,
//! n_pol u8, n_sub u32, seed u64`, then each slice row-major as
//! interleaved little-endian `f64` real/imaginary pairs.

use std::fs;
use std::path::Path;

use crate::channel::{ChannelConfig, ChannelSlice};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::wire::{ByteReader, ByteWriter};

pub const DATASET_MAGIC: &[u8; 8] = b"LICSID01";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 8 + 2 + 4 + 2 + 1 + 4 + 8;

/// Serialize slices into the dataset byte layout.
pub fn write_dataset(slices: &[ChannelSlice]) -> Result<Vec<u8>> {
    let (n_tx, n_sub, seed) = match slices.first() {
        Some(s) => (s.n_tx(), s.n_sub(), s.config.seed),
        None => (0, 0, 0),
    };
    for (i, s) in slices.iter().enumerate() {
        if s.n_tx() != n_tx || s.n_sub() != n_sub || s.data.nrows() != 2 * n_tx {
            return Err(Error::Dimension(format!(
                "slice {i} is {:?}, expected {}x{}",
                s.data.shape(),
                2 * n_tx,
                n_sub
            )));
        }
    }
    let n_tx16 = u16::try_from(n_tx).map_err(|_| Error::config("n_tx exceeds u16"))?;
    let n_sub32 = u32::try_from(n_sub).map_err(|_| Error::config("n_sub exceeds u32"))?;
    let count = u32::try_from(slices.len()).map_err(|_| Error::config("too many slices"))?;

    let mut w = ByteWriter::new();
    w.bytes(DATASET_MAGIC);
    w.u16(VERSION);
    w.u32(count);
    w.u16(n_tx16);
    w.u8(2);
    w.u32(n_sub32);
    w.u64(seed);
    for s in slices {
        for r in 0..s.data.nrows() {
            for c in 0..s.data.ncols() {
                let z = s.data[(r, c)];
                w.f64(z.re);
                w.f64(z.im);
            }
        }
    }
    Ok(w.into_inner())
}

/// Parse the dataset byte layout.
pub fn read_dataset(bytes: &[u8]) -> Result<Vec<ChannelSlice>> {
    let mut r = ByteReader::new(bytes);
    r.expect_magic(DATASET_MAGIC)?;
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(Error::format(
            8,
            format!("unsupported dataset version {version}"),
        ));
    }
    let count = r.u32("count")? as usize;
    let n_tx = r.u16("n_tx")? as usize;
    let n_pol = r.u8("n_pol")?;
    if n_pol != 2 {
        return Err(Error::format(16, format!("n_pol must be 2, got {n_pol}")));
    }
    let n_sub = r.u32("n_sub")? as usize;
    let seed = r.u64("seed")?;
    debug_assert_eq!(r.position(), HEADER_LEN);

    let per_slice = (2 * n_tx)
        .checked_mul(n_sub)
        .and_then(|n| n.checked_mul(16))
        .ok_or_else(|| Error::format(HEADER_LEN as u64, "slice size overflows"))?;
    let needed = per_slice
        .checked_mul(count)
        .ok_or_else(|| Error::format(HEADER_LEN as u64, "payload size overflows"))?;
    if r.remaining() < needed {
        return Err(Error::format(
            bytes.len() as u64,
            format!(
                "truncated payload: header declares {needed} bytes, {} present",
                r.remaining()
            ),
        ));
    }

    let config = ChannelConfig {
        n_tx,
        n_sub,
        n_rx: 1,
        seed,
        ..ChannelConfig::desk()
    };
    let mut slices = Vec::with_capacity(count);
    for _ in 0..count {
        let mut data = CMatrix::zeros(2 * n_tx, n_sub);
        for row in 0..2 * n_tx {
            for col in 0..n_sub {
                let re = r.f64("element")?;
                let im = r.f64("element")?;
                data[(row, col)] = C64::new(re, im);
            }
        }
        slices.push(ChannelSlice {
            data,
            config: config.clone(),
        });
    }
    r.finish()?;
    Ok(slices)
}

pub fn save_dataset(slices: &[ChannelSlice], path: impl AsRef<Path>) -> Result<()> {
    let bytes = write_dataset(slices)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<ChannelSlice>> {
    let bytes = fs::read(path)?;
    read_dataset(&bytes)
}

//! Binary slab layout (all integers little-endian u64):
//!
//! ```text
//! offset  field
//! 0       magic  b"PLSLAB\0\x01"
//! 8       n                     number of layers
//! 16      L                     half-width
//! 24      d                     dimension
//! 32      p                     f64::to_bits(p)
//! 40      master_seed
//! 48      flags                 bit 0: synthetic
//! 56      layer_seeds[n]
//! ...     n layers, each ceil((2L+1)^d / 64) words; bit (c % 64) of
//!         word (c / 64) is eta at row-major cell c
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EnvSlab, Window};
use crate::error::{Error, Result};
use crate::params::ModelParams;

pub const SLAB_MAGIC: [u8; 8] = *b"PLSLAB\0\x01";
const FLAG_SYNTHETIC: u64 = 1;

/// JSON sidecar written next to a binary slab.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlabSidecar {
    pub format: String,
    pub n: usize,
    pub half_width: i64,
    pub d: usize,
    pub p: Option<f64>,
    pub master_seed: u64,
    pub synthetic: bool,
    pub params: Option<ModelParams>,
}

impl SlabSidecar {
    pub fn new(slab: &EnvSlab, params: Option<ModelParams>) -> Self {
        SlabSidecar {
            format: "polymerlab-slab/1".into(),
            n: slab.n,
            half_width: slab.window.half_width,
            d: slab.window.d,
            p: slab.p.is_finite().then_some(slab.p),
            master_seed: slab.master_seed,
            synthetic: slab.synthetic,
            params,
        }
    }
}

pub fn write_slab<W: Write>(slab: &EnvSlab, mut w: W) -> Result<()> {
    w.write_all(&SLAB_MAGIC)?;
    let flags = if slab.synthetic { FLAG_SYNTHETIC } else { 0 };
    let header = [
        slab.n as u64,
        slab.window.half_width as u64,
        slab.window.d as u64,
        slab.p.to_bits(),
        slab.master_seed,
        flags,
    ];
    for v in header.iter().chain(&slab.layer_seeds).chain(slab.bits.iter().flatten()) {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated slab: {e}")))?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_slab<R: Read>(mut r: R) -> Result<EnvSlab> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|e| Error::Format(format!("missing header: {e}")))?;
    if magic != SLAB_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let n = read_u64(&mut r)? as usize;
    let half_width = read_u64(&mut r)? as i64;
    let d = read_u64(&mut r)? as usize;
    let p = f64::from_bits(read_u64(&mut r)?);
    let master_seed = read_u64(&mut r)?;
    let flags = read_u64(&mut r)?;
    if n == 0 || !(1..=2).contains(&d) || !(1..=1 << 24).contains(&half_width) {
        return Err(Error::Format(format!("implausible header n={n} d={d} L={half_width}")));
    }
    let window = Window::new(d, half_width);
    let words = window.cells().div_ceil(64);
    let layer_seeds = (0..n).map(|_| read_u64(&mut r)).collect::<Result<Vec<_>>>()?;
    let bits = (0..n)
        .map(|_| (0..words).map(|_| read_u64(&mut r)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    Ok(EnvSlab {
        window,
        n,
        p,
        master_seed,
        layer_seeds,
        bits,
        synthetic: flags & FLAG_SYNTHETIC != 0,
    })
}

/// Writes `<path>` and the sidecar `<path>.json`.
pub fn write_slab_file(slab: &EnvSlab, path: &Path, params: Option<ModelParams>) -> Result<()> {
    let mut buf = Vec::new();
    write_slab(slab, &mut buf)?;
    fs::write(path, buf)?;
    let sidecar = SlabSidecar::new(slab, params);
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

pub fn read_slab_file(path: &Path) -> Result<EnvSlab> {
    let bytes = fs::read(path)?;
    read_slab(bytes.as_slice())
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

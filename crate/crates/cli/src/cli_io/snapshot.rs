//! Binary field snapshots.
//!
//! Layout, little-endian: magic `FRSH`, version u32, d u32, N u32, L f64
//! (half-width), α f64, then N^d complex values as (re, im) f64 pairs in
//! row-major order. An optional trailer `STMP` + 32-byte config hash + u64
//! seed ties the file to the run that wrote it.

use std::path::Path;

use frac_core::{Field, Grid, C64};

use super::{io_err, CliError, Result};

pub const MAGIC: &[u8; 4] = b"FRSH";
pub const FORMAT_VERSION: u32 = 1;
const STAMP_TAG: &[u8; 4] = b"STMP";
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8 + 8;
const STAMP_LEN: usize = 4 + 32 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stamp {
    pub config_hash: [u8; 32],
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub field: Field,
    pub alpha: f64,
    pub stamp: Option<Stamp>,
}

pub fn encode(field: &Field, alpha: f64, stamp: Option<&Stamp>) -> Vec<u8> {
    let g = field.grid;
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * field.values.len() + STAMP_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(g.dim as u32).to_le_bytes());
    out.extend_from_slice(&(g.n as u32).to_le_bytes());
    out.extend_from_slice(&g.half_width.to_le_bytes());
    out.extend_from_slice(&alpha.to_le_bytes());
    for v in &field.values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    if let Some(s) = stamp {
        out.extend_from_slice(STAMP_TAG);
        out.extend_from_slice(&s.config_hash);
        out.extend_from_slice(&s.seed.to_le_bytes());
    }
    out
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Snapshot, String> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err("not a FRSH snapshot".into());
    }
    let version = u32_at(bytes, 4);
    if version != FORMAT_VERSION {
        return Err(format!("unsupported snapshot version {version}"));
    }
    let dim = u32_at(bytes, 8) as usize;
    let n = u32_at(bytes, 12) as usize;
    let half_width = f64_at(bytes, 16);
    let alpha = f64_at(bytes, 24);
    let grid = Grid::new(dim, n, half_width).map_err(|e| e.to_string())?;
    let body = n.checked_pow(dim as u32).and_then(|l| l.checked_mul(16)).ok_or("grid size overflows")?;
    let rest = bytes.len() - HEADER_LEN;
    if rest != body && rest != body + STAMP_LEN {
        return Err(format!("expected {body} data bytes for N = {n}, d = {dim}, found {rest}"));
    }
    let values = (0..grid.len())
        .map(|k| {
            let at = HEADER_LEN + 16 * k;
            C64::new(f64_at(bytes, at), f64_at(bytes, at + 8))
        })
        .collect();
    let stamp = if rest == body {
        None
    } else {
        let at = HEADER_LEN + body;
        if &bytes[at..at + 4] != STAMP_TAG {
            return Err("trailing bytes are not a stamp".into());
        }
        let mut config_hash = [0u8; 32];
        config_hash.copy_from_slice(&bytes[at + 4..at + 36]);
        let seed = u64::from_le_bytes(bytes[at + 36..at + 44].try_into().unwrap());
        Some(Stamp { config_hash, seed })
    };
    Ok(Snapshot { field: Field { grid, values }, alpha, stamp })
}

pub fn write(path: &Path, field: &Field, alpha: f64, stamp: Option<&Stamp>) -> Result<()> {
    std::fs::write(path, encode(field, alpha, stamp)).map_err(io_err(path))
}

pub fn read(path: &Path) -> Result<Snapshot> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    decode(&bytes).map_err(|msg| CliError::Format { path: path.to_path_buf(), msg })
}

//! Binary field dump: exact round trip of a solved trajectory pair.
//!
//! Layout (little-endian throughout):
//!
//! ```text
//!   magic   4 bytes  "MFGF"
//!   version u32      1
//!   n_h     u32
//!   n_t     u32
//!   nu      f64
//!   T       f64
//!   u       (n_t+1)·n_h² f64   time-major, each slice row-major, j fastest
//!   m       (n_t+1)·n_h² f64   same layout
//! ```
//!
//! Total length: `32 + 2 (n_t+1) n_h² · 8` bytes.

use anyhow::{bail, Context};
use mfg_core::grid::{GridFunction, Trajectory};
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: [u8; 4] = *b"MFGF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 32;

pub fn expected_len(n_h: u64, n_t: u64) -> u64 {
    HEADER_LEN + 2 * (n_t + 1) * n_h * n_h * 8
}

/// A dump read back from disk.
#[derive(Debug)]
pub struct FieldDump {
    pub nu: f64,
    pub horizon: f64,
    pub u: Trajectory,
    pub m: Trajectory,
}

pub fn write_dump(
    path: &Path,
    u: &Trajectory,
    m: &Trajectory,
    nu: f64,
    horizon: f64,
) -> anyhow::Result<()> {
    assert_eq!(u.n_h(), m.n_h());
    assert_eq!(u.n_t(), m.n_t());
    let mut out = Vec::with_capacity(expected_len(u.n_h() as u64, u.n_t() as u64) as usize);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(u.n_h() as u32).to_le_bytes());
    out.extend_from_slice(&(u.n_t() as u32).to_le_bytes());
    out.extend_from_slice(&nu.to_le_bytes());
    out.extend_from_slice(&horizon.to_le_bytes());
    for traj in [u, m] {
        for slice in traj.slices() {
            for value in slice.values() {
                out.extend_from_slice(&value.to_le_bytes());
            }
        }
    }
    let mut file = std::fs::File::create(path)
        .with_context(|| format!("creating dump {}", path.display()))?;
    file.write_all(&out)?;
    Ok(())
}

pub fn read_dump(path: &Path) -> anyhow::Result<FieldDump> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .with_context(|| format!("opening dump {}", path.display()))?
        .read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_LEN as usize {
        bail!("dump too short: {} bytes", bytes.len());
    }
    if bytes[0..4] != MAGIC {
        bail!("bad magic: expected \"MFGF\"");
    }
    let u32_at = |offset: usize| u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap());
    let f64_at = |offset: usize| f64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        bail!("unsupported dump version {version}, expected {VERSION}");
    }
    let n_h = u32_at(8) as usize;
    let n_t = u32_at(12) as usize;
    let nu = f64_at(16);
    let horizon = f64_at(24);
    let expected = expected_len(n_h as u64, n_t as u64);
    if bytes.len() as u64 != expected {
        bail!(
            "dump length {} does not match {} for n_h = {n_h}, n_t = {n_t}",
            bytes.len(),
            expected
        );
    }
    if n_t == 0 {
        bail!("dump has no time steps");
    }

    let dt = horizon / n_t as f64;
    let mut offset = HEADER_LEN as usize;
    let mut read_trajectory = || -> anyhow::Result<Trajectory> {
        let mut slices = Vec::with_capacity(n_t + 1);
        for _ in 0..=n_t {
            let mut values = Vec::with_capacity(n_h * n_h);
            for _ in 0..n_h * n_h {
                values.push(f64_at(offset));
                offset += 8;
            }
            slices.push(GridFunction::new(n_h, values)?);
        }
        Ok(Trajectory::new(dt, slices)?)
    };
    let u = read_trajectory()?;
    let m = read_trajectory()?;
    Ok(FieldDump { nu, horizon, u, m })
}

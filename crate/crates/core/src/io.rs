//! Binary checkpoint format for [`Mps`].
//!
//! All numbers are little-endian:
//!
//! ```text
//! magic      b"RMPS"
//! version    u32 (1)
//! N          u64
//! d          u64
//! bond_dims  (N + 1) x u64
//! log_norm   f64
//! tensors    for each site, for s in 0..d, row-major A^s: re f64, im f64
//! ```

use std::io::{Read, Write};

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::mps::Mps;

const MAGIC: &[u8; 4] = b"RMPS";
const VERSION: u32 = 1;

pub fn write_mps(state: &Mps, mut out: impl Write) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(state.len() as u64).to_le_bytes())?;
    out.write_all(&(state.local_dim() as u64).to_le_bytes())?;
    for b in state.bond_dims() {
        out.write_all(&(b as u64).to_le_bytes())?;
    }
    out.write_all(&state.log_norm().to_le_bytes())?;
    for i in 0..state.len() {
        for s in 0..state.local_dim() {
            let a = state.block(i, s);
            for r in 0..a.nrows() {
                for c in 0..a.ncols() {
                    out.write_all(&a[(r, c)].re.to_le_bytes())?;
                    out.write_all(&a[(r, c)].im.to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

fn read_u64(input: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(input: &mut impl Read) -> Result<f64> {
    Ok(f64::from_bits(read_u64(input)?))
}

/// Largest accepted site count or bond dimension.
const LIMIT: u64 = 1 << 20;

pub fn read_mps(mut input: impl Read) -> Result<Mps> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not an MPS checkpoint".into()));
    }
    let mut v = [0u8; 4];
    input.read_exact(&mut v)?;
    if u32::from_le_bytes(v) != VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {}",
            u32::from_le_bytes(v)
        )));
    }
    let n = read_u64(&mut input)?;
    let d = read_u64(&mut input)?;
    if n == 0 || n > LIMIT || d == 0 || d > LIMIT {
        return Err(Error::Format(format!(
            "implausible header N = {n}, d = {d}"
        )));
    }
    let (n, d) = (n as usize, d as usize);
    let mut bonds = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        let b = read_u64(&mut input)?;
        if b == 0 || b > LIMIT {
            return Err(Error::Format(format!("implausible bond dimension {b}")));
        }
        bonds.push(b as usize);
    }
    let log_norm = read_f64(&mut input)?;
    let mut sites = Vec::with_capacity(n);
    for i in 0..n {
        let (l, r) = (bonds[i], bonds[i + 1]);
        let mut m = Mat::<C64>::zeros(d * l, r);
        for s in 0..d {
            for a in 0..l {
                for b in 0..r {
                    let re = read_f64(&mut input)?;
                    let im = read_f64(&mut input)?;
                    m[(s * l + a, b)] = C64::new(re, im);
                }
            }
        }
        sites.push(m);
    }
    Ok(Mps::from_sites(d, sites)?.with_log_norm(log_norm))
}

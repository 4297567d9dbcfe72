//! Binary network checkpoints.
//!
//! Layout (little endian): 8-byte magic `EBCSLNN\0`, `u32` schema version,
//! `u32` layer count, one `u32` per layer size, `u64` parameter count, then
//! the parameters as `f64`.

use std::io::{Read, Write};

use super::mlp::Mlp;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"EBCSLNN\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_mlp<W: Write>(net: &Mlp, w: &mut W) -> Result<()> {
    let io = |e: std::io::Error| Error::Checkpoint(e.to_string());
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(net.sizes().len() as u32).to_le_bytes()).map_err(io)?;
    for &s in net.sizes() {
        w.write_all(&(s as u32).to_le_bytes()).map_err(io)?;
    }
    w.write_all(&(net.num_params() as u64).to_le_bytes()).map_err(io)?;
    for p in net.params() {
        w.write_all(&p.to_le_bytes()).map_err(io)?;
    }
    Ok(())
}

fn read_exact<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
    Ok(buf)
}

pub fn read_mlp<R: Read>(r: &mut R) -> Result<Mlp> {
    let magic: [u8; 8] = read_exact(r)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_exact(r)?);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let layers = u32::from_le_bytes(read_exact(r)?) as usize;
    if !(2..=64).contains(&layers) {
        return Err(Error::Checkpoint(format!("implausible layer count {layers}")));
    }
    let sizes: Vec<usize> = (0..layers)
        .map(|_| read_exact(r).map(|b| u32::from_le_bytes(b) as usize))
        .collect::<Result<_>>()?;
    let n = u64::from_le_bytes(read_exact(r)?) as usize;
    let expected: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    if n != expected {
        return Err(Error::Checkpoint(format!("{n} parameters for sizes {sizes:?}")));
    }
    let params: Vec<f64> = (0..n)
        .map(|_| read_exact(r).map(f64::from_le_bytes))
        .collect::<Result<_>>()?;
    Mlp::from_params(&sizes, params).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn mlp_to_bytes(net: &Mlp) -> Vec<u8> {
    let mut buf = Vec::new();
    write_mlp(net, &mut buf).expect("writing to memory");
    buf
}

pub fn mlp_from_bytes(bytes: &[u8]) -> Result<Mlp> {
    let mut r = bytes;
    let net = read_mlp(&mut r)?;
    if !r.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", r.len())));
    }
    Ok(net)
}

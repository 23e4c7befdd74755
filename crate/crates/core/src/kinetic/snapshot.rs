//! Binary particle snapshots: a 16-byte header (`"NSVP"`, version `u32`,
//! count `u64`) followed by `count` records of `x[d], v[d], w` as
//! little-endian `f64`.

use std::path::Path;

use super::ParticleEnsemble;
use crate::error::{Error, Result};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"NSVP";
pub const SNAPSHOT_VERSION: u32 = 1;

pub fn encode_snapshot(ensemble: &ParticleEnsemble) -> Vec<u8> {
    let d = ensemble.dim;
    let mut buf = Vec::with_capacity(16 + ensemble.len() * (2 * d + 1) * 8);
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(ensemble.len() as u64).to_le_bytes());
    for p in 0..ensemble.len() {
        for a in 0..d {
            buf.extend_from_slice(&ensemble.x[p][a].to_le_bytes());
        }
        for a in 0..d {
            buf.extend_from_slice(&ensemble.v[p][a].to_le_bytes());
        }
        buf.extend_from_slice(&ensemble.w[p].to_le_bytes());
    }
    buf
}

pub fn write_snapshot(path: &Path, ensemble: &ParticleEnsemble) -> Result<()> {
    crate::io::write_atomic(path, &encode_snapshot(ensemble))
}

/// Reads a snapshot. The dimension is not stored; it is taken from `dim` or,
/// when `None`, inferred from the record length.
pub fn read_snapshot(path: &Path, dim: Option<usize>) -> Result<ParticleEnsemble> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_snapshot(&bytes, dim).map_err(|message| Error::Format {
        path: path.to_path_buf(),
        message,
    })
}

pub fn decode_snapshot(
    bytes: &[u8],
    dim: Option<usize>,
) -> std::result::Result<ParticleEnsemble, String> {
    if bytes.len() < 16 || &bytes[..4] != SNAPSHOT_MAGIC {
        return Err("not a particle snapshot (bad magic)".into());
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != SNAPSHOT_VERSION {
        return Err(format!("unsupported snapshot version {version}"));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = bytes.len() - 16;
    let d = match dim {
        Some(d) => d,
        None if count == 0 => return Err("cannot infer dimension of an empty snapshot".into()),
        None => {
            let per = body / count;
            if per * count != body || !per.is_multiple_of(8) || (per / 8).is_multiple_of(2) {
                return Err("record length does not match any dimension".into());
            }
            (per / 8 - 1) / 2
        }
    };
    if !(1..=3).contains(&d) || body != count * (2 * d + 1) * 8 {
        return Err(format!("expected {count} records of dimension {d}"));
    }
    let mut vals = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut x = Vec::with_capacity(count);
    let mut v = Vec::with_capacity(count);
    let mut w = Vec::with_capacity(count);
    for _ in 0..count {
        let mut xp = [0.0; 3];
        let mut vp = [0.0; 3];
        for xa in xp.iter_mut().take(d) {
            *xa = vals.next().unwrap();
        }
        for va in vp.iter_mut().take(d) {
            *va = vals.next().unwrap();
        }
        x.push(xp);
        v.push(vp);
        w.push(vals.next().unwrap());
    }
    Ok(ParticleEnsemble::new(d, x, v, w))
}

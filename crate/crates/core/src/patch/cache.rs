//! `FGT1` binary feature-tensor cache.
//!
//! Layout (little-endian): magic `FGT1`, `u32` C, J, T, k, `u64` landmark
//! ordering hash, then `C*J*T` `f32` values in C, J, T order.

use std::io::{Read, Write};
use std::path::Path;

use super::{FeatureTensor, PatchError, CHANNELS_PER_POINT};

const MAGIC: &[u8; 4] = b"FGT1";

pub fn write_tensor_to<W: Write>(tensor: &FeatureTensor, mut w: W) -> Result<(), PatchError> {
    let dims = [tensor.channels, tensor.landmarks, tensor.frames, tensor.k];
    let mut buf = Vec::with_capacity(28 + 4 * tensor.values.len());
    buf.extend_from_slice(MAGIC);
    for d in dims {
        let d = u32::try_from(d).map_err(|_| PatchError::Format(format!("dimension {d} exceeds u32")))?;
        buf.extend_from_slice(&d.to_le_bytes());
    }
    buf.extend_from_slice(&tensor.ordering_hash.to_le_bytes());
    for v in &tensor.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_tensor_from<R: Read>(mut r: R) -> Result<FeatureTensor, PatchError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 28 || &bytes[..4] != MAGIC {
        return Err(PatchError::Format("missing FGT1 header".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let (c, j, t, k) = (u32_at(4), u32_at(8), u32_at(12), u32_at(16));
    let hash = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
    if c != CHANNELS_PER_POINT * k {
        return Err(PatchError::Format(format!("channel count {c} is not 6*k for k={k}")));
    }
    let n = c
        .checked_mul(j)
        .and_then(|x| x.checked_mul(t))
        .ok_or_else(|| PatchError::Format("tensor size overflows".into()))?;
    let payload = &bytes[28..];
    if payload.len() != 4 * n {
        return Err(PatchError::Format(format!(
            "expected {} payload bytes, found {}",
            4 * n,
            payload.len()
        )));
    }
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(PatchError::Format("non-finite value in payload".into()));
    }
    Ok(FeatureTensor {
        channels: c,
        landmarks: j,
        frames: t,
        k,
        ordering_hash: hash,
        values,
    })
}

pub fn write_tensor(tensor: &FeatureTensor, path: impl AsRef<Path>) -> Result<(), PatchError> {
    let f = std::fs::File::create(path)?;
    write_tensor_to(tensor, std::io::BufWriter::new(f))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<FeatureTensor, PatchError> {
    read_tensor_from(std::io::BufReader::new(std::fs::File::open(path)?))
}

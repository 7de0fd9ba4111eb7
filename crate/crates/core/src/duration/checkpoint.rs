//! Binary checkpoint of a trained duration network.
//!
//! Layout, all integers `u64` and all reals `f64`, little-endian:
//!
//! ```text
//! magic        8 bytes  "CAGDUR1\0"
//! config       embed_dim num_blocks num_heads ffn_dim max_seq_len
//!              warmup_steps batch_size epochs seed (u64)
//!              dropout_rate lr_scale (f64)
//! speed norm   mean scale (f64)
//! tensors      count (u64), then per tensor in declaration order:
//!              rank (u64), dims (u64 each), values row-major (f64)
//! ```

use std::io::{Read, Write};

use ndarray::Array2;

use super::config::DurationNetConfig;
use super::params::{DurationNetParams, SpeedNorm};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CAGDUR1\0";

fn put_u64<W: Write>(w: &mut W, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64<W: Write>(w: &mut W, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(f64::from_le_bytes(b))
}

fn truncated(e: std::io::Error) -> Error {
    Error::Format(format!("checkpoint truncated: {e}"))
}

fn get_usize<R: Read>(r: &mut R) -> Result<usize> {
    usize::try_from(get_u64(r)?).map_err(|_| Error::Format("checkpoint value overflows usize".into()))
}

pub fn write_checkpoint<W: Write>(
    w: &mut W,
    params: &DurationNetParams,
    cfg: &DurationNetConfig,
) -> std::io::Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    for v in [
        cfg.embed_dim,
        cfg.num_blocks,
        cfg.num_heads,
        cfg.ffn_dim,
        cfg.max_seq_len,
        cfg.warmup_steps,
        cfg.batch_size,
        cfg.epochs,
    ] {
        put_u64(w, v as u64)?;
    }
    put_u64(w, cfg.seed)?;
    put_f64(w, cfg.dropout_rate)?;
    put_f64(w, cfg.lr_scale)?;
    put_f64(w, params.speed_norm.mean)?;
    put_f64(w, params.speed_norm.scale)?;
    let tensors = params.tensors();
    put_u64(w, tensors.len() as u64)?;
    for (_, t) in tensors {
        put_u64(w, 2)?;
        put_u64(w, t.nrows() as u64)?;
        put_u64(w, t.ncols() as u64)?;
        for &v in t.iter() {
            put_f64(w, v)?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<(DurationNetParams, DurationNetConfig)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a duration checkpoint (bad magic)".into()));
    }
    let cfg = DurationNetConfig {
        embed_dim: get_usize(r)?,
        num_blocks: get_usize(r)?,
        num_heads: get_usize(r)?,
        ffn_dim: get_usize(r)?,
        max_seq_len: get_usize(r)?,
        warmup_steps: get_usize(r)?,
        batch_size: get_usize(r)?,
        epochs: get_usize(r)?,
        seed: get_u64(r)?,
        dropout_rate: get_f64(r)?,
        lr_scale: get_f64(r)?,
    };
    cfg.validate()
        .map_err(|e| Error::Format(format!("checkpoint config: {e}")))?;
    let speed_norm = SpeedNorm {
        mean: get_f64(r)?,
        scale: get_f64(r)?,
    };
    let count = get_usize(r)?;
    let mut tensors = Vec::with_capacity(count.min(1024));
    for i in 0..count {
        let rank = get_usize(r)?;
        if rank != 2 {
            return Err(Error::Format(format!("tensor {i}: rank {rank}, expected 2")));
        }
        let rows = get_usize(r)?;
        let cols = get_usize(r)?;
        let len = rows
            .checked_mul(cols)
            .filter(|&n| n <= 1 << 32)
            .ok_or_else(|| Error::Format(format!("tensor {i}: implausible shape {rows}x{cols}")))?;
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(get_f64(r)?);
        }
        tensors.push(Array2::from_shape_vec((rows, cols), data).expect("length checked"));
    }

    let num_phones = tensors.first().map_or(0, |t| t.nrows());
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    let mut params = DurationNetParams::init(&cfg, num_phones, &mut rng);
    params.speed_norm = speed_norm;
    let slots = params.tensors_mut();
    if slots.len() != tensors.len() {
        return Err(Error::Format(format!(
            "checkpoint has {} tensors, config implies {}",
            tensors.len(),
            slots.len()
        )));
    }
    for (i, (slot, t)) in slots.into_iter().zip(tensors).enumerate() {
        if slot.dim() != t.dim() {
            return Err(Error::Format(format!(
                "tensor {i}: shape {:?}, expected {:?}",
                t.dim(),
                slot.dim()
            )));
        }
        *slot = t;
    }
    Ok((params, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_exact() {
        let cfg = DurationNetConfig::tiny().with_seed(99);
        let mut params = DurationNetParams::init(&cfg, 7, &mut ChaCha8Rng::seed_from_u64(4));
        params.speed_norm = SpeedNorm {
            mean: 3.7,
            scale: 0.9,
        };
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &params, &cfg).unwrap();
        assert_eq!(&buf[..8], CHECKPOINT_MAGIC);
        let (back, back_cfg) = read_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(back, params);
        assert_eq!(back_cfg, cfg);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let cfg = DurationNetConfig::tiny();
        let params = DurationNetParams::init(&cfg, 3, &mut ChaCha8Rng::seed_from_u64(4));
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &params, &cfg).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(&mut bad.as_slice()).is_err());
        let short = &buf[..buf.len() - 3];
        assert!(read_checkpoint(&mut &short[..]).is_err());
    }
}

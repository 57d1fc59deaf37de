//! Inference checkpoint format.
//!
//! Little-endian: magic `AHD1`, `u32` version, config block (`u8` kind,
//! `u32` input dim, `u32` classes, `u32` hidden dim, `u64` init seed),
//! class-name table (`u32` count, then `u32` byte length + UTF-8 per name),
//! `u32` layer count, per layer `u32` out, `u32` in, `out*in` weights and
//! `out` biases as `f64`, and a trailing `u64` FNV-1a checksum of everything
//! after the version field. Optimizer moments are not stored.

use std::fs;
use std::path::Path;

use super::head::{AttributorHead, Dense, HeadConfig, HeadKind};
use crate::binio::{verify_checksum, ByteReader, ByteWriter};
use crate::error::{Error, Result};

pub const HEAD_MAGIC: &[u8; 4] = b"AHD1";
pub const HEAD_VERSION: u32 = 1;
const HEADER_LEN: usize = 8;

pub fn encode_head(h: &AttributorHead) -> Result<Vec<u8>> {
    let mut w = ByteWriter::new();
    w.bytes(HEAD_MAGIC);
    w.u32(HEAD_VERSION);
    w.u8(match h.config.kind {
        HeadKind::Linear => 0,
        HeadKind::Mlp => 1,
    });
    w.len_u32(h.config.input_dim)?;
    w.len_u32(h.config.num_classes)?;
    w.len_u32(h.config.hidden_dim)?;
    w.u64(h.config.init_seed);
    w.len_u32(h.class_names.len())?;
    for name in &h.class_names {
        w.len_u32(name.len())?;
        w.bytes(name.as_bytes());
    }
    w.len_u32(h.layers.len())?;
    for l in &h.layers {
        w.len_u32(l.out_dim)?;
        w.len_u32(l.in_dim)?;
        for &v in l.weight.iter().chain(&l.bias) {
            w.f64(v);
        }
    }
    Ok(w.finish_with_checksum(HEADER_LEN))
}

pub fn decode_head(bytes: &[u8]) -> Result<AttributorHead> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(4)?;
    if magic != HEAD_MAGIC {
        return Err(Error::format(format!(
            "bad magic {:?}, expected \"AHD1\"",
            String::from_utf8_lossy(magic)
        )));
    }
    let version = r.u32()?;
    if version != HEAD_VERSION {
        return Err(Error::format(format!("unsupported checkpoint version {version}")));
    }
    let body = verify_checksum(bytes, HEADER_LEN)?;
    let mut r = ByteReader::new(&body[HEADER_LEN..]);
    let kind = match r.u8()? {
        0 => HeadKind::Linear,
        1 => HeadKind::Mlp,
        k => return Err(Error::format(format!("unknown head kind {k}"))),
    };
    let config = HeadConfig {
        kind,
        input_dim: r.u32()? as usize,
        num_classes: r.u32()? as usize,
        hidden_dim: r.u32()? as usize,
        init_seed: r.u64()?,
    };
    let n_names = r.u32()? as usize;
    let mut class_names = Vec::with_capacity(n_names.min(4096));
    for _ in 0..n_names {
        let len = r.u32()? as usize;
        let raw = r.take(len)?;
        class_names.push(
            String::from_utf8(raw.to_vec()).map_err(|_| Error::format("class name is not valid UTF-8"))?,
        );
    }
    let n_layers = r.u32()? as usize;
    let mut layers = Vec::with_capacity(n_layers.min(16));
    for i in 0..n_layers {
        let out_dim = r.u32()? as usize;
        let in_dim = r.u32()? as usize;
        let count = out_dim
            .checked_mul(in_dim)
            .and_then(|v| v.checked_add(out_dim))
            .filter(|&v| v.checked_mul(8).is_some_and(|b| b <= r.remaining()))
            .ok_or_else(|| Error::format(format!("layer {i}: shape {out_dim}x{in_dim} exceeds file size")))?;
        let mut vals = Vec::with_capacity(count);
        for _ in 0..count {
            vals.push(r.f64()?);
        }
        let bias = vals.split_off(out_dim * in_dim);
        layers.push(Dense {
            out_dim,
            in_dim,
            weight: vals,
            bias,
        });
    }
    if r.remaining() != 0 {
        return Err(Error::format(format!("{} trailing bytes before checksum", r.remaining())));
    }
    AttributorHead::from_parts(config, layers, class_names).map_err(|e| Error::format(e.to_string()))
}

pub fn save_head(h: &AttributorHead, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_head(h)?).map_err(|e| Error::io(path, e))
}

pub fn load_head(path: impl AsRef<Path>) -> Result<AttributorHead> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_head(&bytes)
}

//! Feature file format.
//!
//! Little-endian: magic `AFT1`, `u32` version, `u32` layer count, then per
//! layer `u32` H, W, N followed by `H*W*N` `f32` values (channels innermost),
//! and a trailing `u64` FNV-1a checksum of everything after the version
//! field.

use std::fs;
use std::path::Path;

use super::{FeatureMap, FeaturePyramid};
use crate::binio::{verify_checksum, ByteReader, ByteWriter};
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"AFT1";
pub const FEATURE_VERSION: u32 = 1;
const HEADER_LEN: usize = 8;

pub fn encode_features(p: &FeaturePyramid) -> Result<Vec<u8>> {
    let mut w = ByteWriter::new();
    w.bytes(FEATURE_MAGIC);
    w.u32(FEATURE_VERSION);
    w.len_u32(p.layers.len())?;
    for layer in &p.layers {
        let (h, wd, n) = layer.shape();
        w.len_u32(h)?;
        w.len_u32(wd)?;
        w.len_u32(n)?;
        for &v in layer.data() {
            w.f32(v);
        }
    }
    Ok(w.finish_with_checksum(HEADER_LEN))
}

pub fn decode_features(bytes: &[u8], source_id: &str) -> Result<FeaturePyramid> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(4)?;
    if magic != FEATURE_MAGIC {
        return Err(Error::format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(magic),
            std::str::from_utf8(FEATURE_MAGIC).unwrap()
        )));
    }
    let version = r.u32()?;
    if version != FEATURE_VERSION {
        return Err(Error::format(format!("unsupported feature file version {version}")));
    }
    let body = verify_checksum(bytes, HEADER_LEN)?;
    let mut r = ByteReader::new(&body[HEADER_LEN..]);
    let count = r.u32()? as usize;
    let mut layers = Vec::with_capacity(count.min(1024));
    for i in 0..count {
        let h = r.u32()? as usize;
        let w = r.u32()? as usize;
        let n = r.u32()? as usize;
        let len = h
            .checked_mul(w)
            .and_then(|v| v.checked_mul(n))
            .filter(|&v| v.checked_mul(4).is_some_and(|b| b <= r.remaining()))
            .ok_or_else(|| Error::format(format!("layer {i}: shape {h}x{w}x{n} exceeds file size")))?;
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(r.f32()?);
        }
        layers.push(FeatureMap::new(h, w, n, data).map_err(|e| Error::format(format!("layer {i}: {e}")))?);
    }
    if r.remaining() != 0 {
        return Err(Error::format(format!("{} trailing bytes before checksum", r.remaining())));
    }
    FeaturePyramid::new(layers, "external", source_id).map_err(|e| Error::format(e.to_string()))
}

pub fn save_features(p: &FeaturePyramid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_features(p)?).map_err(|e| Error::io(path, e))
}

/// Loads a feature file. Identifiers are not stored in the format: the
/// backbone id becomes `external` and the source id the file stem.
pub fn load_features(path: impl AsRef<Path>) -> Result<FeaturePyramid> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    decode_features(&bytes, &stem)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> FeaturePyramid {
        let a = FeatureMap::new(2, 3, 2, (0..12).map(|i| i as f32 * 0.5 - 1.0).collect()).unwrap();
        let b = FeatureMap::new(1, 1, 4, vec![f32::MIN_POSITIVE, -0.0, 1e30, 3.25]).unwrap();
        FeaturePyramid::new(vec![a, b], "x", "y").unwrap()
    }

    #[test]
    fn roundtrip_is_bitwise() {
        let p = fixture();
        let bytes = encode_features(&p).unwrap();
        let back = decode_features(&bytes, "y").unwrap();
        assert_eq!(back.layers.len(), 2);
        for (a, b) in p.layers.iter().zip(&back.layers) {
            assert_eq!(a.shape(), b.shape());
            let ab: Vec<u32> = a.data().iter().map(|v| v.to_bits()).collect();
            let bb: Vec<u32> = b.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(ab, bb);
        }
        assert_eq!(encode_features(&back).unwrap(), bytes);
    }

    #[test]
    fn truncation_is_a_format_error() {
        let bytes = encode_features(&fixture()).unwrap();
        for cut in [0, 3, 10, bytes.len() - 1] {
            assert!(matches!(decode_features(&bytes[..cut], ""), Err(Error::Format(_))), "cut {cut}");
        }
    }

    #[test]
    fn wrong_magic_is_named() {
        let mut bytes = encode_features(&fixture()).unwrap();
        bytes[..4].copy_from_slice(b"XYZ9");
        match decode_features(&bytes, "") {
            Err(Error::Format(m)) => assert!(m.contains("XYZ9") && m.contains("AFT1"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn corrupted_payload_fails_checksum() {
        let mut bytes = encode_features(&fixture()).unwrap();
        bytes[20] ^= 0x40;
        assert!(matches!(decode_features(&bytes, ""), Err(Error::Format(_))));
    }
}

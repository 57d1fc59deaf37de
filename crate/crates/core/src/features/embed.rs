use super::{Embedding, EmbeddingKind};
use crate::binio::fnv1a64;
use crate::error::{Error, Result};
use crate::pixelops::Image;
use crate::rng::{mix64, SplitMix64};

pub const DEFAULT_TEXT_DIM: usize = 64;

/// Block boundaries splitting `len` into `parts` nearly equal runs.
pub(crate) fn block_bounds(len: usize, parts: usize) -> Vec<(usize, usize)> {
    (0..parts).map(|i| (i * len / parts, (i + 1) * len / parts)).collect()
}

/// Average-pools a planar `w x h` single-channel value grid to `grid x grid`.
pub(crate) fn pool_plane(values: &[f64], w: usize, h: usize, grid: usize) -> Vec<f64> {
    let xs = block_bounds(w, grid);
    let ys = block_bounds(h, grid);
    let mut out = Vec::with_capacity(grid * grid);
    for &(y0, y1) in &ys {
        for &(x0, x1) in &xs {
            let mut acc = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    acc += values[y * w + x];
                }
            }
            out.push(acc / ((y1 - y0) * (x1 - x0)) as f64);
        }
    }
    out
}

/// Average-pools the image to `grid x grid x channels` and flattens with the
/// channel index innermost.
pub fn pixel_embedding(img: &Image, grid: usize) -> Result<Embedding> {
    if grid == 0 || grid > img.width().min(img.height()) {
        return Err(Error::validation(format!(
            "pixel grid {grid} must be in 1..={}",
            img.width().min(img.height())
        )));
    }
    let c = img.channels();
    let planes: Vec<Vec<f64>> = (0..c)
        .map(|ch| pool_plane(&img.plane(ch), img.width(), img.height(), grid))
        .collect();
    let mut data = Vec::with_capacity(grid * grid * c);
    for cell in 0..grid * grid {
        for plane in &planes {
            data.push(plane[cell]);
        }
    }
    Embedding::new(EmbeddingKind::Pixel, data)
}

/// Hashed signed bag-of-words embedding, L2-normalized.
///
/// Tokens are lowercase alphanumeric runs. Each token picks a bucket and a
/// sign from `SplitMix64(fnv1a(token) ^ mix(seed))`.
pub fn text_embedding(prompt: &str, dim: usize, seed: u64) -> Result<Embedding> {
    if dim == 0 {
        return Err(Error::validation("text embedding dim must be >= 1"));
    }
    let lower = prompt.to_lowercase();
    let mut v = vec![0.0; dim];
    let salt = mix64(seed);
    for token in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
        let mut rng = SplitMix64::new(fnv1a64(token.as_bytes()) ^ salt);
        let bucket = rng.below(dim);
        let sign = if rng.next_u64() >> 63 == 0 { 1.0 } else { -1.0 };
        v[bucket] += sign;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    Embedding::new(EmbeddingKind::Text, v)
}

pub fn concat(parts: &[Embedding]) -> Result<Embedding> {
    if parts.is_empty() {
        return Err(Error::validation("cannot concatenate an empty list of embeddings"));
    }
    let data = parts.iter().flat_map(|p| p.data.iter().copied()).collect();
    Ok(Embedding {
        kind: EmbeddingKind::Concatenated,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_pixel_grid() {
        let e = pixel_embedding(&Image::filled(16, 12, 3, 0.5), 2).unwrap();
        assert_eq!(e.data, vec![0.5; 12]);
        assert_eq!(e.kind, EmbeddingKind::Pixel);
    }

    #[test]
    fn grid_one_is_channel_means() {
        let img = Image::from_fn(7, 5, 3, |x, y, c| ((x * 3 + y * 5 + c * 7) % 11) as f64 / 10.0);
        let e = pixel_embedding(&img, 1).unwrap();
        for c in 0..3 {
            let mean = img.plane(c).iter().sum::<f64>() / 35.0;
            assert!((e.data[c] - mean).abs() <= 1e-9);
        }
    }

    #[test]
    fn four_by_four_block_means() {
        let vals: Vec<f64> = (0..16).map(|i| i as f64 / 15.0).collect();
        let img = Image::new(4, 4, 1, vals.clone()).unwrap();
        let e = pixel_embedding(&img, 2).unwrap();
        let block = |bx: usize, by: usize| {
            let mut s = 0.0;
            for y in 2 * by..2 * by + 2 {
                for x in 2 * bx..2 * bx + 2 {
                    s += vals[y * 4 + x];
                }
            }
            s / 4.0
        };
        let expect = [block(0, 0), block(1, 0), block(0, 1), block(1, 1)];
        for (a, b) in e.data.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(pixel_embedding(&img, 5).is_err());
    }

    #[test]
    fn text_embedding_properties() {
        let empty = text_embedding("", 16, 0).unwrap();
        assert!(empty.data.iter().all(|&v| v == 0.0));
        let a = text_embedding("A corgi, surfing!", 16, 3).unwrap();
        let b = text_embedding("a CORGI surfing", 16, 3).unwrap();
        assert_eq!(a, b);
        let n = a.data.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() <= 1e-6);
        assert_ne!(a, text_embedding("a corgi surfing", 16, 4).unwrap());
        assert!(text_embedding("x", 0, 0).is_err());
    }

    #[test]
    fn concat_order_and_dims() {
        let a = Embedding::new(EmbeddingKind::Image, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Embedding::new(EmbeddingKind::Text, vec![5.0, 6.0, 7.0]).unwrap();
        let ab = concat(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(ab.dim(), 7);
        assert_eq!(ab.data, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        assert_ne!(ab, concat(&[b, a.clone()]).unwrap());
        assert_eq!(concat(std::slice::from_ref(&a)).unwrap().data, a.data);
        assert!(concat(&[]).is_err());
    }
}

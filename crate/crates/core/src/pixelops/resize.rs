use super::Image;
use crate::error::{Error, Result};

const CATMULL_ROM_A: f64 = -0.5;

/// Keys cubic convolution kernel with `a = -0.5`.
pub fn catmull_rom(x: f64) -> f64 {
    let a = CATMULL_ROM_A;
    let x = x.abs();
    if x <= 1.0 {
        (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0
    } else if x < 2.0 {
        a * x * x * x - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a
    } else {
        0.0
    }
}

/// Per-output-sample taps: four clamped source indices and normalized weights.
fn taps(src_len: usize, dst_len: usize) -> Vec<([usize; 4], [f64; 4])> {
    let scale = src_len as f64 / dst_len as f64;
    (0..dst_len)
        .map(|d| {
            let src = (d as f64 + 0.5) * scale - 0.5;
            let base = src.floor();
            let t = src - base;
            let mut idx = [0usize; 4];
            let mut w = [0.0f64; 4];
            for k in 0..4 {
                let offset = k as f64 - 1.0;
                w[k] = catmull_rom(t - offset);
                idx[k] = (base as isize + k as isize - 1).clamp(0, src_len as isize - 1) as usize;
            }
            let sum: f64 = w.iter().sum();
            for v in &mut w {
                *v /= sum;
            }
            (idx, w)
        })
        .collect()
}

/// Separable bicubic resize to exactly `width`x`height`, edge-clamped.
pub fn resize_exact(img: &Image, width: usize, height: usize) -> Result<Image> {
    if width == 0 || height == 0 {
        return Err(Error::validation("resize target must be nonzero"));
    }
    if width == img.width() && height == img.height() {
        return Ok(img.clone());
    }
    let c = img.channels();
    let (sw, sh) = (img.width(), img.height());
    let xt = taps(sw, width);
    let yt = taps(sh, height);

    let mut horiz = vec![0.0; width * sh * c];
    for y in 0..sh {
        for (x, (idx, w)) in xt.iter().enumerate() {
            for ch in 0..c {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += w[k] * img.get(idx[k], y, ch);
                }
                horiz[(y * width + x) * c + ch] = acc;
            }
        }
    }
    let mut out = vec![0.0; width * height * c];
    for (y, (idx, w)) in yt.iter().enumerate() {
        for x in 0..width {
            for ch in 0..c {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += w[k] * horiz[(idx[k] * width + x) * c + ch];
                }
                out[(y * width + x) * c + ch] = acc;
            }
        }
    }
    Ok(Image::from_clamped(width, height, c, out))
}

/// Resizes so the shorter edge equals `shorter_edge`, preserving aspect.
pub fn resize_bicubic(img: &Image, shorter_edge: usize) -> Result<Image> {
    if shorter_edge == 0 {
        return Err(Error::validation("shorter edge must be at least 1"));
    }
    let (w, h) = (img.width(), img.height());
    let (nw, nh) = if w <= h {
        let nh = ((h as f64) * shorter_edge as f64 / w as f64).round().max(1.0) as usize;
        (shorter_edge, nh)
    } else {
        let nw = ((w as f64) * shorter_edge as f64 / h as f64).round().max(1.0) as usize;
        (nw, shorter_edge)
    };
    resize_exact(img, nw, nh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_partition_of_unity() {
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            let s: f64 = (-1..=2).map(|k| catmull_rom(t - k as f64)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert_eq!(catmull_rom(0.0), 1.0);
        assert_eq!(catmull_rom(1.0), 0.0);
        assert_eq!(catmull_rom(2.0), 0.0);
    }

    #[test]
    fn constant_preserved() {
        let img = Image::filled(448, 448, 3, 0.3);
        let out = resize_bicubic(&img, 224).unwrap();
        assert_eq!((out.width(), out.height()), (224, 224));
        assert!(out.data().iter().all(|v| (v - 0.3).abs() < 1e-12));
    }

    #[test]
    fn aspect_preserved() {
        let img = Image::filled(400, 200, 1, 0.5);
        let out = resize_bicubic(&img, 224).unwrap();
        assert_eq!((out.width(), out.height()), (448, 224));
        let img = Image::filled(200, 400, 1, 0.5);
        let out = resize_bicubic(&img, 224).unwrap();
        assert_eq!((out.width(), out.height()), (224, 448));
    }

    #[test]
    fn two_by_two_upsample_matches_hand_weights() {
        // Output sample 0 of a 2->4 upsample sits at source coordinate -0.25:
        // base -1, t = 0.75; taps at -2,-1,0,1 clamp to 0,0,0,1.
        let w = |t: f64| [catmull_rom(t + 1.0), catmull_rom(t), catmull_rom(t - 1.0), catmull_rom(t - 2.0)];
        let w0 = w(0.75);
        // Output sample 1 sits at 0.25: base 0, t = 0.25; taps -1,0,1,2 clamp to 0,0,1,1.
        let w1 = w(0.25);
        let a = [0.0, 1.0];
        let row0 = (w0[0] + w0[1] + w0[2]) * a[0] + w0[3] * a[1];
        let row1 = (w1[0] + w1[1]) * a[0] + (w1[2] + w1[3]) * a[1];

        let img = Image::new(2, 1, 1, vec![0.0, 1.0]).unwrap();
        let out = resize_exact(&img, 4, 1).unwrap();
        let expect = [row0, row1, 1.0 - row1, 1.0 - row0];
        for (o, e) in out.data().iter().zip(expect) {
            assert!((o - e.clamp(0.0, 1.0)).abs() < 1e-12, "{o} vs {e}");
        }

        // Full 2x2 grid: separable outer product of the 1-D responses.
        let grid = Image::new(2, 2, 1, vec![0.0, 0.5, 0.5, 1.0]).unwrap();
        let out = resize_exact(&grid, 4, 4).unwrap();
        let col = [row0, row1, 1.0 - row1, 1.0 - row0];
        for y in 0..4 {
            for x in 0..4 {
                let e = 0.5 * col[x] + 0.5 * col[y];
                assert!((out.get(x, y, 0) - e.clamp(0.0, 1.0)).abs() < 1e-12);
            }
        }
    }
}

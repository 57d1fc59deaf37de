use super::Image;
use crate::error::{Error, Result};
use crate::rng::{fill_normal, SplitMix64};

/// Normalized samples of `exp(-x^2 / 2 sigma^2)` for `x` in `-radius..=radius`.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::validation(format!("gaussian sigma must be positive, got {sigma}")));
    }
    if radius == 0 {
        return Err(Error::validation("gaussian radius must be positive"));
    }
    let r = radius as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|x| (-((x * x) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    Ok(k)
}

// Taps are summed in mirrored pairs so the result is exactly equivariant
// under horizontal flips.
fn convolve_axis(src: &[f64], w: usize, h: usize, c: usize, kernel: &[f64], horizontal: bool) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![0.0; src.len()];
    let at = |x: isize, y: isize, ch: usize| -> f64 {
        let xc = x.clamp(0, w as isize - 1) as usize;
        let yc = y.clamp(0, h as isize - 1) as usize;
        src[(yc * w + xc) * c + ch]
    };
    for y in 0..h as isize {
        for x in 0..w as isize {
            for ch in 0..c {
                let mut acc = kernel[r as usize] * at(x, y, ch);
                for k in 1..=r {
                    let pair = if horizontal {
                        at(x - k, y, ch) + at(x + k, y, ch)
                    } else {
                        at(x, y - k, ch) + at(x, y + k, ch)
                    };
                    acc += kernel[(r + k) as usize] * pair;
                }
                out[(y as usize * w + x as usize) * c + ch] = acc;
            }
        }
    }
    out
}

/// Separable Gaussian blur with edge-clamp padding.
pub fn gaussian_blur(img: &Image, sigma: f64, radius: usize) -> Result<Image> {
    let kernel = gaussian_kernel(sigma, radius)?;
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let tmp = convolve_axis(img.data(), w, h, c, &kernel, true);
    let out = convolve_axis(&tmp, w, h, c, &kernel, false);
    Ok(Image::from_clamped(w, h, c, out))
}

/// Bilateral filter with per-channel range distance and edge-clamp padding.
pub fn bilateral_filter(img: &Image, sigma_space: f64, sigma_range: f64, radius: usize) -> Result<Image> {
    for (name, v) in [("sigma_space", sigma_space), ("sigma_range", sigma_range)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::validation(format!("bilateral {name} must be positive, got {v}")));
        }
    }
    if radius == 0 {
        return Err(Error::validation("bilateral radius must be positive"));
    }
    let r = radius as isize;
    let side = 2 * radius + 1;
    let mut spatial = vec![0.0; side * side];
    for dy in -r..=r {
        for dx in -r..=r {
            spatial[((dy + r) as usize) * side + (dx + r) as usize] =
                (-((dx * dx + dy * dy) as f64) / (2.0 * sigma_space * sigma_space)).exp();
        }
    }
    let range_den = 2.0 * sigma_range * sigma_range;
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let mut out = vec![0.0; w * h * c];
    for y in 0..h as isize {
        for x in 0..w as isize {
            for ch in 0..c {
                let center = img.get(x as usize, y as usize, ch);
                let tap = |dx: isize, dy: isize| -> (f64, f64) {
                    let v = img.get_clamped(x + dx, y + dy, ch);
                    let d = v - center;
                    let wt = spatial[((dy + r) as usize) * side + (dx + r) as usize] * (-(d * d) / range_den).exp();
                    (wt * v, wt)
                };
                let mut num = 0.0;
                let mut den = 0.0;
                for dy in -r..=r {
                    let (a, b) = tap(0, dy);
                    let mut row_num = a;
                    let mut row_den = b;
                    for dx in 1..=r {
                        let (l, lw) = tap(-dx, dy);
                        let (rr, rw) = tap(dx, dy);
                        row_num += l + rr;
                        row_den += lw + rw;
                    }
                    num += row_num;
                    den += row_den;
                }
                out[(y as usize * w + x as usize) * c + ch] = num / den;
            }
        }
    }
    Ok(Image::from_clamped(w, h, c, out))
}

/// Adds i.i.d. `N(0, sigma^2)` to every value and clamps to `[0, 1]`.
pub fn add_gaussian_noise(img: &Image, sigma: f64, seed: u64) -> Result<Image> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::validation(format!("noise sigma must be non-negative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let mut noise = vec![0.0; img.data().len()];
    fill_normal(&mut SplitMix64::new(seed), &mut noise);
    let data = img.data().iter().zip(&noise).map(|(v, n)| v + sigma * n).collect();
    Ok(Image::from_clamped(img.width(), img.height(), img.channels(), data))
}

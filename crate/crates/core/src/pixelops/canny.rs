use super::filter::gaussian_blur;
use super::Image;
use crate::error::{Error, Result};

pub const DEFAULT_CANNY_LOW: f64 = 0.1;
pub const DEFAULT_CANNY_HIGH: f64 = 0.2;

const SMOOTH_SIGMA: f64 = 1.4;
const SMOOTH_RADIUS: usize = 4;

/// Canny edge map of the image's luma.
///
/// Thresholds are fractions of the maximum gradient magnitude. The output is
/// a single-channel image with values in `{0, 1}`.
pub fn canny(img: &Image, low_threshold: f64, high_threshold: f64) -> Result<Image> {
    if !(0.0..=1.0).contains(&low_threshold)
        || !(0.0..=1.0).contains(&high_threshold)
        || low_threshold >= high_threshold
    {
        return Err(Error::validation(format!(
            "canny thresholds need 0 <= low < high <= 1, got low={low_threshold} high={high_threshold}"
        )));
    }
    let (w, h) = (img.width(), img.height());
    let smooth = gaussian_blur(&img.luma(), SMOOTH_SIGMA, SMOOTH_RADIUS)?;

    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = |dx: isize, dy: isize| smooth.get_clamped(x + dx, y + dy, 0);
            let i = y as usize * w + x as usize;
            gx[i] = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            gy[i] = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
        }
    }
    let mag: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();
    let max = mag.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Ok(Image::filled(w, h, 1, 0.0));
    }

    let at = |x: isize, y: isize| -> f64 {
        let xc = x.clamp(0, w as isize - 1) as usize;
        let yc = y.clamp(0, h as isize - 1) as usize;
        mag[yc * w + xc]
    };
    let mut thin = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            let m = mag[i];
            if m == 0.0 {
                continue;
            }
            let mut angle = gy[i].atan2(gx[i]).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            let (a, b) = if !(22.5..157.5).contains(&angle) {
                (at(x - 1, y), at(x + 1, y))
            } else if angle < 67.5 {
                (at(x + 1, y + 1), at(x - 1, y - 1))
            } else if angle < 112.5 {
                (at(x, y - 1), at(x, y + 1))
            } else {
                (at(x - 1, y + 1), at(x + 1, y - 1))
            };
            if m >= a && m >= b {
                thin[i] = m;
            }
        }
    }

    let low = low_threshold * max;
    let high = high_threshold * max;
    let mut out = vec![0.0; w * h];
    let mut stack = Vec::new();
    for i in 0..w * h {
        if thin[i] >= high && thin[i] > 0.0 && out[i] == 0.0 {
            out[i] = 1.0;
            stack.push(i);
            while let Some(j) = stack.pop() {
                let (jx, jy) = ((j % w) as isize, (j / w) as isize);
                for dy in -1..=1isize {
                    for dx in -1..=1isize {
                        let (nx, ny) = (jx + dx, jy + dy);
                        if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                            continue;
                        }
                        let n = ny as usize * w + nx as usize;
                        if out[n] == 0.0 && thin[n] >= low && thin[n] > 0.0 {
                            out[n] = 1.0;
                            stack.push(n);
                        }
                    }
                }
            }
        }
    }
    Ok(Image::from_clamped(w, h, 1, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_has_no_edges() {
        let img = Image::filled(16, 16, 3, 0.6);
        let e = canny(&img, 0.1, 0.2).unwrap();
        assert!(e.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_threshold_order() {
        let img = Image::filled(8, 8, 1, 0.5);
        assert!(canny(&img, 0.3, 0.2).is_err());
        assert!(canny(&img, 0.2, 0.2).is_err());
        assert!(canny(&img, 0.1, 1.5).is_err());
    }

    #[test]
    fn output_is_binary() {
        let img = Image::from_fn(24, 24, 3, |x, y, c| ((x * 5 + y * 3 + c) % 7) as f64 / 6.0);
        let e = canny(&img, 0.1, 0.2).unwrap();
        assert_eq!(e.channels(), 1);
        assert!(e.data().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn depends_only_on_luma() {
        let inside = |x: usize, y: usize| (6..14).contains(&x) && (5..15).contains(&y);
        let gray = Image::from_fn(20, 20, 3, |x, y, _| if inside(x, y) { 0.75 } else { 0.25 });
        // Shift chroma along a direction orthogonal to the luma weights.
        let d = 0.2;
        let tinted = Image::from_fn(20, 20, 3, |x, y, c| {
            let base = if inside(x, y) { 0.75 } else { 0.25 };
            let shift = if inside(x, y) { d } else { -d };
            base + shift * [0.587, -0.299, 0.0][c]
        });
        let la = gray.luma();
        let lb = tinted.luma();
        let dev = la.data().iter().zip(lb.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-12);
        assert_eq!(canny(&gray, 0.1, 0.2).unwrap(), canny(&tinted, 0.1, 0.2).unwrap());
    }
}

//! Image preprocessing, augmentation, perturbations and edge maps.
//!
//! All operations are pure: they borrow an [`Image`] and return a new one
//! whose values are finite and lie in `[0, 1]`.

mod canny;
mod filter;
mod perturb;
mod resize;

use std::path::Path;

use image::{DynamicImage, GrayImage, RgbImage};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub use canny::{canny, DEFAULT_CANNY_HIGH, DEFAULT_CANNY_LOW};
pub use filter::{add_gaussian_noise, bilateral_filter, gaussian_blur, gaussian_kernel};
pub use perturb::{PatchSpec, PerturbSpec, PATCH_SIZES};
pub use resize::{catmull_rom, resize_bicubic, resize_exact};

/// Interleaved row-major image with 1 or 3 channels of `f64` in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::validation(format!("image dimensions {width}x{height} must be nonzero")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::validation(format!("images have 1 or 3 channels, got {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::validation(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || !(0.0..=1.0).contains(*v)) {
            return Err(Error::validation(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds an image from arbitrary values, clamping into `[0, 1]`.
    pub(crate) fn from_clamped(width: usize, height: usize, channels: usize, mut data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self::from_clamped(width, height, channels, vec![value; width * height * channels])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::from_clamped(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Edge-clamped access with signed coordinates.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize, c: usize) -> f64 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.get(xc, yc, c)
    }

    pub fn is_valid(&self) -> bool {
        self.data.len() == self.width * self.height * self.channels
            && self.data.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v))
    }

    /// One channel as a contiguous plane.
    pub fn plane(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(self.channels).copied().collect()
    }

    /// Rec. 601 luma; single-channel images are returned unchanged.
    pub fn luma(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect();
        Self::from_clamped(self.width, self.height, 1, data)
    }

    /// Replicates a single channel to RGB.
    pub fn to_rgb(&self) -> Image {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        Self::from_clamped(self.width, self.height, 3, data)
    }

    pub fn flip_horizontal(&self) -> Image {
        let mut data = Vec::with_capacity(self.data.len());
        let c = self.channels;
        for y in 0..self.height {
            for x in (0..self.width).rev() {
                let i = (y * self.width + x) * c;
                data.extend_from_slice(&self.data[i..i + c]);
            }
        }
        Self {
            width: self.width,
            height: self.height,
            channels: c,
            data,
        }
    }

    /// Crops the `w`x`h` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Image> {
        if w == 0 || h == 0 || x0 + w > self.width || y0 + h > self.height {
            return Err(Error::validation(format!(
                "crop {w}x{h} at ({x0},{y0}) exceeds {}x{}",
                self.width, self.height
            )));
        }
        let c = self.channels;
        let mut data = Vec::with_capacity(w * h * c);
        for y in y0..y0 + h {
            let start = (y * self.width + x0) * c;
            data.extend_from_slice(&self.data[start..start + w * c]);
        }
        Ok(Self {
            width: w,
            height: h,
            channels: c,
            data,
        })
    }

    /// 8-bit quantization, rounding to nearest.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize_u8(v)).collect()
    }

    pub fn from_u8(width: usize, height: usize, channels: usize, bytes: &[u8]) -> Result<Image> {
        Image::new(
            width,
            height,
            channels,
            bytes.iter().map(|&b| b as f64 / 255.0).collect(),
        )
    }

    pub fn from_dynamic(img: &DynamicImage) -> Image {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let gray = matches!(
            img,
            DynamicImage::ImageLuma8(_)
                | DynamicImage::ImageLumaA8(_)
                | DynamicImage::ImageLuma16(_)
                | DynamicImage::ImageLumaA16(_)
        );
        if gray {
            let g = img.to_luma16();
            let data = g.as_raw().iter().map(|&v| v as f64 / 65535.0).collect();
            Self::from_clamped(w, h, 1, data)
        } else {
            let rgb = img.to_rgb8();
            let data = rgb.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
            Self::from_clamped(w, h, 3, data)
        }
    }

    /// Decodes a PNG or JPEG file.
    pub fn load(path: impl AsRef<Path>) -> Result<Image> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::from_dynamic(&img))
    }

    /// Writes an 8-bit PNG (grayscale or RGB by channel count).
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let (w, h) = (self.width as u32, self.height as u32);
        let bytes = self.to_u8();
        let res = if self.channels == 1 {
            GrayImage::from_raw(w, h, bytes).expect("sized buffer").save(path)
        } else {
            RgbImage::from_raw(w, h, bytes).expect("sized buffer").save(path)
        };
        res.map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[inline]
pub fn quantize_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Center crop to `size`x`size` with offset `floor((dim - size) / 2)`.
pub fn center_crop(img: &Image, size: usize) -> Result<Image> {
    if size == 0 || size > img.width.min(img.height) {
        return Err(Error::validation(format!(
            "center crop {size} does not fit {}x{}",
            img.width, img.height
        )));
    }
    img.crop((img.width - size) / 2, (img.height - size) / 2, size, size)
}

/// Flips horizontally iff the first uniform draw of `SplitMix64(seed)` is
/// below one half.
pub fn maybe_hflip(img: &Image, seed: u64) -> Image {
    if SplitMix64::new(seed).next_f64() < 0.5 {
        img.flip_horizontal()
    } else {
        img.clone()
    }
}

/// Resize shorter edge to the intermediate size, center-crop a `k`x`k`
/// patch, then resize it to `final_edge` square.
pub fn crop_patch(img: &Image, spec: &PatchSpec) -> Result<Image> {
    spec.validate()?;
    let resized = resize_bicubic(img, spec.intermediate_edge)?;
    let patch = center_crop(&resized, spec.k)?;
    resize_exact(&patch, spec.final_edge, spec.final_edge)
}

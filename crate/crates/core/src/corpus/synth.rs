//! Procedural generator corpus.
//!
//! Each [`SynthGeneratorSpec`] plays the role of one image generator: it
//! renders smooth random content and stamps it with a fixed combination of
//! colour grade, periodic texture, palette quantization, noise and
//! vignetting. Those signatures are what an attributor has to pick up.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{save_manifest, Manifest, SampleRecord, Split};
use crate::error::{Error, Result};
use crate::pixelops::Image;
use crate::rng::{derive_seed, fill_normal, SplitMix64};

const BASE_GRID: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Texture {
    None,
    /// `frequency` in cycles per image.
    Sine { frequency: f64, amplitude: f64 },
    /// `cell` in pixels.
    Checker { cell: usize, amplitude: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    White,
    Lowpass,
}

/// Additive noise; `sigma` is on the `[0, 1]` value scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthGeneratorSpec {
    pub name: String,
    pub palette_levels: u32,
    pub texture: Texture,
    pub noise: NoiseSpec,
    pub grade: [[f64; 3]; 3],
    pub vignette_strength: f64,
    pub seed_base: u64,
}

pub fn identity_grade() -> [[f64; 3]; 3] {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

impl SynthGeneratorSpec {
    /// A spec that reproduces the base field unchanged.
    pub fn plain(name: impl Into<String>, seed_base: u64) -> Self {
        Self {
            name: name.into(),
            palette_levels: 256,
            texture: Texture::None,
            noise: NoiseSpec {
                kind: NoiseKind::White,
                sigma: 0.0,
            },
            grade: identity_grade(),
            vignette_strength: 0.0,
            seed_base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::validation(format!("generator '{}': {m}", self.name)));
        if self.name.is_empty() {
            return Err(Error::validation("generator name is empty"));
        }
        if self.palette_levels < 2 {
            return bad(format!("palette_levels {} < 2", self.palette_levels));
        }
        for (i, row) in self.grade.iter().enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 || row.iter().any(|v| !v.is_finite()) {
                return bad(format!("grade row {i} sums to {s}, expected 1"));
            }
        }
        if !(self.noise.sigma >= 0.0) || !self.noise.sigma.is_finite() {
            return bad(format!("noise sigma {} must be >= 0", self.noise.sigma));
        }
        match self.texture {
            Texture::None => {}
            Texture::Sine { frequency, amplitude } => {
                if !(amplitude >= 0.0) || !frequency.is_finite() {
                    return bad("sine texture needs finite frequency and amplitude >= 0".into());
                }
            }
            Texture::Checker { cell, amplitude } => {
                if cell == 0 || !(amplitude >= 0.0) {
                    return bad("checker texture needs cell >= 1 and amplitude >= 0".into());
                }
            }
        }
        if !(0.0..=1.0).contains(&self.vignette_strength) {
            return bad(format!("vignette_strength {} outside [0, 1]", self.vignette_strength));
        }
        Ok(())
    }
}

/// Five generators with distinct, composable signatures. One of them is
/// named `real` and carries only mild sensor-like lowpass noise.
pub fn default_generators() -> Vec<SynthGeneratorSpec> {
    let warm = [[0.80, 0.15, 0.05], [0.05, 0.90, 0.05], [0.00, 0.25, 0.75]];
    let cool = [[0.70, 0.20, 0.10], [0.10, 0.80, 0.10], [0.05, 0.05, 0.90]];
    vec![
        SynthGeneratorSpec {
            noise: NoiseSpec {
                kind: NoiseKind::Lowpass,
                sigma: 0.09,
            },
            ..SynthGeneratorSpec::plain("real", 0x5EA1)
        },
        SynthGeneratorSpec {
            texture: Texture::Sine {
                frequency: 21.0,
                amplitude: 0.3,
            },
            noise: NoiseSpec {
                kind: NoiseKind::White,
                sigma: 0.06,
            },
            ..SynthGeneratorSpec::plain("gen_sine", 0x51E)
        },
        SynthGeneratorSpec {
            texture: Texture::Checker {
                cell: 2,
                amplitude: 0.24,
            },
            grade: cool,
            ..SynthGeneratorSpec::plain("gen_checker", 0xC4EC)
        },
        SynthGeneratorSpec {
            palette_levels: 10,
            noise: NoiseSpec {
                kind: NoiseKind::White,
                sigma: 0.03,
            },
            ..SynthGeneratorSpec::plain("gen_poster", 0x9057)
        },
        SynthGeneratorSpec {
            grade: warm,
            vignette_strength: 0.5,
            noise: NoiseSpec {
                kind: NoiseKind::White,
                sigma: 0.18,
            },
            ..SynthGeneratorSpec::plain("gen_vignette", 0x7167)
        },
    ]
}

/// Generators sharing palette, grade and vignette; they differ only in
/// texture and noise.
pub fn texture_only_generators() -> Vec<SynthGeneratorSpec> {
    let base = |name: &str, seed| SynthGeneratorSpec {
        palette_levels: 64,
        ..SynthGeneratorSpec::plain(name, seed)
    };
    vec![
        SynthGeneratorSpec {
            noise: NoiseSpec {
                kind: NoiseKind::White,
                sigma: 0.18,
            },
            ..base("tex_white", 0xA1)
        },
        SynthGeneratorSpec {
            noise: NoiseSpec {
                kind: NoiseKind::Lowpass,
                sigma: 0.18,
            },
            ..base("tex_lowpass", 0xA2)
        },
        SynthGeneratorSpec {
            texture: Texture::Sine {
                frequency: 24.0,
                amplitude: 0.24,
            },
            ..base("tex_sine", 0xA3)
        },
        SynthGeneratorSpec {
            texture: Texture::Checker {
                cell: 3,
                amplitude: 0.18,
            },
            ..base("tex_checker", 0xA4)
        },
        SynthGeneratorSpec {
            texture: Texture::Sine {
                frequency: 9.0,
                amplitude: 0.24,
            },
            noise: NoiseSpec {
                kind: NoiseKind::White,
                sigma: 0.06,
            },
            ..base("tex_sine_noisy", 0xA5)
        },
    ]
}

/// Bilinear upsample of an 8x8 uniform-random RGB grid; consumes the first
/// 192 draws of `rng`.
pub fn base_field(rng: &mut SplitMix64, size: usize) -> Image {
    let grid: Vec<f64> = (0..BASE_GRID * BASE_GRID * 3).map(|_| rng.next_f64()).collect();
    let g = |gx: usize, gy: usize, c: usize| grid[(gy * BASE_GRID + gx) * 3 + c];
    let scale = BASE_GRID as f64 / size as f64;
    let coord = |p: usize| -> (usize, usize, f64) {
        let s = ((p as f64 + 0.5) * scale - 0.5).clamp(0.0, (BASE_GRID - 1) as f64);
        let i0 = (s.floor() as usize).min(BASE_GRID - 2);
        (i0, i0 + 1, s - i0 as f64)
    };
    Image::from_fn(size, size, 3, |x, y, c| {
        let (x0, x1, tx) = coord(x);
        let (y0, y1, ty) = coord(y);
        let top = g(x0, y0, c) * (1.0 - tx) + g(x1, y0, c) * tx;
        let bottom = g(x0, y1, c) * (1.0 - tx) + g(x1, y1, c) * tx;
        top * (1.0 - ty) + bottom * ty
    })
}

fn sample_seed(spec: &SynthGeneratorSpec, master_seed: u64, index: u64) -> u64 {
    derive_seed(&[master_seed, spec.seed_base, index])
}

/// Renders sample `index` of `spec`: base field, then grade, texture,
/// palette quantization, noise and vignette in that order.
pub fn render_sample(spec: &SynthGeneratorSpec, master_seed: u64, index: u64, size: usize) -> Result<Image> {
    spec.validate()?;
    if size < 16 {
        return Err(Error::validation(format!("image size {size} < 16")));
    }
    let mut rng = SplitMix64::new(sample_seed(spec, master_seed, index));
    let base = base_field(&mut rng, size);
    let n = size * size;
    let mut px: Vec<f64> = base.into_data();

    for p in px.chunks_exact_mut(3) {
        let v = [p[0], p[1], p[2]];
        for (c, row) in spec.grade.iter().enumerate() {
            p[c] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
        }
    }

    match spec.texture {
        Texture::None => {}
        Texture::Sine { frequency, amplitude } => {
            let phx = rng.uniform(0.0, std::f64::consts::TAU);
            let phy = rng.uniform(0.0, std::f64::consts::TAU);
            let k = std::f64::consts::TAU * frequency / size as f64;
            for y in 0..size {
                for x in 0..size {
                    let t = 0.5 * amplitude * ((k * x as f64 + phx).sin() + (k * y as f64 + phy).sin());
                    for c in 0..3 {
                        px[(y * size + x) * 3 + c] += t;
                    }
                }
            }
        }
        Texture::Checker { cell, amplitude } => {
            for y in 0..size {
                for x in 0..size {
                    let t = if (x / cell + y / cell) % 2 == 0 { amplitude } else { -amplitude };
                    for c in 0..3 {
                        px[(y * size + x) * 3 + c] += t;
                    }
                }
            }
        }
    }

    let levels = (spec.palette_levels - 1) as f64;
    for v in &mut px {
        *v = (v.clamp(0.0, 1.0) * levels).round() / levels;
    }

    if spec.noise.sigma > 0.0 {
        let mut noise = vec![0.0; n * 3];
        fill_normal(&mut rng, &mut noise);
        if spec.noise.kind == NoiseKind::Lowpass {
            noise = box3(&noise, size);
        }
        for (v, e) in px.iter_mut().zip(&noise) {
            *v += spec.noise.sigma * e;
        }
    }

    if spec.vignette_strength > 0.0 {
        let half = size as f64 / 2.0;
        let rmax2 = 2.0 * half * half;
        for y in 0..size {
            for x in 0..size {
                let dx = x as f64 + 0.5 - half;
                let dy = y as f64 + 0.5 - half;
                let f = 1.0 - spec.vignette_strength * (dx * dx + dy * dy) / rmax2;
                for c in 0..3 {
                    px[(y * size + x) * 3 + c] *= f;
                }
            }
        }
    }

    Ok(Image::from_clamped(size, size, 3, px))
}

// 3x3 box filter rescaled by 3 so the per-pixel standard deviation of white
// input is preserved.
fn box3(noise: &[f64], size: usize) -> Vec<f64> {
    let mut out = vec![0.0; noise.len()];
    let s = size as isize;
    for y in 0..s {
        for x in 0..s {
            for c in 0..3 {
                let mut acc = 0.0;
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let xx = (x + dx).rem_euclid(s) as usize;
                        let yy = (y + dy).rem_euclid(s) as usize;
                        acc += noise[(yy * size + xx) * 3 + c];
                    }
                }
                out[(y as usize * size + x as usize) * 3 + c] = acc / 3.0;
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }

    fn split_of(&self, i: usize) -> (Split, usize) {
        if i < self.train {
            (Split::Train, i)
        } else if i < self.train + self.val {
            (Split::Val, i - self.train)
        } else {
            (Split::Test, i - self.train - self.val)
        }
    }
}

/// Renders a corpus into `out_dir` and writes `out_dir/manifest.jsonl`.
///
/// Sample `i` of a generator (numbered across train, val, test in that
/// order) is seeded by `(master_seed, seed_base, i)`.
pub fn synth_corpus(
    specs: &[SynthGeneratorSpec],
    per_class: SplitCounts,
    image_size: usize,
    master_seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<Manifest> {
    let out_dir = out_dir.as_ref();
    if per_class.train == 0 || per_class.val == 0 || per_class.test == 0 {
        return Err(Error::validation("per-class split counts must be >= 1"));
    }
    if image_size < 16 {
        return Err(Error::validation(format!("image size {image_size} < 16")));
    }
    if specs.is_empty() {
        return Err(Error::validation("at least one generator spec is required"));
    }
    let mut names = std::collections::HashSet::new();
    for s in specs {
        s.validate()?;
        if !names.insert(s.name.as_str()) {
            return Err(Error::validation(format!("duplicate generator name '{}'", s.name)));
        }
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for s in specs {
        let d = out_dir.join("images").join(&s.name);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }

    let jobs: Vec<(usize, usize)> = (0..specs.len())
        .flat_map(|g| (0..per_class.total()).map(move |i| (g, i)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(g, i)| {
            let spec = &specs[g];
            let (split, j) = per_class.split_of(i);
            let rel = format!("images/{}/{}_{:04}.png", spec.name, split, j);
            let img = render_sample(spec, master_seed, i as u64, image_size)?;
            img.save_png(out_dir.join(&rel))?;
            Ok(SampleRecord::new(rel, spec.name.clone(), split))
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = Manifest::from_records(records)?.with_root(out_dir);
    save_manifest(&manifest, out_dir.join("manifest.jsonl"))?;
    Ok(manifest)
}

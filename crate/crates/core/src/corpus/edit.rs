use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::synth::{render_sample, SynthGeneratorSpec};
use super::{save_manifest, EditInfo, Manifest, SampleRecord, Split};
use crate::error::{Error, Result};
use crate::pixelops::Image;
use crate::rng::{derive_seed, SplitMix64};

/// Edit-region size category.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditBin {
    Small,
    Medium,
    Large,
    Full,
    OutOfRange,
}

impl std::fmt::Display for EditBin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EditBin::Small => "small",
            EditBin::Medium => "medium",
            EditBin::Large => "large",
            EditBin::Full => "full",
            EditBin::OutOfRange => "out_of_range",
        })
    }
}

/// Fraction of mask pixels equal to 1. The mask must be single-channel and
/// strictly binary.
pub fn edit_ratio(mask: &Image) -> Result<f64> {
    if mask.channels() != 1 {
        return Err(Error::validation(format!(
            "edit mask must be single-channel, got {} channels",
            mask.channels()
        )));
    }
    let mut ones = 0usize;
    for &v in mask.data() {
        if v == 1.0 {
            ones += 1;
        } else if v != 0.0 {
            return Err(Error::validation(format!("edit mask value {v} is not binary")));
        }
    }
    Ok(ones as f64 / mask.data().len() as f64)
}

/// Upper-inclusive bins: `[0, .15]`, `(.15, .30]`, `(.30, .60]`, exactly 1,
/// and everything else in `(.60, 1)`.
pub fn edit_bin(ratio: f64) -> Result<EditBin> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::validation(format!("edit ratio {ratio} outside [0, 1]")));
    }
    Ok(if ratio <= 0.15 {
        EditBin::Small
    } else if ratio <= 0.30 {
        EditBin::Medium
    } else if ratio <= 0.60 {
        EditBin::Large
    } else if ratio == 1.0 {
        EditBin::Full
    } else {
        EditBin::OutOfRange
    })
}

/// Loads a mask PNG and binarizes it at `> 127`.
pub fn load_mask(path: impl AsRef<Path>) -> Result<Image> {
    let img = Image::load(path)?.luma();
    let data = img.to_u8().into_iter().map(|b| if b > 127 { 1.0 } else { 0.0 }).collect();
    Image::new(img.width(), img.height(), 1, data)
}

/// Random connected free-form region covering exactly `round(ratio * w * h)`
/// pixels, grown from a random seed pixel.
pub fn freeform_mask(width: usize, height: usize, ratio: f64, seed: u64) -> Result<Image> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::validation(format!("mask ratio {ratio} outside [0, 1]")));
    }
    let n = width * height;
    let target = (ratio * n as f64).round() as usize;
    let mut mask = vec![0.0; n];
    let mut rng = SplitMix64::new(seed);
    let mut frontier = vec![rng.below(n)];
    let mut filled = 0;
    while filled < target {
        let pick = rng.below(frontier.len());
        let p = frontier.swap_remove(pick);
        if mask[p] == 1.0 {
            continue;
        }
        mask[p] = 1.0;
        filled += 1;
        let (x, y) = (p % width, p / width);
        if x > 0 {
            frontier.push(p - 1);
        }
        if x + 1 < width {
            frontier.push(p + 1);
        }
        if y > 0 {
            frontier.push(p - width);
        }
        if y + 1 < height {
            frontier.push(p + width);
        }
    }
    Image::new(width, height, 1, mask)
}

/// Replaces masked pixels of `base` with those of `donor`.
pub fn composite(base: &Image, donor: &Image, mask: &Image) -> Result<Image> {
    if (base.width(), base.height(), base.channels()) != (donor.width(), donor.height(), donor.channels())
        || (mask.width(), mask.height()) != (base.width(), base.height())
        || mask.channels() != 1
    {
        return Err(Error::validation("composite inputs must share dimensions"));
    }
    let c = base.channels();
    let data = base
        .data()
        .iter()
        .zip(donor.data())
        .enumerate()
        .map(|(i, (b, d))| if mask.data()[i / c] == 1.0 { *d } else { *b })
        .collect();
    Image::new(base.width(), base.height(), c, data)
}

/// Synthetic post-edit corpus: for every generator and every target ratio,
/// `per_class` fresh images whose free-form masked region is re-rendered by
/// the next generator in `specs`. Masks are written next to the images and
/// the records carry `mask_path` only, so ratios are measured from masks.
pub fn synth_edited_corpus(
    specs: &[SynthGeneratorSpec],
    ratios: &[f64],
    per_class: usize,
    image_size: usize,
    master_seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<Manifest> {
    let out_dir = out_dir.as_ref();
    if specs.len() < 2 {
        return Err(Error::validation("edited corpus needs at least two generators"));
    }
    fs::create_dir_all(out_dir.join("edited")).map_err(|e| Error::io(out_dir, e))?;
    fs::create_dir_all(out_dir.join("masks")).map_err(|e| Error::io(out_dir, e))?;
    // Index offset keeps edited samples disjoint from corpus samples.
    const OFFSET: u64 = 1 << 32;
    let mut records = Vec::new();
    for (g, spec) in specs.iter().enumerate() {
        let donor = &specs[(g + 1) % specs.len()];
        for (ri, &ratio) in ratios.iter().enumerate() {
            for j in 0..per_class {
                let index = OFFSET + (ri * per_class + j) as u64;
                let base = render_sample(spec, master_seed, index, image_size)?;
                let other = render_sample(donor, master_seed, index, image_size)?;
                let mask_seed = derive_seed(&[master_seed, spec.seed_base, index, 0x3A5C]);
                let mask = freeform_mask(image_size, image_size, ratio, mask_seed)?;
                let edited = composite(&base, &other, &mask)?;
                let stem = format!("{}_r{:03}_{:04}", spec.name, (ratio * 100.0).round() as u32, j);
                let img_rel = format!("edited/{stem}.png");
                let mask_rel = format!("masks/{stem}.png");
                edited.save_png(out_dir.join(&img_rel))?;
                mask.save_png(out_dir.join(&mask_rel))?;
                let mut rec = SampleRecord::new(img_rel, spec.name.clone(), Split::Test);
                rec.edit = Some(EditInfo {
                    editor: format!("resample:{}", donor.name),
                    mask_path: Some(mask_rel),
                    edit_ratio: None,
                });
                records.push(rec);
            }
        }
    }
    let m = Manifest::from_records(records)?.with_root(out_dir);
    save_manifest(&m, out_dir.join("edited.jsonl"))?;
    Ok(m)
}

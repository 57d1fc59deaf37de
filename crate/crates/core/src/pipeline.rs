//! Record-to-embedding pipelines.
//!
//! A [`Pipeline`] fixes every step between a manifest record and the vector a
//! head consumes: which image channel to read, geometric preprocessing, an
//! optional perturbation, the representation, and optional prompt
//! concatenation. It is plain data so run configs can persist it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binio::fnv1a64;
use crate::corpus::{load_mask, Manifest, SampleRecord};
use crate::error::{Error, Result};
use crate::evalkit::segmentation_embedding;
use crate::features::{
    build_backbone, concat, extract_pyramid, load_features, pixel_embedding, text_embedding, Backbone,
    BackboneConfig, Embedding, EmbeddingKind, DEFAULT_TEXT_DIM,
};
use crate::pixelops::{canny, center_crop, crop_patch, maybe_hflip, resize_bicubic, Image, PatchSpec, PerturbSpec};
use crate::rng::derive_seed;
use crate::style::{style_vector, style_vector_all};

/// Aux-map key prefix for per-class segmentation masks (`seg:<class>`).
pub const SEGMENTATION_PREFIX: &str = "seg:";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputChannel {
    #[default]
    Rgb,
    Canny { low: f64, high: f64 },
    /// A precomputed map (depth, normals, ...) named in `aux_maps`.
    AuxMap { name: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Representation {
    Pixel {
        grid: usize,
    },
    Style {
        #[serde(default)]
        backbone: BackboneConfig,
        #[serde(default)]
        layers: Option<Vec<usize>>,
    },
    /// Feature file named by `aux_maps[key]`. A single `(1, 1, dim)` layer
    /// is used as-is; anything else is reduced to a style vector.
    FeaturesFile {
        key: String,
        #[serde(default)]
        layers: Option<Vec<usize>>,
    },
    Segmentation {
        vocab: Vec<String>,
        grid: usize,
    },
}

impl Representation {
    pub fn name(&self) -> &'static str {
        match self {
            Representation::Pixel { .. } => "pixel",
            Representation::Style { .. } => "style",
            Representation::FeaturesFile { .. } => "features_file",
            Representation::Segmentation { .. } => "segmentation",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextConfig {
    pub dim: usize,
    pub seed: u64,
}

impl Default for TextConfig {
    fn default() -> Self {
        Self {
            dim: DEFAULT_TEXT_DIM,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    #[serde(default)]
    pub input: InputChannel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resize: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patch: Option<PatchSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturb: Option<PerturbSpec>,
    pub representation: Representation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<TextConfig>,
    /// Seed for horizontal-flip augmentation of training records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hflip_seed: Option<u64>,
}

impl Pipeline {
    pub fn new(representation: Representation) -> Self {
        Self {
            input: InputChannel::Rgb,
            resize: None,
            crop: None,
            patch: None,
            perturb: None,
            representation,
            text: None,
            hflip_seed: None,
        }
    }

    pub fn style() -> Self {
        Self::new(Representation::Style {
            backbone: BackboneConfig::default(),
            layers: None,
        })
    }

    pub fn pixel(grid: usize) -> Self {
        Self::new(Representation::Pixel { grid })
    }

    pub fn with_perturb(mut self, p: Option<PerturbSpec>) -> Self {
        self.perturb = p;
        self
    }

    /// Short human-readable summary for report metadata.
    pub fn describe(&self) -> String {
        let mut parts = vec![self.representation.name().to_string()];
        match &self.input {
            InputChannel::Rgb => {}
            InputChannel::Canny { low, high } => parts.push(format!("canny({low},{high})")),
            InputChannel::AuxMap { name } => parts.push(format!("aux({name})")),
        }
        if let Some(r) = self.resize {
            parts.push(format!("resize={r}"));
        }
        if let Some(c) = self.crop {
            parts.push(format!("crop={c}"));
        }
        if let Some(p) = &self.patch {
            parts.push(format!("patch={}", p.k));
        }
        if self.text.is_some() {
            parts.push("+text".into());
        }
        parts.join(" ")
    }

    pub fn prepare(&self) -> Result<PreparedPipeline> {
        if let Some(p) = &self.perturb {
            p.validate()?;
        }
        if let Some(p) = &self.patch {
            p.validate()?;
        }
        let backbone = match &self.representation {
            Representation::Style { backbone, .. } => Some(build_backbone(backbone)?),
            Representation::Pixel { grid } | Representation::Segmentation { grid, .. } if *grid == 0 => {
                return Err(Error::validation("grid must be >= 1"));
            }
            Representation::Segmentation { vocab, .. } if vocab.is_empty() => {
                return Err(Error::validation("segmentation vocabulary is empty"));
            }
            _ => None,
        };
        Ok(PreparedPipeline {
            pipeline: self.clone(),
            backbone,
        })
    }
}

/// A pipeline with its backbone built; shareable across workers.
pub struct PreparedPipeline {
    pipeline: Pipeline,
    backbone: Option<Backbone>,
}

impl PreparedPipeline {
    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    /// Loads and preprocesses the record's input image.
    pub fn load_input(&self, manifest: &Manifest, record: &SampleRecord, augment: bool) -> Result<Image> {
        let p = &self.pipeline;
        let path = match &p.input {
            InputChannel::AuxMap { name } => record
                .aux_maps
                .get(name)
                .ok_or_else(|| Error::validation(format!("record {} has no aux map '{name}'", record.image_path)))?,
            _ => &record.image_path,
        };
        let mut img = Image::load(manifest.resolve(path))?;
        if let Some(r) = p.resize {
            img = resize_bicubic(&img, r)?;
        }
        if let Some(c) = p.crop {
            img = center_crop(&img, c)?;
        }
        if let Some(spec) = &p.patch {
            img = crop_patch(&img, spec)?;
        }
        let salt = fnv1a64(record.image_path.as_bytes());
        if augment {
            if let Some(seed) = p.hflip_seed {
                img = maybe_hflip(&img, derive_seed(&[seed, salt]));
            }
        }
        if let Some(perturb) = &p.perturb {
            img = perturb.apply(&img, salt)?;
        }
        if let InputChannel::Canny { low, high } = p.input {
            img = canny(&img, low, high)?;
        }
        Ok(img)
    }

    /// Embedding for one record. `augment` enables training-time flips.
    pub fn embed(&self, manifest: &Manifest, record: &SampleRecord, augment: bool) -> Result<Embedding> {
        let p = &self.pipeline;
        let base = match &p.representation {
            Representation::Pixel { grid } => pixel_embedding(&self.load_input(manifest, record, augment)?, *grid)?,
            Representation::Style { layers, .. } => {
                let img = self.load_input(manifest, record, augment)?.to_rgb();
                let pyr = extract_pyramid(self.backbone.as_ref().expect("style backbone"), &img)?;
                let sv = match layers {
                    Some(l) => style_vector(&pyr, l)?,
                    None => style_vector_all(&pyr)?,
                };
                sv.to_embedding()
            }
            Representation::FeaturesFile { key, layers } => {
                let path = record.aux_maps.get(key).ok_or_else(|| {
                    Error::validation(format!("record {} has no feature file '{key}'", record.image_path))
                })?;
                let pyr = load_features(manifest.resolve(path))?;
                if pyr.layers.len() == 1 && layers.is_none() && pyr.layers[0].height() == 1 && pyr.layers[0].width() == 1
                {
                    Embedding::new(
                        EmbeddingKind::Image,
                        pyr.layers[0].data().iter().map(|&v| v as f64).collect(),
                    )?
                } else {
                    match layers {
                        Some(l) => style_vector(&pyr, l)?,
                        None => style_vector_all(&pyr)?,
                    }
                    .to_embedding()
                }
            }
            Representation::Segmentation { vocab, grid } => {
                let mut masks = std::collections::BTreeMap::new();
                for (k, path) in &record.aux_maps {
                    if let Some(class) = k.strip_prefix(SEGMENTATION_PREFIX) {
                        masks.insert(class.to_string(), load_mask(manifest.resolve(path))?);
                    }
                }
                segmentation_embedding(&masks, vocab, *grid)?
            }
        };
        match &p.text {
            None => Ok(base),
            Some(t) => {
                let text = text_embedding(record.prompt.as_deref().unwrap_or(""), t.dim, t.seed)?;
                concat(&[base, text])
            }
        }
    }

    /// Embeds every record in parallel; order matches the manifest.
    pub fn embed_manifest(&self, manifest: &Manifest, augment: bool) -> Vec<Result<Embedding>> {
        manifest
            .records()
            .par_iter()
            .map(|r| self.embed(manifest, r, augment))
            .collect()
    }

    /// Embeds a manifest and pairs each embedding with its class index in
    /// `classes`. Fails on the first unreadable record.
    pub fn labelled_set(&self, manifest: &Manifest, classes: &[String], augment: bool) -> Result<Vec<(Embedding, usize)>> {
        let embs = self.embed_manifest(manifest, augment);
        manifest
            .records()
            .iter()
            .zip(embs)
            .map(|(r, e)| {
                let y = classes
                    .iter()
                    .position(|c| *c == r.class_label)
                    .ok_or_else(|| Error::validation(format!("unknown class '{}'", r.class_label)))?;
                Ok((e?, y))
            })
            .collect()
    }
}

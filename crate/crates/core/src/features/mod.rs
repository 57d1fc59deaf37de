//! Feature extraction and embeddings.

mod backbone;
mod embed;
mod file;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use backbone::{build_backbone, build_backbone_with_input, extract_pyramid, Backbone, BackboneConfig};
pub(crate) use embed::pool_plane;
pub use embed::{concat, pixel_embedding, text_embedding, DEFAULT_TEXT_DIM};
pub use file::{decode_features, encode_features, load_features, save_features, FEATURE_MAGIC, FEATURE_VERSION};

/// Feature map `F` with shape `H x W x N`, stored row-major with channels
/// innermost.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::validation(format!(
                "feature map dims must be >= 1, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::validation(format!(
                "feature data length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("feature map contains non-finite values"));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeaturePyramid {
    pub layers: Vec<FeatureMap>,
    pub backbone_id: String,
    pub source_image_id: String,
}

impl FeaturePyramid {
    pub fn new(layers: Vec<FeatureMap>, backbone_id: impl Into<String>, source_image_id: impl Into<String>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::validation("feature pyramid needs at least one layer"));
        }
        Ok(Self {
            layers,
            backbone_id: backbone_id.into(),
            source_image_id: source_image_id.into(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    Image,
    Text,
    Style,
    Pixel,
    Segmentation,
    Concatenated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub kind: EmbeddingKind,
    pub data: Vec<f64>,
}

impl Embedding {
    pub fn new(kind: EmbeddingKind, data: Vec<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("embedding contains non-finite values"));
        }
        Ok(Self { kind, data })
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }
}

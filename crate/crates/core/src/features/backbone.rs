//! Frozen random convolutional pyramid.
//!
//! Each layer is `avgpool2(relu(conv(x)))` with unit-norm filters and no
//! bias, so the whole map is positively homogeneous in its input.

use serde::{Deserialize, Serialize};

use super::{FeatureMap, FeaturePyramid};
use crate::error::{Error, Result};
use crate::pixelops::Image;
use crate::rng::SplitMix64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackboneConfig {
    pub layer_channels: Vec<usize>,
    pub kernel: usize,
    pub seed: u64,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        Self {
            layer_channels: vec![16, 32, 64],
            kernel: 3,
            seed: 0,
        }
    }
}

impl BackboneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layer_channels.is_empty() || self.layer_channels.contains(&0) {
            return Err(Error::validation("backbone layer channel counts must be nonempty and >= 1"));
        }
        if self.kernel == 0 {
            return Err(Error::validation("backbone kernel must be >= 1"));
        }
        Ok(())
    }

    pub fn id(&self) -> String {
        let chans: Vec<String> = self.layer_channels.iter().map(|c| c.to_string()).collect();
        format!("randconv-k{}-{}-s{}", self.kernel, chans.join("x"), self.seed)
    }
}

#[derive(Clone, Debug)]
struct ConvLayer {
    in_channels: usize,
    out_channels: usize,
    // [out][ky][kx][in]
    weights: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Backbone {
    config: BackboneConfig,
    layers: Vec<ConvLayer>,
}

impl Backbone {
    pub fn config(&self) -> &BackboneConfig {
        &self.config
    }

    pub fn id(&self) -> String {
        self.config.id()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Filter `o` of layer `l`, flattened as `[ky][kx][in]`.
    pub fn filter(&self, l: usize, o: usize) -> &[f64] {
        let layer = &self.layers[l];
        let len = self.config.kernel * self.config.kernel * layer.in_channels;
        &layer.weights[o * len..(o + 1) * len]
    }

    pub fn filter_count(&self, l: usize) -> usize {
        self.layers[l].out_channels
    }
}

/// Draws filters uniform in `(-1, 1)` from `SplitMix64(cfg.seed)` and scales
/// each to unit Euclidean norm. Image inputs are assumed to be RGB.
pub fn build_backbone(cfg: &BackboneConfig) -> Result<Backbone> {
    build_backbone_with_input(cfg, 3)
}

pub fn build_backbone_with_input(cfg: &BackboneConfig, input_channels: usize) -> Result<Backbone> {
    cfg.validate()?;
    let mut rng = SplitMix64::new(cfg.seed);
    let k2 = cfg.kernel * cfg.kernel;
    let mut in_channels = input_channels;
    let mut layers = Vec::with_capacity(cfg.layer_channels.len());
    for &out_channels in &cfg.layer_channels {
        let len = k2 * in_channels;
        let mut weights = Vec::with_capacity(len * out_channels);
        for _ in 0..out_channels {
            let mut f: Vec<f64> = (0..len).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in &mut f {
                    *v /= norm;
                }
            }
            weights.extend(f);
        }
        layers.push(ConvLayer {
            in_channels,
            out_channels,
            weights,
        });
        in_channels = out_channels;
    }
    Ok(Backbone {
        config: cfg.clone(),
        layers,
    })
}

fn conv_relu_pool(input: &[f64], h: usize, w: usize, layer: &ConvLayer, kernel: usize) -> (Vec<f64>, usize, usize) {
    let cin = layer.in_channels;
    let cout = layer.out_channels;
    let half = (kernel as isize - 1) / 2;
    let patch_len = kernel * kernel * cin;
    let mut patch = vec![0.0; patch_len];
    let mut act = vec![0.0; h * w * cout];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut p = 0;
            for ky in 0..kernel as isize {
                let yy = (y + ky - half).clamp(0, h as isize - 1) as usize;
                for kx in 0..kernel as isize {
                    let xx = (x + kx - half).clamp(0, w as isize - 1) as usize;
                    let src = (yy * w + xx) * cin;
                    patch[p..p + cin].copy_from_slice(&input[src..src + cin]);
                    p += cin;
                }
            }
            let dst = (y as usize * w + x as usize) * cout;
            for o in 0..cout {
                let f = &layer.weights[o * patch_len..(o + 1) * patch_len];
                let r: f64 = f.iter().zip(&patch).map(|(a, b)| a * b).sum();
                act[dst + o] = r.max(0.0);
            }
        }
    }
    let (ph, pw) = (h / 2, w / 2);
    let mut pooled = vec![0.0; ph * pw * cout];
    for y in 0..ph {
        for x in 0..pw {
            for o in 0..cout {
                let a = |yy: usize, xx: usize| act[(yy * w + xx) * cout + o];
                pooled[(y * pw + x) * cout + o] =
                    0.25 * (a(2 * y, 2 * x) + a(2 * y, 2 * x + 1) + a(2 * y + 1, 2 * x) + a(2 * y + 1, 2 * x + 1));
            }
        }
    }
    (pooled, ph, pw)
}

/// Runs the image through every layer, returning the post-pool maps.
pub fn extract_pyramid(backbone: &Backbone, img: &Image) -> Result<FeaturePyramid> {
    extract_from_values(backbone, img.data(), img.height(), img.width(), img.channels(), "")
}

pub(crate) fn extract_from_values(
    backbone: &Backbone,
    values: &[f64],
    h: usize,
    w: usize,
    channels: usize,
    source_id: &str,
) -> Result<FeaturePyramid> {
    let levels = backbone.layers.len();
    let min_side = 1usize << levels;
    if h < min_side || w < min_side {
        return Err(Error::validation(format!(
            "image {w}x{h} is smaller than {min_side} px required by {levels} pooling layers"
        )));
    }
    if channels != backbone.layers[0].in_channels {
        return Err(Error::validation(format!(
            "backbone expects {} input channels, image has {channels}",
            backbone.layers[0].in_channels
        )));
    }
    let mut cur = values.to_vec();
    let (mut ch, mut cw) = (h, w);
    let mut maps = Vec::with_capacity(levels);
    for layer in &backbone.layers {
        let (next, nh, nw) = conv_relu_pool(&cur, ch, cw, layer, backbone.config.kernel);
        maps.push(FeatureMap::new(
            nh,
            nw,
            layer.out_channels,
            next.iter().map(|&v| v as f32).collect(),
        )?);
        cur = next;
        ch = nh;
        cw = nw;
    }
    FeaturePyramid::new(maps, backbone.id(), source_id)
}

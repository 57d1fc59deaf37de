//! Run configs: built-in defaults, overlaid by a TOML file, overlaid by
//! command-line flags. The resolved config is written next to the outputs
//! so the run can be repeated with `--config <out>/run.toml`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use attrikit::attributor::{HeadConfig, HeadKind, TrainConfig};
use attrikit::features::BackboneConfig;
use attrikit::pipeline::{InputChannel, Pipeline, Representation, TextConfig};
use attrikit::pixelops::{PatchSpec, PerturbSpec};
use clap::{Args, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const RUN_CONFIG: &str = "run.toml";
pub const RUN_META: &str = "run.meta.json";

/// Overwrites `$dst` with each flag that was given.
macro_rules! overlay {
    ($dst:expr, $src:expr; $($field:ident),+ $(,)?) => {
        $(if let Some(v) = $src.$field { $dst.$field = v; })+
    };
}
pub(crate) use overlay;

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

pub fn require_path(p: &Path, flag: &str) -> Result<()> {
    if p.as_os_str().is_empty() {
        bail!("missing {flag} (flag or config key)");
    }
    Ok(())
}

#[derive(Serialize)]
struct RunMeta<'a> {
    command: &'a str,
    version: &'a str,
    started: String,
    finished: String,
    argv: Vec<String>,
}

pub struct Sidecar {
    command: &'static str,
    started: chrono::DateTime<chrono::Utc>,
}

impl Sidecar {
    pub fn start(command: &'static str) -> Self {
        Self {
            command,
            started: chrono::Utc::now(),
        }
    }

    /// Writes the resolved config (deterministic) and the run metadata
    /// (timestamps, argv) into `dir`.
    pub fn finish<T: Serialize>(self, dir: &Path, cfg: &T) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let text = toml::to_string(cfg).context("serializing run config")?;
        fs::write(dir.join(RUN_CONFIG), text).context("writing run config")?;
        let meta = RunMeta {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            started: self.started.to_rfc3339(),
            finished: chrono::Utc::now().to_rfc3339(),
            argv: std::env::args().collect(),
        };
        fs::write(dir.join(RUN_META), serde_json::to_string_pretty(&meta)? + "\n").context("writing run metadata")?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ReprKind {
    Pixel,
    #[default]
    Style,
    FeaturesFile,
    Segmentation,
}

/// Flat, config-file friendly description of a [`Pipeline`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSettings {
    pub representation: ReprKind,
    /// `rgb`, `canny`, or `aux:<name>` for a precomputed map.
    pub input: String,
    pub canny_low: f64,
    pub canny_high: f64,
    pub grid: usize,
    pub backbone: BackboneConfig,
    pub layers: Option<Vec<usize>>,
    pub feature_key: String,
    pub vocab: Vec<String>,
    pub resize: Option<usize>,
    pub crop: Option<usize>,
    pub patch_k: Option<usize>,
    /// Perturbation in `kind:key=value,...` form, e.g. `blur:sigma=1`.
    pub perturb: Option<String>,
    pub text_dim: Option<usize>,
    pub text_seed: u64,
    pub hflip_seed: Option<u64>,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self {
            representation: ReprKind::Style,
            input: "rgb".into(),
            canny_low: attrikit::pixelops::DEFAULT_CANNY_LOW,
            canny_high: attrikit::pixelops::DEFAULT_CANNY_HIGH,
            grid: 8,
            backbone: BackboneConfig::default(),
            layers: None,
            feature_key: "features".into(),
            vocab: Vec::new(),
            resize: None,
            crop: None,
            patch_k: None,
            perturb: None,
            text_dim: None,
            text_seed: 0,
            hflip_seed: None,
        }
    }
}

impl PipelineSettings {
    pub fn to_pipeline(&self) -> Result<Pipeline> {
        let representation = match self.representation {
            ReprKind::Pixel => Representation::Pixel { grid: self.grid },
            ReprKind::Style => Representation::Style {
                backbone: self.backbone.clone(),
                layers: self.layers.clone(),
            },
            ReprKind::FeaturesFile => Representation::FeaturesFile {
                key: self.feature_key.clone(),
                layers: self.layers.clone(),
            },
            ReprKind::Segmentation => Representation::Segmentation {
                vocab: self.vocab.clone(),
                grid: self.grid,
            },
        };
        let input = match self.input.as_str() {
            "rgb" => InputChannel::Rgb,
            "canny" => InputChannel::Canny {
                low: self.canny_low,
                high: self.canny_high,
            },
            other => match other.strip_prefix("aux:") {
                Some(name) if !name.is_empty() => InputChannel::AuxMap { name: name.into() },
                _ => bail!("unknown input '{other}' (expected rgb, canny or aux:<name>)"),
            },
        };
        let perturb = self
            .perturb
            .as_deref()
            .map(str::parse::<PerturbSpec>)
            .transpose()
            .context("parsing perturbation")?;
        let mut p = Pipeline::new(representation);
        p.input = input;
        p.resize = self.resize;
        p.crop = self.crop;
        p.patch = self.patch_k.map(PatchSpec::new);
        p.perturb = perturb;
        p.text = self.text_dim.map(|dim| TextConfig {
            dim,
            seed: self.text_seed,
        });
        p.hflip_seed = self.hflip_seed;
        Ok(p)
    }
}

#[derive(Args, Debug, Default)]
pub struct PipelineArgs {
    /// Input representation.
    #[arg(long, value_enum)]
    pub repr: Option<ReprKind>,
    /// Image channel: rgb, canny or aux:<name>.
    #[arg(long)]
    pub input: Option<String>,
    /// Pooling grid for pixel and segmentation embeddings.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Backbone filter seed.
    #[arg(long)]
    pub backbone_seed: Option<u64>,
    /// Backbone layer indices feeding the style vector (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<usize>>,
    /// Aux-map key naming the feature file of each record.
    #[arg(long)]
    pub feature_key: Option<String>,
    /// Segmentation vocabulary (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub vocab: Option<Vec<String>>,
    /// Resize so the shorter edge has this length.
    #[arg(long)]
    pub resize: Option<usize>,
    /// Center crop to this square size.
    #[arg(long)]
    pub crop: Option<usize>,
    /// Center patch size k.
    #[arg(long)]
    pub patch_k: Option<usize>,
    /// Perturbation, e.g. `blur:sigma=1`, `noise:sigma=0.05,seed=3`.
    #[arg(long)]
    pub perturb: Option<String>,
    /// Concatenate a prompt embedding of this dimension.
    #[arg(long)]
    pub text_dim: Option<usize>,
    /// Seed for training-time horizontal flips.
    #[arg(long)]
    pub hflip_seed: Option<u64>,
}

impl PipelineArgs {
    pub fn apply(self, s: &mut PipelineSettings) {
        if let Some(v) = self.repr {
            s.representation = v;
        }
        if let Some(v) = self.backbone_seed {
            s.backbone.seed = v;
        }
        overlay!(s, self; input, grid, feature_key, vocab);
        if self.layers.is_some() {
            s.layers = self.layers;
        }
        for (dst, src) in [
            (&mut s.resize, self.resize),
            (&mut s.crop, self.crop),
            (&mut s.patch_k, self.patch_k),
            (&mut s.text_dim, self.text_dim),
        ] {
            if src.is_some() {
                *dst = src;
            }
        }
        if self.perturb.is_some() {
            s.perturb = self.perturb;
        }
        if self.hflip_seed.is_some() {
            s.hflip_seed = self.hflip_seed;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadSettings {
    pub kind: HeadKind,
    pub hidden_dim: usize,
    pub init_seed: u64,
}

impl Default for HeadSettings {
    fn default() -> Self {
        Self {
            kind: HeadKind::Linear,
            hidden_dim: 256,
            init_seed: 0,
        }
    }
}

impl HeadSettings {
    /// Template; input and class counts are filled in from the data.
    pub fn template(&self) -> HeadConfig {
        HeadConfig {
            kind: self.kind,
            input_dim: 1,
            num_classes: 1,
            hidden_dim: self.hidden_dim,
            init_seed: self.init_seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum HeadArg {
    Linear,
    Mlp,
}

#[derive(Args, Debug, Default)]
pub struct HeadArgs {
    /// Head architecture.
    #[arg(long, value_enum)]
    pub head: Option<HeadArg>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    /// Seed for head weight initialization.
    #[arg(long)]
    pub init_seed: Option<u64>,
}

impl HeadArgs {
    pub fn apply(self, s: &mut HeadSettings) {
        if let Some(k) = self.head {
            s.kind = match k {
                HeadArg::Linear => HeadKind::Linear,
                HeadArg::Mlp => HeadKind::Mlp,
            };
        }
        overlay!(s, self; hidden_dim, init_seed);
    }
}

#[derive(Args, Debug, Default)]
pub struct OptimArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub warmup_epochs: Option<usize>,
    #[arg(long)]
    pub min_lr: Option<f64>,
    /// Seed for the per-epoch shuffle.
    #[arg(long)]
    pub shuffle_seed: Option<u64>,
}

impl OptimArgs {
    pub fn apply(self, t: &mut TrainConfig) {
        overlay!(t, self; epochs, batch_size, lr, weight_decay, warmup_epochs, min_lr, shuffle_seed);
    }
}

pub fn set_path(dst: &mut PathBuf, src: Option<PathBuf>) {
    if let Some(p) = src {
        *dst = p;
    }
}

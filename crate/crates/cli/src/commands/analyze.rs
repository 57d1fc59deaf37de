use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use attrikit::corpus::{load_mask, Manifest};
use attrikit::evalkit::{average_image, color_density, composition_summary, density_to_csv, export_composition};
use attrikit::features::{build_backbone, extract_pyramid, BackboneConfig};
use attrikit::pipeline::SEGMENTATION_PREFIX;
use attrikit::pixelops::{resize_exact, Image};
use attrikit::style::{average_gram, gram, gram_density};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eval::parse_split;
use super::{manifest_split, write_failure_log, write_text, Outcome};
use crate::config::{self, set_path, Sidecar};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum AnalysisKind {
    #[default]
    ColorDensity,
    AverageImage,
    GramDensity,
    Composition,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeRun {
    pub manifest: PathBuf,
    pub out: PathBuf,
    pub kind: AnalysisKind,
    /// train, val, test or all.
    pub split: String,
    pub bins: usize,
    /// Square resize applied before averaging or feature extraction.
    pub resize: Option<usize>,
    pub backbone: BackboneConfig,
    /// Pyramid layer whose Gram matrix is summarized; defaults to the last.
    pub layer: Option<usize>,
    pub log_scale: bool,
    /// Segmentation classes to summarize in composition mode.
    pub focus: Vec<String>,
    pub top_k: usize,
}

impl Default for AnalyzeRun {
    fn default() -> Self {
        Self {
            manifest: PathBuf::new(),
            out: PathBuf::new(),
            kind: AnalysisKind::default(),
            split: "all".into(),
            bins: 64,
            resize: None,
            backbone: BackboneConfig::default(),
            layer: None,
            log_scale: false,
            focus: Vec::new(),
            top_k: 5,
        }
    }
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<AnalysisKind>,
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    resize: Option<usize>,
    #[arg(long)]
    backbone_seed: Option<u64>,
    #[arg(long)]
    layer: Option<usize>,
    #[arg(long)]
    log_scale: bool,
    /// Focus classes for composition (comma separated).
    #[arg(long, value_delimiter = ',')]
    focus: Option<Vec<String>>,
    #[arg(long)]
    top_k: Option<usize>,
}

type Failures = Vec<(String, String)>;

fn class_images(m: &Manifest, class: &str, resize: Option<usize>) -> (Vec<Image>, Failures) {
    let loaded: Vec<_> = m
        .records()
        .par_iter()
        .filter(|r| r.class_label == class)
        .map(|r| {
            let img = Image::load(m.resolve(&r.image_path)).and_then(|img| match resize {
                Some(s) => resize_exact(&img, s, s),
                None => Ok(img),
            });
            (r.image_path.clone(), img)
        })
        .collect();
    let mut images = Vec::new();
    let mut failures = Vec::new();
    for (path, img) in loaded {
        match img {
            Ok(i) => images.push(i),
            Err(e) => failures.push((path, e.to_string())),
        }
    }
    (images, failures)
}

fn gram_report(m: &Manifest, cfg: &AnalyzeRun, class: &str) -> Result<(String, Failures)> {
    let backbone = build_backbone(&cfg.backbone)?;
    let layer = cfg.layer.unwrap_or(backbone.num_layers() - 1);
    if layer >= backbone.num_layers() {
        bail!("layer {layer} out of range for a {}-layer backbone", backbone.num_layers());
    }
    let (images, mut failures) = class_images(m, class, cfg.resize);
    let grams: Vec<_> = images
        .par_iter()
        .map(|img| extract_pyramid(&backbone, &img.to_rgb()).map(|p| gram(&p.layers[layer])))
        .collect();
    let mut ok = Vec::new();
    for g in grams {
        match g {
            Ok(g) => ok.push(g),
            Err(e) => failures.push((class.to_string(), e.to_string())),
        }
    }
    let h = gram_density(&average_gram(&ok)?, cfg.bins, cfg.log_scale)?;
    let mut csv = String::from("bin_left,bin_right,density,display\n");
    for (i, (d, v)) in h.density.iter().zip(h.display_values()).enumerate() {
        let (l, r) = h.bin_edges(i);
        csv.push_str(&format!("{l},{r},{d},{v}\n"));
    }
    Ok((csv, failures))
}

fn composition(m: &Manifest, cfg: &AnalyzeRun) -> Result<Failures> {
    if cfg.focus.is_empty() {
        bail!("composition needs at least one --focus class");
    }
    let mut masks = Vec::new();
    let mut failures = Vec::new();
    for r in m.records() {
        let mut set = BTreeMap::new();
        let mut ok = true;
        for (key, rel) in &r.aux_maps {
            let Some(name) = key.strip_prefix(SEGMENTATION_PREFIX) else { continue };
            match load_mask(m.resolve(rel)) {
                Ok(mask) => {
                    set.insert(name.to_string(), mask);
                }
                Err(e) => {
                    failures.push((r.image_path.clone(), e.to_string()));
                    ok = false;
                    break;
                }
            }
        }
        if ok && !set.is_empty() {
            masks.push(set);
        }
    }
    let summaries = composition_summary(&masks, &cfg.focus, cfg.top_k)?;
    export_composition(&summaries, &cfg.out)?;
    Ok(failures)
}

pub fn run(args: AnalyzeArgs, file: Option<&Path>) -> Result<Outcome> {
    let sidecar = Sidecar::start("analyze");
    let mut cfg: AnalyzeRun = config::load(file)?;
    set_path(&mut cfg.manifest, args.manifest);
    set_path(&mut cfg.out, args.out);
    config::overlay!(cfg, args; kind, split, bins, top_k, focus);
    if let Some(seed) = args.backbone_seed {
        cfg.backbone.seed = seed;
    }
    if args.resize.is_some() {
        cfg.resize = args.resize;
    }
    if args.layer.is_some() {
        cfg.layer = args.layer;
    }
    cfg.log_scale |= args.log_scale;
    config::require_path(&cfg.manifest, "--manifest")?;
    config::require_path(&cfg.out, "--out")?;

    let m = manifest_split(&cfg.manifest, parse_split(&cfg.split)?)?;
    if m.is_empty() {
        bail!("no records to analyze");
    }
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let mut failures = Vec::new();
    if cfg.kind == AnalysisKind::Composition {
        failures = composition(&m, &cfg)?;
    } else {
        for class in m.classes() {
            match cfg.kind {
                AnalysisKind::ColorDensity => {
                    let (images, f) = class_images(&m, class, cfg.resize);
                    failures.extend(f);
                    let csv = density_to_csv(&color_density(&images, cfg.bins)?)?;
                    write_text(&cfg.out.join(format!("{class}_color_density.csv")), &csv)?;
                }
                AnalysisKind::AverageImage => {
                    let (images, f) = class_images(&m, class, cfg.resize);
                    failures.extend(f);
                    average_image(&images)?.save_png(cfg.out.join(format!("{class}_average.png")))?;
                }
                AnalysisKind::GramDensity => {
                    let (csv, f) = gram_report(&m, &cfg, class)?;
                    failures.extend(f);
                    write_text(&cfg.out.join(format!("{class}_gram_density.csv")), &csv)?;
                }
                AnalysisKind::Composition => unreachable!(),
            }
            println!("{class}: done");
        }
    }
    write_failure_log(&cfg.out.join("failures.tsv"), &failures)?;
    sidecar.finish(&cfg.out, &cfg)?;
    Ok(Outcome::from_failures(failures.len()))
}

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use attrikit::corpus::{save_manifest, Manifest};
use attrikit::features::{build_backbone, extract_pyramid, save_features, BackboneConfig, FeatureMap, FeaturePyramid};
use attrikit::pipeline::Pipeline;
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{write_failure_log, Outcome};
use crate::config::{self, set_path, Sidecar};

pub const INDEX: &str = "index.jsonl";
pub const FAILURES: &str = "failures.tsv";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExtractMode {
    /// One `(1, 1, dim)` style vector per record.
    #[default]
    Style,
    /// The full feature pyramid per record.
    Pyramid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractRun {
    pub manifest: PathBuf,
    pub out: PathBuf,
    pub mode: ExtractMode,
    pub backbone: BackboneConfig,
    pub layers: Option<Vec<usize>>,
    pub resize: Option<usize>,
    pub crop: Option<usize>,
    /// Aux-map key under which the index records each feature file.
    pub feature_key: String,
}

impl Default for ExtractRun {
    fn default() -> Self {
        Self {
            manifest: PathBuf::new(),
            out: PathBuf::new(),
            mode: ExtractMode::Style,
            backbone: BackboneConfig::default(),
            layers: None,
            resize: None,
            crop: None,
            feature_key: "features".into(),
        }
    }
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ExtractMode>,
    #[arg(long)]
    backbone_seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    layers: Option<Vec<usize>>,
    #[arg(long)]
    resize: Option<usize>,
    #[arg(long)]
    crop: Option<usize>,
    #[arg(long)]
    feature_key: Option<String>,
}

pub fn run(args: ExtractArgs, file: Option<&Path>) -> Result<Outcome> {
    let sidecar = Sidecar::start("extract");
    let mut cfg: ExtractRun = config::load(file)?;
    set_path(&mut cfg.manifest, args.manifest);
    set_path(&mut cfg.out, args.out);
    if let Some(m) = args.mode {
        cfg.mode = m;
    }
    if let Some(s) = args.backbone_seed {
        cfg.backbone.seed = s;
    }
    for (dst, src) in [(&mut cfg.resize, args.resize), (&mut cfg.crop, args.crop)] {
        if src.is_some() {
            *dst = src;
        }
    }
    if args.layers.is_some() {
        cfg.layers = args.layers;
    }
    if let Some(k) = args.feature_key {
        cfg.feature_key = k;
    }
    config::require_path(&cfg.manifest, "--manifest")?;
    config::require_path(&cfg.out, "--out")?;

    let manifest = super::manifest_split(&cfg.manifest, None)?;
    let mut pipeline = Pipeline::style();
    if let attrikit::pipeline::Representation::Style { backbone, layers } = &mut pipeline.representation {
        *backbone = cfg.backbone.clone();
        *layers = cfg.layers.clone();
    }
    pipeline.resize = cfg.resize;
    pipeline.crop = cfg.crop;
    let prepared = pipeline.prepare()?;
    let backbone = build_backbone(&cfg.backbone)?;
    let feature_dir = cfg.out.join("features");
    std::fs::create_dir_all(&feature_dir).with_context(|| format!("creating {}", feature_dir.display()))?;

    let results: Vec<Result<String>> = manifest
        .records()
        .par_iter()
        .enumerate()
        .map(|(i, r)| -> Result<String> {
            let source = format!("{i:05}");
            let pyramid = match cfg.mode {
                ExtractMode::Style => {
                    let e = prepared.embed(&manifest, r, false)?;
                    let layer = FeatureMap::new(1, 1, e.dim(), e.data.iter().map(|&v| v as f32).collect())?;
                    FeaturePyramid {
                        layers: vec![layer],
                        backbone_id: backbone.id(),
                        source_image_id: source.clone(),
                    }
                }
                ExtractMode::Pyramid => extract_pyramid(&backbone, &prepared.load_input(&manifest, r, false)?.to_rgb())?,
            };
            let rel = format!("features/{source}.aft");
            save_features(&pyramid, cfg.out.join(&rel))?;
            Ok(rel)
        })
        .collect();

    let mut failures = Vec::new();
    let mut records = Vec::new();
    for (r, res) in manifest.records().iter().zip(results) {
        match res {
            Ok(rel) => {
                let mut rec = r.clone();
                rec.image_path = absolute(&manifest, &r.image_path)?;
                for v in rec.aux_maps.values_mut() {
                    *v = absolute(&manifest, v)?;
                }
                if let Some(e) = rec.edit.as_mut() {
                    if let Some(mp) = e.mask_path.as_mut() {
                        *mp = absolute(&manifest, mp)?;
                    }
                }
                rec.aux_maps.insert(cfg.feature_key.clone(), rel);
                records.push(rec);
            }
            Err(e) => failures.push((r.image_path.clone(), format!("{e:#}"))),
        }
    }
    let index = Manifest::from_records(records)?;
    save_manifest(&index, cfg.out.join(INDEX))?;
    write_failure_log(&cfg.out.join(FAILURES), &failures)?;
    println!("extracted {} of {} records into {}", index.len(), manifest.len(), cfg.out.display());
    sidecar.finish(&cfg.out, &cfg)?;
    Ok(Outcome::from_failures(failures.len()))
}

fn absolute(m: &Manifest, rel: &str) -> Result<String> {
    let p = std::path::absolute(m.resolve(rel)).with_context(|| format!("resolving {rel}"))?;
    Ok(p.to_string_lossy().into_owned())
}

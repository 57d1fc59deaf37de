use std::collections::BTreeMap;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{ConfusionMatrix, EvalReport, ReportMeta, SampleFailure};
use crate::attributor::{encode_head, init_head, predict, train, AttributorHead, HeadConfig, TrainConfig, TrainHistory};
use crate::binio::fnv1a64;
use crate::corpus::{edit_bin, edit_ratio, load_mask, EditBin, Manifest, SampleRecord};
use crate::error::{Error, Result};
use crate::features::Embedding;
use crate::pipeline::{Pipeline, PreparedPipeline};
use crate::pixelops::{PatchSpec, PATCH_SIZES};

pub fn model_id(h: &AttributorHead) -> String {
    match encode_head(h) {
        Ok(bytes) => format!("{:016x}", fnv1a64(&bytes)),
        Err(_) => "unencodable".into(),
    }
}

pub fn manifest_id(m: &Manifest) -> String {
    format!("{:016x}", fnv1a64(m.to_jsonl().as_bytes()))
}

fn check_classes(model: &AttributorHead, manifest: &Manifest) -> Result<()> {
    for c in manifest.classes() {
        if !model.class_names.contains(c) {
            return Err(Error::validation(format!("manifest class '{c}' is unknown to the model")));
        }
    }
    Ok(())
}

/// Report over already-embedded samples; labels index `model.class_names`.
pub fn evaluate_embeddings(model: &AttributorHead, set: &[(Embedding, usize)], meta: ReportMeta) -> Result<EvalReport> {
    let preds: Vec<usize> = set
        .par_iter()
        .map(|(e, _)| predict(model, e).map(|p| p.class_index))
        .collect::<Result<_>>()?;
    let confusion = ConfusionMatrix::from_pairs(
        model.class_names.clone(),
        set.iter().map(|(_, y)| *y).zip(preds),
    )?;
    Ok(EvalReport::from_confusion(confusion, meta))
}

fn evaluate_records(
    model: &AttributorHead,
    prepared: &PreparedPipeline,
    manifest: &Manifest,
    records: &[&SampleRecord],
) -> Result<(ConfusionMatrix, Vec<SampleFailure>)> {
    let outcomes: Vec<Result<usize>> = records
        .par_iter()
        .map(|r| prepared.embed(manifest, r, false).and_then(|e| predict(model, &e)).map(|p| p.class_index))
        .collect();
    let mut confusion = ConfusionMatrix::new(model.class_names.clone());
    let mut failures = Vec::new();
    for (r, out) in records.iter().zip(outcomes) {
        let truth = model
            .class_names
            .iter()
            .position(|c| *c == r.class_label)
            .ok_or_else(|| Error::validation(format!("unknown class '{}'", r.class_label)))?;
        match out {
            Ok(p) => confusion.record(truth, p)?,
            Err(e) => failures.push(SampleFailure {
                image_path: r.image_path.clone(),
                message: e.to_string(),
            }),
        }
    }
    Ok((confusion, failures))
}

fn base_meta(model: &AttributorHead, pipeline: &Pipeline, manifest: &Manifest) -> ReportMeta {
    ReportMeta {
        model_id: model_id(model),
        manifest_id: manifest_id(manifest),
        representation: pipeline.describe(),
        perturbation: pipeline.perturb.as_ref().map(|p| p.to_string()),
        ..ReportMeta::default()
    }
}

/// Runs every record of `manifest` through the pipeline and the model.
/// Unreadable samples are excluded from the counts and listed in the meta.
pub fn evaluate(model: &AttributorHead, prepared: &PreparedPipeline, manifest: &Manifest) -> Result<EvalReport> {
    check_classes(model, manifest)?;
    let records: Vec<&SampleRecord> = manifest.records().iter().collect();
    let (confusion, failures) = evaluate_records(model, prepared, manifest, &records)?;
    let mut meta = base_meta(model, prepared.pipeline(), manifest);
    meta.failures = failures;
    Ok(EvalReport::from_confusion(confusion, meta))
}

/// Evaluates every (model domain, manifest domain) pair.
pub fn cross_domain(
    models: &BTreeMap<String, AttributorHead>,
    manifests: &BTreeMap<String, Manifest>,
    prepared: &PreparedPipeline,
) -> Result<BTreeMap<(String, String), EvalReport>> {
    let mut reference: Option<&Vec<String>> = None;
    for (d, m) in models {
        match reference {
            None => reference = Some(&m.class_names),
            Some(r) if *r != m.class_names => {
                return Err(Error::validation(format!("model '{d}' has a different class set")));
            }
            _ => {}
        }
    }
    let reference = reference.ok_or_else(|| Error::validation("no models supplied"))?;
    for (d, m) in manifests {
        if m.classes().iter().any(|c| !reference.contains(c)) {
            return Err(Error::validation(format!("manifest '{d}' has classes outside the model class set")));
        }
    }
    let mut grid = BTreeMap::new();
    for (md, model) in models {
        for (td, manifest) in manifests {
            grid.insert((md.clone(), td.clone()), evaluate(model, prepared, manifest)?);
        }
    }
    Ok(grid)
}

/// Edit ratio of a record: the stored value, else measured from its mask.
pub fn record_edit_ratio(manifest: &Manifest, r: &SampleRecord) -> Result<f64> {
    let edit = r
        .edit
        .as_ref()
        .ok_or_else(|| Error::validation(format!("record {} has no edit metadata", r.image_path)))?;
    if let Some(v) = edit.edit_ratio {
        return Ok(v);
    }
    match &edit.mask_path {
        Some(p) => edit_ratio(&load_mask(manifest.resolve(p))?),
        None => Err(Error::validation(format!(
            "record {} has neither an edit ratio nor a mask",
            r.image_path
        ))),
    }
}

/// Evaluates each edit-size bin separately. The bins partition the records.
pub fn post_edit_eval(
    model: &AttributorHead,
    prepared: &PreparedPipeline,
    manifest: &Manifest,
) -> Result<BTreeMap<EditBin, EvalReport>> {
    check_classes(model, manifest)?;
    let mut bins: BTreeMap<EditBin, Vec<&SampleRecord>> = BTreeMap::new();
    for r in manifest.records() {
        let bin = edit_bin(record_edit_ratio(manifest, r)?)?;
        bins.entry(bin).or_default().push(r);
    }
    let mut out = BTreeMap::new();
    for (bin, records) in bins {
        let (confusion, failures) = evaluate_records(model, prepared, manifest, &records)?;
        let mut meta = base_meta(model, prepared.pipeline(), manifest);
        meta.failures = failures;
        out.insert(bin, EvalReport::from_confusion(confusion, meta));
    }
    Ok(out)
}

/// Embeds the train and validation manifests, builds a head of `head`'s
/// kind sized to the data, and trains it.
pub fn fit_attributor(
    prepared: &PreparedPipeline,
    train_manifest: &Manifest,
    val_manifest: &Manifest,
    head: &HeadConfig,
    cfg: &TrainConfig,
) -> Result<(AttributorHead, TrainHistory)> {
    let classes = train_manifest.classes().to_vec();
    if val_manifest.classes().iter().any(|c| !classes.contains(c)) {
        return Err(Error::validation("validation manifest has classes absent from training"));
    }
    let train_set = prepared.labelled_set(train_manifest, &classes, true)?;
    let val_set = prepared.labelled_set(val_manifest, &classes, false)?;
    let dim = train_set
        .first()
        .map(|(e, _)| e.dim())
        .ok_or_else(|| Error::validation("training manifest is empty"))?;
    let mut hc = head.clone();
    hc.input_dim = dim;
    hc.num_classes = classes.len();
    train(init_head(&hc, classes)?, &train_set, &val_set, cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Resolution,
    PatchK,
    TrainSize,
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepAxis::Resolution => "resolution",
            SweepAxis::PatchK => "patch_k",
            SweepAxis::TrainSize => "train_size",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "resolution" => Ok(SweepAxis::Resolution),
            "patch_k" => Ok(SweepAxis::PatchK),
            "train_size" => Ok(SweepAxis::TrainSize),
            _ => Err(Error::validation(format!("unknown sweep axis '{s}'"))),
        }
    }
}

/// Everything a sweep holds fixed.
#[derive(Clone, Debug)]
pub struct SweepSetup {
    pub pipeline: Pipeline,
    pub head: HeadConfig,
    pub train: TrainConfig,
    pub train_manifest: Manifest,
    pub val_manifest: Manifest,
    pub test_manifest: Manifest,
}

fn check_sweep_value(axis: SweepAxis, v: usize) -> Result<()> {
    let ok = match axis {
        SweepAxis::Resolution | SweepAxis::TrainSize => v >= 1,
        SweepAxis::PatchK => PATCH_SIZES.contains(&v),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::validation(format!("invalid {axis} value {v}")))
    }
}

/// Retrains and evaluates once per value, in the given order.
pub fn sweep(axis: SweepAxis, values: &[usize], setup: &SweepSetup) -> Result<Vec<(usize, EvalReport)>> {
    if values.is_empty() {
        return Err(Error::validation("sweep needs at least one value"));
    }
    for &v in values {
        check_sweep_value(axis, v)?;
    }
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        let mut pipeline = setup.pipeline.clone();
        let mut train_manifest = setup.train_manifest.clone();
        match axis {
            SweepAxis::Resolution => pipeline.resize = Some(v),
            SweepAxis::PatchK => {
                let mut spec = pipeline.patch.unwrap_or_else(|| PatchSpec::new(v));
                spec.k = v;
                pipeline.patch = Some(spec);
            }
            SweepAxis::TrainSize => train_manifest = train_manifest.limit_per_class(v),
        }
        let prepared = pipeline.prepare()?;
        let (head, _) = fit_attributor(&prepared, &train_manifest, &setup.val_manifest, &setup.head, &setup.train)?;
        out.push((v, evaluate(&head, &prepared, &setup.test_manifest)?));
    }
    Ok(out)
}

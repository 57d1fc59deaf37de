use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use attrikit::attributor::load_head;
use attrikit::corpus::Split;
use attrikit::evalkit::{edit_bins_to_csv, evaluate, export_report, post_edit_eval, ExportFormat};
use attrikit::pipeline::Pipeline;
use attrikit::pixelops::PerturbSpec;
use clap::Args;
use serde::{Deserialize, Serialize};

use super::train::{CHECKPOINT, PIPELINE};
use super::{manifest_split, write_failure_log, write_text, Outcome};
use crate::config::{self, set_path, Sidecar};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const FAILURES: &str = "failures.tsv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalRun {
    /// Training output directory holding the checkpoint and pipeline.
    pub model: PathBuf,
    pub manifest: PathBuf,
    pub out: PathBuf,
    /// Split to evaluate; `all` keeps every record.
    pub split: String,
    /// Overrides the training pipeline's perturbation; `none` disables it.
    pub perturb: Option<String>,
    /// Report accuracy per edit-size bin instead of overall.
    pub post_edit: bool,
}

impl Default for EvalRun {
    fn default() -> Self {
        Self {
            model: PathBuf::new(),
            manifest: PathBuf::new(),
            out: PathBuf::new(),
            split: "test".into(),
            perturb: None,
            post_edit: false,
        }
    }
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// train, val, test or all.
    #[arg(long)]
    split: Option<String>,
    /// Perturbation applied before the representation, or `none`.
    #[arg(long)]
    perturb: Option<String>,
    #[arg(long)]
    post_edit: bool,
}

pub fn parse_split(s: &str) -> Result<Option<Split>> {
    Ok(match s {
        "all" => None,
        other => Some(other.parse()?),
    })
}

pub fn load_pipeline(model_dir: &Path) -> Result<Pipeline> {
    let p = model_dir.join(PIPELINE);
    let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
}

pub fn run(args: EvalArgs, file: Option<&Path>) -> Result<Outcome> {
    let sidecar = Sidecar::start("eval");
    let mut cfg: EvalRun = config::load(file)?;
    set_path(&mut cfg.model, args.model);
    set_path(&mut cfg.manifest, args.manifest);
    set_path(&mut cfg.out, args.out);
    if let Some(s) = args.split {
        cfg.split = s;
    }
    if args.perturb.is_some() {
        cfg.perturb = args.perturb;
    }
    cfg.post_edit |= args.post_edit;
    config::require_path(&cfg.model, "--model")?;
    config::require_path(&cfg.manifest, "--manifest")?;
    config::require_path(&cfg.out, "--out")?;

    let head = load_head(cfg.model.join(CHECKPOINT))?;
    let mut pipeline = load_pipeline(&cfg.model)?;
    match cfg.perturb.as_deref() {
        None => {}
        Some("none") => pipeline.perturb = None,
        Some(spec) => pipeline.perturb = Some(spec.parse::<PerturbSpec>()?),
    }
    let prepared = pipeline.prepare()?;
    let manifest = manifest_split(&cfg.manifest, parse_split(&cfg.split)?)?;
    fs::create_dir_all(&cfg.out)?;

    let failures = if cfg.post_edit {
        let bins = post_edit_eval(&head, &prepared, &manifest)?;
        write_text(&cfg.out.join("edit_bins.csv"), &edit_bins_to_csv(&bins))?;
        let mut failures = Vec::new();
        for (bin, report) in &bins {
            export_report(report, cfg.out.join(format!("report_{bin}.json")), ExportFormat::Json)?;
            println!("{bin}: accuracy {:.4} over {} records", report.accuracy, report.total);
            failures.extend(report.meta.failures.iter().map(|f| (f.image_path.clone(), f.message.clone())));
        }
        failures
    } else {
        let report = evaluate(&head, &prepared, &manifest)?;
        export_report(&report, cfg.out.join(REPORT_JSON), ExportFormat::Json)?;
        export_report(&report, cfg.out.join(REPORT_CSV), ExportFormat::Csv)?;
        println!(
            "accuracy {:.4}, macro F1 {:.4} over {} records",
            report.accuracy, report.macro_f1, report.total
        );
        report
            .meta
            .failures
            .iter()
            .map(|f| (f.image_path.clone(), f.message.clone()))
            .collect()
    };
    write_failure_log(&cfg.out.join(FAILURES), &failures)?;
    sidecar.finish(&cfg.out, &cfg)?;
    Ok(Outcome::from_failures(failures.len()))
}

use std::path::{Path, PathBuf};

use anyhow::Result;
use attrikit::attributor::TrainConfig;
use attrikit::corpus::Split;
use attrikit::evalkit::{sweep, sweep_to_csv, SweepAxis, SweepSetup};
use clap::Args;
use serde::{Deserialize, Serialize};

use super::{manifest_split, write_text, Outcome};
use crate::config::{self, set_path, HeadArgs, HeadSettings, OptimArgs, PipelineArgs, PipelineSettings, Sidecar};

pub const SWEEP_CSV: &str = "sweep.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepRun {
    pub manifest: PathBuf,
    pub out: PathBuf,
    pub axis: SweepAxis,
    pub values: Vec<usize>,
    pub pipeline: PipelineSettings,
    pub head: HeadSettings,
    pub train: TrainConfig,
}

impl Default for SweepRun {
    fn default() -> Self {
        Self {
            manifest: PathBuf::new(),
            out: PathBuf::new(),
            axis: SweepAxis::TrainSize,
            values: Vec::new(),
            pipeline: PipelineSettings::default(),
            head: HeadSettings::default(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// resolution, patch_k or train_size.
    #[arg(long)]
    axis: Option<String>,
    /// Axis values (comma separated).
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<usize>>,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[command(flatten)]
    head: HeadArgs,
    #[command(flatten)]
    optim: OptimArgs,
}

pub fn run(args: SweepArgs, file: Option<&Path>) -> Result<Outcome> {
    let sidecar = Sidecar::start("sweep");
    let mut cfg: SweepRun = config::load(file)?;
    set_path(&mut cfg.manifest, args.manifest);
    set_path(&mut cfg.out, args.out);
    if let Some(a) = args.axis {
        cfg.axis = a.parse()?;
    }
    if let Some(v) = args.values {
        cfg.values = v;
    }
    args.pipeline.apply(&mut cfg.pipeline);
    args.head.apply(&mut cfg.head);
    args.optim.apply(&mut cfg.train);
    config::require_path(&cfg.manifest, "--manifest")?;
    config::require_path(&cfg.out, "--out")?;

    let setup = SweepSetup {
        pipeline: cfg.pipeline.to_pipeline()?,
        head: cfg.head.template(),
        train: cfg.train.clone(),
        train_manifest: manifest_split(&cfg.manifest, Some(Split::Train))?,
        val_manifest: manifest_split(&cfg.manifest, Some(Split::Val))?,
        test_manifest: manifest_split(&cfg.manifest, Some(Split::Test))?,
    };
    let results = sweep(cfg.axis, &cfg.values, &setup)?;
    write_text(&cfg.out.join(SWEEP_CSV), &sweep_to_csv(&results))?;
    let reports: Vec<_> = results.iter().map(|(v, r)| serde_json::json!({ "axis_value": v, "report": r })).collect();
    write_text(&cfg.out.join("sweep.json"), &(serde_json::to_string_pretty(&reports)? + "\n"))?;
    for (v, r) in &results {
        println!("{} = {v}: accuracy {:.4}", cfg.axis, r.accuracy);
    }
    let failures: usize = results.iter().map(|(_, r)| r.meta.failures.len()).sum();
    sidecar.finish(&cfg.out, &cfg)?;
    Ok(Outcome::from_failures(failures))
}

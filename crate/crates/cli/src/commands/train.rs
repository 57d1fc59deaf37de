use std::path::{Path, PathBuf};

use anyhow::Result;
use attrikit::attributor::{save_head, TrainConfig};
use attrikit::corpus::Split;
use attrikit::evalkit::fit_attributor;
use clap::Args;
use serde::{Deserialize, Serialize};

use super::{manifest_split, write_text, Outcome};
use crate::config::{self, set_path, HeadArgs, HeadSettings, OptimArgs, PipelineArgs, PipelineSettings, Sidecar};

pub const CHECKPOINT: &str = "head.ahd";
pub const HISTORY: &str = "history.csv";
pub const PIPELINE: &str = "pipeline.json";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainRun {
    pub manifest: PathBuf,
    pub out: PathBuf,
    pub pipeline: PipelineSettings,
    pub head: HeadSettings,
    pub train: TrainConfig,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[command(flatten)]
    head: HeadArgs,
    #[command(flatten)]
    optim: OptimArgs,
}

pub fn run(args: TrainArgs, file: Option<&Path>) -> Result<Outcome> {
    let sidecar = Sidecar::start("train");
    let mut cfg: TrainRun = config::load(file)?;
    set_path(&mut cfg.manifest, args.manifest);
    set_path(&mut cfg.out, args.out);
    args.pipeline.apply(&mut cfg.pipeline);
    args.head.apply(&mut cfg.head);
    args.optim.apply(&mut cfg.train);
    config::require_path(&cfg.manifest, "--manifest")?;
    config::require_path(&cfg.out, "--out")?;

    let pipeline = cfg.pipeline.to_pipeline()?;
    let prepared = pipeline.prepare()?;
    let train_m = manifest_split(&cfg.manifest, Some(Split::Train))?;
    let val_m = manifest_split(&cfg.manifest, Some(Split::Val))?;
    let (head, history) = fit_attributor(&prepared, &train_m, &val_m, &cfg.head.template(), &cfg.train)?;

    std::fs::create_dir_all(&cfg.out)?;
    save_head(&head, cfg.out.join(CHECKPOINT))?;
    write_text(&cfg.out.join(HISTORY), &history.to_csv())?;
    write_text(&cfg.out.join(PIPELINE), &(serde_json::to_string_pretty(&pipeline)? + "\n"))?;
    let best = history.best();
    println!(
        "best epoch {} of {}: val accuracy {:.4}, train accuracy {:.4}",
        best.epoch,
        history.epochs.len(),
        best.val_acc,
        best.train_acc
    );
    sidecar.finish(&cfg.out, &cfg)?;
    Ok(Outcome::Clean)
}

use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use attrikit::corpus::{
    default_generators, synth_corpus, synth_edited_corpus, texture_only_generators, SplitCounts, SynthGeneratorSpec,
};
use clap::Args;
use serde::{Deserialize, Serialize};

use super::Outcome;
use crate::config::{self, overlay, set_path, Sidecar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthRun {
    pub out: PathBuf,
    /// `default` or `texture_only`; ignored when `generators` is set.
    pub preset: String,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub size: usize,
    pub seed: u64,
    /// Also render region-resampled edits at these ratios.
    pub edit_ratios: Vec<f64>,
    pub edit_per_class: usize,
    pub generators: Option<Vec<SynthGeneratorSpec>>,
}

impl Default for SynthRun {
    fn default() -> Self {
        Self {
            out: PathBuf::new(),
            preset: "default".into(),
            train: 20,
            val: 5,
            test: 5,
            size: 128,
            seed: 0,
            edit_ratios: Vec::new(),
            edit_per_class: 20,
            generators: None,
        }
    }
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Generator preset: default or texture_only.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    train: Option<usize>,
    #[arg(long)]
    val: Option<usize>,
    #[arg(long)]
    test: Option<usize>,
    /// Square image size in pixels.
    #[arg(long)]
    size: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Edit ratios for an additional edited test corpus (comma separated).
    #[arg(long, value_delimiter = ',')]
    edit_ratios: Option<Vec<f64>>,
    #[arg(long)]
    edit_per_class: Option<usize>,
}

impl SynthRun {
    fn specs(&self) -> Result<Vec<SynthGeneratorSpec>> {
        if let Some(g) = &self.generators {
            return Ok(g.clone());
        }
        Ok(match self.preset.as_str() {
            "default" => default_generators(),
            "texture_only" => texture_only_generators(),
            other => bail!("unknown generator preset '{other}'"),
        })
    }
}

pub fn run(args: SynthArgs, file: Option<&Path>) -> Result<Outcome> {
    let sidecar = Sidecar::start("synth");
    let mut cfg: SynthRun = config::load(file)?;
    set_path(&mut cfg.out, args.out);
    overlay!(cfg, args; preset, train, val, test, size, seed, edit_ratios, edit_per_class);
    config::require_path(&cfg.out, "--out")?;
    let specs = cfg.specs()?;
    let counts = SplitCounts {
        train: cfg.train,
        val: cfg.val,
        test: cfg.test,
    };
    let m = synth_corpus(&specs, counts, cfg.size, cfg.seed, &cfg.out)?;
    println!("wrote {} records over {} classes to {}", m.len(), m.classes().len(), cfg.out.display());
    if !cfg.edit_ratios.is_empty() {
        let e = synth_edited_corpus(&specs, &cfg.edit_ratios, cfg.edit_per_class, cfg.size, cfg.seed, &cfg.out)?;
        println!("wrote {} edited records", e.len());
    }
    sidecar.finish(&cfg.out, &cfg)?;
    Ok(Outcome::Clean)
}

pub mod analyze;
pub mod eval;
pub mod extract;
pub mod report;
pub mod sweep;
pub mod synth;
pub mod train;

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use attrikit::corpus::{filter_split, load_manifest, Manifest, Split};

#[derive(Debug, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    SampleFailures(usize),
}

impl Outcome {
    pub fn from_failures(n: usize) -> Self {
        if n == 0 {
            Outcome::Clean
        } else {
            Outcome::SampleFailures(n)
        }
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Loads a manifest, optionally restricted to one split.
pub fn manifest_split(path: &Path, split: Option<Split>) -> Result<Manifest> {
    let m = load_manifest(path).context("loading manifest")?;
    Ok(match split {
        Some(s) => filter_split(&m, s),
        None => m,
    })
}

/// Writes `path<TAB>message` lines; an empty list removes a stale log.
pub fn write_failure_log(path: &Path, failures: &[(String, String)]) -> Result<()> {
    if failures.is_empty() {
        if path.exists() {
            fs::remove_file(path).with_context(|| format!("removing {}", path.display()))?;
        }
        return Ok(());
    }
    let mut text = String::new();
    for (p, msg) in failures {
        text.push_str(p);
        text.push('\t');
        text.push_str(&msg.replace('\n', " "));
        text.push('\n');
    }
    write_text(path, &text)
}

use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use attrikit::evalkit::load_report;
use clap::Args;

use super::{write_text, Outcome};

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Report JSON files to summarize.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Output CSV; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn summary_csv(paths: &[PathBuf]) -> Result<String> {
    let mut csv = String::from(
        "report,representation,perturbation,total,accuracy,macro_precision,macro_recall,macro_f1,failures\n",
    );
    for p in paths {
        let r = load_report(p)?;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            field(&p.display().to_string()),
            field(&r.meta.representation),
            field(r.meta.perturbation.as_deref().unwrap_or("none")),
            r.total,
            r.accuracy,
            r.macro_precision,
            r.macro_recall,
            r.macro_f1,
            r.meta.failures.len()
        ));
    }
    Ok(csv)
}

pub fn run(args: ReportArgs, file: Option<&Path>) -> Result<Outcome> {
    if file.is_some() {
        bail!("report takes no config file");
    }
    let csv = summary_csv(&args.reports)?;
    match args.out {
        Some(p) => write_text(&p, &csv)?,
        None => print!("{csv}"),
    }
    Ok(Outcome::Clean)
}

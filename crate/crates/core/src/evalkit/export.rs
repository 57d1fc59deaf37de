use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::analysis::CompositionSummary;
use super::metrics::{ConfusionMatrix, EvalReport};
use crate::corpus::EditBin;
use crate::error::{Error, Result};
use crate::histogram::Histogram;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Csv,
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ExportFormat::Json),
            "csv" => Ok(ExportFormat::Csv),
            _ => Err(Error::validation(format!("unknown export format '{s}'"))),
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn report_to_json(r: &EvalReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(r)?;
    s.push('\n');
    Ok(s)
}

pub fn report_from_json(text: &str) -> Result<EvalReport> {
    let r: EvalReport = serde_json::from_str(text)?;
    if r.report_version != super::metrics::REPORT_VERSION {
        return Err(Error::format(format!("unsupported report version {}", r.report_version)));
    }
    Ok(r)
}

/// Header row of class names followed by one row per true class.
pub fn confusion_to_csv(m: &ConfusionMatrix) -> String {
    let mut s = String::from("true\\predicted");
    for c in &m.classes {
        let _ = write!(s, ",{c}");
    }
    s.push('\n');
    for (c, row) in m.classes.iter().zip(&m.counts) {
        s.push_str(c);
        for v in row {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

/// Overall metrics, per-class metrics, then the confusion matrix, as three
/// blank-line separated tables.
pub fn report_to_csv(r: &EvalReport) -> String {
    let mut s = String::from("metric,value\n");
    for (k, v) in [
        ("accuracy", r.accuracy),
        ("macro_precision", r.macro_precision),
        ("macro_recall", r.macro_recall),
        ("macro_f1", r.macro_f1),
    ] {
        let _ = writeln!(s, "{k},{v}");
    }
    let _ = writeln!(s, "total,{}", r.total);
    let _ = writeln!(s, "failures,{}", r.meta.failures.len());
    s.push_str("\nclass,precision,recall,f1,support,predicted\n");
    for c in &r.per_class {
        let _ = writeln!(s, "{},{},{},{},{},{}", c.class_name, c.precision, c.recall, c.f1, c.support, c.predicted);
    }
    s.push('\n');
    s.push_str(&confusion_to_csv(&r.confusion));
    s
}

pub fn export_report(r: &EvalReport, path: impl AsRef<Path>, format: ExportFormat) -> Result<()> {
    let text = match format {
        ExportFormat::Json => report_to_json(r)?,
        ExportFormat::Csv => report_to_csv(r),
    };
    write(path.as_ref(), &text)
}

pub fn load_report(path: impl AsRef<Path>) -> Result<EvalReport> {
    let path = path.as_ref();
    report_from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

const METRIC_HEADER: &str = "accuracy,macro_precision,macro_recall,macro_f1";

fn metric_cells(r: &EvalReport) -> String {
    format!("{},{},{},{}", r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1)
}

pub fn sweep_to_csv(results: &[(usize, EvalReport)]) -> String {
    let mut s = format!("axis_value,{METRIC_HEADER}\n");
    for (v, r) in results {
        let _ = writeln!(s, "{v},{}", metric_cells(r));
    }
    s
}

pub fn grid_to_csv(grid: &BTreeMap<(String, String), EvalReport>) -> String {
    let mut s = format!("train_domain,test_domain,{METRIC_HEADER}\n");
    for ((a, b), r) in grid {
        let _ = writeln!(s, "{a},{b},{}", metric_cells(r));
    }
    s
}

pub fn edit_bins_to_csv(bins: &BTreeMap<EditBin, EvalReport>) -> String {
    let mut s = format!("edit_bin,total,{METRIC_HEADER}\n");
    for (b, r) in bins {
        let _ = writeln!(s, "{b},{},{}", r.total, metric_cells(r));
    }
    s
}

/// Per-channel densities over shared bins. All three histograms must use
/// the same range and bin count.
pub fn density_to_csv(h: &[Histogram; 3]) -> Result<String> {
    for other in &h[1..] {
        if other.lo != h[0].lo || other.hi != h[0].hi || other.bins() != h[0].bins() {
            return Err(Error::validation("channel histograms use different bins"));
        }
    }
    let mut s = String::from("bin_left,bin_right,r,g,b\n");
    for i in 0..h[0].bins() {
        let (l, r) = h[0].bin_edges(i);
        let _ = writeln!(s, "{l},{r},{},{},{}", h[0].density[i], h[1].density[i], h[2].density[i]);
    }
    Ok(s)
}

/// Writes `<class>_mask.png` (8-bit quantized), `<class>_mask.csv` (exact
/// frequencies, one row per image row) and a shared `composition.csv` of
/// inserted-class counts.
pub fn export_composition(summaries: &[CompositionSummary], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut counts = String::from("class,rank,inserted_class,image_count,total_images\n");
    for s in summaries {
        s.mean_mask.save_png(dir.join(format!("{}_mask.png", s.class_name)))?;
        let w = s.mean_mask.width();
        let mut csv = String::new();
        for row in s.mean_mask.data().chunks(w) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            csv.push_str(&cells.join(","));
            csv.push('\n');
        }
        write(&dir.join(format!("{}_mask.csv", s.class_name)), &csv)?;
        for (rank, (name, n)) in s.top_inserted.iter().enumerate() {
            let _ = writeln!(counts, "{},{},{name},{n},{}", s.class_name, rank + 1, s.total_images);
        }
    }
    write(&dir.join("composition.csv"), &counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalkit::ReportMeta;

    fn report() -> EvalReport {
        let m = ConfusionMatrix {
            classes: vec!["a".into(), "b".into(), "c".into()],
            counts: vec![vec![5, 0, 0], vec![1, 4, 0], vec![0, 2, 3]],
        };
        EvalReport::from_confusion(
            m,
            ReportMeta {
                perturbation: Some("gaussian_blur:sigma=1,radius=3".into()),
                ..ReportMeta::default()
            },
        )
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let r = report();
        assert_eq!(report_from_json(&report_to_json(&r).unwrap()).unwrap(), r);
        let mut v: serde_json::Value = serde_json::from_str(&report_to_json(&r).unwrap()).unwrap();
        assert_eq!(v["report_version"], 1);
        v["report_version"] = 9.into();
        assert!(report_from_json(&v.to_string()).is_err());
    }

    #[test]
    fn confusion_csv_has_one_row_per_class() {
        let csv = confusion_to_csv(&report().confusion);
        assert_eq!(csv.lines().count(), 1 + 3);
        assert_eq!(csv.lines().nth(3).unwrap(), "c,0,2,3");
    }

    #[test]
    fn density_csv_integrates_to_one() {
        let vals: Vec<f64> = (0..97).map(|i| (i as f64 * 0.37).fract()).collect();
        let h = Histogram::from_values(vals.clone(), 0.0, 1.0, 16).unwrap();
        let csv = density_to_csv(&[h.clone(), h.clone(), h]).unwrap();
        let mut sums = [0.0; 3];
        for line in csv.lines().skip(1) {
            let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
            for c in 0..3 {
                sums[c] += f[2 + c] * (f[1] - f[0]);
            }
        }
        for s in sums {
            assert!((s - 1.0).abs() < 1e-6);
        }
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REPORT_VERSION: u32 = 1;

/// Rows are true classes, columns predictions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> Self {
        let n = classes.len();
        Self {
            classes,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn from_pairs(classes: Vec<String>, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut m = Self::new(classes);
        for (t, p) in pairs {
            m.record(t, p)?;
        }
        Ok(m)
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        let n = self.num_classes();
        if truth >= n || predicted >= n {
            return Err(Error::validation(format!(
                "class index ({truth}, {predicted}) out of range for {n} classes"
            )));
        }
        self.counts[truth][predicted] += 1;
        Ok(())
    }

    /// Elementwise sum; both matrices must share the class list.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.classes != other.classes {
            return Err(Error::validation("cannot merge confusion matrices over different classes"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let t = self.total();
        if t == 0 {
            0.0
        } else {
            self.trace() as f64 / t as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class_name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    pub predicted: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub image_path: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub model_id: String,
    pub manifest_id: String,
    pub representation: String,
    pub perturbation: Option<String>,
    /// Left empty by the library so reports stay byte-reproducible.
    pub timestamp: Option<String>,
    pub failures: Vec<SampleFailure>,
    /// Classes with no predictions (precision undefined, reported as 0).
    pub undefined_precision: Vec<String>,
    /// Classes with no test samples (recall undefined, reported as 0).
    pub undefined_recall: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub report_version: u32,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub total: u64,
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassMetrics>,
    pub meta: ReportMeta,
}

impl EvalReport {
    /// Metrics from a confusion matrix. Macro averages run over every class
    /// in the matrix; a zero denominator contributes 0 and is flagged.
    pub fn from_confusion(confusion: ConfusionMatrix, mut meta: ReportMeta) -> Self {
        let n = confusion.num_classes();
        let mut per_class = Vec::with_capacity(n);
        meta.undefined_precision.clear();
        meta.undefined_recall.clear();
        for i in 0..n {
            let tp = confusion.counts[i][i] as f64;
            let support = confusion.row_sum(i);
            let predicted = confusion.col_sum(i);
            let name = &confusion.classes[i];
            let precision = if predicted == 0 {
                meta.undefined_precision.push(name.clone());
                0.0
            } else {
                tp / predicted as f64
            };
            let recall = if support == 0 {
                meta.undefined_recall.push(name.clone());
                0.0
            } else {
                tp / support as f64
            };
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            per_class.push(ClassMetrics {
                class_name: name.clone(),
                precision,
                recall,
                f1,
                support,
                predicted,
            });
        }
        let mean = |f: fn(&ClassMetrics) -> f64| {
            if n == 0 {
                0.0
            } else {
                per_class.iter().map(f).sum::<f64>() / n as f64
            }
        };
        Self {
            report_version: REPORT_VERSION,
            accuracy: confusion.accuracy(),
            macro_precision: mean(|c| c.precision),
            macro_recall: mean(|c| c.recall),
            macro_f1: mean(|c| c.f1),
            total: confusion.total(),
            per_class,
            confusion,
            meta,
        }
    }
}

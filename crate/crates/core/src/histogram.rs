use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Equal-width density histogram over `[lo, hi]`.
///
/// `density` integrates to 1 over the range whenever at least one value was
/// binned. `log_scale` is display metadata only: densities stay linear.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub density: Vec<f64>,
    pub count: usize,
    pub log_scale: bool,
}

impl Histogram {
    pub fn from_values(
        values: impl IntoIterator<Item = f64>,
        lo: f64,
        hi: f64,
        bins: usize,
    ) -> Result<Self> {
        if bins == 0 {
            return Err(Error::validation("histogram needs at least one bin"));
        }
        if !(hi > lo) {
            return Err(Error::validation(format!("empty histogram range [{lo}, {hi}]")));
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        let mut total = 0usize;
        for v in values {
            if !(lo..=hi).contains(&v) {
                continue;
            }
            let idx = (((v - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
            total += 1;
        }
        let density = if total == 0 {
            vec![0.0; bins]
        } else {
            let norm = total as f64 * width;
            counts.iter().map(|&c| c as f64 / norm).collect()
        };
        Ok(Self {
            lo,
            hi,
            density,
            count: total,
            log_scale: false,
        })
    }

    pub fn bins(&self) -> usize {
        self.density.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.bins() as f64
    }

    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let w = self.bin_width();
        let left = self.lo + w * i as f64;
        let right = if i + 1 == self.bins() { self.hi } else { left + w };
        (left, right)
    }

    /// Index of the bin that contains `v`, clamping the right edge into the
    /// last bin.
    pub fn bin_of(&self, v: f64) -> usize {
        (((v - self.lo) / self.bin_width()) as usize).min(self.bins() - 1)
    }

    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width()
    }

    /// `log1p` of each density, for plotting.
    pub fn display_values(&self) -> Vec<f64> {
        if self.log_scale {
            self.density.iter().map(|d| d.ln_1p()).collect()
        } else {
            self.density.clone()
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_left,bin_right,density\n");
        for (i, d) in self.density.iter().enumerate() {
            let (l, r) = self.bin_edges(i);
            out.push_str(&format!("{l},{r},{d}\n"));
        }
        out
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{add_gaussian_noise, bilateral_filter, gaussian_blur, Image};
use crate::error::{Error, Result};

/// Patch edge lengths accepted by [`PatchSpec`].
pub const PATCH_SIZES: [usize; 8] = [2, 4, 8, 16, 32, 64, 128, 256];

/// A high-frequency perturbation applied before feature extraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbSpec {
    GaussianBlur { sigma: f64, radius: usize },
    Bilateral { sigma_space: f64, sigma_range: f64, radius: usize },
    GaussianNoise { sigma: f64, seed: u64 },
}

impl PerturbSpec {
    pub fn default_blur() -> Self {
        PerturbSpec::GaussianBlur { sigma: 1.0, radius: 3 }
    }

    pub fn default_bilateral() -> Self {
        PerturbSpec::Bilateral {
            sigma_space: 2.0,
            sigma_range: 0.1,
            radius: 4,
        }
    }

    pub fn default_noise() -> Self {
        PerturbSpec::GaussianNoise { sigma: 0.05, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            PerturbSpec::GaussianBlur { sigma, radius } => sigma > 0.0 && radius > 0,
            PerturbSpec::Bilateral {
                sigma_space,
                sigma_range,
                radius,
            } => sigma_space > 0.0 && sigma_range > 0.0 && radius > 0,
            PerturbSpec::GaussianNoise { sigma, .. } => sigma > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::validation(format!("perturbation parameters must be positive: {self}")))
        }
    }

    /// Applies the perturbation. `salt` is mixed into the noise seed so
    /// every image in a batch gets its own noise field.
    pub fn apply(&self, img: &Image, salt: u64) -> Result<Image> {
        match *self {
            PerturbSpec::GaussianBlur { sigma, radius } => gaussian_blur(img, sigma, radius),
            PerturbSpec::Bilateral {
                sigma_space,
                sigma_range,
                radius,
            } => bilateral_filter(img, sigma_space, sigma_range, radius),
            PerturbSpec::GaussianNoise { sigma, seed } => {
                add_gaussian_noise(img, sigma, crate::rng::derive_seed(&[seed, salt]))
            }
        }
    }
}

impl fmt::Display for PerturbSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PerturbSpec::GaussianBlur { sigma, radius } => {
                write!(f, "gaussian_blur:sigma={sigma},radius={radius}")
            }
            PerturbSpec::Bilateral {
                sigma_space,
                sigma_range,
                radius,
            } => write!(
                f,
                "bilateral:sigma_space={sigma_space},sigma_range={sigma_range},radius={radius}"
            ),
            PerturbSpec::GaussianNoise { sigma, seed } => {
                write!(f, "gaussian_noise:sigma={sigma},seed={seed}")
            }
        }
    }
}

/// Parses `kind[:param=value,...]`; omitted parameters take the defaults.
impl FromStr for PerturbSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, params) = match s.split_once(':') {
            Some((k, p)) => (k.trim(), p.trim()),
            None => (s.trim(), ""),
        };
        let mut spec = match kind {
            "gaussian_blur" | "blur" => PerturbSpec::default_blur(),
            "bilateral" => PerturbSpec::default_bilateral(),
            "gaussian_noise" | "noise" => PerturbSpec::default_noise(),
            other => return Err(Error::validation(format!("unknown perturbation kind '{other}'"))),
        };
        for item in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::validation(format!("perturbation parameter '{item}' is not key=value")))?;
            let num = |v: &str| -> Result<f64> {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::validation(format!("bad value for {key}: '{v}'")))
            };
            let int = |v: &str| -> Result<u64> {
                v.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::validation(format!("bad value for {key}: '{v}'")))
            };
            match (&mut spec, key.trim()) {
                (PerturbSpec::GaussianBlur { sigma, .. }, "sigma") => *sigma = num(value)?,
                (PerturbSpec::GaussianBlur { radius, .. }, "radius") => *radius = int(value)? as usize,
                (PerturbSpec::Bilateral { sigma_space, .. }, "sigma_space") => *sigma_space = num(value)?,
                (PerturbSpec::Bilateral { sigma_range, .. }, "sigma_range") => *sigma_range = num(value)?,
                (PerturbSpec::Bilateral { radius, .. }, "radius") => *radius = int(value)? as usize,
                (PerturbSpec::GaussianNoise { sigma, .. }, "sigma") => *sigma = num(value)?,
                (PerturbSpec::GaussianNoise { seed, .. }, "seed") => *seed = int(value)?,
                (_, k) => {
                    return Err(Error::validation(format!("parameter '{k}' does not apply to {kind}")));
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Center patch extraction: resize shorter edge to `intermediate_edge`, crop
/// `k`x`k`, resize to `final_edge` square.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub k: usize,
    #[serde(default = "default_intermediate")]
    pub intermediate_edge: usize,
    #[serde(default = "default_final")]
    pub final_edge: usize,
}

fn default_intermediate() -> usize {
    512
}

fn default_final() -> usize {
    224
}

impl PatchSpec {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            intermediate_edge: default_intermediate(),
            final_edge: default_final(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !PATCH_SIZES.contains(&self.k) {
            return Err(Error::validation(format!(
                "patch size {} not in {:?}",
                self.k, PATCH_SIZES
            )));
        }
        if self.k > self.intermediate_edge {
            return Err(Error::validation(format!(
                "patch size {} exceeds intermediate edge {}",
                self.k, self.intermediate_edge
            )));
        }
        if self.final_edge == 0 {
            return Err(Error::validation("patch final edge must be nonzero"));
        }
        Ok(())
    }
}

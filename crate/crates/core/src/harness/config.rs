//! Sweep configuration, read from TOML.
//!
//! ```toml
//! [input]
//! source = "synthetic"        # or "mrc"
//! path = "particles.mrc"      # mrc only
//! count = 16                  # evaluation images
//! side = 32                   # synthetic only
//! seed = 0
//! train_count = 32            # images held out for tuning and prior fitting
//!
//! [plan]
//! variants = ["fourier"]      # "fourier", "pixel"
//! strategies = ["uniform"]    # fourier: "uniform", "annular", "radial"
//! kernels = [4]               # pixel: pooling block sides K
//! compressions = [10.0, 2.5, 1.4, 1.0]
//!
//! [reconstruction]
//! priors = ["dct"]            # "dct", "wavelet", "tv", "diffusion", "zero-filled"
//! epochs = 200
//! tuning = "grid"             # or "fixed" with lambda/step below
//! lambda = 1e-4
//! step = 0.5
//! grid_images = 2
//! weights = "score.cssm"      # optional; otherwise a Gaussian fitted to the training images
//! diffusion_steps = 1000
//! beta_start = 1e-4
//! beta_end = 0.02
//! zeta_max = 1.0              # optional override
//!
//! [noise]
//! variances = [0.0]
//! seeds = [0]
//!
//! [output]
//! dir = "sweep-out"
//! threads = 0                 # 0 = all cores
//! external_metric = "lpips-score"   # optional command: <cmd> truth.mrc estimate.mrc
//! save_reconstructions = false
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masks::FourierStrategy;
use crate::sparse::Prior;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Pixel,
    Fourier,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Pixel => "pixel",
            Variant::Fourier => "fourier",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pixel" => Ok(Variant::Pixel),
            "fourier" => Ok(Variant::Fourier),
            other => Err(Error::param(format!("unknown plan variant {other:?}"))),
        }
    }
}

/// Reconstruction method evaluated by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReconPrior {
    Dct,
    Wavelet,
    Tv,
    Diffusion,
    ZeroFilled,
}

impl ReconPrior {
    pub fn sparse(self) -> Option<Prior> {
        match self {
            ReconPrior::Dct => Some(Prior::Dct),
            ReconPrior::Wavelet => Some(Prior::Wavelet),
            ReconPrior::Tv => Some(Prior::Tv),
            _ => None,
        }
    }
}

impl fmt::Display for ReconPrior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReconPrior::Dct => "dct",
            ReconPrior::Wavelet => "wavelet",
            ReconPrior::Tv => "tv",
            ReconPrior::Diffusion => "diffusion",
            ReconPrior::ZeroFilled => "zero-filled",
        })
    }
}

impl FromStr for ReconPrior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "diffusion" => Ok(ReconPrior::Diffusion),
            "zero-filled" | "zerofilled" | "adjoint" => Ok(ReconPrior::ZeroFilled),
            other => other.parse::<Prior>().map(|p| match p {
                Prior::Dct => ReconPrior::Dct,
                Prior::Wavelet => ReconPrior::Wavelet,
                Prior::Tv => ReconPrior::Tv,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Synthetic,
    Mrc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tuning {
    Grid,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub source: Source,
    pub path: Option<PathBuf>,
    pub count: usize,
    pub side: usize,
    pub seed: u64,
    pub train_count: usize,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            source: Source::Synthetic,
            path: None,
            count: 16,
            side: 32,
            seed: 0,
            train_count: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    pub variants: Vec<Variant>,
    pub strategies: Vec<FourierStrategy>,
    pub kernels: Vec<usize>,
    pub compressions: Vec<f64>,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            variants: vec![Variant::Fourier],
            strategies: vec![FourierStrategy::Uniform],
            kernels: vec![4],
            compressions: vec![10.0, 2.5, 1.4, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructionConfig {
    pub priors: Vec<ReconPrior>,
    pub epochs: usize,
    pub tuning: Tuning,
    pub lambda: f64,
    pub step: f64,
    pub grid_images: usize,
    pub weights: Option<PathBuf>,
    pub diffusion_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub zeta_max: Option<f64>,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            priors: vec![ReconPrior::Dct],
            epochs: 200,
            tuning: Tuning::Grid,
            lambda: 1e-4,
            step: 0.5,
            grid_images: 2,
            weights: None,
            diffusion_steps: crate::diffusion::DEFAULT_STEPS,
            beta_start: crate::diffusion::DEFAULT_BETA_START,
            beta_end: crate::diffusion::DEFAULT_BETA_END,
            zeta_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub variances: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            variances: vec![0.0],
            seeds: vec![0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub threads: usize,
    pub external_metric: Option<String>,
    pub save_reconstructions: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("sweep-out"),
            threads: 0,
            external_metric: None,
            save_reconstructions: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub input: InputConfig,
    pub plan: PlanConfig,
    pub reconstruction: ReconstructionConfig,
    pub noise: NoiseConfig,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let offset = e.span().map_or(0, |s| s.start) as u64;
            Error::Parse {
                offset,
                message: e.message().to_string(),
            }
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Pooled-measurement count for kernel `k` at compression `c`.
    pub fn mask_count(kernel: usize, compression: f64) -> usize {
        ((kernel * kernel) as f64 / compression).round() as usize
    }

    /// Checks everything that can be checked before touching data.
    pub fn validate(&self, side: usize) -> Result<()> {
        if self.input.count == 0 {
            return Err(Error::Config("input.count must be positive".into()));
        }
        if self.input.source == Source::Mrc && self.input.path.is_none() {
            return Err(Error::Config("input.path is required for mrc input".into()));
        }
        if let Some(c) = self.plan.compressions.iter().find(|c| !(**c >= 1.0)) {
            return Err(Error::Config(format!("compression factors must be >= 1, got {c}")));
        }
        if self.plan.variants.contains(&Variant::Pixel) {
            for &k in &self.plan.kernels {
                if k == 0 || side % k != 0 {
                    return Err(Error::Config(format!("kernel {k} does not divide side {side}")));
                }
                for &c in &self.plan.compressions {
                    if Self::mask_count(k, c) == 0 {
                        return Err(Error::Config(format!(
                            "K = {k}, C = {c} rounds to zero masks"
                        )));
                    }
                }
            }
        }
        if let Some(v) = self.noise.variances.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::Config(format!("noise variances must be >= 0, got {v}")));
        }
        let r = &self.reconstruction;
        if r.epochs == 0 {
            return Err(Error::Config("reconstruction.epochs must be positive".into()));
        }
        let needs_training = r.priors.contains(&ReconPrior::Diffusion) && r.weights.is_none()
            || r.tuning == Tuning::Grid && r.priors.iter().any(|p| p.sparse().is_some());
        if needs_training && self.input.train_count == 0 {
            return Err(Error::Config("input.train_count must be positive".into()));
        }
        if r.tuning == Tuning::Grid && r.grid_images == 0 {
            return Err(Error::Config("reconstruction.grid_images must be positive".into()));
        }
        Ok(())
    }
}

//! Dense 2D kernels shared by every prior.

pub mod dct;
pub mod fft;
pub mod tv;
pub mod wavelet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

pub use fft::{fft2, fft_nd, ifft2, ifft2_real};
pub use tv::tv_anisotropic;
pub use wavelet::{default_levels, WaveletFamily};

/// Orthonormal sparsifying basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Dct,
    Wavelet { family: WaveletFamily, levels: usize },
}

impl Basis {
    /// Haar wavelet basis with [`default_levels`] for the given side.
    pub fn default_wavelet(side: usize) -> Self {
        Basis::Wavelet {
            family: WaveletFamily::Haar,
            levels: default_levels(side),
        }
    }

    pub fn check(&self, side: usize) -> Result<()> {
        match *self {
            Basis::Dct => {
                if side < 2 {
                    return Err(Error::dim("DCT needs side >= 2"));
                }
                Ok(())
            }
            Basis::Wavelet { levels, .. } => wavelet::check_levels(side, levels),
        }
    }

    pub fn analyze(&self, x: &Image) -> Result<CoefficientVector> {
        self.check(x.side())?;
        let data = match *self {
            Basis::Dct => dct::forward(x.data(), x.side()),
            Basis::Wavelet { family, levels } => {
                wavelet::forward(x.data(), x.side(), family, levels)
            }
        };
        Ok(CoefficientVector {
            basis: *self,
            side: x.side(),
            data,
        })
    }

    pub fn synthesize(&self, c: &CoefficientVector) -> Result<Image> {
        if c.basis != *self {
            return Err(Error::param("coefficient basis does not match"));
        }
        c.synthesize()
    }
}

/// Coefficients of an image in one of the [`Basis`] transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    pub basis: Basis,
    side: usize,
    pub data: Vec<f64>,
}

impl CoefficientVector {
    pub fn new(basis: Basis, side: usize, data: Vec<f64>) -> Result<Self> {
        basis.check(side)?;
        if data.len() != side * side {
            return Err(Error::dim(format!(
                "expected {} coefficients, got {}",
                side * side,
                data.len()
            )));
        }
        Ok(Self { basis, side, data })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &CoefficientVector) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn synthesize(&self) -> Result<Image> {
        let data = match self.basis {
            Basis::Dct => dct::inverse(&self.data, self.side),
            Basis::Wavelet { family, levels } => {
                wavelet::inverse(&self.data, self.side, family, levels)
            }
        };
        Image::new(self.side, data)
    }
}

pub fn dct2_forward(x: &Image) -> Result<CoefficientVector> {
    Basis::Dct.analyze(x)
}

pub fn dct2_inverse(c: &CoefficientVector) -> Result<Image> {
    Basis::Dct.synthesize(c)
}

pub fn wavelet_forward(x: &Image, levels: usize) -> Result<CoefficientVector> {
    Basis::Wavelet {
        family: WaveletFamily::Haar,
        levels,
    }
    .analyze(x)
}

pub fn wavelet_inverse(c: &CoefficientVector) -> Result<Image> {
    match c.basis {
        Basis::Wavelet { .. } => c.synthesize(),
        Basis::Dct => Err(Error::param("expected wavelet coefficients")),
    }
}

#[inline]
pub fn soft_threshold_scalar(c: f64, lambda: f64) -> f64 {
    c.signum() * (c.abs() - lambda).max(0.0)
}

/// Elementwise `sign(c) * max(|c| - lambda, 0)`.
pub fn soft_threshold(c: &CoefficientVector, lambda: f64) -> Result<CoefficientVector> {
    if !(lambda >= 0.0) {
        return Err(Error::param(format!("threshold must be >= 0, got {lambda}")));
    }
    let mut out = c.clone();
    soft_threshold_in_place(&mut out.data, lambda);
    Ok(out)
}

pub(crate) fn soft_threshold_in_place(values: &mut [f64], lambda: f64) {
    if lambda == 0.0 {
        return;
    }
    for v in values.iter_mut() {
        *v = soft_threshold_scalar(*v, lambda);
    }
}

//! Square real and complex rasters.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Square real-valued image stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    side: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(side: usize, data: Vec<f64>) -> Result<Self> {
        if side == 0 {
            return Err(Error::dim("image side must be positive"));
        }
        if data.len() != side * side {
            return Err(Error::dim(format!(
                "image of side {side} needs {} values, got {}",
                side * side,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("image contains non-finite values".into()));
        }
        Ok(Self { side, data })
    }

    pub fn zeros(side: usize) -> Self {
        Self::filled(side, 0.0)
    }

    pub fn filled(side: usize, value: f64) -> Self {
        assert!(side > 0, "image side must be positive");
        Self {
            side,
            data: vec![value; side * side],
        }
    }

    pub fn from_fn(side: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(side > 0, "image side must be positive");
        let mut data = Vec::with_capacity(side * side);
        for r in 0..side {
            for c in 0..side {
                data.push(f(r, c));
            }
        }
        Self { side, data }
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.side
    }

    /// Number of pixels.
    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.side + col]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_same_side(&self, other: &Image) -> Result<()> {
        if self.side != other.side {
            return Err(Error::dim(format!(
                "image sides differ: {} vs {}",
                self.side, other.side
            )));
        }
        Ok(())
    }

    pub fn dot(&self, other: &Image) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            side: self.side,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, factor: f64) -> Image {
        self.map(|v| v * factor)
    }

    /// `self + factor * other`
    pub fn add_scaled(&self, factor: f64, other: &Image) -> Image {
        debug_assert_eq!(self.side, other.side);
        Image {
            side: self.side,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + factor * b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Image) -> Image {
        self.add_scaled(-1.0, other)
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Image {
        self.map(|v| v.clamp(lo, hi))
    }

    pub fn max_abs_diff(&self, other: &Image) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for Image {
    type Output = f64;

    fn index(&self, (row, col): (usize, usize)) -> &f64 {
        &self.data[row * self.side + col]
    }
}

impl IndexMut<(usize, usize)> for Image {
    fn index_mut(&mut self, (row, col): (usize, usize)) -> &mut f64 {
        &mut self.data[row * self.side + col]
    }
}

/// Square complex raster, usually the Fourier coefficients of an [`Image`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralImage {
    side: usize,
    data: Vec<Complex64>,
}

impl SpectralImage {
    pub fn new(side: usize, data: Vec<Complex64>) -> Result<Self> {
        if side == 0 || data.len() != side * side {
            return Err(Error::dim(format!(
                "spectral image of side {side} needs {} values, got {}",
                side * side,
                data.len()
            )));
        }
        Ok(Self { side, data })
    }

    pub fn zeros(side: usize) -> Self {
        Self {
            side,
            data: vec![Complex64::new(0.0, 0.0); side * side],
        }
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.side
    }

    #[inline]
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Real part as an image; imaginary parts are dropped.
    pub fn real_part(&self) -> Image {
        Image {
            side: self.side,
            data: self.data.iter().map(|c| c.re).collect(),
        }
    }
}

impl From<&Image> for SpectralImage {
    fn from(img: &Image) -> Self {
        Self {
            side: img.side,
            data: img.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}

//! Multilevel orthonormal 2D wavelet transform.
//!
//! Coefficients use the usual Mallat layout: after `levels` decompositions
//! the approximation band occupies the top-left `side >> levels` square and
//! each level's LH/HL/HH detail bands sit around it.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveletFamily {
    #[default]
    Haar,
}

/// Deepest decomposition whose coarsest band is still at least 4x4, and at least 1.
pub fn default_levels(side: usize) -> usize {
    let mut levels = 0;
    let mut s = side;
    while s % 2 == 0 && s / 2 >= 4 {
        s /= 2;
        levels += 1;
    }
    levels.max(1)
}

pub(crate) fn check_levels(side: usize, levels: usize) -> Result<()> {
    if levels == 0 {
        return Err(Error::dim("wavelet levels must be at least 1"));
    }
    if levels >= usize::BITS as usize || side % (1usize << levels) != 0 {
        return Err(Error::dim(format!(
            "side {side} is not divisible by 2^{levels}"
        )));
    }
    Ok(())
}

// One analysis step along a line of even length.
fn haar_analyze_line(buf: &mut [f64], scratch: &mut [f64]) {
    let half = buf.len() / 2;
    for i in 0..half {
        let (a, b) = (buf[2 * i], buf[2 * i + 1]);
        scratch[i] = (a + b) * FRAC_1_SQRT_2;
        scratch[half + i] = (a - b) * FRAC_1_SQRT_2;
    }
    buf.copy_from_slice(&scratch[..buf.len()]);
}

fn haar_synthesize_line(buf: &mut [f64], scratch: &mut [f64]) {
    let half = buf.len() / 2;
    for i in 0..half {
        let (s, d) = (buf[i], buf[half + i]);
        scratch[2 * i] = (s + d) * FRAC_1_SQRT_2;
        scratch[2 * i + 1] = (s - d) * FRAC_1_SQRT_2;
    }
    buf.copy_from_slice(&scratch[..buf.len()]);
}

fn transform_rows(data: &mut [f64], side: usize, extent: usize, step: LineStep, scratch: &mut [f64]) {
    for r in 0..extent {
        step(&mut data[r * side..r * side + extent], scratch);
    }
}

fn transform_cols(data: &mut [f64], side: usize, extent: usize, step: LineStep, scratch: &mut [f64]) {
    let mut line = vec![0.0; extent];
    for c in 0..extent {
        for (r, slot) in line.iter_mut().enumerate() {
            *slot = data[r * side + c];
        }
        step(&mut line, scratch);
        for (r, v) in line.iter().enumerate() {
            data[r * side + c] = *v;
        }
    }
}

type LineStep = fn(&mut [f64], &mut [f64]);

pub(crate) fn forward(data: &[f64], side: usize, family: WaveletFamily, levels: usize) -> Vec<f64> {
    let WaveletFamily::Haar = family;
    let mut out = data.to_vec();
    let mut extent = side;
    let mut scratch = vec![0.0; side];
    for _ in 0..levels {
        transform_rows(&mut out, side, extent, haar_analyze_line, &mut scratch);
        transform_cols(&mut out, side, extent, haar_analyze_line, &mut scratch);
        extent /= 2;
    }
    out
}

pub(crate) fn inverse(coeffs: &[f64], side: usize, family: WaveletFamily, levels: usize) -> Vec<f64> {
    let WaveletFamily::Haar = family;
    let mut out = coeffs.to_vec();
    let mut extent = side >> (levels - 1);
    let mut scratch = vec![0.0; side];
    for _ in 0..levels {
        transform_cols(&mut out, side, extent, haar_synthesize_line, &mut scratch);
        transform_rows(&mut out, side, extent, haar_synthesize_line, &mut scratch);
        extent *= 2;
    }
    out
}

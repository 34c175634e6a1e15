//! Anisotropic total variation and its forward-difference operator.
//!
//! Differences that would reach past the image border are skipped, no wraparound.

use crate::image::Image;

/// `sum |x[i+1,j] - x[i,j]| + |x[i,j+1] - x[i,j]|` over in-range neighbours.
pub fn tv_anisotropic(x: &Image) -> f64 {
    let d = x.side();
    let v = x.data();
    let mut total = 0.0;
    for r in 0..d {
        for c in 0..d {
            let here = v[r * d + c];
            if r + 1 < d {
                total += (v[(r + 1) * d + c] - here).abs();
            }
            if c + 1 < d {
                total += (v[r * d + c + 1] - here).abs();
            }
        }
    }
    total
}

/// Forward differences stored on the full grid; the last row of `down` and
/// the last column of `right` are always zero.
#[derive(Debug, Clone)]
pub(crate) struct Gradient {
    pub down: Vec<f64>,
    pub right: Vec<f64>,
}

impl Gradient {
    pub fn zeros(side: usize) -> Self {
        Self {
            down: vec![0.0; side * side],
            right: vec![0.0; side * side],
        }
    }
}

pub(crate) fn gradient(x: &[f64], side: usize, out: &mut Gradient) {
    for r in 0..side {
        for c in 0..side {
            let i = r * side + c;
            out.down[i] = if r + 1 < side { x[i + side] - x[i] } else { 0.0 };
            out.right[i] = if c + 1 < side { x[i + 1] - x[i] } else { 0.0 };
        }
    }
}

/// Adjoint of [`gradient`] (a negative divergence).
pub(crate) fn gradient_adjoint(g: &Gradient, side: usize, out: &mut [f64]) {
    for r in 0..side {
        for c in 0..side {
            let i = r * side + c;
            let mut acc = 0.0;
            if r + 1 < side {
                acc -= g.down[i];
            }
            if r > 0 {
                acc += g.down[i - side];
            }
            if c + 1 < side {
                acc -= g.right[i];
            }
            if c > 0 {
                acc += g.right[i - 1];
            }
            out[i] = acc;
        }
    }
}

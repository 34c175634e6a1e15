//! Orthonormal type-II 2D DCT.
//!
//! Implemented as `C X C^T` with the dense orthonormal DCT-II matrix, which is
//! exact to rounding and cheap enough for the image sizes this crate targets.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::rc::Rc;

thread_local! {
    static MATRICES: RefCell<HashMap<usize, Rc<Vec<f64>>>> = RefCell::new(HashMap::new());
}

/// Row-major `side x side` DCT-II matrix with orthonormal scaling.
fn dct_matrix(side: usize) -> Rc<Vec<f64>> {
    MATRICES.with(|cache| {
        cache
            .borrow_mut()
            .entry(side)
            .or_insert_with(|| {
                let n = side as f64;
                let mut m = vec![0.0; side * side];
                for k in 0..side {
                    let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
                    for j in 0..side {
                        m[k * side + j] =
                            scale * (PI * (2 * j + 1) as f64 * k as f64 / (2.0 * n)).cos();
                    }
                }
                Rc::new(m)
            })
            .clone()
    })
}

// out = a * b, all square row-major
fn matmul(a: &[f64], b: &[f64], side: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..side {
        let row = &mut out[i * side..(i + 1) * side];
        for k in 0..side {
            let aik = a[i * side + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b[k * side..(k + 1) * side];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    }
}

// out = a * b^T
fn matmul_bt(a: &[f64], b: &[f64], side: usize, out: &mut [f64]) {
    for i in 0..side {
        let arow = &a[i * side..(i + 1) * side];
        for j in 0..side {
            let brow = &b[j * side..(j + 1) * side];
            out[i * side + j] = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
}

// out = a^T * b
fn matmul_at(a: &[f64], b: &[f64], side: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for k in 0..side {
        let brow = &b[k * side..(k + 1) * side];
        for i in 0..side {
            let aki = a[k * side + i];
            let row = &mut out[i * side..(i + 1) * side];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += aki * bv;
            }
        }
    }
}

pub(crate) fn forward(data: &[f64], side: usize) -> Vec<f64> {
    let c = dct_matrix(side);
    let mut tmp = vec![0.0; side * side];
    let mut out = vec![0.0; side * side];
    matmul(&c, data, side, &mut tmp);
    matmul_bt(&tmp, &c, side, &mut out);
    out
}

pub(crate) fn inverse(coeffs: &[f64], side: usize) -> Vec<f64> {
    let c = dct_matrix(side);
    let mut tmp = vec![0.0; side * side];
    let mut out = vec![0.0; side * side];
    // X = C^T Y C
    matmul_at(&c, coeffs, side, &mut tmp);
    matmul(&tmp, &c, side, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_is_orthonormal() {
        let side = 7;
        let c = dct_matrix(side);
        for i in 0..side {
            for j in 0..side {
                let dot: f64 = (0..side).map(|k| c[i * side + k] * c[j * side + k]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn one_dimensional_reference() {
        // direct summation of the 2D DCT-II definition
        let side = 4;
        let data: Vec<f64> = (0..16).map(|v| (v as f64 * 0.37).sin()).collect();
        let fast = forward(&data, side);
        let n = side as f64;
        let a = |k: usize| if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
        for u in 0..side {
            for v in 0..side {
                let mut acc = 0.0;
                for r in 0..side {
                    for c in 0..side {
                        acc += data[r * side + c]
                            * (PI * (2 * r + 1) as f64 * u as f64 / (2.0 * n)).cos()
                            * (PI * (2 * c + 1) as f64 * v as f64 / (2.0 * n)).cos();
                    }
                }
                assert!((fast[u * side + v] - a(u) * a(v) * acc).abs() < 1e-12);
            }
        }
    }
}

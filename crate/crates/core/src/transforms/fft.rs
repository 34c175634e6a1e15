//! Unitary n-dimensional FFT and fftshift index helpers.
//!
//! Every transform here is scaled by `1/sqrt(len)` along each axis, so the
//! forward and inverse transforms are adjoint to each other and
//! `||F(x)||_2 = ||x||_2`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::Result;
use crate::image::{Image, SpectralImage};

thread_local! {
    static PLANNER: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        cache
            .entry((len, inverse))
            .or_insert_with(|| {
                if inverse {
                    planner.plan_fft_inverse(len)
                } else {
                    planner.plan_fft_forward(len)
                }
            })
            .clone()
    })
}

/// In-place unitary FFT over a row-major array with the given shape.
pub fn fft_nd(data: &mut [Complex64], shape: &[usize], inverse: bool) {
    let total: usize = shape.iter().product();
    assert_eq!(data.len(), total, "shape does not match buffer length");
    let mut stride = total;
    let mut line = Vec::new();
    for &len in shape {
        stride /= len;
        if len == 1 {
            continue;
        }
        let fft = plan(len, inverse);
        let scale = 1.0 / (len as f64).sqrt();
        line.resize(len, Complex64::new(0.0, 0.0));
        let block = len * stride;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + k * stride];
                }
                fft.process(&mut line);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = v * scale;
                }
            }
        }
    }
}

/// Unitary 2D FFT of a real image (unshifted, DC at index 0).
pub fn fft2(x: &Image) -> SpectralImage {
    let mut spec = SpectralImage::from(x);
    let side = spec.side();
    fft_nd(spec.data_mut(), &[side, side], false);
    spec
}

/// Unitary inverse 2D FFT.
pub fn ifft2(spec: &SpectralImage) -> SpectralImage {
    let mut out = spec.clone();
    let side = out.side();
    fft_nd(out.data_mut(), &[side, side], true);
    out
}

/// Forward then inverse; useful for checking round trips without going through `Image`.
pub fn ifft2_real(spec: &SpectralImage) -> Result<Image> {
    let out = ifft2(spec);
    Image::new(out.side(), out.data().iter().map(|c| c.re).collect())
}

/// Maps an index on the fftshifted axis back to the unshifted FFT index.
#[inline]
pub fn unshift_index(shifted: usize, len: usize) -> usize {
    (shifted + len - len / 2) % len
}

/// Maps an unshifted FFT index to its position on the fftshifted axis.
#[inline]
pub fn shift_index(unshifted: usize, len: usize) -> usize {
    (unshifted + len / 2) % len
}

/// Signed frequency of an unshifted FFT index.
#[inline]
pub fn signed_frequency(index: usize, len: usize) -> isize {
    if index < len.div_ceil(2) {
        index as isize
    } else {
        index as isize - len as isize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(side: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(side, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn round_trip() {
        for side in [2, 5, 8, 12] {
            let x = random_image(side, side as u64);
            let back = ifft2_real(&fft2(&x)).unwrap();
            let err = back.sub(&x).norm() / x.norm();
            assert!(err < 1e-10, "side {side}: {err}");
        }
    }

    #[test]
    fn parseval_unitary() {
        let x = random_image(16, 3);
        let spec = fft2(&x);
        let rel = (spec.norm_sqr() - x.dot(&x)).abs() / x.dot(&x);
        assert!(rel < 1e-12);
    }

    #[test]
    fn dc_coefficient() {
        let x = Image::filled(4, 2.0);
        let spec = fft2(&x);
        // unitary: sum / sqrt(n) = 32 / 4
        assert!((spec.data()[0].re - 8.0).abs() < 1e-12);
        assert!(spec.data()[1..].iter().all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn shift_indices_are_inverse() {
        for len in [4, 5, 8, 9] {
            for k in 0..len {
                assert_eq!(unshift_index(shift_index(k, len), len), k);
            }
            assert_eq!(unshift_index(len / 2, len), 0);
        }
        assert_eq!(signed_frequency(3, 4), -1);
        assert_eq!(signed_frequency(2, 4), -2);
        assert_eq!(signed_frequency(2, 5), 2);
    }

    #[test]
    fn nd_matches_separable_2d() {
        let x = random_image(6, 11);
        let spec = fft2(&x);
        let mut buf: Vec<Complex64> = x.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_nd(&mut buf, &[6, 6], false);
        for (a, b) in buf.iter().zip(spec.data()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}

//! Smooth blob phantoms standing in for particle images.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::transforms::fft::{fft_nd, signed_frequency};

/// Gaussian low-pass width in cycles per pixel.
const TAPER: f64 = 0.25;

/// `count` phantoms of 3 to 8 rotated anisotropic Gaussians, gently low-passed,
/// shifted to zero mean and scaled so the largest magnitude is 1.
///
/// Zero mean mirrors normalised particle stacks, where the background sits
/// near the middle of the range rather than at one end.
pub fn synth_particles(count: usize, side: usize, seed: u64) -> Result<Vec<Image>> {
    if side < 16 {
        return Err(Error::param(format!("phantom side must be >= 16, got {side}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| one_particle(side, &mut rng)).collect())
}

fn one_particle(side: usize, rng: &mut ChaCha8Rng) -> Image {
    let d = side as f64;
    let blobs = rng.gen_range(3..=8);
    let mut img = Image::zeros(side);
    for _ in 0..blobs {
        let radius = rng.gen_range(0.0..0.22) * d;
        let phi = rng.gen_range(0.0..2.0 * PI);
        let (cy, cx) = (d / 2.0 + radius * phi.sin(), d / 2.0 + radius * phi.cos());
        let sa = rng.gen_range(0.04..0.14) * d;
        let sb = rng.gen_range(0.04..0.14) * d;
        let theta = rng.gen_range(0.0..PI);
        let amp = rng.gen_range(0.3..1.0);
        let (sin, cos) = theta.sin_cos();
        for (i, v) in img.data_mut().iter_mut().enumerate() {
            let dy = (i / side) as f64 - cy;
            let dx = (i % side) as f64 - cx;
            let u = cos * dx + sin * dy;
            let w = -sin * dx + cos * dy;
            *v += amp * (-0.5 * (u * u / (sa * sa) + w * w / (sb * sb))).exp();
        }
    }
    let img = low_pass(&img);
    let mean = img.mean();
    let peak = img.data().iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if peak > 0.0 {
        img.map(|v| (v - mean) / peak)
    } else {
        Image::zeros(side)
    }
}

fn low_pass(img: &Image) -> Image {
    let side = img.side();
    let mut spec: Vec<Complex64> = img.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(&mut spec, &[side, side], false);
    for (i, c) in spec.iter_mut().enumerate() {
        let fy = signed_frequency(i / side, side) as f64 / side as f64;
        let fx = signed_frequency(i % side, side) as f64 / side as f64;
        *c *= (-(fy * fy + fx * fx) / (TAPER * TAPER)).exp();
    }
    fft_nd(&mut spec, &[side, side], true);
    Image::from_fn(side, |r, c| spec[r * side + c].re)
}

/// Fraction of spectral power (DC excluded) at radial frequency at or above
/// three quarters of Nyquist.
pub fn high_frequency_fraction(img: &Image) -> f64 {
    let side = img.side();
    let mut spec: Vec<Complex64> = img.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(&mut spec, &[side, side], false);
    let nyquist = side as f64 / 2.0;
    let (mut high, mut total) = (0.0, 0.0);
    for (i, c) in spec.iter().enumerate().skip(1) {
        let fy = signed_frequency(i / side, side) as f64;
        let fx = signed_frequency(i % side, side) as f64;
        let p = c.norm_sqr();
        total += p;
        if (fy * fy + fx * fx).sqrt() >= 0.75 * nyquist {
            high += p;
        }
    }
    if total > 0.0 {
        high / total
    } else {
        0.0
    }
}

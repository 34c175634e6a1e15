//! Image fidelity metrics: SSIM, PSNR, and Fourier ring/shell correlation.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::transforms::fft::{fft_nd, signed_frequency};

/// Correlation level used to read off resolution.
pub const FSC_THRESHOLD: f64 = 0.143;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;

/// SSIM with the dynamic range taken from `reference`'s value range.
pub fn ssim(reference: &Image, other: &Image) -> Result<f64> {
    let (lo, hi) = reference.min_max();
    let range = if hi > lo { hi - lo } else { 1.0 };
    ssim_with_range(reference, other, range)
}

/// Mean SSIM over every fully-contained Gaussian window.
///
/// The window is 11 wide with sigma 1.5, shrunk to the largest odd width that
/// fits when the image is smaller than that.
pub fn ssim_with_range(a: &Image, b: &Image, range: f64) -> Result<f64> {
    a.check_same_side(b)?;
    if !(range > 0.0) {
        return Err(Error::param(format!("SSIM range must be > 0, got {range}")));
    }
    let side = a.side();
    let width = if side >= SSIM_WINDOW {
        SSIM_WINDOW
    } else if side % 2 == 1 {
        side
    } else {
        side - 1
    };
    let kernel = gaussian_kernel(width, SSIM_SIGMA);
    let c1 = (0.01 * range).powi(2);
    let c2 = (0.03 * range).powi(2);

    let av = a.data();
    let bv = b.data();
    let aa: Vec<f64> = av.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = bv.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = av.iter().zip(bv).map(|(x, y)| x * y).collect();
    let mu_a = filter_valid(av, side, &kernel);
    let mu_b = filter_valid(bv, side, &kernel);
    let e_aa = filter_valid(&aa, side, &kernel);
    let e_bb = filter_valid(&bb, side, &kernel);
    let e_ab = filter_valid(&ab, side, &kernel);

    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
            / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(total / mu_a.len() as f64)
}

fn gaussian_kernel(width: usize, sigma: f64) -> Vec<f64> {
    let half = (width / 2) as f64;
    let mut k: Vec<f64> = (0..width)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable weighted sum over every window that fits; output is `(side-w+1)^2`.
fn filter_valid(data: &[f64], side: usize, kernel: &[f64]) -> Vec<f64> {
    let w = kernel.len();
    let out_side = side + 1 - w;
    let mut rows = vec![0.0; side * out_side];
    for r in 0..side {
        for c in 0..out_side {
            rows[r * out_side + c] = kernel
                .iter()
                .enumerate()
                .map(|(k, wk)| wk * data[r * side + c + k])
                .sum();
        }
    }
    let mut out = vec![0.0; out_side * out_side];
    for r in 0..out_side {
        for c in 0..out_side {
            out[r * out_side + c] = kernel
                .iter()
                .enumerate()
                .map(|(k, wk)| wk * rows[(r + k) * out_side + c])
                .sum();
        }
    }
    out
}

/// `10 log10(peak^2 / MSE)`; identical images give `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image, peak: f64) -> Result<f64> {
    a.check_same_side(b)?;
    if !(peak > 0.0) {
        return Err(Error::param(format!("PSNR peak must be > 0, got {peak}")));
    }
    let mse = a.sub(b).data().iter().map(|v| v * v).sum::<f64>() / a.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// PSNR for tables: `exact` for identical images.
pub fn format_psnr(db: f64) -> String {
    if db.is_infinite() && db > 0.0 {
        "exact".to_string()
    } else {
        format!("{db:.4}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricReport {
    pub ssim: f64,
    pub psnr_db: f64,
}

/// SSIM and PSNR of `estimate` against `reference`, peak from the reference range.
pub fn report(reference: &Image, estimate: &Image) -> Result<MetricReport> {
    let (lo, hi) = reference.min_max();
    let peak = if hi > lo { hi - lo } else { 1.0 };
    Ok(MetricReport {
        ssim: ssim_with_range(reference, estimate, peak)?,
        psnr_db: psnr(reference, estimate, peak)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShellCorrelation {
    /// Shell centres in cycles per pixel.
    pub shell_radii: Vec<f64>,
    pub correlation: Vec<f64>,
    /// Fourier coefficients per shell.
    pub counts: Vec<usize>,
    /// First drop below [`FSC_THRESHOLD`], linearly interpolated, in cycles per pixel.
    pub threshold_crossing: Option<f64>,
}

impl ShellCorrelation {
    /// Crossing at an arbitrary level, same interpolation as `threshold_crossing`.
    pub fn crossing(&self, level: f64) -> Option<f64> {
        crossing(&self.shell_radii, &self.correlation, level)
    }

    /// Resolution in Angstrom at the 0.143 crossing, `pixel_size / f`.
    pub fn resolution(&self, pixel_size: f64) -> Option<f64> {
        self.threshold_crossing.map(|f| resolution_from_frequency(f, pixel_size))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("shell,frequency,correlation,count\n");
        for i in 0..self.correlation.len() {
            out.push_str(&format!(
                "{},{:.6},{:.9},{}\n",
                i, self.shell_radii[i], self.correlation[i], self.counts[i]
            ));
        }
        out
    }
}

/// Spatial frequency in cycles per pixel to resolution; 0.5 maps to `2 * pixel_size`.
pub fn resolution_from_frequency(frequency: f64, pixel_size: f64) -> f64 {
    pixel_size / frequency
}

fn crossing(radii: &[f64], corr: &[f64], level: f64) -> Option<f64> {
    for i in 1..corr.len() {
        if corr[i] < level {
            let (c0, c1) = (corr[i - 1], corr[i]);
            if c0 < level {
                return Some(radii[i - 1]);
            }
            let t = (c0 - level) / (c0 - c1);
            return Some(radii[i - 1] + t * (radii[i] - radii[i - 1]));
        }
    }
    None
}

/// Ring correlation of two images.
pub fn ring_correlation(a: &Image, b: &Image, bins: usize) -> Result<ShellCorrelation> {
    a.check_same_side(b)?;
    let side = a.side();
    shell_correlation(a.data(), b.data(), &[side, side], bins)
}

/// Fourier ring (2D) or shell (3D) correlation of two equally shaped cubic arrays.
///
/// Frequencies up to Nyquist (`N/2`) are split into `bins` shells of equal
/// radial width; a coefficient at radius `r` falls in shell `round(r / width)`
/// and anything past the last shell is dropped. Shells without energy in either
/// input report zero.
pub fn shell_correlation(
    a: &[f64],
    b: &[f64],
    shape: &[usize],
    bins: usize,
) -> Result<ShellCorrelation> {
    if shape.len() != 2 && shape.len() != 3 {
        return Err(Error::dim("shell correlation needs a 2D or 3D array"));
    }
    let n = shape[0];
    if n < 2 || shape.iter().any(|&d| d != n) {
        return Err(Error::dim(format!("expected an equal-sided array, got {shape:?}")));
    }
    let total: usize = shape.iter().product();
    if a.len() != total || b.len() != total {
        return Err(Error::dim("array length does not match the shape"));
    }
    if bins == 0 {
        return Err(Error::param("bins must be positive"));
    }
    let to_complex = |v: &[f64]| v.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>();
    let mut fa = to_complex(a);
    let mut fb = to_complex(b);
    fft_nd(&mut fa, shape, false);
    fft_nd(&mut fb, shape, false);

    let width = (n as f64 / 2.0) / bins as f64;
    let mut cross = vec![0.0; bins];
    let mut ea = vec![0.0; bins];
    let mut eb = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    let mut index = vec![0usize; shape.len()];
    for flat in 0..total {
        let mut rem = flat;
        for d in (0..shape.len()).rev() {
            index[d] = rem % n;
            rem /= n;
        }
        let r2: f64 = index
            .iter()
            .map(|&k| {
                let f = signed_frequency(k, n) as f64;
                f * f
            })
            .sum();
        let shell = (r2.sqrt() / width).round() as usize;
        if shell >= bins {
            continue;
        }
        let (x, y) = (fa[flat], fb[flat]);
        cross[shell] += (x * y.conj()).re;
        ea[shell] += x.norm_sqr();
        eb[shell] += y.norm_sqr();
        counts[shell] += 1;
    }
    let correlation: Vec<f64> = (0..bins)
        .map(|i| {
            let denom = (ea[i] * eb[i]).sqrt();
            if denom > 0.0 {
                (cross[i] / denom).clamp(-1.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    let shell_radii: Vec<f64> = (0..bins).map(|i| i as f64 * width / n as f64).collect();
    let threshold_crossing = crossing(&shell_radii, &correlation, FSC_THRESHOLD);
    Ok(ShellCorrelation {
        shell_radii,
        correlation,
        counts,
        threshold_crossing,
    })
}

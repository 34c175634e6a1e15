//! The measurement operator `A`, its adjoint, and additive Gaussian noise.
//!
//! Pixel plans produce real measurements ordered mask-major, then pooled
//! blocks row-major. Fourier plans produce the kept complex coefficients of
//! the unitary FFT, scanned row-major over the fftshifted grid; storing only
//! kept coefficients is equivalent to the zero-filled inverse image, which
//! [`zero_filled_inverse`] reconstructs.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::image::{Image, SpectralImage};
use crate::masks::{ByteReader, FourierMask, PixelMaskSet};
use crate::transforms::fft::{self, shift_index, unshift_index};

const MEASUREMENT_MAGIC: &[u8; 4] = b"CSMS";

/// Power iterations used by [`MeasurementPlan::lipschitz_bound`].
pub const POWER_ITERATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementPlan {
    Pixel(PixelMaskSet),
    Fourier(FourierMask),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementData {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl MeasurementData {
    pub fn len(&self) -> usize {
        match self {
            MeasurementData::Real(v) => v.len(),
            MeasurementData::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Real inner product; complex entries count real and imaginary parts.
    pub fn dot(&self, other: &MeasurementData) -> f64 {
        match (self, other) {
            (MeasurementData::Real(a), MeasurementData::Real(b)) => {
                a.iter().zip(b).map(|(x, y)| x * y).sum()
            }
            (MeasurementData::Complex(a), MeasurementData::Complex(b)) => {
                a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
            }
            _ => panic!("measurement kinds differ"),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `self - other`
    pub fn sub(&self, other: &MeasurementData) -> MeasurementData {
        self.combine(other, |a, b| a - b, |a, b| a - b)
    }

    /// `self * factor + other`
    pub fn scale_add(&self, factor: f64, other: &MeasurementData) -> MeasurementData {
        self.combine(other, |a, b| a * factor + b, |a, b| a * factor + b)
    }

    pub fn scale(&self, factor: f64) -> MeasurementData {
        match self {
            MeasurementData::Real(v) => MeasurementData::Real(v.iter().map(|x| x * factor).collect()),
            MeasurementData::Complex(v) => {
                MeasurementData::Complex(v.iter().map(|x| x * factor).collect())
            }
        }
    }

    fn combine(
        &self,
        other: &MeasurementData,
        real: impl Fn(f64, f64) -> f64,
        complex: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> MeasurementData {
        match (self, other) {
            (MeasurementData::Real(a), MeasurementData::Real(b)) => {
                MeasurementData::Real(a.iter().zip(b).map(|(x, y)| real(*x, *y)).collect())
            }
            (MeasurementData::Complex(a), MeasurementData::Complex(b)) => {
                MeasurementData::Complex(a.iter().zip(b).map(|(x, y)| complex(*x, *y)).collect())
            }
            _ => panic!("measurement kinds differ"),
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            MeasurementData::Real(v) => v.iter().all(|x| x.is_finite()),
            MeasurementData::Complex(v) => v.iter().all(|x| x.re.is_finite() && x.im.is_finite()),
        }
    }
}

impl MeasurementPlan {
    pub fn side(&self) -> usize {
        match self {
            MeasurementPlan::Pixel(p) => p.side(),
            MeasurementPlan::Fourier(f) => f.side(),
        }
    }

    /// Measurement dimension `m`.
    pub fn output_len(&self) -> usize {
        match self {
            MeasurementPlan::Pixel(p) => p.output_len(),
            MeasurementPlan::Fourier(f) => f.kept_count(),
        }
    }

    /// `K^2 / b` for pixel plans, `n / m` for Fourier plans.
    pub fn compression(&self) -> f64 {
        match self {
            MeasurementPlan::Pixel(p) => p.compression(),
            MeasurementPlan::Fourier(f) => f.compression(),
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            MeasurementPlan::Pixel(_) => "pixel",
            MeasurementPlan::Fourier(_) => "fourier",
        }
    }

    fn check_image(&self, x: &Image) -> Result<()> {
        if x.side() != self.side() {
            return Err(Error::dim(format!(
                "plan expects side {}, image has side {}",
                self.side(),
                x.side()
            )));
        }
        Ok(())
    }

    pub fn check_data(&self, data: &MeasurementData) -> Result<()> {
        let kind_ok = matches!(
            (self, data),
            (MeasurementPlan::Pixel(_), MeasurementData::Real(_))
                | (MeasurementPlan::Fourier(_), MeasurementData::Complex(_))
        );
        if !kind_ok || data.len() != self.output_len() {
            return Err(Error::dim(format!(
                "{} plan expects {} measurements, got {} ({})",
                self.variant_name(),
                self.output_len(),
                data.len(),
                if kind_ok { "matching kind" } else { "wrong kind" }
            )));
        }
        Ok(())
    }

    /// Applies `A` to an image.
    pub fn forward(&self, x: &Image) -> Result<MeasurementData> {
        self.check_image(x)?;
        Ok(match self {
            MeasurementPlan::Pixel(p) => MeasurementData::Real(pixel_forward(p, x.data())),
            MeasurementPlan::Fourier(f) => MeasurementData::Complex(fourier_forward(f, x)),
        })
    }

    /// Applies the adjoint `A*`, returning a real image.
    pub fn adjoint(&self, data: &MeasurementData) -> Result<Image> {
        self.check_data(data)?;
        let side = self.side();
        let out = match (self, data) {
            (MeasurementPlan::Pixel(p), MeasurementData::Real(y)) => pixel_adjoint(p, y),
            (MeasurementPlan::Fourier(f), MeasurementData::Complex(y)) => {
                fft::ifft2(&scatter(f, y)).real_part().into_data()
            }
            _ => unreachable!(),
        };
        Image::new(side, out)
    }

    /// `A* A x`.
    pub fn normal(&self, x: &Image) -> Result<Image> {
        self.adjoint(&self.forward(x)?)
    }

    /// Upper bound on `||A||_2^2`.
    ///
    /// Fourier plans are coefficient selections of a unitary transform, so
    /// the bound is exactly 1. Pixel plans run [`POWER_ITERATIONS`] steps of
    /// power iteration on `A* A` (a nonnegative matrix) from the all-ones
    /// vector and return the Collatz-Wielandt bound `max_i (A*A v)_i / v_i`,
    /// which is never below the largest eigenvalue.
    pub fn lipschitz_bound(&self) -> f64 {
        match self {
            MeasurementPlan::Fourier(_) => 1.0,
            MeasurementPlan::Pixel(p) => pixel_lipschitz(p),
        }
    }
}

fn pixel_forward(p: &PixelMaskSet, x: &[f64]) -> Vec<f64> {
    let side = p.side();
    let k = p.kernel();
    let pooled = p.pooled_side();
    let mut out = vec![0.0; p.output_len()];
    for (i, mask) in p.masks().iter().enumerate() {
        let block = &mut out[i * pooled * pooled..(i + 1) * pooled * pooled];
        for r in 0..side {
            let row = (r / k) * pooled;
            for c in 0..side {
                let idx = r * side + c;
                if mask[idx] {
                    block[row + c / k] += x[idx];
                }
            }
        }
    }
    out
}

fn pixel_adjoint(p: &PixelMaskSet, y: &[f64]) -> Vec<f64> {
    let side = p.side();
    let k = p.kernel();
    let pooled = p.pooled_side();
    let mut out = vec![0.0; side * side];
    for (i, mask) in p.masks().iter().enumerate() {
        let block = &y[i * pooled * pooled..(i + 1) * pooled * pooled];
        for r in 0..side {
            let row = (r / k) * pooled;
            for c in 0..side {
                let idx = r * side + c;
                if mask[idx] {
                    out[idx] += block[row + c / k];
                }
            }
        }
    }
    out
}

fn pixel_lipschitz(p: &PixelMaskSet) -> f64 {
    let side = p.side();
    let normal = |v: &[f64]| pixel_adjoint(p, &pixel_forward(p, v));
    let mut v = vec![1.0; side * side];
    for _ in 0..POWER_ITERATIONS {
        let w = normal(&v);
        let peak = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if peak == 0.0 {
            return 0.0;
        }
        v = w.iter().map(|x| x / peak).collect();
    }
    // lift exact zeros so every row contributes a finite ratio
    let floor = 1e-12 * v.iter().fold(0.0f64, |m, x| m.max(*x));
    let lifted: Vec<f64> = v.iter().map(|x| x.max(floor)).collect();
    let w = normal(&lifted);
    w.iter()
        .zip(&lifted)
        .map(|(a, b)| a / b)
        .fold(0.0, f64::max)
}

fn fourier_forward(f: &FourierMask, x: &Image) -> Vec<Complex64> {
    let spec = fft::fft2(x);
    let side = f.side();
    f.kept_indices()
        .iter()
        .map(|&s| {
            let (r, c) = (unshift_index(s / side, side), unshift_index(s % side, side));
            spec.data()[r * side + c]
        })
        .collect()
}

/// Kept coefficients placed back on the unshifted grid, zeros elsewhere.
fn scatter(f: &FourierMask, y: &[Complex64]) -> SpectralImage {
    let side = f.side();
    let mut spec = SpectralImage::zeros(side);
    for (&s, v) in f.kept_indices().iter().zip(y) {
        let (r, c) = (unshift_index(s / side, side), unshift_index(s % side, side));
        spec.data_mut()[r * side + c] = *v;
    }
    spec
}

/// Kept coefficients on the fftshifted grid (DC centred), zeros elsewhere.
pub fn shifted_spectrum(f: &FourierMask, y: &[Complex64]) -> SpectralImage {
    let side = f.side();
    let unshifted = scatter(f, y);
    let mut out = SpectralImage::zeros(side);
    for r in 0..side {
        for c in 0..side {
            out.data_mut()[shift_index(r, side) * side + shift_index(c, side)] =
                unshifted.data()[r * side + c];
        }
    }
    out
}

/// Observed data `y` together with the plan that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub plan: Arc<MeasurementPlan>,
    pub data: MeasurementData,
    pub noise_var: f64,
}

impl Measurement {
    pub fn new(plan: Arc<MeasurementPlan>, data: MeasurementData, noise_var: f64) -> Result<Self> {
        plan.check_data(&data)?;
        if !(noise_var >= 0.0) {
            return Err(Error::param(format!("noise variance must be >= 0, got {noise_var}")));
        }
        Ok(Self {
            plan,
            data,
            noise_var,
        })
    }

    pub fn side(&self) -> usize {
        self.plan.side()
    }

    /// Serialises as `CSMS`:
    ///
    /// ```text
    /// 0   "CSMS"
    /// 4   u8  variant (0 pixel, 1 Fourier)
    /// 5   u32 side D
    /// 9   u32 m
    /// 13  f64 noise variance
    /// 21  m f64 values (pixel) or m (re, im) f64 pairs (Fourier)
    /// ```
    ///
    /// All values little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(21 + 16 * self.data.len());
        out.extend_from_slice(MEASUREMENT_MAGIC);
        out.push(match self.data {
            MeasurementData::Real(_) => 0,
            MeasurementData::Complex(_) => 1,
        });
        out.extend_from_slice(&(self.side() as u32).to_le_bytes());
        out.extend_from_slice(&(self.data.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.noise_var.to_le_bytes());
        match &self.data {
            MeasurementData::Real(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            MeasurementData::Complex(v) => v.iter().for_each(|x| {
                out.extend_from_slice(&x.re.to_le_bytes());
                out.extend_from_slice(&x.im.to_le_bytes());
            }),
        }
        out
    }

    /// Parses a `CSMS` file produced under `plan`.
    pub fn from_bytes(bytes: &[u8], plan: Arc<MeasurementPlan>) -> Result<Self> {
        let mut rd = ByteReader::new(bytes);
        if rd.take(4)? != MEASUREMENT_MAGIC {
            return Err(Error::parse(0, "bad magic, expected CSMS"));
        }
        let variant = rd.u8()?;
        let side = rd.u32()? as usize;
        let m = rd.u32()? as usize;
        let noise_var = rd.f64()?;
        let expected_variant = match *plan {
            MeasurementPlan::Pixel(_) => 0,
            MeasurementPlan::Fourier(_) => 1,
        };
        if variant != expected_variant {
            return Err(Error::parse(4, format!("variant {variant} does not match the mask")));
        }
        if side != plan.side() {
            return Err(Error::parse(5, format!("side {side} does not match mask side {}", plan.side())));
        }
        if m != plan.output_len() {
            return Err(Error::parse(9, format!("m = {m} does not match mask m = {}", plan.output_len())));
        }
        if !(noise_var >= 0.0) {
            return Err(Error::parse(13, "negative noise variance"));
        }
        let data = if variant == 0 {
            MeasurementData::Real((0..m).map(|_| rd.f64()).collect::<Result<_>>()?)
        } else {
            MeasurementData::Complex(
                (0..m)
                    .map(|_| Ok(Complex64::new(rd.f64()?, rd.f64()?)))
                    .collect::<Result<_>>()?,
            )
        };
        rd.finish()?;
        Measurement::new(plan, data, noise_var)
    }
}

/// `y = A(x)` with zero noise.
pub fn apply(plan: &Arc<MeasurementPlan>, x: &Image) -> Result<Measurement> {
    let data = plan.forward(x)?;
    Ok(Measurement {
        plan: Arc::clone(plan),
        data,
        noise_var: 0.0,
    })
}

/// `A*(y)`.
pub fn adjoint(y: &Measurement) -> Result<Image> {
    y.plan.adjoint(&y.data)
}

/// Real part of `F^-1(B . F(x))`, i.e. the measurement rendered back as an image.
pub fn zero_filled_inverse(y: &Measurement) -> Result<Image> {
    match (&*y.plan, &y.data) {
        (MeasurementPlan::Fourier(_), MeasurementData::Complex(_)) => y.plan.adjoint(&y.data),
        _ => Err(Error::param("zero-filled inverse is only defined for Fourier plans")),
    }
}

/// Adds i.i.d. `N(0, noise_var)` to every real component; real and imaginary
/// parts of complex measurements get independent draws.
pub fn add_noise(y: &Measurement, noise_var: f64, seed: u64) -> Result<Measurement> {
    if !(noise_var >= 0.0) || !noise_var.is_finite() {
        return Err(Error::param(format!("noise variance must be >= 0, got {noise_var}")));
    }
    if noise_var == 0.0 {
        return Ok(y.clone());
    }
    let normal = Normal::new(0.0, noise_var.sqrt()).expect("finite positive sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = match &y.data {
        MeasurementData::Real(v) => {
            MeasurementData::Real(v.iter().map(|x| x + normal.sample(&mut rng)).collect())
        }
        MeasurementData::Complex(v) => MeasurementData::Complex(
            v.iter()
                .map(|x| {
                    let re = normal.sample(&mut rng);
                    let im = normal.sample(&mut rng);
                    x + Complex64::new(re, im)
                })
                .collect(),
        ),
    };
    debug_assert!(data.is_finite());
    Ok(Measurement {
        plan: Arc::clone(&y.plan),
        data,
        noise_var: y.noise_var + noise_var,
    })
}

pub fn compression_of(plan: &MeasurementPlan) -> f64 {
    plan.compression()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::masks::FourierStrategy;
    use rand::Rng;

    fn random_image(side: usize, rng: &mut ChaCha8Rng) -> Image {
        Image::from_fn(side, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn random_data(plan: &MeasurementPlan, rng: &mut ChaCha8Rng) -> MeasurementData {
        let m = plan.output_len();
        match plan {
            MeasurementPlan::Pixel(_) => {
                MeasurementData::Real((0..m).map(|_| rng.gen_range(-1.0..1.0)).collect())
            }
            MeasurementPlan::Fourier(_) => MeasurementData::Complex(
                (0..m)
                    .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect(),
            ),
        }
    }

    fn ones_plan(side: usize, kernel: usize) -> Arc<MeasurementPlan> {
        let set = PixelMaskSet::from_masks(side, kernel, 0, vec![vec![true; side * side]]).unwrap();
        Arc::new(MeasurementPlan::Pixel(set))
    }

    #[test]
    fn block_sums_of_ones() {
        let plan = ones_plan(4, 2);
        let y = apply(&plan, &Image::filled(4, 1.0)).unwrap();
        assert_eq!(y.data, MeasurementData::Real(vec![4.0; 4]));
    }

    #[test]
    fn pixel_output_dimension() {
        let plan = MeasurementPlan::Pixel(PixelMaskSet::generate(128, 1, 2, 0).unwrap());
        assert_eq!(plan.output_len(), 4096);
    }

    #[test]
    fn identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = random_image(8, &mut rng);
        let plan = ones_plan(8, 1);
        let back = adjoint(&apply(&plan, &x).unwrap()).unwrap();
        assert!(back.max_abs_diff(&x) < 1e-15);

        let full = Arc::new(MeasurementPlan::Fourier(
            FourierMask::generate(8, FourierStrategy::Uniform, 1.0, 0).unwrap(),
        ));
        let zf = zero_filled_inverse(&apply(&full, &x).unwrap()).unwrap();
        assert!(zf.max_abs_diff(&x) < 1e-10);
    }

    #[test]
    fn adjoint_identity_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let side = 16;
        let mut plans = vec![];
        for k in [1, 2, 4] {
            for b in [1, 3] {
                plans.push(MeasurementPlan::Pixel(PixelMaskSet::generate(side, b, k, 5).unwrap()));
            }
        }
        for strategy in [FourierStrategy::Uniform, FourierStrategy::Annular, FourierStrategy::Radial] {
            plans.push(MeasurementPlan::Fourier(
                FourierMask::generate(side, strategy, 2.5, 5).unwrap(),
            ));
        }
        for plan in &plans {
            for _ in 0..20 {
                let x = random_image(side, &mut rng);
                let y = random_data(plan, &mut rng);
                let lhs = plan.forward(&x).unwrap().dot(&y);
                let rhs = x.dot(&plan.adjoint(&y).unwrap());
                assert!((lhs - rhs).abs() <= 1e-8 * x.norm() * y.norm());
            }
        }
    }

    #[test]
    fn linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let plan = MeasurementPlan::Fourier(FourierMask::generate(8, FourierStrategy::Radial, 2.0, 1).unwrap());
        let (a, b) = (random_image(8, &mut rng), random_image(8, &mut rng));
        let lhs = plan.forward(&a.scale(2.5).add_scaled(1.0, &b)).unwrap();
        let rhs = plan.forward(&a).unwrap().scale_add(2.5, &plan.forward(&b).unwrap());
        assert!(lhs.sub(&rhs).norm() < 1e-10);
    }

    #[test]
    fn hermitian_symmetric_mask_gives_projector() {
        // A*A on real images is a projector exactly when the kept set is
        // closed under frequency negation
        let side = 8;
        let base = FourierMask::generate(side, FourierStrategy::Uniform, 3.0, 2).unwrap();
        let mut keep = base.keep().to_vec();
        for r in 0..side {
            for c in 0..side {
                if base.keep()[r * side + c] {
                    let (nr, nc) = ((side - r) % side, (side - c) % side);
                    keep[nr * side + nc] = true;
                }
            }
        }
        let plan = MeasurementPlan::Fourier(FourierMask::from_keep(side, FourierStrategy::Uniform, 2, keep));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_image(side, &mut rng);
        let once = plan.normal(&x).unwrap();
        let twice = plan.normal(&once).unwrap();
        assert!(twice.max_abs_diff(&once) < 1e-8);
    }

    #[test]
    fn mismatched_inputs() {
        let plan = ones_plan(4, 2);
        assert!(matches!(plan.forward(&Image::zeros(8)), Err(Error::Dimension(_))));
        assert!(plan.adjoint(&MeasurementData::Real(vec![0.0; 3])).is_err());
        assert!(plan
            .adjoint(&MeasurementData::Complex(vec![Complex64::new(0.0, 0.0); 4]))
            .is_err());
    }

    #[test]
    fn noise_properties() {
        let plan = ones_plan(4, 2);
        let y = apply(&plan, &Image::filled(4, 1.0)).unwrap();
        assert_eq!(add_noise(&y, 0.0, 1).unwrap(), y);
        assert!(matches!(add_noise(&y, -0.1, 1), Err(Error::Parameter(_))));
        assert_eq!(add_noise(&y, 0.1, 9).unwrap(), add_noise(&y, 0.1, 9).unwrap());
        assert_ne!(add_noise(&y, 0.1, 9).unwrap(), add_noise(&y, 0.1, 10).unwrap());
    }

    #[test]
    fn noise_sample_variance() {
        // 500k complex entries give 10^6 real draws; sd of the variance estimate ~1.4e-4
        let side = 1000;
        let keep = vec![true; 500 * 1000];
        let mut full = keep;
        full.resize(side * side, false);
        let plan = Arc::new(MeasurementPlan::Fourier(FourierMask::from_keep(
            side,
            FourierStrategy::Uniform,
            0,
            full,
        )));
        let zero = Measurement::new(
            Arc::clone(&plan),
            MeasurementData::Complex(vec![Complex64::new(0.0, 0.0); plan.output_len()]),
            0.0,
        )
        .unwrap();
        let noisy = add_noise(&zero, 0.1, 4).unwrap();
        let draws = 2.0 * noisy.data.len() as f64;
        let var = noisy.data.norm_sqr() / draws;
        assert!((0.099..=0.101).contains(&var), "{var}");
        assert_eq!(noisy.noise_var, 0.1);
    }

    #[test]
    fn lipschitz_examples() {
        let plan = ones_plan(4, 2);
        assert!((plan.lipschitz_bound() - 4.0).abs() < 1e-9);
        let f = MeasurementPlan::Fourier(FourierMask::generate(8, FourierStrategy::Annular, 4.0, 0).unwrap());
        assert_eq!(f.lipschitz_bound(), 1.0);
    }

    #[test]
    fn measurement_bytes_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = random_image(8, &mut rng);
        for plan in [
            Arc::new(MeasurementPlan::Pixel(PixelMaskSet::generate(8, 2, 2, 3).unwrap())),
            Arc::new(MeasurementPlan::Fourier(
                FourierMask::generate(8, FourierStrategy::Uniform, 2.0, 3).unwrap(),
            )),
        ] {
            let y = add_noise(&apply(&plan, &x).unwrap(), 0.1, 5).unwrap();
            let bytes = y.to_bytes();
            let back = Measurement::from_bytes(&bytes, Arc::clone(&plan)).unwrap();
            assert_eq!(back, y);
            assert_eq!(back.to_bytes(), bytes);
            assert!(Measurement::from_bytes(&bytes[..bytes.len() - 3], plan).is_err());
        }
    }
}

//! DDPM schedules, score models and Tweedie denoising.
//!
//! Time steps run `1..=T`; index 0 of every schedule array holds the
//! `alpha_bar_0 = 1` convention so `alpha_bar(t - 1)` is always defined.

mod mlp;

pub use mlp::{load_score_weights, DenseLayer, MlpScore, Prediction};

use crate::error::{Error, Result};
use crate::image::Image;

pub const DEFAULT_STEPS: usize = 1000;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    beta: Vec<f64>,
    alpha_bar: Vec<f64>,
    sigma_tilde_sq: Vec<f64>,
}

impl NoiseSchedule {
    /// Builds the derived arrays from `beta_1..beta_T`.
    pub fn from_betas(betas: &[f64]) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::param("schedule needs at least one step"));
        }
        if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(Error::param(format!("beta must lie in (0, 1), got {b}")));
        }
        let steps = betas.len();
        let mut beta = Vec::with_capacity(steps + 1);
        beta.push(0.0);
        beta.extend_from_slice(betas);
        let mut alpha_bar = vec![1.0; steps + 1];
        for t in 1..=steps {
            alpha_bar[t] = alpha_bar[t - 1] * (1.0 - beta[t]);
        }
        let mut sigma_tilde_sq = vec![0.0; steps + 1];
        for t in 1..=steps {
            sigma_tilde_sq[t] = (1.0 - alpha_bar[t - 1]) / (1.0 - alpha_bar[t]) * beta[t];
        }
        Ok(Self {
            beta,
            alpha_bar,
            sigma_tilde_sq,
        })
    }

    pub fn steps(&self) -> usize {
        self.beta.len() - 1
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        1.0 - self.beta[t]
    }

    /// Cumulative product, `alpha_bar(0) = 1`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    /// Reverse-step variance `(1 - abar_{t-1}) / (1 - abar_t) * beta_t`.
    pub fn sigma_tilde_sq(&self, t: usize) -> f64 {
        self.sigma_tilde_sq[t]
    }

    /// Coefficients of `x_t` and `x0_hat` in the posterior mean of `x_{t-1}`.
    pub fn posterior_coefficients(&self, t: usize) -> (f64, f64) {
        let ab = self.alpha_bar[t];
        let ab_prev = self.alpha_bar[t - 1];
        let beta = self.beta[t];
        (
            (1.0 - beta).sqrt() * (1.0 - ab_prev) / (1.0 - ab),
            ab_prev.sqrt() * beta / (1.0 - ab),
        )
    }

    pub fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(Error::param(format!(
                "time step {t} outside 1..={}",
                self.steps()
            )));
        }
        Ok(())
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        linear_schedule(DEFAULT_STEPS, DEFAULT_BETA_START, DEFAULT_BETA_END)
            .expect("default schedule is valid")
    }
}

/// `beta_t` linear from `beta_start` to `beta_end`, both endpoints included.
pub fn linear_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if steps == 0 {
        return Err(Error::param("schedule needs at least one step"));
    }
    if !(0.0 < beta_start && beta_start < beta_end && beta_end < 1.0) {
        return Err(Error::param(format!(
            "need 0 < beta_start < beta_end < 1, got {beta_start}, {beta_end}"
        )));
    }
    let betas: Vec<f64> = if steps == 1 {
        vec![beta_start]
    } else {
        (0..steps)
            .map(|i| beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64)
            .collect()
    };
    NoiseSchedule::from_betas(&betas)
}

/// Anything that approximates `grad log p_t(x_t)`.
pub trait ScoreModel: Send + Sync {
    fn side(&self) -> usize;

    fn evaluate(&self, x: &Image, t: usize) -> Result<Image>;
}

impl<S: ScoreModel + ?Sized> ScoreModel for &S {
    fn side(&self) -> usize {
        (**self).side()
    }

    fn evaluate(&self, x: &Image, t: usize) -> Result<Image> {
        (**self).evaluate(x, t)
    }
}

impl<S: ScoreModel + ?Sized> ScoreModel for Box<S> {
    fn side(&self) -> usize {
        (**self).side()
    }

    fn evaluate(&self, x: &Image, t: usize) -> Result<Image> {
        (**self).evaluate(x, t)
    }
}

/// Exact score of an isotropic Gaussian prior `N(mean, variance I)` pushed
/// through the forward process: `-(x - sqrt(abar) mean) / (abar v + 1 - abar)`.
#[derive(Debug, Clone)]
pub struct GaussianScore {
    pub mean: Image,
    pub variance: f64,
    schedule: NoiseSchedule,
}

impl GaussianScore {
    pub fn new(mean: Image, variance: f64, schedule: NoiseSchedule) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(Error::param(format!("prior variance must be > 0, got {variance}")));
        }
        Ok(Self {
            mean,
            variance,
            schedule,
        })
    }

    /// Marginal variance at step `t`.
    pub fn marginal_variance(&self, t: usize) -> f64 {
        let ab = self.schedule.alpha_bar(t);
        ab * self.variance + 1.0 - ab
    }

    /// `E[x_0 | x_t]` by Gaussian conditioning.
    pub fn posterior_mean(&self, x: &Image, t: usize) -> Result<Image> {
        self.schedule.check_step(t)?;
        x.check_same_side(&self.mean)?;
        let ab = self.schedule.alpha_bar(t);
        let s = self.marginal_variance(t);
        let gain = self.variance * ab.sqrt() / s;
        let keep = (1.0 - ab) / s;
        Ok(x.scale(gain).add_scaled(keep, &self.mean))
    }
}

impl ScoreModel for GaussianScore {
    fn side(&self) -> usize {
        self.mean.side()
    }

    fn evaluate(&self, x: &Image, t: usize) -> Result<Image> {
        self.schedule.check_step(t)?;
        x.check_same_side(&self.mean)?;
        let ab = self.schedule.alpha_bar(t);
        let shift = ab.sqrt();
        let s = self.marginal_variance(t);
        Ok(x.add_scaled(-shift, &self.mean).scale(-1.0 / s))
    }
}

/// `(x_t + (1 - abar_t) s) / sqrt(abar_t)` without clipping.
pub fn tweedie_unclipped(x: &Image, score: &Image, alpha_bar: f64) -> Image {
    x.add_scaled(1.0 - alpha_bar, score).scale(1.0 / alpha_bar.sqrt())
}

/// Tweedie estimate of `x_0` from `x_t`, clipped to `[-1, 1]`.
pub fn tweedie_denoise(
    x: &Image,
    t: usize,
    schedule: &NoiseSchedule,
    score: &dyn ScoreModel,
) -> Result<Image> {
    schedule.check_step(t)?;
    let s = score.evaluate(x, t)?;
    Ok(tweedie_unclipped(x, &s, schedule.alpha_bar(t)).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(side: usize, rng: &mut ChaCha8Rng, amp: f64) -> Image {
        Image::from_fn(side, |_, _| rng.gen_range(-amp..amp))
    }

    #[test]
    fn schedule_endpoints() {
        let s = linear_schedule(1000, 1e-4, 0.02).unwrap();
        assert_eq!(s.steps(), 1000);
        assert_eq!(s.beta(1), 1e-4);
        assert!((s.beta(1000) - 0.02).abs() < 1e-15);
        assert!((s.alpha_bar(1) - (1.0 - 1e-4)).abs() < 1e-15);
        assert_eq!(s.sigma_tilde_sq(1), 0.0);
        assert_eq!(s.alpha_bar(0), 1.0);
        for t in 2..=1000 {
            assert!(s.beta(t) > s.beta(t - 1));
            assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
        }
        let ab = s.alpha_bar(1000);
        assert!(ab > 3.9e-5 && ab < 4.1e-5, "{ab}");
    }

    #[test]
    fn schedule_rejects_bad_endpoints() {
        assert!(linear_schedule(10, 0.02, 1e-4).is_err());
        assert!(linear_schedule(10, 0.0, 0.02).is_err());
        assert!(linear_schedule(10, 1e-4, 1.0).is_err());
        assert!(linear_schedule(0, 1e-4, 0.02).is_err());
    }

    #[test]
    fn posterior_coefficients_sum_for_constant() {
        // with x_t = sqrt(abar_t) x0 and x0_hat = x0 the mean must be sqrt(abar_{t-1}) x0
        let s = NoiseSchedule::default();
        for t in [2, 10, 500, 1000] {
            let (c1, c2) = s.posterior_coefficients(t);
            let lhs = c1 * s.alpha_bar(t).sqrt() + c2;
            assert!((lhs - s.alpha_bar(t - 1).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn tweedie_matches_gaussian_posterior_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let schedule = NoiseSchedule::default();
        let mean = random_image(8, &mut rng, 0.5);
        let score = GaussianScore::new(mean, 0.3, schedule.clone()).unwrap();
        for _ in 0..20 {
            let t = rng.gen_range(1..=1000);
            let x = random_image(8, &mut rng, 2.0);
            let s = score.evaluate(&x, t).unwrap();
            let got = tweedie_unclipped(&x, &s, schedule.alpha_bar(t));
            let expect = score.posterior_mean(&x, t).unwrap();
            assert!(got.max_abs_diff(&expect) < 1e-8);
        }
    }

    #[test]
    fn tweedie_standard_prior_and_small_t() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let schedule = NoiseSchedule::default();
        let score = GaussianScore::new(Image::zeros(4), 1.0, schedule.clone()).unwrap();
        let x = random_image(4, &mut rng, 1.0);
        let t = 300;
        let s = score.evaluate(&x, t).unwrap();
        let got = tweedie_unclipped(&x, &s, schedule.alpha_bar(t));
        assert!(got.max_abs_diff(&x.scale(schedule.alpha_bar(t).sqrt())) < 1e-12);
        let near = tweedie_denoise(&x, 1, &schedule, &score).unwrap();
        assert!(near.max_abs_diff(&x) < 1e-3);
    }

    #[test]
    fn tweedie_clips() {
        let schedule = NoiseSchedule::default();
        let score = GaussianScore::new(Image::zeros(4), 100.0, schedule.clone()).unwrap();
        let x = Image::filled(4, 5.0);
        let out = tweedie_denoise(&x, 500, &schedule, &score).unwrap();
        assert!(out.data().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn gaussian_score_is_log_density_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let schedule = NoiseSchedule::default();
        let mean = random_image(8, &mut rng, 0.5);
        let score = GaussianScore::new(mean.clone(), 1.0, schedule.clone()).unwrap();
        for t in [1, 200, 999] {
            let ab = schedule.alpha_bar(t);
            let var = score.marginal_variance(t);
            let log_p = |x: &Image| {
                -0.5 * x.add_scaled(-ab.sqrt(), &mean).norm().powi(2) / var
            };
            let x = random_image(8, &mut rng, 1.5);
            let s = score.evaluate(&x, t).unwrap();
            let h = 1e-5;
            for i in [0, 17, 63] {
                let mut plus = x.clone();
                plus.data_mut()[i] += h;
                let mut minus = x.clone();
                minus.data_mut()[i] -= h;
                let fd = (log_p(&plus) - log_p(&minus)) / (2.0 * h);
                assert!((fd - s.data()[i]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn step_range_checked() {
        let schedule = NoiseSchedule::default();
        let score = GaussianScore::new(Image::zeros(4), 1.0, schedule.clone()).unwrap();
        assert!(score.evaluate(&Image::zeros(4), 0).is_err());
        assert!(score.evaluate(&Image::zeros(4), 1001).is_err());
        assert!(score.evaluate(&Image::zeros(5), 1).is_err());
    }
}

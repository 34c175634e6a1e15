//! Posterior sampling: DDPM ancestral steps with Nesterov-momentum guidance
//! toward measurement consistency.
//!
//! For `t = T..1`:
//!
//! ```text
//! s      = score(x_t, t)
//! x0_hat = clip((x_t + (1 - abar_t) s) / sqrt(abar_t))
//! x'     = c1 x_t + c2 x0_hat + sigma_t z          (z = 0 at t = 1)
//! p      = x0_hat - kappa_t m
//! g      = (2 / L) A*(A p - y)
//! m      = kappa_t m + zeta_t g
//! x_t-1  = clip(x' - m)
//! ```
//!
//! `L = ||A||^2` is the plan's Lipschitz bound. It is exactly 1 for Fourier
//! plans; pixel plans sum `K x K` blocks, and without the division a unit
//! `zeta` would overshoot by a factor of order `K^2`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::diffusion::{tweedie_unclipped, NoiseSchedule, ScoreModel};
use crate::error::{Error, Result};
use crate::forward::{Measurement, MeasurementData, MeasurementPlan};
use crate::image::Image;

/// Linear-in-time momentum and step weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceSchedule {
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub zeta_min: f64,
    pub zeta_max: f64,
}

impl Default for GuidanceSchedule {
    fn default() -> Self {
        Self {
            kappa_min: 0.1,
            kappa_max: 0.9,
            zeta_min: 1e-10,
            zeta_max: 1.0,
        }
    }
}

impl GuidanceSchedule {
    /// Defaults, with `zeta_max = 10` for pixel plans pooling 32 x 32 blocks.
    pub fn for_plan(plan: &MeasurementPlan) -> Self {
        let mut g = Self::default();
        if let MeasurementPlan::Pixel(masks) = plan {
            if masks.kernel() == 32 {
                g.zeta_max = 10.0;
            }
        }
        g
    }

    /// No guidance at all: plain ancestral sampling.
    pub fn unguided() -> Self {
        Self {
            kappa_min: 0.0,
            kappa_max: 0.0,
            zeta_min: 0.0,
            zeta_max: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let all = [self.kappa_min, self.kappa_max, self.zeta_min, self.zeta_max];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::param(format!("guidance weights must be finite and >= 0: {self:?}")));
        }
        Ok(())
    }
}

/// `(kappa_t, zeta_t)`; with `T = 1` both maxima are returned.
pub fn guidance_weights(t: usize, steps: usize, g: &GuidanceSchedule) -> (f64, f64) {
    if steps <= 1 {
        return (g.kappa_max, g.zeta_max);
    }
    let frac = (t as f64 - 1.0) / (steps as f64 - 1.0);
    (
        g.kappa_min + frac * (g.kappa_max - g.kappa_min),
        g.zeta_min + frac * (g.zeta_max - g.zeta_min),
    )
}

/// Map between image intensities and the `[-1, 1]` diffusion range:
/// `image = offset + scale * normalized`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub offset: f64,
    pub scale: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            offset: 0.0,
            scale: 1.0,
        }
    }
}

impl Normalization {
    /// Sends `[lo, hi]` onto `[-1, 1]`.
    pub fn from_range(lo: f64, hi: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::param(format!("empty intensity range [{lo}, {hi}]")));
        }
        Ok(Self {
            offset: 0.5 * (lo + hi),
            scale: 0.5 * (hi - lo),
        })
    }

    pub fn normalize(&self, x: &Image) -> Image {
        x.map(|v| (v - self.offset) / self.scale)
    }

    pub fn denormalize(&self, x: &Image) -> Image {
        x.map(|v| self.offset + self.scale * v)
    }

    /// Measurement of the normalised image: `(y - A(offset 1)) / scale`.
    pub fn normalize_measurement(&self, y: &Measurement) -> Result<MeasurementData> {
        let base = y.plan.forward(&Image::filled(y.side(), self.offset))?;
        Ok(y.data.sub(&base).scale(1.0 / self.scale))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    /// `||A x0_hat - y||` in the caller's intensity units.
    pub residual: f64,
    pub kappa: f64,
    pub zeta: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SamplerTrace {
    /// One record per step, from `t = T` down to `t = 1`.
    pub steps: Vec<StepRecord>,
}

impl SamplerTrace {
    pub fn initial_residual(&self) -> Option<f64> {
        self.steps.first().map(|s| s.residual)
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.steps.last().map(|s| s.residual)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,residual,kappa,zeta\n");
        for s in &self.steps {
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e}\n",
                s.t, s.residual, s.kappa, s.zeta
            ));
        }
        out
    }
}

/// `x_t` and the guidance momentum `m_t`, in normalised units.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerState {
    pub x: Image,
    pub momentum: Image,
    pub t: usize,
}

/// Builder for one guided sampling chain.
pub struct PosteriorSampler<'a> {
    measurement: &'a Measurement,
    score: &'a dyn ScoreModel,
    schedule: NoiseSchedule,
    guidance: GuidanceSchedule,
    normalization: Normalization,
    seed: u64,
}

impl<'a> PosteriorSampler<'a> {
    pub fn new(measurement: &'a Measurement, score: &'a dyn ScoreModel) -> Self {
        Self {
            measurement,
            score,
            schedule: NoiseSchedule::default(),
            guidance: GuidanceSchedule::for_plan(&measurement.plan),
            normalization: Normalization::default(),
            seed: 0,
        }
    }

    pub fn schedule(mut self, schedule: NoiseSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn guidance(mut self, guidance: GuidanceSchedule) -> Self {
        self.guidance = guidance;
        self
    }

    pub fn normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn run(&self) -> Result<(Image, SamplerTrace)> {
        self.run_with(|_| {})
    }

    /// Runs the chain, calling `observe` after every completed step.
    pub fn run_with(
        &self,
        mut observe: impl FnMut(&SamplerState),
    ) -> Result<(Image, SamplerTrace)> {
        let side = self.measurement.side();
        if self.score.side() != side {
            return Err(Error::dim(format!(
                "score model side {} does not match measurement side {side}",
                self.score.side()
            )));
        }
        self.guidance.validate()?;
        if !(self.normalization.scale > 0.0) {
            return Err(Error::param("normalization scale must be > 0"));
        }
        let plan: &Arc<MeasurementPlan> = &self.measurement.plan;
        let y = self.normalization.normalize_measurement(self.measurement)?;
        let steps = self.schedule.steps();
        let gain = 2.0 / plan.lipschitz_bound();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut gaussian = |side: usize| {
            Image::from_fn(side, |_, _| StandardNormal.sample(&mut rng))
        };

        let mut state = SamplerState {
            x: gaussian(side),
            momentum: Image::zeros(side),
            t: steps,
        };
        let mut trace = SamplerTrace {
            steps: Vec::with_capacity(steps),
        };
        for t in (1..=steps).rev() {
            let ab = self.schedule.alpha_bar(t);
            let s = self.score.evaluate(&state.x, t)?;
            let x0 = tweedie_unclipped(&state.x, &s, ab).clamp(-1.0, 1.0);

            let (c1, c2) = self.schedule.posterior_coefficients(t);
            let mut unguided = state.x.scale(c1).add_scaled(c2, &x0);
            if t > 1 {
                let sigma = self.schedule.sigma_tilde_sq(t).sqrt();
                unguided = unguided.add_scaled(sigma, &gaussian(side));
            }

            let (kappa, zeta) = guidance_weights(t, steps, &self.guidance);
            let lookahead = x0.add_scaled(-kappa, &state.momentum);
            let grad = plan
                .adjoint(&plan.forward(&lookahead)?.sub(&y))?
                .scale(gain);
            let momentum = state.momentum.scale(kappa).add_scaled(zeta, &grad);
            debug_assert!({
                let lhs = momentum.add_scaled(-kappa, &state.momentum);
                let rhs = grad.scale(zeta);
                let size = 1.0 + rhs.norm() + kappa * state.momentum.norm();
                lhs.max_abs_diff(&rhs) <= 1e-12 * size
            });
            let x = unguided.sub(&momentum).clamp(-1.0, 1.0);

            if !x.is_finite() || !momentum.is_finite() || !x0.is_finite() {
                return Err(Error::NumericalFailure(format!(
                    "non-finite sampler state at step t = {t}"
                )));
            }
            let residual = plan.forward(&x0)?.sub(&y).norm() * self.normalization.scale;
            trace.steps.push(StepRecord {
                t,
                residual,
                kappa,
                zeta,
            });
            state = SamplerState {
                x,
                momentum,
                t: t - 1,
            };
            observe(&state);
        }
        Ok((self.normalization.denormalize(&state.x), trace))
    }
}

/// One guided chain with identity normalisation.
pub fn sample_posterior(
    y: &Measurement,
    score: &dyn ScoreModel,
    schedule: &NoiseSchedule,
    guidance: &GuidanceSchedule,
    seed: u64,
) -> Result<(Image, SamplerTrace)> {
    PosteriorSampler::new(y, score)
        .schedule(schedule.clone())
        .guidance(*guidance)
        .seed(seed)
        .run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{linear_schedule, GaussianScore};
    use crate::forward;
    use crate::masks::{FourierMask, FourierStrategy, PixelMaskSet};
    use rand::Rng;

    fn identity_plan(side: usize) -> Arc<MeasurementPlan> {
        Arc::new(MeasurementPlan::Fourier(
            FourierMask::generate(side, FourierStrategy::Uniform, 1.0, 0).unwrap(),
        ))
    }

    #[test]
    fn weights_endpoints_and_midpoint() {
        let g = GuidanceSchedule::default();
        assert_eq!(guidance_weights(1, 1000, &g), (0.1, 1e-10));
        assert_eq!(guidance_weights(1000, 1000, &g), (0.9, 1.0));
        let (k, z) = guidance_weights(3, 5, &g);
        assert!((k - 0.5).abs() < 1e-15);
        assert!((z - 0.5 * (1.0 + 1e-10)).abs() < 1e-15);
        assert_eq!(guidance_weights(1, 1, &g), (0.9, 1.0));
    }

    #[test]
    fn zeta_max_rule() {
        let k32 = MeasurementPlan::Pixel(PixelMaskSet::generate(64, 4, 32, 0).unwrap());
        let k16 = MeasurementPlan::Pixel(PixelMaskSet::generate(64, 4, 16, 0).unwrap());
        assert_eq!(GuidanceSchedule::for_plan(&k32).zeta_max, 10.0);
        assert_eq!(GuidanceSchedule::for_plan(&k16).zeta_max, 1.0);
        assert_eq!(GuidanceSchedule::for_plan(&identity_plan(8)).zeta_max, 1.0);
    }

    #[test]
    fn deterministic_and_clipped() {
        let plan = Arc::new(MeasurementPlan::Pixel(PixelMaskSet::generate(8, 2, 2, 3).unwrap()));
        let truth = Image::from_fn(8, |r, c| ((r + c) as f64 / 14.0) - 0.5);
        let y = forward::apply(&plan, &truth).unwrap();
        let schedule = linear_schedule(50, 1e-3, 0.2).unwrap();
        let score = GaussianScore::new(Image::zeros(8), 0.2, schedule.clone()).unwrap();
        let run = || {
            let mut states = Vec::new();
            let out = PosteriorSampler::new(&y, &score)
                .schedule(schedule.clone())
                .seed(9)
                .run_with(|s| states.push(s.x.clone()))
                .unwrap();
            (out, states)
        };
        let ((a, ta), states) = run();
        let ((b, tb), _) = run();
        assert_eq!(a.data(), b.data());
        assert_eq!(ta, tb);
        assert_eq!(ta.steps.len(), 50);
        assert_eq!(ta.steps[0].t, 50);
        assert!(states.iter().all(|x| x.data().iter().all(|v| v.abs() <= 1.0)));
    }

    #[test]
    fn guidance_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let plan = Arc::new(MeasurementPlan::Fourier(
            FourierMask::generate(8, FourierStrategy::Annular, 2.0, 1).unwrap(),
        ));
        let y = forward::apply(&plan, &Image::from_fn(8, |_, _| rng.gen_range(-1.0..1.0))).unwrap();
        let p = Image::from_fn(8, |_, _| rng.gen_range(-1.0..1.0));
        let g = plan.adjoint(&plan.forward(&p).unwrap().sub(&y.data)).unwrap().scale(2.0);
        let f = |q: &Image| plan.forward(q).unwrap().sub(&y.data).norm_sqr();
        let h = 1e-5;
        for i in 0..64 {
            let mut a = p.clone();
            a.data_mut()[i] += h;
            let mut b = p.clone();
            b.data_mut()[i] -= h;
            let fd = (f(&a) - f(&b)) / (2.0 * h);
            assert!((fd - g.data()[i]).abs() <= 1e-4 * g.data()[i].abs().max(1.0));
        }
    }

    #[test]
    fn normalization_round_trip() {
        let n = Normalization::from_range(-3.0, 5.0).unwrap();
        let x = Image::from_fn(4, |r, c| r as f64 - c as f64);
        assert!(n.denormalize(&n.normalize(&x)).max_abs_diff(&x) < 1e-12);
        let plan = identity_plan(4);
        let y = forward::apply(&plan, &x).unwrap();
        let yn = n.normalize_measurement(&y).unwrap();
        let direct = plan.forward(&n.normalize(&x)).unwrap();
        assert!(yn.sub(&direct).norm() < 1e-12);
    }

    #[test]
    fn side_mismatch() {
        let y = forward::apply(&identity_plan(8), &Image::zeros(8)).unwrap();
        let score = GaussianScore::new(Image::zeros(4), 1.0, NoiseSchedule::default()).unwrap();
        let err = sample_posterior(&y, &score, &NoiseSchedule::default(), &GuidanceSchedule::default(), 0);
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn trace_csv_header() {
        let trace = SamplerTrace {
            steps: vec![StepRecord {
                t: 2,
                residual: 1.0,
                kappa: 0.5,
                zeta: 0.25,
            }],
        };
        assert!(trace.to_csv().starts_with("t,residual,kappa,zeta\n2,"));
    }
}

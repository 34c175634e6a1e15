//! Proximal gradient (ISTA) recovery with DCT, wavelet and TV priors.
//!
//! Each epoch takes a gradient step on `||A x - y||^2` and then applies the
//! prior's proximal operator with threshold `lambda * step`:
//!
//! ```text
//! z     = x - step * 2 A*(A x - y)
//! x_new = prox_{lambda * step * R}(z)
//! ```
//!
//! For the orthonormal bases the prox is analyse, soft-threshold, synthesise.
//! For TV it is [`tv_prox`], solved on the dual by accelerated projected
//! gradient with warm starts between epochs.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{self, Measurement, MeasurementPlan};
use crate::image::Image;
use crate::metrics;
use crate::transforms::tv::{gradient, gradient_adjoint, Gradient};
use crate::transforms::{self, soft_threshold_in_place, tv_anisotropic, Basis};

/// Regularisation weights searched by [`grid_search`].
pub const LAMBDA_GRID: [f64; 4] = [0.1, 0.01, 0.001, 0.0001];
/// Step sizes searched by [`grid_search`].
pub const STEP_GRID: [f64; 5] = [0.001, 0.01, 0.1, 0.5, 1.0];

const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Prior {
    Dct,
    Wavelet,
    Tv,
}

impl fmt::Display for Prior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Prior::Dct => "dct",
            Prior::Wavelet => "wavelet",
            Prior::Tv => "tv",
        })
    }
}

impl FromStr for Prior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dct" => Ok(Prior::Dct),
            "wavelet" | "wt" => Ok(Prior::Wavelet),
            "tv" => Ok(Prior::Tv),
            other => Err(Error::param(format!("unknown sparse prior {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseConfig {
    pub prior: Prior,
    pub lambda: f64,
    pub step_size: f64,
    pub epochs: usize,
    /// Stop early once `||x_{t+1} - x_t||_2 <= tolerance`; zero disables.
    pub tolerance: f64,
    /// Reject `step_size * ||A||^2 > 2` before iterating.
    pub check_step: bool,
    pub tv_tolerance: f64,
    pub tv_max_iter: usize,
}

impl SparseConfig {
    pub fn new(prior: Prior, lambda: f64, step_size: f64) -> Self {
        Self {
            prior,
            lambda,
            step_size,
            epochs: 200,
            tolerance: 0.0,
            check_step: false,
            tv_tolerance: 1e-6,
            tv_max_iter: 200,
        }
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::param(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::param(format!("step size must be > 0, got {}", self.step_size)));
        }
        if self.epochs == 0 {
            return Err(Error::param("epochs must be positive"));
        }
        Ok(())
    }

    fn describe(&self) -> String {
        format!(
            "prior={} lambda={} step={}",
            self.prior, self.lambda, self.step_size
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    /// Composite objective after each epoch.
    pub objective_per_epoch: Vec<f64>,
    /// `||A x - y||_2` at the returned iterate.
    pub final_residual: f64,
    pub epochs_run: usize,
    /// Epochs whose TV prox hit its iteration cap before reaching tolerance.
    pub prox_warnings: usize,
}

impl SolveTrace {
    /// `epoch,objective` rows, epochs counted from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,objective\n");
        for (i, v) in self.objective_per_epoch.iter().enumerate() {
            out.push_str(&format!("{},{:.17e}\n", i + 1, v));
        }
        out
    }
}

/// Composite objective `||A x - y||^2 + lambda * R(x)`.
pub fn objective(y: &Measurement, x: &Image, prior: Prior, lambda: f64) -> Result<f64> {
    let residual = y.plan.forward(x)?.sub(&y.data).norm_sqr();
    Ok(residual + lambda * regulariser(x, prior)?)
}

/// `R(x)`: l1 norm of the transform coefficients, or anisotropic TV.
pub fn regulariser(x: &Image, prior: Prior) -> Result<f64> {
    Ok(match prior {
        Prior::Dct => l1(&Basis::Dct.analyze(x)?.data),
        Prior::Wavelet => l1(&Basis::default_wavelet(x.side()).analyze(x)?.data),
        Prior::Tv => tv_anisotropic(x),
    })
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// `2 A*(A x - y)`.
pub fn data_gradient(y: &Measurement, x: &Image) -> Result<Image> {
    let residual = y.plan.forward(x)?.sub(&y.data);
    Ok(y.plan.adjoint(&residual)?.scale(2.0))
}

/// Zero-filled back-projection rescaled so that `||A x0|| = ||y||`.
pub fn warm_start(y: &Measurement) -> Result<Image> {
    let back = forward::adjoint(y)?;
    let projected = y.plan.forward(&back)?.norm();
    if projected == 0.0 {
        return Ok(Image::zeros(y.side()));
    }
    Ok(back.scale(y.data.norm() / projected))
}

enum Proximal {
    Basis(Basis),
    Tv(TvProxSolver),
}

impl Proximal {
    fn new(prior: Prior, side: usize, cfg: &SparseConfig) -> Result<Self> {
        Ok(match prior {
            Prior::Dct => {
                Basis::Dct.check(side)?;
                Proximal::Basis(Basis::Dct)
            }
            Prior::Wavelet => {
                let basis = Basis::default_wavelet(side);
                basis.check(side)?;
                Proximal::Basis(basis)
            }
            Prior::Tv => Proximal::Tv(TvProxSolver::new(side, cfg.tv_tolerance, cfg.tv_max_iter)),
        })
    }

    /// Returns the prox output and whether it met its tolerance.
    fn apply(&mut self, z: &Image, threshold: f64) -> Result<(Image, bool)> {
        match self {
            Proximal::Basis(basis) => {
                let mut c = basis.analyze(z)?;
                soft_threshold_in_place(&mut c.data, threshold);
                Ok((c.synthesize()?, true))
            }
            Proximal::Tv(solver) => {
                if threshold == 0.0 {
                    return Ok((z.clone(), true));
                }
                let out = solver.solve(z, threshold)?;
                Ok((out.image, out.converged))
            }
        }
    }
}

/// Runs ISTA from the zero-filled warm start.
pub fn solve_sparse(y: &Measurement, cfg: &SparseConfig) -> Result<(Image, SolveTrace)> {
    let x0 = warm_start(y)?;
    solve_sparse_from(y, cfg, x0)
}

/// Runs ISTA from a caller-provided starting image.
pub fn solve_sparse_from(
    y: &Measurement,
    cfg: &SparseConfig,
    x0: Image,
) -> Result<(Image, SolveTrace)> {
    cfg.validate()?;
    if x0.side() != y.side() {
        return Err(Error::dim("initial image does not match the plan"));
    }
    if cfg.check_step {
        let bound = y.plan.lipschitz_bound();
        if cfg.step_size * bound > 2.0 {
            return Err(Error::param(format!(
                "step {} times ||A||^2 = {bound} exceeds 2",
                cfg.step_size
            )));
        }
    }
    let mut prox = Proximal::new(cfg.prior, y.side(), cfg)?;
    let threshold = cfg.lambda * cfg.step_size;
    let mut x = x0;
    let mut trace = SolveTrace::default();
    for _ in 0..cfg.epochs {
        let grad = data_gradient(y, &x)?;
        let z = x.add_scaled(-cfg.step_size, &grad);
        if !z.is_finite() {
            return Err(diverged(cfg, trace.epochs_run + 1));
        }
        let (next, converged) = prox.apply(&z, threshold)?;
        if !converged {
            trace.prox_warnings += 1;
        }
        let value = objective(y, &next, cfg.prior, cfg.lambda)?;
        trace.epochs_run += 1;
        if !value.is_finite() || value > DIVERGENCE_LIMIT {
            return Err(diverged(cfg, trace.epochs_run));
        }
        trace.objective_per_epoch.push(value);
        let change = next.sub(&x).norm();
        x = next;
        if cfg.tolerance > 0.0 && change <= cfg.tolerance {
            break;
        }
    }
    if trace.prox_warnings > 0 {
        log::warn!(
            "TV prox hit its iteration cap in {} of {} epochs",
            trace.prox_warnings,
            trace.epochs_run
        );
    }
    trace.final_residual = y.plan.forward(&x)?.sub(&y.data).norm();
    Ok((x, trace))
}

fn diverged(cfg: &SparseConfig, epoch: usize) -> Error {
    Error::NumericalFailure(format!(
        "ISTA diverged at epoch {epoch} ({})",
        cfg.describe()
    ))
}

/// Result of one TV prox evaluation.
#[derive(Debug, Clone)]
pub struct TvProxOutput {
    pub image: Image,
    pub iterations: usize,
    /// Duality gap at the returned iterate.
    pub gap: f64,
    /// False when the iteration cap was hit before the gap tolerance.
    pub converged: bool,
}

/// `argmin_x weight * TV(x) + 0.5 * ||x - z||^2` with default tolerance `1e-6` and cap 200.
pub fn tv_prox(z: &Image, weight: f64) -> Result<TvProxOutput> {
    TvProxSolver::new(z.side(), 1e-6, 200).solve(z, weight)
}

/// Accelerated projected gradient on the dual of the TV prox.
///
/// With `x = z - D^T q` and `|q| <= weight` elementwise, the dual objective
/// `0.5 ||z||^2 - 0.5 ||z - D^T q||^2` is maximised; its gradient is `D x`
/// and `||D||^2 <= 8`. The gap between primal and dual values is the stopping
/// test, relative to `max(1, primal)`. The dual is kept between calls so
/// consecutive ISTA epochs start warm.
#[derive(Debug, Clone)]
pub struct TvProxSolver {
    side: usize,
    tolerance: f64,
    max_iter: usize,
    dual: Gradient,
    dual_weight: f64,
}

impl TvProxSolver {
    pub fn new(side: usize, tolerance: f64, max_iter: usize) -> Self {
        Self {
            side,
            tolerance,
            max_iter: max_iter.max(1),
            dual: Gradient::zeros(side),
            dual_weight: 0.0,
        }
    }

    pub fn solve(&mut self, z: &Image, weight: f64) -> Result<TvProxOutput> {
        if z.side() != self.side {
            return Err(Error::dim("TV prox input has the wrong side"));
        }
        if !(weight >= 0.0) {
            return Err(Error::param(format!("TV weight must be >= 0, got {weight}")));
        }
        if weight == 0.0 || self.side < 2 {
            return Ok(TvProxOutput {
                image: z.clone(),
                iterations: 0,
                gap: 0.0,
                converged: true,
            });
        }
        let side = self.side;
        let n = side * side;
        let zv = z.data();
        let half_z2 = 0.5 * z.dot(z);

        // rescale a warm dual into the new box
        if self.dual_weight > 0.0 && self.dual_weight != weight {
            let ratio = weight / self.dual_weight;
            for v in self.dual.down.iter_mut().chain(self.dual.right.iter_mut()) {
                *v *= ratio;
            }
        }
        self.dual_weight = weight;

        let step = 1.0 / 8.0;
        let mut q = self.dual.clone();
        let mut u = q.clone();
        let mut t = 1.0f64;
        let mut x = vec![0.0; n];
        let mut dtq = vec![0.0; n];
        let mut dx = Gradient::zeros(side);

        let mut best: Option<(f64, Vec<f64>, Gradient)> = None;
        let mut iterations = 0;
        let mut converged = false;
        for it in 0..self.max_iter {
            iterations = it + 1;
            gradient_adjoint(&u, side, &mut dtq);
            for i in 0..n {
                x[i] = zv[i] - dtq[i];
            }
            gradient(&x, side, &mut dx);
            let prev = q.clone();
            for (dst, (src, g)) in q
                .down
                .iter_mut()
                .zip(u.down.iter().zip(&dx.down))
                .chain(q.right.iter_mut().zip(u.right.iter().zip(&dx.right)))
            {
                *dst = (src + step * g).clamp(-weight, weight);
            }
            zero_border(&mut q, side);

            // primal/dual values at the new dual point
            gradient_adjoint(&q, side, &mut dtq);
            let mut sq = 0.0;
            for i in 0..n {
                x[i] = zv[i] - dtq[i];
                sq += (x[i] - zv[i]) * (x[i] - zv[i]);
            }
            let x_img = Image::new(side, x.clone())?;
            let primal = weight * tv_anisotropic(&x_img) + 0.5 * sq;
            let residual: f64 = x.iter().map(|v| v * v).sum();
            let dual_value = half_z2 - 0.5 * residual;
            let gap = (primal - dual_value).max(0.0);
            if best.as_ref().map_or(true, |(p, _, _)| primal < *p) {
                best = Some((primal, x.clone(), q.clone()));
            }
            if gap <= self.tolerance * primal.abs().max(1.0) {
                converged = true;
                best = Some((primal, x.clone(), q.clone()));
                break;
            }

            // gradient-based adaptive restart
            let restart: f64 = u
                .down
                .iter()
                .zip(&q.down)
                .zip(&prev.down)
                .chain(u.right.iter().zip(&q.right).zip(&prev.right))
                .map(|((a, b), c)| (a - b) * (b - c))
                .sum();
            if restart > 0.0 {
                t = 1.0;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let momentum = (t - 1.0) / t_next;
            for (dst, (a, b)) in u
                .down
                .iter_mut()
                .zip(q.down.iter().zip(&prev.down))
                .chain(u.right.iter_mut().zip(q.right.iter().zip(&prev.right)))
            {
                *dst = a + momentum * (a - b);
            }
            t = t_next;
        }

        let (primal, image, dual) = best.expect("at least one iteration");
        self.dual = dual;
        let gap = {
            gradient_adjoint(&self.dual, side, &mut dtq);
            let residual: f64 = zv.iter().zip(&dtq).map(|(a, b)| (a - b) * (a - b)).sum();
            (primal - (half_z2 - 0.5 * residual)).max(0.0)
        };
        Ok(TvProxOutput {
            image: Image::new(side, image)?,
            iterations,
            gap,
            converged,
        })
    }
}

fn zero_border(g: &mut Gradient, side: usize) {
    for c in 0..side {
        g.down[(side - 1) * side + c] = 0.0;
    }
    for r in 0..side {
        g.right[r * side + side - 1] = 0.0;
    }
}

/// Grid search settings; [`Default`] is the 4 x 5 grid over [`LAMBDA_GRID`] and [`STEP_GRID`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridOptions {
    pub lambdas: Vec<f64>,
    pub steps: Vec<f64>,
    pub epochs: usize,
    /// Interpret grid values for the operator scaled to `||A||^2 = 1`:
    /// the solver runs with `step / L` and `lambda * L`, `L` the plan's
    /// Lipschitz bound. Fourier plans have `L = 1`, so nothing changes there.
    pub relative_to_lipschitz: bool,
    pub noise_var: f64,
    pub noise_seed: u64,
    pub threads: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            lambdas: LAMBDA_GRID.to_vec(),
            steps: STEP_GRID.to_vec(),
            epochs: 200,
            relative_to_lipschitz: true,
            noise_var: 0.0,
            noise_seed: 0,
            threads: thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridChoice {
    /// Config to pass to [`solve_sparse`], already scaled for the plan.
    pub config: SparseConfig,
    /// Winning grid values before scaling.
    pub grid_lambda: f64,
    pub grid_step: f64,
    pub mean_ssim: f64,
    /// Mean SSIM of every grid pair, `None` where the solve failed.
    pub scores: Vec<(f64, f64, Option<f64>)>,
}

/// Exhaustive search over the default grid with noiseless measurements.
pub fn grid_search(train: &[Image], plan: &Arc<MeasurementPlan>, prior: Prior) -> Result<GridChoice> {
    grid_search_with(train, plan, prior, &GridOptions::default())
}

/// Picks the `(lambda, step)` pair maximising mean SSIM over the training
/// images. Ties go to the larger lambda, then the smaller step.
pub fn grid_search_with(
    train: &[Image],
    plan: &Arc<MeasurementPlan>,
    prior: Prior,
    opts: &GridOptions,
) -> Result<GridChoice> {
    if train.is_empty() {
        return Err(Error::Config("grid search needs at least one training image".into()));
    }
    let measurements: Vec<Measurement> = train
        .iter()
        .enumerate()
        .map(|(i, img)| {
            let y = forward::apply(plan, img)?;
            forward::add_noise(&y, opts.noise_var, opts.noise_seed.wrapping_add(i as u64))
        })
        .collect::<Result<_>>()?;
    let scale = if opts.relative_to_lipschitz {
        plan.lipschitz_bound()
    } else {
        1.0
    };
    let pairs: Vec<(f64, f64)> = opts
        .lambdas
        .iter()
        .flat_map(|&l| opts.steps.iter().map(move |&s| (l, s)))
        .collect();
    let config_for = |lambda: f64, step: f64| {
        SparseConfig::new(prior, lambda * scale, step / scale).with_epochs(opts.epochs)
    };
    let evaluate = |&(lambda, step): &(f64, f64)| -> Option<f64> {
        let cfg = config_for(lambda, step);
        let mut total = 0.0;
        for (truth, y) in train.iter().zip(&measurements) {
            let (x, _) = solve_sparse(y, &cfg).ok()?;
            total += metrics::ssim(truth, &x).ok()?;
        }
        Some(total / train.len() as f64)
    };

    let threads = opts.threads.clamp(1, pairs.len().max(1));
    let chunk = pairs.len().div_ceil(threads);
    let scores: Vec<Option<f64>> = thread::scope(|s| {
        let handles: Vec<_> = pairs
            .chunks(chunk.max(1))
            .map(|part| s.spawn(move || part.iter().map(evaluate).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("grid worker panicked"))
            .collect()
    });

    let mut best: Option<(f64, f64, f64)> = None;
    for (&(lambda, step), score) in pairs.iter().zip(&scores) {
        let Some(score) = *score else { continue };
        let better = match best {
            None => true,
            Some((bl, bs, bscore)) => {
                score > bscore
                    || (score == bscore && (lambda > bl || (lambda == bl && step < bs)))
            }
        };
        if better {
            best = Some((lambda, step, score));
        }
    }
    let (lambda, step, mean_ssim) = best.ok_or_else(|| {
        Error::Config(format!("every grid configuration failed for prior {prior}"))
    })?;
    Ok(GridChoice {
        config: config_for(lambda, step),
        grid_lambda: lambda,
        grid_step: step,
        mean_ssim,
        scores: pairs
            .iter()
            .zip(scores)
            .map(|(&(l, s), score)| (l, s, score))
            .collect(),
    })
}

// re-exported for callers that want the transform of a prior
pub fn basis_for(prior: Prior, side: usize) -> Option<Basis> {
    match prior {
        Prior::Dct => Some(Basis::Dct),
        Prior::Wavelet => Some(transforms::Basis::default_wavelet(side)),
        Prior::Tv => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::masks::{FourierMask, FourierStrategy, PixelMaskSet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(side: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(side, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn identity_plan(side: usize) -> Arc<MeasurementPlan> {
        Arc::new(MeasurementPlan::Fourier(
            FourierMask::generate(side, FourierStrategy::Uniform, 1.0, 0).unwrap(),
        ))
    }

    #[test]
    fn tv_prox_constant_is_fixed() {
        let z = Image::filled(6, 0.7);
        let out = tv_prox(&z, 0.5).unwrap();
        assert!(out.image.max_abs_diff(&z) < 1e-12);
        assert!(out.converged);
    }

    #[test]
    fn tv_prox_large_weight_gives_mean() {
        let z = random_image(8, 1);
        let out = tv_prox(&z, 1e6).unwrap();
        let mean = z.mean();
        assert!(out.image.data().iter().all(|v| (v - mean).abs() < 1e-6));
    }

    #[test]
    fn tv_prox_rejects_negative_weight() {
        assert!(matches!(tv_prox(&Image::zeros(4), -1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn prox_matches_soft_threshold_in_transform_domain() {
        let z = random_image(16, 3);
        for prior in [Prior::Dct, Prior::Wavelet] {
            let basis = basis_for(prior, 16).unwrap();
            let mut prox = Proximal::Basis(basis);
            let (out, _) = prox.apply(&z, 0.2).unwrap();
            let expect = transforms::soft_threshold(&basis.analyze(&z).unwrap(), 0.2).unwrap();
            let got = basis.analyze(&out).unwrap();
            for (a, b) in got.data.iter().zip(&expect.data) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fixed_point_without_regularisation() {
        let x = random_image(8, 4);
        let plan = Arc::new(MeasurementPlan::Pixel(PixelMaskSet::generate(8, 2, 2, 1).unwrap()));
        let y = forward::apply(&plan, &x).unwrap();
        for prior in [Prior::Dct, Prior::Wavelet, Prior::Tv] {
            let cfg = SparseConfig::new(prior, 0.0, 0.01).with_epochs(1);
            let (next, _) = solve_sparse_from(&y, &cfg, x.clone()).unwrap();
            assert!(next.max_abs_diff(&x) < 1e-10, "{prior}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let plans = [
            Arc::new(MeasurementPlan::Pixel(PixelMaskSet::generate(8, 3, 2, 2).unwrap())),
            Arc::new(MeasurementPlan::Fourier(
                FourierMask::generate(8, FourierStrategy::Radial, 2.0, 2).unwrap(),
            )),
        ];
        for plan in plans {
            let y = forward::apply(&plan, &random_image(8, 10)).unwrap();
            let x = random_image(8, 11);
            let grad = data_gradient(&y, &x).unwrap();
            let f = |img: &Image| plan.forward(img).unwrap().sub(&y.data).norm_sqr();
            let h = 1e-5;
            for _ in 0..10 {
                let i = rng.gen_range(0..64);
                let mut plus = x.clone();
                plus.data_mut()[i] += h;
                let mut minus = x.clone();
                minus.data_mut()[i] -= h;
                let fd = (f(&plus) - f(&minus)) / (2.0 * h);
                let g = grad.data()[i];
                assert!((fd - g).abs() <= 1e-4 * g.abs().max(1.0), "{fd} vs {g}");
            }
        }
    }

    #[test]
    fn identity_operator_recovers_measurement() {
        let x = random_image(16, 8);
        let y = forward::apply(&identity_plan(16), &x).unwrap();
        for prior in [Prior::Dct, Prior::Wavelet, Prior::Tv] {
            let (rec, _) = solve_sparse(&y, &SparseConfig::new(prior, 1e-8, 0.5)).unwrap();
            assert!(rec.max_abs_diff(&x) < 1e-6, "{prior}");
            assert!(metrics::ssim(&x, &rec).unwrap() > 0.999);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let plan = Arc::new(MeasurementPlan::Pixel(PixelMaskSet::generate(16, 8, 4, 0).unwrap()));
        let y = forward::apply(&plan, &random_image(16, 1)).unwrap();
        let err = solve_sparse(&y, &SparseConfig::new(Prior::Dct, 0.01, 1.0)).unwrap_err();
        match err {
            Error::NumericalFailure(msg) => assert!(msg.contains("prior=dct"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn step_check() {
        let plan = Arc::new(MeasurementPlan::Pixel(PixelMaskSet::generate(8, 1, 2, 0).unwrap()));
        let y = forward::apply(&plan, &random_image(8, 1)).unwrap();
        let mut cfg = SparseConfig::new(Prior::Dct, 0.01, 10.0);
        cfg.check_step = true;
        assert!(matches!(solve_sparse(&y, &cfg), Err(Error::Parameter(_))));
    }

    #[test]
    fn early_stopping() {
        let x = random_image(8, 2);
        let y = forward::apply(&identity_plan(8), &x).unwrap();
        let mut cfg = SparseConfig::new(Prior::Dct, 1e-4, 0.5);
        cfg.tolerance = 1e-9;
        let (_, trace) = solve_sparse(&y, &cfg).unwrap();
        assert!(trace.epochs_run < 10);
    }

    #[test]
    fn trace_csv_shape() {
        let trace = SolveTrace {
            objective_per_epoch: vec![2.0, 1.0],
            ..Default::default()
        };
        let csv = trace.to_csv();
        assert!(csv.starts_with("epoch,objective\n1,"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn grid_is_the_published_one() {
        let opts = GridOptions::default();
        assert_eq!(opts.lambdas, vec![0.1, 0.01, 0.001, 0.0001]);
        assert_eq!(opts.steps, vec![0.001, 0.01, 0.1, 0.5, 1.0]);
        assert_eq!(opts.lambdas.len() * opts.steps.len(), 20);
    }

    #[test]
    fn grid_search_identity_and_determinism() {
        let train = vec![random_image(8, 20), random_image(8, 21)];
        let plan = identity_plan(8);
        let opts = GridOptions {
            epochs: 50,
            ..Default::default()
        };
        let a = grid_search_with(&train, &plan, Prior::Dct, &opts).unwrap();
        assert!(a.mean_ssim >= 0.99);
        assert_eq!(a.scores.len(), 20);
        let b = grid_search_with(&train, &plan, Prior::Dct, &opts).unwrap();
        assert_eq!(a, b);
        assert!(grid_search(&[], &plan, Prior::Tv).is_err());
    }
}

//! Guided posterior sampling with an analytic Gaussian score.
//!
//! Stand-in for trained weights: the score of N(mean, v I) fitted to training
//! phantoms is exact for that prior at every noise level. Pass a `.cssm` path
//! as the first argument to use a saved network instead.

use std::sync::Arc;

use csrecon::diffusion::{load_score_weights, GaussianScore, NoiseSchedule, ScoreModel};
use csrecon::forward::{self, MeasurementPlan};
use csrecon::harness::{sweep::fit_gaussian, synth_particles};
use csrecon::masks::{FourierMask, FourierStrategy};
use csrecon::metrics;
use csrecon::sampler::{GuidanceSchedule, PosteriorSampler};

fn main() -> csrecon::Result<()> {
    let side = 16;
    let truth = synth_particles(1, side, 21)?.remove(0);
    let plan = Arc::new(MeasurementPlan::Fourier(FourierMask::generate(
        side,
        FourierStrategy::Radial,
        2.0,
        3,
    )?));
    let y = forward::apply(&plan, &truth)?;

    let score: Box<dyn ScoreModel> = match std::env::args().nth(1) {
        Some(path) => Box::new(load_score_weights(path)?),
        None => {
            let (mean, var) = fit_gaussian(&synth_particles(64, side, 22)?)?;
            Box::new(GaussianScore::new(mean, var, NoiseSchedule::default())?)
        }
    };

    let (x, trace) = PosteriorSampler::new(&y, score.as_ref())
        .guidance(GuidanceSchedule::for_plan(&plan))
        .seed(1)
        .run_with(|s| {
            if s.t % 250 == 0 {
                println!("t = {:4}  |x| = {:.3}", s.t, s.x.norm());
            }
        })?;
    println!(
        "residual {:.4} -> {:.4}",
        trace.initial_residual().unwrap_or(f64::NAN),
        trace.final_residual().unwrap_or(f64::NAN)
    );
    let r = metrics::report(&truth, &x)?;
    println!("SSIM {:.3}  PSNR {}", r.ssim, metrics::format_psnr(r.psnr_db));
    Ok(())
}

//! Picking (lambda, step) on training images, then solving a held-out one.

use std::sync::Arc;

use csrecon::forward::{self, MeasurementPlan};
use csrecon::harness::synth_particles;
use csrecon::masks::PixelMaskSet;
use csrecon::metrics;
use csrecon::sparse::{self, GridOptions, Prior};

fn main() -> csrecon::Result<()> {
    let train = synth_particles(2, 16, 100)?;
    let test = synth_particles(1, 16, 200)?.remove(0);
    let plan = Arc::new(MeasurementPlan::Pixel(PixelMaskSet::generate(16, 12, 2, 8)?));

    let opts = GridOptions { epochs: 100, ..GridOptions::default() };
    let choice = sparse::grid_search_with(&train, &plan, Prior::Dct, &opts)?;
    for (lambda, step, score) in &choice.scores {
        match score {
            Some(s) => println!("lambda {lambda:<7} step {step:<6} mean SSIM {s:.4}"),
            None => println!("lambda {lambda:<7} step {step:<6} failed"),
        }
    }
    println!(
        "chose lambda {} step {} (scaled: {:.3e}, {:.3e})",
        choice.grid_lambda, choice.grid_step, choice.config.lambda, choice.config.step_size
    );

    let y = forward::apply(&plan, &test)?;
    let (x, _) = sparse::solve_sparse(&y, &choice.config)?;
    let r = metrics::report(&test, &x)?;
    println!("held-out SSIM {:.3}  PSNR {}", r.ssim, metrics::format_psnr(r.psnr_db));
    Ok(())
}

//! Masked block-sum acquisition: forward, adjoint, noise and the saved measurement.

use std::sync::Arc;

use csrecon::forward::{self, Measurement, MeasurementPlan};
use csrecon::harness::synth_particles;
use csrecon::masks::PixelMaskSet;

fn main() -> csrecon::Result<()> {
    let x = synth_particles(1, 32, 1)?.remove(0);
    let plan = Arc::new(MeasurementPlan::Pixel(PixelMaskSet::generate(32, 16, 4, 2)?));
    println!(
        "plan: {} measurements for {} pixels (C = {:.2}), ||A||^2 ~ {:.2}",
        plan.output_len(),
        32 * 32,
        plan.compression(),
        plan.lipschitz_bound()
    );

    let clean = forward::apply(&plan, &x)?;
    let noisy = forward::add_noise(&clean, 0.01, 7)?;
    let diff = noisy.data.sub(&clean.data);
    println!(
        "noise sample variance {:.4} (target 0.01) over {} values",
        diff.norm_sqr() / diff.len() as f64,
        diff.len()
    );

    // <A x, y> == <x, A* y>
    let back = forward::adjoint(&noisy)?;
    println!(
        "adjoint check: {:.6} vs {:.6}",
        clean.data.dot(&noisy.data),
        x.dot(&back)
    );

    let bytes = noisy.to_bytes();
    let loaded = Measurement::from_bytes(&bytes, plan.clone())?;
    println!("CSMS blob {} bytes, noise variance {}", bytes.len(), loaded.noise_var);
    Ok(())
}

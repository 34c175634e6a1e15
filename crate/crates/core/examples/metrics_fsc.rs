//! SSIM/PSNR and ring correlation between a phantom and degraded copies.

use csrecon::harness::synth_particles;
use csrecon::metrics;
use csrecon::Image;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> csrecon::Result<()> {
    let truth = synth_particles(1, 64, 4)?.remove(0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    for sd in [0.01, 0.1, 0.5] {
        let noise = Normal::new(0.0, sd).unwrap();
        let noisy = Image::from_fn(64, |r, c| truth.get(r, c) + noise.sample(&mut rng));
        let r = metrics::report(&truth, &noisy)?;
        let frc = metrics::ring_correlation(&truth, &noisy, 32)?;
        let res = frc
            .resolution(1.5)
            .map_or("beyond Nyquist".to_string(), |a| format!("{a:.2} A"));
        println!(
            "noise sd {sd:<4}  SSIM {:.3}  PSNR {}  FRC 0.143 at {res}",
            r.ssim,
            metrics::format_psnr(r.psnr_db)
        );
    }

    let frc = metrics::ring_correlation(&truth, &truth, 8)?;
    print!("{}", frc.to_csv());
    Ok(())
}

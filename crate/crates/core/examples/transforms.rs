//! DCT and Haar analysis/synthesis, soft thresholding and TV on a phantom.

use csrecon::harness::synth_particles;
use csrecon::transforms::{self, Basis};

fn main() -> csrecon::Result<()> {
    let x = synth_particles(1, 32, 3)?.remove(0);
    println!("phantom 32x32, norm {:.4}, TV {:.3}", x.norm(), transforms::tv_anisotropic(&x));

    for basis in [Basis::Dct, Basis::default_wavelet(32)] {
        let c = basis.analyze(&x)?;
        // orthonormal: energy is preserved
        println!("{basis:?}: coefficient norm {:.4}", c.norm());

        for lambda in [0.01, 0.05, 0.2] {
            let kept = transforms::soft_threshold(&c, lambda)?;
            let nonzero = kept.data.iter().filter(|v| **v != 0.0).count();
            let back = kept.synthesize()?;
            println!(
                "  lambda {lambda:<5} keeps {nonzero:4} of {} coefficients, max error {:.4}",
                c.data.len(),
                back.max_abs_diff(&x)
            );
        }
        let round_trip = basis.synthesize(&c)?;
        println!("  round trip error {:.2e}", round_trip.max_abs_diff(&x));
    }
    Ok(())
}

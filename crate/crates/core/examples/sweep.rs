//! A small experiment grid written to CSV, then summarised.

use csrecon::harness::{run_sweep, summarize, ExperimentConfig};

const CONFIG: &str = r#"
[input]
count = 4
side = 16
train_count = 4

[plan]
variants = ["fourier"]
strategies = ["uniform", "annular"]
compressions = [4.0, 2.0]

[reconstruction]
priors = ["dct", "tv"]
tuning = "fixed"
lambda = 1e-3
step = 0.5
epochs = 100

[noise]
variances = [0.0, 0.01]
seeds = [0]
"#;

fn main() -> csrecon::Result<()> {
    let mut cfg = ExperimentConfig::from_toml(CONFIG)?;
    cfg.output.dir = std::env::temp_dir().join("csrecon-sweep-example");

    let summary = run_sweep(&cfg)?;
    println!(
        "{}: {} rows ({} units run, {} already present)",
        summary.path.display(),
        summary.rows.len(),
        summary.units_run,
        summary.units_skipped
    );
    println!("{:<5} {:<8} {:>5} {:>6} {:>7} {:>7}", "prior", "strategy", "C", "noise", "SSIM", "PSNR");
    for cell in summarize(&summary.rows) {
        println!(
            "{:<5} {:<8} {:>5.1} {:>6} {:>7.3} {:>7.2}",
            cell.prior, cell.strategy, cell.compression, cell.noise_var, cell.mean_ssim, cell.mean_psnr
        );
    }
    Ok(())
}

//! Command line front end. Run `csrecon --help` for the verbs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use csrecon::diffusion::{linear_schedule, load_score_weights, GaussianScore, ScoreModel};
use csrecon::forward::{self, Measurement, MeasurementPlan};
use csrecon::harness::config::{ExperimentConfig, ReconPrior, Variant};
use csrecon::harness::sweep::{fit_gaussian, summarize};
use csrecon::harness::{read_mrc, run_sweep, synth_particles, write_mrc};
use csrecon::masks::{FourierMask, FourierStrategy, MaskBlob, PixelMaskSet};
use csrecon::metrics;
use csrecon::sampler::{GuidanceSchedule, Normalization, PosteriorSampler};
use csrecon::sparse::{self, SparseConfig};
use csrecon::{Error, Image, Result};

#[derive(Parser)]
#[command(name = "csrecon", version, about = "Compressive acquisition and reconstruction of 2D images")]
struct Cli {
    #[command(subcommand)]
    command: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Generate a pixel or Fourier mask and write it as a CSMK file.
    Mask(MaskArgs),
    /// Measure one image from an MRC stack with a mask, writing a CSMS file.
    Acquire(AcquireArgs),
    /// Recover an image from a measurement, writing a single-slice MRC file.
    Reconstruct(ReconstructArgs),
    /// Run the full experiment grid described by a config file.
    Sweep(SweepArgs),
    /// SSIM and PSNR between matching slices of two MRC stacks.
    Metrics(PairArgs),
    /// Fourier ring (or shell, with --volume) correlation of two MRC files.
    Fsc(FscArgs),
    /// Write synthetic blob phantoms to an MRC stack.
    Phantoms(PhantomArgs),
}

#[derive(Args)]
struct MaskArgs {
    /// `pixel` or `fourier`.
    #[arg(long, default_value = "fourier")]
    variant: String,
    /// Fourier sampling: uniform, annular or radial.
    #[arg(long, default_value = "uniform")]
    strategy: String,
    #[arg(long)]
    compression: f64,
    #[arg(long, default_value_t = 32)]
    side: usize,
    /// Pooling block side for pixel masks.
    #[arg(long, default_value_t = 4)]
    kernel: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct AcquireArgs {
    #[arg(long)]
    mask: PathBuf,
    /// MRC stack holding the image.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0)]
    slice: usize,
    #[arg(long, default_value_t = 0.0)]
    noise_var: f64,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    measurement: PathBuf,
    /// dct, wavelet, tv, diffusion or zero-filled. Defaults to the first configured prior.
    #[arg(long)]
    prior: Option<String>,
    /// Config file supplying defaults for the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sparsity weight relative to the Lipschitz bound.
    #[arg(long)]
    lambda: Option<f64>,
    /// Step size relative to 1/L.
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// CSSM score network for the diffusion prior.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// MRC stack used to fit a Gaussian prior when no weights are given.
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    diffusion_steps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pixel_size: f64,
    /// Per-epoch objective or per-step residual CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides input.count.
    #[arg(long)]
    count: Option<usize>,
    /// Comma separated, overrides reconstruction.priors.
    #[arg(long, value_delimiter = ',')]
    priors: Option<Vec<String>>,
    /// Comma separated, overrides plan.compressions.
    #[arg(long, value_delimiter = ',')]
    compressions: Option<Vec<f64>>,
    /// Comma separated, overrides noise.variances.
    #[arg(long, value_delimiter = ',')]
    noise_vars: Option<Vec<f64>>,
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Args)]
struct PairArgs {
    reference: PathBuf,
    estimate: PathBuf,
}

#[derive(Args)]
struct FscArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, default_value_t = 16)]
    bins: usize,
    /// Treat each file as one cubic volume instead of using slice 0.
    #[arg(long)]
    volume: bool,
}

#[derive(Args)]
struct PhantomArgs {
    #[arg(long, default_value_t = 16)]
    count: usize,
    #[arg(long, default_value_t = 32)]
    side: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Verb::Mask(a) => mask(a),
        Verb::Acquire(a) => acquire(a),
        Verb::Reconstruct(a) => reconstruct(a),
        Verb::Sweep(a) => sweep(a),
        Verb::Metrics(a) => pair_metrics(a),
        Verb::Fsc(a) => fsc(a),
        Verb::Phantoms(a) => phantoms(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn mask(a: MaskArgs) -> Result<()> {
    let blob = match a.variant.parse::<Variant>()? {
        Variant::Pixel => {
            let count = ExperimentConfig::mask_count(a.kernel, a.compression);
            MaskBlob::Pixel(PixelMaskSet::generate(a.side, count, a.kernel, a.seed)?)
        }
        Variant::Fourier => {
            let strategy: FourierStrategy = a.strategy.parse()?;
            MaskBlob::Fourier(FourierMask::generate(a.side, strategy, a.compression, a.seed)?)
        }
    };
    fs::write(&a.output, blob.to_bytes())?;
    let plan = plan_of(blob);
    println!(
        "{} mask: side {}, m = {}, C = {:.4}",
        plan.variant_name(),
        plan.side(),
        plan.output_len(),
        plan.compression()
    );
    Ok(())
}

fn plan_of(blob: MaskBlob) -> MeasurementPlan {
    match blob {
        MaskBlob::Pixel(p) => MeasurementPlan::Pixel(p),
        MaskBlob::Fourier(f) => MeasurementPlan::Fourier(f),
    }
}

fn load_plan(path: &Path) -> Result<Arc<MeasurementPlan>> {
    Ok(Arc::new(plan_of(MaskBlob::from_bytes(&fs::read(path)?)?)))
}

fn acquire(a: AcquireArgs) -> Result<()> {
    let plan = load_plan(&a.mask)?;
    let image = read_mrc(&a.input)?.read_slice(a.slice)?;
    let y = forward::add_noise(&forward::apply(&plan, &image)?, a.noise_var, a.noise_seed)?;
    fs::write(&a.output, y.to_bytes())?;
    println!("{} measurements written to {}", y.data.len(), a.output.display());
    Ok(())
}

fn reconstruct(a: ReconstructArgs) -> Result<()> {
    let cfg = match &a.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let r = &cfg.reconstruction;
    let plan = load_plan(&a.mask)?;
    let y = Measurement::from_bytes(&fs::read(&a.measurement)?, Arc::clone(&plan))?;
    let prior = match &a.prior {
        Some(p) => p.parse()?,
        None => *r
            .priors
            .first()
            .ok_or_else(|| Error::Config("no prior given".into()))?,
    };
    let (estimate, trace) = match prior {
        ReconPrior::ZeroFilled => (sparse::warm_start(&y)?, None),
        ReconPrior::Diffusion => {
            let steps = a.diffusion_steps.unwrap_or(r.diffusion_steps);
            let schedule = linear_schedule(steps, r.beta_start, r.beta_end)?;
            let (score, normalization): (Box<dyn ScoreModel>, Normalization) =
                match (a.weights.as_ref().or(r.weights.as_ref()), &a.train) {
                    (Some(w), _) => (
                        Box::new(load_score_weights(w)?.with_schedule(schedule.clone())),
                        Normalization::default(),
                    ),
                    (None, Some(train)) => {
                        let images = read_mrc(train)?.read_all()?;
                        let (lo, hi) = images.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), im| {
                            let (a, b) = im.min_max();
                            (l.min(a), h.max(b))
                        });
                        let norm = Normalization::from_range(lo, hi)?;
                        let scaled: Vec<Image> = images.iter().map(|im| norm.normalize(im)).collect();
                        let (mean, var) = fit_gaussian(&scaled)?;
                        (Box::new(GaussianScore::new(mean, var, schedule.clone())?), norm)
                    }
                    (None, None) => {
                        return Err(Error::Config(
                            "the diffusion prior needs --weights or --train".into(),
                        ))
                    }
                };
            let mut guidance = GuidanceSchedule::for_plan(&plan);
            if let Some(z) = r.zeta_max {
                guidance.zeta_max = z;
            }
            let (x, trace) = PosteriorSampler::new(&y, score.as_ref())
                .schedule(schedule)
                .guidance(guidance)
                .normalization(normalization)
                .seed(a.seed)
                .run()?;
            (x, Some(trace.to_csv()))
        }
        sparse_prior => {
            let prior = sparse_prior.sparse().expect("sparse prior");
            let l = plan.lipschitz_bound();
            let sc = SparseConfig::new(
                prior,
                a.lambda.unwrap_or(r.lambda) * l,
                a.step.unwrap_or(r.step) / l,
            )
            .with_epochs(a.epochs.unwrap_or(r.epochs));
            let (x, trace) = sparse::solve_sparse(&y, &sc)?;
            (x, Some(trace.to_csv()))
        }
    };
    if let (Some(path), Some(csv)) = (&a.trace, trace) {
        fs::write(path, csv)?;
    }
    write_mrc(&a.output, std::slice::from_ref(&estimate), a.pixel_size)?;
    let residual = plan.forward(&estimate)?.sub(&y.data).norm();
    println!("{prior} reconstruction written to {}, residual {residual:.6e}", a.output.display());
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(dir) = a.out {
        cfg.output.dir = dir;
    }
    if let Some(n) = a.threads {
        cfg.output.threads = n;
    }
    if let Some(n) = a.count {
        cfg.input.count = n;
    }
    if let Some(p) = a.priors {
        cfg.reconstruction.priors = p.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    }
    if let Some(c) = a.compressions {
        cfg.plan.compressions = c;
    }
    if let Some(v) = a.noise_vars {
        cfg.noise.variances = v;
    }
    if a.weights.is_some() {
        cfg.reconstruction.weights = a.weights;
    }
    let summary = run_sweep(&cfg)?;
    println!(
        "{} rows in {} ({} units run, {} resumed)",
        summary.rows.len(),
        summary.path.display(),
        summary.units_run,
        summary.units_skipped
    );
    println!("prior\tvariant\tstrategy\tK\tC\tnoise_var\tssim\tpsnr\tfailed");
    for c in summarize(&summary.rows) {
        println!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{:.4}\t{:.2}\t{}",
            c.prior,
            c.variant,
            c.strategy,
            c.kernel.map_or("-".to_string(), |k| k.to_string()),
            c.compression,
            c.noise_var,
            c.mean_ssim,
            c.mean_psnr,
            c.failures
        );
    }
    Ok(())
}

fn pair_metrics(a: PairArgs) -> Result<()> {
    let reference = read_mrc(&a.reference)?;
    let estimate = read_mrc(&a.estimate)?;
    if reference.count() != estimate.count() {
        return Err(Error::Dimension(format!(
            "stacks hold {} and {} slices",
            reference.count(),
            estimate.count()
        )));
    }
    println!("slice,ssim,psnr");
    for i in 0..reference.count() {
        let r = metrics::report(&reference.read_slice(i)?, &estimate.read_slice(i)?)?;
        println!("{i},{:.6},{}", r.ssim, metrics::format_psnr(r.psnr_db));
    }
    Ok(())
}

fn fsc(a: FscArgs) -> Result<()> {
    let sa = read_mrc(&a.a)?;
    let sb = read_mrc(&a.b)?;
    let curve = if a.volume {
        let n = sa.side();
        if sa.count() != n || sb.count() != n || sb.side() != n {
            return Err(Error::Dimension("volumes must be cubic and equally sized".into()));
        }
        let flat = |s: &csrecon::harness::MrcStack| -> Result<Vec<f64>> {
            Ok(s.read_all()?.into_iter().flat_map(Image::into_data).collect())
        };
        metrics::shell_correlation(&flat(&sa)?, &flat(&sb)?, &[n, n, n], a.bins)?
    } else {
        metrics::ring_correlation(&sa.read_slice(0)?, &sb.read_slice(0)?, a.bins)?
    };
    print!("{}", curve.to_csv());
    match curve.resolution(sa.pixel_size()) {
        Some(res) => println!("# resolution at {}: {res:.3} A", metrics::FSC_THRESHOLD),
        None => println!("# correlation stays above {} to Nyquist", metrics::FSC_THRESHOLD),
    }
    Ok(())
}

fn phantoms(a: PhantomArgs) -> Result<()> {
    let images = synth_particles(a.count, a.side, a.seed)?;
    write_mrc(&a.output, &images, 1.0)?;
    println!("{} phantoms of side {} written to {}", a.count, a.side, a.output.display());
    Ok(())
}

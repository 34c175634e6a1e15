//! Grid sweep over plans, compression factors, noise levels and priors.
//!
//! Work is split into units of one (prior, plan, compression, noise, seed)
//! combination; every unit reconstructs all evaluation images. Units run on
//! a small worker pool fed through a bounded channel, and a single writer
//! appends finished rows to `sweep.csv`. When the pool drains, the file is
//! rewritten in grid order so reruns and resumed runs produce the same file.

use std::collections::{HashMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::mpsc::{self, sync_channel};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diffusion::{linear_schedule, GaussianScore, ScoreModel};
use crate::error::{Error, Result};
use crate::forward::{self, MeasurementPlan};
use crate::image::Image;
use crate::masks::{FourierMask, FourierStrategy, PixelMaskSet};
use crate::metrics;
use crate::sampler::{GuidanceSchedule, Normalization, PosteriorSampler};
use crate::sparse::{self, GridOptions, SparseConfig};

use super::config::{ExperimentConfig, ReconPrior, Source, Tuning, Variant};
use super::mrc::{read_mrc, write_mrc};
use super::phantom::synth_particles;

/// First line of every sweep CSV.
pub const CSV_VERSION_LINE: &str = "# csrecon sweep v1";
pub const CSV_NAME: &str = "sweep.csv";

const TRAIN_SALT: u64 = 0x7472_6169_6e00_0000;
const VARIANCE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub prior: String,
    pub variant: String,
    pub strategy: String,
    #[serde(rename = "K")]
    pub kernel: Option<usize>,
    pub b: Option<usize>,
    pub m: Option<usize>,
    #[serde(rename = "C")]
    pub compression: f64,
    #[serde(rename = "C_actual")]
    pub compression_actual: Option<f64>,
    pub noise_var: f64,
    pub seed: u64,
    pub image: usize,
    pub ssim: Option<f64>,
    pub psnr: Option<String>,
    pub runtime_ms: Option<f64>,
    pub residual: Option<f64>,
    pub lambda: Option<f64>,
    pub step: Option<f64>,
    pub external: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn key(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}|{}|{}|{}",
            self.prior,
            self.variant,
            self.strategy,
            self.kernel.map_or(String::new(), |k| k.to_string()),
            self.compression,
            self.noise_var,
            self.seed,
            self.image
        )
    }

    /// PSNR as a number; `exact` parses to infinity.
    pub fn psnr_db(&self) -> Option<f64> {
        match self.psnr.as_deref() {
            Some("exact") => Some(f64::INFINITY),
            Some(s) => s.parse().ok(),
            None => None,
        }
    }
}

/// One reconstruction setting applied to every evaluation image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unit {
    pub prior: ReconPrior,
    pub variant: Variant,
    pub strategy: Option<FourierStrategy>,
    pub kernel: Option<usize>,
    pub compression: f64,
    pub noise_var: f64,
    pub seed: u64,
}

impl Unit {
    fn strategy_name(&self) -> String {
        match self.strategy {
            Some(s) => s.to_string(),
            None => "bernoulli".to_string(),
        }
    }

    fn row(&self, image: usize) -> SweepRow {
        SweepRow {
            prior: self.prior.to_string(),
            variant: self.variant.to_string(),
            strategy: self.strategy_name(),
            kernel: self.kernel,
            b: None,
            m: None,
            compression: self.compression,
            compression_actual: None,
            noise_var: self.noise_var,
            seed: self.seed,
            image,
            ssim: None,
            psnr: None,
            runtime_ms: None,
            residual: None,
            lambda: None,
            step: None,
            external: None,
            error: None,
        }
    }

    fn key(&self, image: usize) -> String {
        self.row(image).key()
    }

    pub fn build_plan(&self, side: usize) -> Result<MeasurementPlan> {
        match (self.variant, self.kernel, self.strategy) {
            (Variant::Pixel, Some(k), _) => {
                let b = ExperimentConfig::mask_count(k, self.compression);
                Ok(MeasurementPlan::Pixel(PixelMaskSet::generate(side, b, k, self.seed)?))
            }
            (Variant::Fourier, _, Some(s)) => Ok(MeasurementPlan::Fourier(FourierMask::generate(
                side,
                s,
                self.compression,
                self.seed,
            )?)),
            _ => Err(Error::Config("incomplete plan specification".into())),
        }
    }
}

/// Every unit of the grid, in the order rows appear in the final CSV.
pub fn enumerate_units(cfg: &ExperimentConfig) -> Vec<Unit> {
    let mut plans: Vec<(Variant, Option<FourierStrategy>, Option<usize>, f64)> = Vec::new();
    for &variant in &cfg.plan.variants {
        match variant {
            Variant::Pixel => {
                for &k in &cfg.plan.kernels {
                    for &c in &cfg.plan.compressions {
                        plans.push((variant, None, Some(k), c));
                    }
                }
            }
            Variant::Fourier => {
                for &s in &cfg.plan.strategies {
                    for &c in &cfg.plan.compressions {
                        plans.push((variant, Some(s), None, c));
                    }
                }
            }
        }
    }
    let mut units = Vec::new();
    for &(variant, strategy, kernel, compression) in &plans {
        for &noise_var in &cfg.noise.variances {
            for &seed in &cfg.noise.seeds {
                for &prior in &cfg.reconstruction.priors {
                    units.push(Unit {
                        prior,
                        variant,
                        strategy,
                        kernel,
                        compression,
                        noise_var,
                        seed,
                    });
                }
            }
        }
    }
    units
}

/// Evaluation and training images in the diffusion range.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub eval: Vec<Image>,
    pub train: Vec<Image>,
    pub pixel_size: f64,
    /// Maps stored intensities onto `[-1, 1]` for the diffusion prior.
    pub normalization: Normalization,
}

impl Dataset {
    pub fn side(&self) -> usize {
        self.eval[0].side()
    }
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let input = &cfg.input;
    match input.source {
        Source::Synthetic => Ok(Dataset {
            eval: synth_particles(input.count, input.side, input.seed)?,
            train: synth_particles(input.train_count, input.side, input.seed ^ TRAIN_SALT)?,
            pixel_size: 1.0,
            normalization: Normalization::default(),
        }),
        Source::Mrc => {
            let path = input
                .path
                .as_ref()
                .ok_or_else(|| Error::Config("input.path is required for mrc input".into()))?;
            let stack = read_mrc(path)?;
            let needed = input.count + input.train_count;
            if stack.count() < input.count {
                return Err(Error::Config(format!(
                    "{} holds {} images, {} requested",
                    path.display(),
                    stack.count(),
                    input.count
                )));
            }
            let eval: Vec<Image> = (0..input.count).map(|i| stack.read_slice(i)).collect::<Result<_>>()?;
            let train: Vec<Image> = (input.count..needed.min(stack.count()))
                .map(|i| stack.read_slice(i))
                .collect::<Result<_>>()?;
            let pool = if train.is_empty() { &eval } else { &train };
            let (lo, hi) = pool.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), im| {
                let (a, b) = im.min_max();
                (lo.min(a), hi.max(b))
            });
            Ok(Dataset {
                normalization: Normalization::from_range(lo, hi)?,
                eval,
                train,
                pixel_size: stack.pixel_size(),
            })
        }
    }
}

/// Pixelwise mean and pooled variance of `images`, floored at `1e-4`.
pub fn fit_gaussian(images: &[Image]) -> Result<(Image, f64)> {
    let first = images
        .first()
        .ok_or_else(|| Error::Config("no training images to fit a prior".into()))?;
    let side = first.side();
    let count = images.len() as f64;
    let mut mean = Image::zeros(side);
    for im in images {
        mean = mean.add_scaled(1.0 / count, im);
    }
    let var = images
        .iter()
        .map(|im| im.sub(&mean).norm().powi(2))
        .sum::<f64>()
        / (count * first.len() as f64);
    Ok((mean, var.max(VARIANCE_FLOOR)))
}

fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn noise_seed(seed: u64, image: usize) -> u64 {
    mix(seed, image as u64 + 1)
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    data: &'a Dataset,
    score: Option<Box<dyn ScoreModel>>,
    score_error: Option<String>,
}

impl Context<'_> {
    fn run_unit(&self, unit: &Unit) -> Vec<SweepRow> {
        let count = self.data.eval.len();
        match self.prepare(unit) {
            Ok((plan, tuned)) => (0..count).map(|i| self.run_image(unit, &plan, tuned.as_ref(), i)).collect(),
            Err(e) => (0..count)
                .map(|i| {
                    let mut row = unit.row(i);
                    row.error = Some(e.to_string());
                    row
                })
                .collect(),
        }
    }

    fn prepare(&self, unit: &Unit) -> Result<(Arc<MeasurementPlan>, Option<SparseConfig>)> {
        let plan = Arc::new(unit.build_plan(self.data.side())?);
        let r = &self.cfg.reconstruction;
        let tuned = match unit.prior.sparse() {
            None => None,
            Some(prior) => Some(match r.tuning {
                Tuning::Fixed => {
                    let l = plan.lipschitz_bound();
                    SparseConfig::new(prior, r.lambda * l, r.step / l).with_epochs(r.epochs)
                }
                Tuning::Grid => {
                    let take = r.grid_images.min(self.data.train.len());
                    let opts = GridOptions {
                        epochs: r.epochs,
                        noise_var: unit.noise_var,
                        noise_seed: mix(unit.seed, 0xC0FFEE),
                        threads: 1,
                        ..GridOptions::default()
                    };
                    sparse::grid_search_with(&self.data.train[..take], &plan, prior, &opts)?.config
                }
            }),
        };
        if unit.prior == ReconPrior::Diffusion && self.score.is_none() {
            return Err(Error::Config(
                self.score_error.clone().unwrap_or_else(|| "no score model".into()),
            ));
        }
        Ok((plan, tuned))
    }

    fn run_image(
        &self,
        unit: &Unit,
        plan: &Arc<MeasurementPlan>,
        tuned: Option<&SparseConfig>,
        index: usize,
    ) -> SweepRow {
        let mut row = unit.row(index);
        if let MeasurementPlan::Pixel(masks) = plan.as_ref() {
            row.b = Some(masks.count());
        }
        row.m = Some(plan.output_len());
        row.compression_actual = Some(plan.compression());
        if let Some(cfg) = tuned {
            row.lambda = Some(cfg.lambda);
            row.step = Some(cfg.step_size);
        }
        let truth = &self.data.eval[index];
        let start = Instant::now();
        let result = self.reconstruct(unit, plan, tuned, truth, index);
        row.runtime_ms = Some(start.elapsed().as_secs_f64() * 1e3);
        match result.and_then(|(est, residual)| {
            let report = metrics::report(truth, &est)?;
            Ok((est, residual, report))
        }) {
            Ok((est, residual, report)) => {
                row.ssim = Some(report.ssim);
                row.psnr = Some(metrics::format_psnr(report.psnr_db));
                row.residual = Some(residual);
                if let Err(e) = self.side_outputs(&row, truth, &est).map(|ext| row.external = ext) {
                    row.error = Some(e.to_string());
                }
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        row
    }

    fn reconstruct(
        &self,
        unit: &Unit,
        plan: &Arc<MeasurementPlan>,
        tuned: Option<&SparseConfig>,
        truth: &Image,
        index: usize,
    ) -> Result<(Image, f64)> {
        let clean = forward::apply(plan, truth)?;
        let y = forward::add_noise(&clean, unit.noise_var, noise_seed(unit.seed, index))?;
        let estimate = match unit.prior {
            ReconPrior::ZeroFilled => sparse::warm_start(&y)?,
            ReconPrior::Diffusion => {
                let r = &self.cfg.reconstruction;
                let schedule = linear_schedule(r.diffusion_steps, r.beta_start, r.beta_end)?;
                let mut guidance = GuidanceSchedule::for_plan(plan);
                if let Some(z) = r.zeta_max {
                    guidance.zeta_max = z;
                }
                let score = self.score.as_deref().expect("checked in prepare");
                PosteriorSampler::new(&y, score)
                    .schedule(schedule)
                    .guidance(guidance)
                    .normalization(self.data.normalization)
                    .seed(mix(unit.seed ^ 0x5EED, index as u64))
                    .run()?
                    .0
            }
            _ => sparse::solve_sparse(&y, tuned.expect("sparse prior is tuned"))?.0,
        };
        let residual = plan.forward(&estimate)?.sub(&y.data).norm();
        Ok((estimate, residual))
    }

    /// Saved reconstructions and the optional external metric.
    fn side_outputs(&self, row: &SweepRow, truth: &Image, est: &Image) -> Result<Option<f64>> {
        let out = &self.cfg.output;
        let stem = row
            .key()
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
            .collect::<String>();
        if out.save_reconstructions {
            let dir = out.dir.join("reconstructions");
            fs::create_dir_all(&dir)?;
            write_mrc(dir.join(format!("{stem}.mrc")), std::slice::from_ref(est), self.data.pixel_size)?;
        }
        let Some(command) = out.external_metric.as_deref().filter(|c| !c.trim().is_empty()) else {
            return Ok(None);
        };
        let dir = out.dir.join("external");
        fs::create_dir_all(&dir)?;
        let a = dir.join(format!("{stem}.truth.mrc"));
        let b = dir.join(format!("{stem}.estimate.mrc"));
        write_mrc(&a, std::slice::from_ref(truth), self.data.pixel_size)?;
        write_mrc(&b, std::slice::from_ref(est), self.data.pixel_size)?;
        let value = external_metric(command, &a, &b);
        let _ = fs::remove_file(&a);
        let _ = fs::remove_file(&b);
        value.map(Some)
    }
}

/// Runs `command truth estimate` and parses the first token of its stdout.
pub fn external_metric(command: &str, truth: &Path, estimate: &Path) -> Result<f64> {
    let mut parts = command.split_whitespace();
    let program = parts
        .next()
        .ok_or_else(|| Error::Config("empty external metric command".into()))?;
    let output = Command::new(program)
        .args(parts)
        .arg(truth)
        .arg(estimate)
        .output()
        .map_err(|e| Error::Config(format!("cannot run external metric {program:?}: {e}")))?;
    if !output.status.success() {
        return Err(Error::Config(format!(
            "external metric {program:?} exited with {}",
            output.status
        )));
    }
    let text = String::from_utf8_lossy(&output.stdout);
    text.split_whitespace()
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Config(format!("external metric printed no number: {text:?}")))
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub path: PathBuf,
    /// Final file contents in row order.
    pub rows: Vec<SweepRow>,
    pub units_run: usize,
    pub units_skipped: usize,
}

pub fn read_rows(path: &Path) -> Result<Vec<SweepRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    reader
        .deserialize()
        .map(|r| r.map_err(|e| Error::Config(format!("bad row in {}: {e}", path.display()))))
        .collect()
}

fn write_rows(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut file = fs::File::create(&tmp)?;
        writeln!(file, "{CSV_VERSION_LINE}")?;
        let mut w = csv::Writer::from_writer(file);
        if rows.is_empty() {
            w.write_record(csv_header())
                .map_err(|e| Error::Io(e.into()))?;
        }
        for row in rows {
            w.serialize(row).map_err(|e| Error::Io(e.into()))?;
        }
        w.flush()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}

fn csv_header() -> Vec<&'static str> {
    vec![
        "prior", "variant", "strategy", "K", "b", "m", "C", "C_actual", "noise_var", "seed",
        "image", "ssim", "psnr", "runtime_ms", "residual", "lambda", "step", "external", "error",
    ]
}

struct Appender {
    writer: csv::Writer<fs::File>,
}

impl Appender {
    fn open(path: &Path) -> Result<Self> {
        let fresh = !path.exists() || fs::metadata(path)?.len() == 0;
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        if fresh {
            writeln!(file, "{CSV_VERSION_LINE}")?;
        }
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        if fresh {
            writer.write_record(csv_header()).map_err(|e| Error::Io(e.into()))?;
        }
        Ok(Self { writer })
    }

    fn append(&mut self, rows: &[SweepRow]) -> Result<()> {
        for row in rows {
            self.writer.serialize(row).map_err(|e| Error::Io(e.into()))?;
        }
        self.writer.flush()?;
        Ok(())
    }
}

/// Runs every unit not already present in `<output.dir>/sweep.csv`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepSummary> {
    let data = load_dataset(cfg)?;
    if data.eval.is_empty() {
        return Err(Error::Config("no evaluation images".into()));
    }
    cfg.validate(data.side())?;
    fs::create_dir_all(&cfg.output.dir)?;
    let path = cfg.output.dir.join(CSV_NAME);

    let existing = if path.exists() { read_rows(&path)? } else { Vec::new() };
    let have: HashSet<String> = existing.iter().map(SweepRow::key).collect();
    let units = enumerate_units(cfg);
    let count = data.eval.len();
    let pending: Vec<usize> = (0..units.len())
        .filter(|&u| !(0..count).all(|i| have.contains(&units[u].key(i))))
        .collect();

    let (score, score_error) = if cfg.reconstruction.priors.contains(&ReconPrior::Diffusion) {
        match build_score(cfg, &data) {
            Ok(s) => (Some(s), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };
    let ctx = Context {
        cfg,
        data: &data,
        score,
        score_error,
    };

    let threads = match cfg.output.threads {
        0 => thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .clamp(1, pending.len().max(1));

    let mut appender = Appender::open(&path)?;
    let mut fresh_rows: Vec<SweepRow> = Vec::new();
    let mut write_error: Option<Error> = None;
    thread::scope(|s| {
        let (job_tx, job_rx) = sync_channel::<usize>(threads);
        // Workers own the receiver, so the producer stops if they all exit.
        let job_rx = Arc::new(Mutex::new(job_rx));
        let (done_tx, done_rx) = mpsc::channel::<Vec<SweepRow>>();
        for _ in 0..threads {
            let done_tx = done_tx.clone();
            let job_rx = Arc::clone(&job_rx);
            let (ctx, units) = (&ctx, &units);
            s.spawn(move || loop {
                let job = job_rx.lock().map_err(drop).and_then(|rx| rx.recv().map_err(drop));
                let Ok(u) = job else { break };
                if done_tx.send(ctx.run_unit(&units[u])).is_err() {
                    break;
                }
            });
        }
        drop((done_tx, job_rx));
        let pending = &pending;
        s.spawn(move || {
            for &u in pending {
                if job_tx.send(u).is_err() {
                    break;
                }
            }
        });
        for rows in done_rx {
            if write_error.is_none() {
                if let Err(e) = appender.append(&rows) {
                    write_error = Some(e);
                }
            }
            for row in &rows {
                if let Some(err) = &row.error {
                    log::warn!("{}: {err}", row.key());
                }
            }
            fresh_rows.extend(rows);
        }
    });
    drop(appender);
    if let Some(e) = write_error {
        return Err(e);
    }

    let rows = merge_rows(&units, count, existing, fresh_rows);
    write_rows(&path, &rows)?;
    Ok(SweepSummary {
        path,
        rows,
        units_run: pending.len(),
        units_skipped: units.len() - pending.len(),
    })
}

/// Grid order first, then rows from other grids sorted by key. Later rows win.
fn merge_rows(units: &[Unit], count: usize, existing: Vec<SweepRow>, fresh: Vec<SweepRow>) -> Vec<SweepRow> {
    let mut by_key: HashMap<String, SweepRow> = HashMap::new();
    for row in existing.into_iter().chain(fresh) {
        by_key.insert(row.key(), row);
    }
    let mut rows = Vec::with_capacity(by_key.len());
    for unit in units {
        for i in 0..count {
            if let Some(row) = by_key.remove(&unit.key(i)) {
                rows.push(row);
            }
        }
    }
    let mut rest: Vec<SweepRow> = by_key.into_values().collect();
    rest.sort_by_key(SweepRow::key);
    rows.extend(rest);
    rows
}

fn build_score(cfg: &ExperimentConfig, data: &Dataset) -> Result<Box<dyn ScoreModel>> {
    let r = &cfg.reconstruction;
    let schedule = linear_schedule(r.diffusion_steps, r.beta_start, r.beta_end)?;
    match &r.weights {
        Some(path) => {
            let model = crate::diffusion::load_score_weights(path)?.with_schedule(schedule);
            if model.side() != data.side() {
                return Err(Error::Config(format!(
                    "score network is for side {}, images have side {}",
                    model.side(),
                    data.side()
                )));
            }
            Ok(Box::new(model))
        }
        None => {
            let normalized: Vec<Image> = data
                .train
                .iter()
                .map(|im| data.normalization.normalize(im))
                .collect();
            let (mean, var) = fit_gaussian(&normalized)?;
            Ok(Box::new(GaussianScore::new(mean, var, schedule)?))
        }
    }
}

/// Mean metrics per (prior, variant, strategy, K, C, noise) over seeds and images.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub prior: String,
    pub variant: String,
    pub strategy: String,
    pub kernel: Option<usize>,
    pub compression: f64,
    pub noise_var: f64,
    pub mean_ssim: f64,
    pub mean_psnr: f64,
    pub rows: usize,
    pub failures: usize,
}

/// Groups rows in first-appearance order. Infinite PSNR is capped at 100 dB for the mean.
pub fn summarize(rows: &[SweepRow]) -> Vec<CellSummary> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<&SweepRow>> = HashMap::new();
    for row in rows {
        let key = format!(
            "{}|{}|{}|{:?}|{}|{}",
            row.prior, row.variant, row.strategy, row.kernel, row.compression, row.noise_var
        );
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(row);
    }
    order
        .iter()
        .map(|k| {
            let g = &groups[k];
            let ok: Vec<&&SweepRow> = g.iter().filter(|r| r.ssim.is_some()).collect();
            let n = ok.len().max(1) as f64;
            CellSummary {
                prior: g[0].prior.clone(),
                variant: g[0].variant.clone(),
                strategy: g[0].strategy.clone(),
                kernel: g[0].kernel,
                compression: g[0].compression,
                noise_var: g[0].noise_var,
                mean_ssim: ok.iter().filter_map(|r| r.ssim).sum::<f64>() / n,
                mean_psnr: ok
                    .iter()
                    .filter_map(|r| r.psnr_db())
                    .map(|p| p.min(100.0))
                    .sum::<f64>()
                    / n,
                rows: g.len(),
                failures: g.len() - ok.len(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(dir: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.input.count = 2;
        cfg.input.side = 16;
        cfg.input.train_count = 2;
        cfg.plan.compressions = vec![2.0, 1.0];
        cfg.reconstruction.tuning = Tuning::Fixed;
        cfg.reconstruction.epochs = 20;
        cfg.reconstruction.priors = vec![ReconPrior::Dct, ReconPrior::ZeroFilled];
        cfg.output.dir = dir.to_path_buf();
        cfg.output.threads = 2;
        cfg
    }

    #[test]
    fn unit_enumeration() {
        let mut cfg = ExperimentConfig::default();
        cfg.plan.variants = vec![Variant::Pixel, Variant::Fourier];
        cfg.plan.kernels = vec![2, 4];
        cfg.plan.strategies = vec![FourierStrategy::Uniform, FourierStrategy::Radial];
        cfg.plan.compressions = vec![1.0, 2.0, 4.0];
        cfg.noise.variances = vec![0.0, 0.1];
        cfg.reconstruction.priors = vec![ReconPrior::Dct, ReconPrior::Tv];
        assert_eq!(enumerate_units(&cfg).len(), (2 * 3 + 2 * 3) * 2 * 2);
        cfg.plan.compressions.clear();
        assert!(enumerate_units(&cfg).is_empty());
    }

    #[test]
    fn empty_grid_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(dir.path());
        cfg.plan.compressions.clear();
        let summary = run_sweep(&cfg).unwrap();
        assert!(summary.rows.is_empty());
        let text = fs::read_to_string(&summary.path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_VERSION_LINE);
        assert!(lines[1].starts_with("prior,variant,strategy,K,b,m,C,"));
    }

    #[test]
    fn failures_become_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(dir.path());
        cfg.reconstruction.priors = vec![ReconPrior::Diffusion];
        cfg.reconstruction.weights = Some(dir.path().join("missing.cssm"));
        let summary = run_sweep(&cfg).unwrap();
        assert_eq!(summary.rows.len(), 4);
        assert!(summary.rows.iter().all(|r| r.error.is_some() && r.ssim.is_none()));
    }

    #[test]
    fn rows_round_trip_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let summary = run_sweep(&small_config(dir.path())).unwrap();
        assert_eq!(summary.rows.len(), 2 * 2 * 2);
        assert_eq!(read_rows(&summary.path).unwrap(), summary.rows);
        let again = run_sweep(&small_config(dir.path())).unwrap();
        assert_eq!(again.units_run, 0);
        assert_eq!(again.rows, summary.rows);
    }

    #[test]
    fn gaussian_fit() {
        let a = Image::filled(4, 1.0);
        let b = Image::filled(4, -1.0);
        let (mean, var) = fit_gaussian(&[a, b]).unwrap();
        assert!(mean.data().iter().all(|v| *v == 0.0));
        assert_eq!(var, 1.0);
    }
}

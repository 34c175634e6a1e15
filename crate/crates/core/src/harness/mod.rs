//! File formats, synthetic data and the experiment sweep.

pub mod config;
pub mod mrc;
pub mod phantom;
pub mod sweep;

pub use config::{ExperimentConfig, ReconPrior, Variant};
pub use mrc::{encode_mrc, read_mrc, write_mrc, MrcStack};
pub use phantom::synth_particles;
pub use sweep::{run_sweep, summarize, SweepRow, SweepSummary};

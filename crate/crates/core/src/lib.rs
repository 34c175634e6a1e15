//! Compressive acquisition and reconstruction of square 2D images.
//!
//! The crate is organised the same way a measurement flows through it:
//!
//! - [`transforms`]: FFT, DCT, Haar wavelet, anisotropic TV and soft thresholding.
//! - [`masks`]: Bernoulli pixel masks and the uniform / annular / radial Fourier masks.
//! - [`forward`]: the measurement operator, its adjoint and Gaussian measurement noise.
//! - [`sparse`]: proximal gradient recovery (ISTA) with DCT, wavelet and TV priors.
//! - [`diffusion`]: DDPM noise schedules, score models and Tweedie denoising.
//! - [`sampler`]: posterior sampling with Nesterov-momentum measurement guidance.
//! - [`metrics`]: SSIM, PSNR and Fourier ring/shell correlation.
//! - [`harness`]: MRC stacks, synthetic phantoms, sweep configuration and the sweep driver.
//!
//! Runnable walkthroughs for each area live under `examples/`.

pub mod diffusion;
pub mod error;
pub mod forward;
pub mod harness;
pub mod image;
pub mod masks;
pub mod metrics;
pub mod sampler;
pub mod sparse;
pub mod transforms;

pub use error::{Error, Result};
pub use image::{Image, SpectralImage};

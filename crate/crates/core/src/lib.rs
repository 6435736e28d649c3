//! Underwater image restoration.
//!
//! Images are routed by a red-deficit rule to either a low-light branch
//! (IlluminateNet, a per-image fit of a global light against gray-world and
//! luminous losses) or a spectral equalization filter. Both branches feed the
//! AOCM contrast stretch and hue speckle filter, after which Hydro-OpticNet
//! fits depth-dependent backscatter and attenuation models to the image and
//! inverts them.
//!
//! Every numeric routine is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision used by the CLI.
//!
//! ```
//! use diver_core::{pipeline::{process_image, PipelineConfig, StageSet, Stage}, Image};
//!
//! let img = Image::from_fn(16, 16, |x, y| [0.2, 0.4 + 0.01 * x as f64, 0.5 + 0.01 * y as f64]);
//! let cfg = PipelineConfig { stages: StageSet::through(Stage::Aocm), ..Default::default() };
//! let out = process_image(&img, None, &cfg).unwrap();
//! assert_eq!(out.output().unwrap().dims(), (16, 16));
//! ```

mod error;
mod scalar;

pub mod aocm;
pub mod hydrooptic;
pub mod illuminate;
pub mod imgcore;
pub mod metrics;
pub mod optim;
pub mod pipeline;
pub mod router;
pub mod sef;
pub mod selftest;

pub use error::{DiverError, Result};
pub use scalar::{sigmoid, softplus, Scalar};

/// Double-precision image.
pub type Image = imgcore::ImagePlanar<f64>;
/// Single-precision image.
pub type Image32 = imgcore::ImagePlanar<f32>;
/// Double-precision depth map.
pub type Depth = imgcore::DepthMap<f64>;
/// Single-precision depth map.
pub type Depth32 = imgcore::DepthMap<f32>;
pub type Config = pipeline::PipelineConfig<f64>;
pub type Config32 = pipeline::PipelineConfig<f32>;
pub type VeilParams = hydrooptic::VeilParams<f64>;
pub type AttenParams = hydrooptic::AttenParams<f64>;

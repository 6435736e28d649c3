//! Image buffers, channel statistics, color-space conversions and 3x3 kernels.
//!
//! Samples live in `[0, 1]`, gamma-encoded as captured. Every convolution
//! uses replicate padding at the borders.

mod color;
mod conv;
mod image;
pub mod io;
mod stats;

pub use self::color::{
    hsv_to_rgb, hsv_to_rgb_px, lab_to_rgb, lab_to_rgb_px, rgb_to_hsv, rgb_to_hsv_px, rgb_to_lab,
    rgb_to_lab_px, HsvImage, LabImage, LAB_NEUTRAL,
};
pub use self::conv::{convolve3x3, convolve3x3_adjoint, Kernel3, SOBEL_X, SOBEL_Y};
pub use self::image::{DepthMap, ImagePlanar, Plane};
pub use self::stats::{channel_stats, plane_stats, ChannelStats, PlaneStats};

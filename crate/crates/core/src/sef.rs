//! Spectral equalization for adequately lit inputs: every channel is pulled
//! toward the strongest channel mean with a power-law gain.

use crate::error::{DiverError, Result};
use crate::imgcore::ImagePlanar;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SefConfig<T> {
    /// Correction strength in `(0, 1]`.
    pub alpha: T,
    pub epsilon: T,
}

impl<T: Scalar> Default for SefConfig<T> {
    fn default() -> Self {
        Self {
            alpha: T::lit(0.5),
            epsilon: T::lit(1e-6),
        }
    }
}

impl<T: Scalar> SefConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero() && self.alpha <= T::one()) {
            return Err(DiverError::InvalidConfig(format!(
                "sef.alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.epsilon > T::zero()) {
            return Err(DiverError::InvalidConfig(format!(
                "sef.epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Per-channel gains `max_mean / (mean_c + eps)`.
pub fn sef_gains<T: Scalar>(means: [T; 3], epsilon: T) -> [T; 3] {
    let sup = means[0].max(means[1]).max(means[2]);
    means.map(|m| sup / (m + epsilon))
}

/// Scales channel `c` by `gain_c ^ alpha` and clamps to `[0, 1]`.
///
/// `alpha` is not range-checked here so the small-alpha limit can be probed;
/// pipeline configuration goes through [`SefConfig::validate`].
pub fn apply_sef<T: Scalar>(img: &ImagePlanar<T>, cfg: &SefConfig<T>) -> ImagePlanar<T> {
    let gains = sef_gains(img.channel_means(), cfg.epsilon).map(|g| g.powf(cfg.alpha));
    img.map_channels(|c, v| (v * gains[c]).clamp01())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_image_is_unchanged() {
        let img = ImagePlanar::<f64>::from_fn(4, 4, |x, y| {
            let v = (x + y) as f64 / 8.0;
            [v, v, v]
        });
        let out = apply_sef(&img, &SefConfig::default());
        for c in 0..3 {
            for (a, b) in out.plane(c).iter().zip(img.plane(c)) {
                assert!((a - b).abs() <= 1e-5);
            }
        }
    }

    #[test]
    fn gains_match_direct_evaluation() {
        let g = sef_gains([0.2f64, 0.6, 0.4], 1e-12);
        assert!(
            (g[0] - 3.0).abs() < 1e-9 && (g[1] - 1.0).abs() < 1e-9 && (g[2] - 1.5).abs() < 1e-9
        );
    }

    #[test]
    fn rejects_bad_alpha() {
        assert!(SefConfig {
            alpha: 0.0f64,
            epsilon: 1e-6
        }
        .validate()
        .is_err());
        assert!(SefConfig {
            alpha: 1.5f64,
            epsilon: 1e-6
        }
        .validate()
        .is_err());
        assert!(SefConfig {
            alpha: 1.0f64,
            epsilon: 0.0
        }
        .validate()
        .is_err());
    }
}

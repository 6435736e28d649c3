//! Adaptive optical correction: dual-stretch contrast enhancement followed
//! by hue-selective chroma suppression.

use crate::error::{DiverError, Result};
use crate::imgcore::{
    channel_stats, lab_to_rgb_px, rgb_to_hsv_px, rgb_to_lab_px, ImagePlanar, PlaneStats,
    LAB_NEUTRAL,
};
use crate::scalar::Scalar;

/// Piecewise-linear dual stretch of one channel around its pivot
/// `t = (mean + median) / 2`. Full scale is 1.0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualStretch<T> {
    pub min: T,
    pub max: T,
    pub pivot: T,
}

impl<T: Scalar> DualStretch<T> {
    pub fn from_stats(s: &PlaneStats<T>) -> Self {
        let pivot = ((s.mean + s.median) / T::lit(2.0)).max(s.min).min(s.max);
        Self {
            min: s.min,
            max: s.max,
            pivot,
        }
    }

    /// Lower stretch: `(x - m)(1 - m)/(t - m) + m` below the pivot, full scale above.
    pub fn lower(&self, x: T) -> T {
        if x >= self.pivot {
            return T::one();
        }
        (x - self.min) * (T::one() - self.min) / (self.pivot - self.min) + self.min
    }

    /// Upper stretch: zero below the pivot, `(x - t)/(M - t)` above.
    pub fn upper(&self, x: T) -> T {
        if x < self.pivot {
            return T::zero();
        }
        if self.max <= self.pivot {
            return T::one();
        }
        (x - self.pivot) / (self.max - self.pivot)
    }

    /// Average of both stretches; constant channels pass through.
    pub fn map(&self, x: T) -> T {
        if self.max <= self.min {
            return x;
        }
        ((self.lower(x) + self.upper(x)) / T::lit(2.0)).clamp01()
    }
}

/// Contrast enhancement filter over all three channels.
pub fn cef<T: Scalar>(img: &ImagePlanar<T>) -> ImagePlanar<T> {
    let stretch = channel_stats(img)
        .channels
        .map(|s| DualStretch::from_stats(&s));
    img.map_channels(|c, v| stretch[c].map(v))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HssfConfig<T> {
    /// Lower hue bound in degrees.
    pub hue_low: T,
    /// Upper hue bound in degrees.
    pub hue_high: T,
    pub s_min: T,
    pub v_min: T,
    /// Chroma suppression factor in `[0, 1]`.
    pub lambda: T,
}

impl<T: Scalar> Default for HssfConfig<T> {
    fn default() -> Self {
        Self {
            hue_low: T::lit(160.0),
            hue_high: T::lit(200.0),
            s_min: T::lit(0.3),
            v_min: T::lit(0.3),
            lambda: T::lit(0.6),
        }
    }
}

impl<T: Scalar> HssfConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: T| v >= T::zero() && v <= T::one();
        if !(self.hue_low >= T::zero()
            && self.hue_low <= self.hue_high
            && self.hue_high < T::lit(360.0))
        {
            return Err(DiverError::InvalidConfig(format!(
                "aocm hue band must satisfy 0 <= low <= high < 360, got [{}, {}]",
                self.hue_low, self.hue_high
            )));
        }
        if !in_unit(self.lambda) || !in_unit(self.s_min) || !in_unit(self.v_min) {
            return Err(DiverError::InvalidConfig(
                "aocm.lambda, s_min and v_min must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn selects(&self, [h, s, v]: [T; 3]) -> bool {
        h >= self.hue_low && h <= self.hue_high && s >= self.s_min && v >= self.v_min
    }
}

/// Pulls an offset-encoded `a` or `b` value toward the neutral 128.
#[inline]
pub fn suppress_chroma<T: Scalar>(v: T, lambda: T) -> T {
    let n = T::lit(LAB_NEUTRAL);
    n + (v - n) * (T::one() - lambda)
}

/// Binary hue mask over pixels (row-major).
pub fn hue_mask<T: Scalar>(img: &ImagePlanar<T>, cfg: &HssfConfig<T>) -> Vec<bool> {
    (0..img.pixel_count())
        .map(|i| cfg.selects(rgb_to_hsv_px(img.pixel(i))))
        .collect()
}

/// Hue speckle suppression. Masked pixels get their Lab chroma scaled by
/// `1 - lambda`; all other pixels are copied unchanged.
pub fn hssf<T: Scalar>(img: &ImagePlanar<T>, cfg: &HssfConfig<T>) -> ImagePlanar<T> {
    let mut out = img.clone();
    if cfg.lambda == T::zero() {
        return out;
    }
    for (i, masked) in hue_mask(img, cfg).into_iter().enumerate() {
        if masked {
            let [l, a, b] = rgb_to_lab_px(img.pixel(i));
            out.set_pixel(
                i,
                lab_to_rgb_px([
                    l,
                    suppress_chroma(a, cfg.lambda),
                    suppress_chroma(b, cfg.lambda),
                ]),
            );
        }
    }
    out
}

/// CEF followed by HSSF.
pub fn aocm<T: Scalar>(img: &ImagePlanar<T>, cfg: &HssfConfig<T>) -> ImagePlanar<T> {
    hssf(&cef(img), cfg)
}

//! Illumination assessment: decides between the low-light and the
//! spectral-equalization branch from channel means alone.

use serde::Serialize;

use crate::imgcore::ImagePlanar;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Branch {
    LowLight,
    WellLit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RouteDecision<T> {
    pub branch: Branch,
    pub r_avg: T,
    pub g_avg: T,
    pub b_avg: T,
}

/// Applies the red-deficit rule to precomputed channel means.
///
/// Low light iff `r < g / 5` or `r < b / 5`; equality is well lit.
pub fn classify<T: Scalar>([r_avg, g_avg, b_avg]: [T; 3]) -> RouteDecision<T> {
    let five = T::lit(5.0);
    let branch = if r_avg < g_avg / five || r_avg < b_avg / five {
        Branch::LowLight
    } else {
        Branch::WellLit
    };
    RouteDecision {
        branch,
        r_avg,
        g_avg,
        b_avg,
    }
}

pub fn assess_illumination<T: Scalar>(img: &ImagePlanar<T>) -> RouteDecision<T> {
    classify(img.channel_means())
}

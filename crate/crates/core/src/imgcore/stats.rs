use serde::Serialize;

use super::image::ImagePlanar;
use crate::scalar::Scalar;

/// Mean, median, minimum and maximum of one sample set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlaneStats<T> {
    pub mean: T,
    pub median: T,
    pub min: T,
    pub max: T,
}

/// Per-channel [`PlaneStats`] for R, G, B.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelStats<T> {
    pub channels: [PlaneStats<T>; 3],
}

impl<T: Scalar> ChannelStats<T> {
    pub fn means(&self) -> [T; 3] {
        self.channels.map(|s| s.mean)
    }
}

/// Exact statistics of a sample set. The median of an even-sized set is the
/// mean of its two central order statistics.
///
/// Panics on an empty slice.
pub fn plane_stats<T: Scalar>(samples: &[T]) -> PlaneStats<T> {
    assert!(!samples.is_empty(), "statistics of an empty plane");
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / T::lit(2.0)
    };
    let mean = crate::scalar::mean(samples);
    PlaneStats {
        // summation rounding can push the mean a hair outside [min, max]
        mean: mean.max(sorted[0]).min(sorted[n - 1]),
        median,
        min: sorted[0],
        max: sorted[n - 1],
    }
}

pub fn channel_stats<T: Scalar>(img: &ImagePlanar<T>) -> ChannelStats<T> {
    ChannelStats {
        channels: [0, 1, 2].map(|c| plane_stats(img.plane(c))),
    }
}

use std::path::{Path, PathBuf};

use crate::error::{DiverError, Result};
use crate::imgcore::{io, DepthMap, ImagePlanar, Plane};
use crate::scalar::Scalar;

/// Where depth maps come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DepthSource {
    /// 16-bit PNGs named `<stem>.png` in this directory.
    Files(PathBuf),
    /// Red-attenuation prior computed from the image itself.
    FallbackPrior,
}

/// Which depth a given image actually used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DepthOrigin {
    File(PathBuf),
    Prior,
}

impl DepthOrigin {
    pub fn label(&self) -> String {
        match self {
            DepthOrigin::File(p) => p.display().to_string(),
            DepthOrigin::Prior => "prior".to_string(),
        }
    }
}

/// `normalized(max(G, B) - R)`: water absorbs red first, so a larger
/// green/blue excess suggests a longer path.
pub fn fallback_prior<T: Scalar>(img: &ImagePlanar<T>) -> DepthMap<T> {
    let (w, h) = img.dims();
    let raw: Vec<T> = (0..img.pixel_count())
        .map(|i| {
            let [r, g, b] = img.pixel(i);
            g.max(b) - r
        })
        .collect();
    let (lo, hi) = raw
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    let data = if span > T::zero() {
        raw.into_iter()
            .map(|v| ((v - lo) / span).clamp01())
            .collect()
    } else {
        vec![T::lit(0.5); raw.len()]
    };
    DepthMap::from_plane(Plane::new(w, h, data).expect("image dimensions"))
        .expect("values in [0, 1]")
}

pub fn depth_file(dir: &Path, stem: &str) -> PathBuf {
    dir.join(format!("{stem}.png"))
}

/// Loads or derives a depth map for `img`, rescaled to `[0, 1]`.
///
/// In file mode the map must exist and match the image size.
pub fn depth_for<T: Scalar>(
    img: &ImagePlanar<T>,
    source: &DepthSource,
    stem: &str,
) -> Result<(DepthMap<T>, DepthOrigin)> {
    match source {
        DepthSource::FallbackPrior => Ok((fallback_prior(img), DepthOrigin::Prior)),
        DepthSource::Files(dir) => {
            let path = depth_file(dir, stem);
            if !path.is_file() {
                return Err(DiverError::MissingDepth(format!(
                    "{stem} (looked for {})",
                    path.display()
                )));
            }
            let depth: DepthMap<T> = io::load_depth(&path)?;
            img.ensure_same_dims(depth.dims())?;
            Ok((depth.normalized(), DepthOrigin::File(path)))
        }
    }
}

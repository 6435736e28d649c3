//! 8-bit RGB and 16-bit depth file ingestion/emission.

use std::path::Path;

use image::{ImageBuffer, Rgb};

use super::image::{DepthMap, ImagePlanar, Plane};
use crate::error::{DiverError, Result};
use crate::scalar::Scalar;

/// Decodes a PNG or JPEG into `[0, 1]` samples (`v / 255`).
pub fn load_rgb<T: Scalar>(path: &Path) -> Result<ImagePlanar<T>> {
    let img = image::open(path).map_err(|source| DiverError::Image {
        path: path.to_owned(),
        source,
    })?;
    Ok(from_rgb8(&img.to_rgb8()))
}

pub fn from_rgb8<T: Scalar>(img: &image::RgbImage) -> ImagePlanar<T> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let scale = T::lit(255.0);
    ImagePlanar::from_fn(w, h, |x, y| {
        let p = img.get_pixel(x as u32, y as u32);
        [0, 1, 2].map(|c| T::lit(p[c] as f64) / scale)
    })
}

/// Clamps and quantizes with `round(v * 255)`.
pub fn to_rgb8<T: Scalar>(img: &ImagePlanar<T>) -> image::RgbImage {
    let (w, h) = img.dims();
    ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let px = img.pixel(y as usize * w + x as usize);
        Rgb(px.map(|v| quantize8(v)))
    })
}

#[inline]
pub fn quantize8<T: Scalar>(v: T) -> u8 {
    let v = if v.is_finite() {
        v.clamp01()
    } else {
        T::zero()
    };
    (v * T::lit(255.0)).round().to_u8().unwrap_or(0)
}

/// Writes an 8-bit image; the format follows the file extension.
pub fn save_rgb<T: Scalar>(path: &Path, img: &ImagePlanar<T>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| DiverError::Io {
            path: parent.to_owned(),
            source,
        })?;
    }
    to_rgb8(img).save(path).map_err(|source| DiverError::Image {
        path: path.to_owned(),
        source,
    })
}

/// Decodes a grayscale depth file as `v / 65535` (8-bit files are widened first).
pub fn load_depth<T: Scalar>(path: &Path) -> Result<DepthMap<T>> {
    let img = image::open(path).map_err(|source| DiverError::Image {
        path: path.to_owned(),
        source,
    })?;
    let luma = img.to_luma16();
    let (w, h) = (luma.width() as usize, luma.height() as usize);
    let scale = T::lit(65535.0);
    DepthMap::from_plane(Plane::from_fn(w, h, |x, y| {
        T::lit(luma.get_pixel(x as u32, y as u32)[0] as f64) / scale
    }))
}

/// Writes a depth map in `[0, 1]` as a 16-bit grayscale PNG.
pub fn save_depth<T: Scalar>(path: &Path, depth: &DepthMap<T>) -> Result<()> {
    let (w, h) = depth.dims();
    let buf: ImageBuffer<image::Luma<u16>, Vec<u16>> =
        ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
            let v = depth.plane().get(x as usize, y as usize).clamp01();
            image::Luma([(v * T::lit(65535.0)).round().to_u16().unwrap_or(0)])
        });
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| DiverError::Io {
            path: parent.to_owned(),
            source,
        })?;
    }
    buf.save(path).map_err(|source| DiverError::Image {
        path: path.to_owned(),
        source,
    })
}

//! Full-reference (PSNR, SSIM), no-reference (UIQM, UCIQE) and gray-patch
//! (GPMAE) quality measures. All scores are computed in `f64`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{DiverError, Result};
use crate::imgcore::{convolve3x3, rgb_to_lab, ImagePlanar, Plane, SOBEL_X, SOBEL_Y};
use crate::scalar::Scalar;

/// Reported PSNR for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

pub const UIQM_COEFFS: [f64; 3] = [0.0282, 0.2953, 3.5753];
pub const UCIQE_COEFFS: [f64; 3] = [0.4680, 0.2745, 0.2576];

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

const UIQM_BLOCK: usize = 8;
const UICM_TRIM: f64 = 0.1;
const UISM_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

fn to_f64<T: Scalar>(img: &ImagePlanar<T>) -> [Vec<f64>; 3] {
    [0, 1, 2].map(|c| img.plane(c).iter().map(|v| v.as_f64()).collect())
}

/// Peak signal-to-noise ratio with peak 1.0, capped at [`PSNR_CAP_DB`].
pub fn psnr<T: Scalar>(a: &ImagePlanar<T>, b: &ImagePlanar<T>) -> Result<f64> {
    a.ensure_same_dims(b.dims())?;
    let n = 3 * a.pixel_count();
    let sse: f64 = (0..3)
        .flat_map(|c| a.plane(c).iter().zip(b.plane(c)))
        .map(|(&x, &y)| {
            let d = x.as_f64() - y.as_f64();
            d * d
        })
        .sum();
    let mse = sse / n as f64;
    if mse <= 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-(i as f64 - r).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable valid-region filter; output is `(w - 10) x (h - 10)`.
fn filter_valid(x: &[f64], w: usize, h: usize, g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let (ow, oh) = (w + 1 - k, h + 1 - k);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for ox in 0..ow {
            rows[y * ow + ox] = (0..k).map(|i| g[i] * x[y * w + ox + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for oy in 0..oh {
        for ox in 0..ow {
            out[oy * ow + ox] = (0..k).map(|i| g[i] * rows[(oy + i) * ow + ox]).sum();
        }
    }
    out
}

fn ssim_plane(a: &[f64], b: &[f64], w: usize, h: usize, g: &[f64]) -> f64 {
    let c1 = (SSIM_K1 * 1.0f64).powi(2);
    let c2 = (SSIM_K2 * 1.0f64).powi(2);
    let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<_>>();
    let mu_a = filter_valid(a, w, h, g);
    let mu_b = filter_valid(b, w, h, g);
    let aa = filter_valid(&prod(a, a), w, h, g);
    let bb = filter_valid(&prod(b, b), w, h, g);
    let ab = filter_valid(&prod(a, b), w, h, g);
    let n = mu_a.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    total / n as f64
}

/// Single-scale SSIM (11x11 Gaussian window, sigma 1.5, peak 1.0) averaged
/// over channels and all fully-covered window positions.
pub fn ssim<T: Scalar>(a: &ImagePlanar<T>, b: &ImagePlanar<T>) -> Result<f64> {
    a.ensure_same_dims(b.dims())?;
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(DiverError::ImageTooSmall {
            width: w,
            height: h,
            min: SSIM_WINDOW,
        });
    }
    let g = gaussian_window();
    let (pa, pb) = (to_f64(a), to_f64(b));
    Ok((0..3)
        .map(|c| ssim_plane(&pa[c], &pb[c], w, h, &g))
        .sum::<f64>()
        / 3.0)
}

fn trimmed_mean(values: &[f64], trim: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let k = (trim * v.len() as f64).floor() as usize;
    let kept = &v[k..v.len() - k];
    kept.iter().sum::<f64>() / kept.len() as f64
}

/// Colorfulness from alpha-trimmed statistics of the RG and YB opponent channels (0..255 scale).
pub fn uicm<T: Scalar>(img: &ImagePlanar<T>) -> f64 {
    let [r, g, b] = to_f64(img);
    let rg: Vec<f64> = r.iter().zip(&g).map(|(r, g)| 255.0 * (r - g)).collect();
    let yb: Vec<f64> = (0..r.len())
        .map(|i| 255.0 * ((r[i] + g[i]) / 2.0 - b[i]))
        .collect();
    let stats = |x: &[f64]| {
        let mu = trimmed_mean(x, UICM_TRIM);
        let var = x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / x.len() as f64;
        (mu, var)
    };
    let (mu_rg, var_rg) = stats(&rg);
    let (mu_yb, var_yb) = stats(&yb);
    -0.0268 * (mu_rg * mu_rg + mu_yb * mu_yb).sqrt() + 0.1586 * (var_rg + var_yb).sqrt()
}

/// Whole `UIQM_BLOCK`-sized blocks covering the top-left crop of a `w x h` grid.
fn blocks(w: usize, h: usize) -> impl Iterator<Item = Vec<usize>> {
    let (k1, k2) = (h / UIQM_BLOCK, w / UIQM_BLOCK);
    (0..k1).flat_map(move |by| {
        (0..k2).map(move |bx| {
            let mut idx = Vec::with_capacity(UIQM_BLOCK * UIQM_BLOCK);
            for y in by * UIQM_BLOCK..(by + 1) * UIQM_BLOCK {
                for x in bx * UIQM_BLOCK..(bx + 1) * UIQM_BLOCK {
                    idx.push(y * w + x);
                }
            }
            idx
        })
    })
}

fn block_count(w: usize, h: usize) -> usize {
    (h / UIQM_BLOCK) * (w / UIQM_BLOCK)
}

fn eme(x: &[f64], w: usize, h: usize) -> f64 {
    let n = block_count(w, h);
    if n == 0 {
        return 0.0;
    }
    let sum: f64 = blocks(w, h)
        .filter_map(|idx| {
            let (lo, hi) = idx
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    (lo.min(x[i]), hi.max(x[i]))
                });
            (lo > 0.0 && hi > 0.0).then(|| (hi / lo).ln())
        })
        .sum();
    2.0 / n as f64 * sum
}

/// Sharpness: Sobel-magnitude-weighted EME per channel, luminance-weighted.
pub fn uism<T: Scalar>(img: &ImagePlanar<T>) -> f64 {
    let (w, h) = img.dims();
    (0..3)
        .map(|c| {
            let p = Plane::new(
                w,
                h,
                img.plane(c).iter().map(|v| 255.0 * v.as_f64()).collect(),
            )
            .expect("same dims");
            let gx = convolve3x3(&p, &SOBEL_X);
            let gy = convolve3x3(&p, &SOBEL_Y);
            let edge: Vec<f64> = (0..w * h)
                .map(|i| gx.as_slice()[i].hypot(gy.as_slice()[i]) * p.as_slice()[i])
                .collect();
            UISM_WEIGHTS[c] * eme(&edge, w, h)
        })
        .sum()
}

/// Contrast: logAMEE over blocks spanning all three channels.
pub fn uiconm<T: Scalar>(img: &ImagePlanar<T>) -> f64 {
    let (w, h) = img.dims();
    let n = block_count(w, h);
    if n == 0 {
        return 0.0;
    }
    let planes = to_f64(img);
    let sum: f64 = blocks(w, h)
        .map(|idx| {
            let (lo, hi) = planes
                .iter()
                .flat_map(|p| idx.iter().map(move |&i| 255.0 * p[i]))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            let (top, bot) = (hi - lo, hi + lo);
            if top > 0.0 && bot > 0.0 {
                (top / bot) * (top / bot).ln()
            } else {
                0.0
            }
        })
        .sum();
    -sum / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UiqmComponents {
    pub uicm: f64,
    pub uism: f64,
    pub uiconm: f64,
}

impl UiqmComponents {
    pub fn score(&self) -> f64 {
        UIQM_COEFFS[0] * self.uicm + UIQM_COEFFS[1] * self.uism + UIQM_COEFFS[2] * self.uiconm
    }
}

pub fn uiqm_components<T: Scalar>(img: &ImagePlanar<T>) -> UiqmComponents {
    UiqmComponents {
        uicm: uicm(img),
        uism: uism(img),
        uiconm: uiconm(img),
    }
}

pub fn uiqm<T: Scalar>(img: &ImagePlanar<T>) -> f64 {
    uiqm_components(img).score()
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UciqeComponents {
    pub chroma_std: f64,
    pub luminance_contrast: f64,
    pub saturation_mean: f64,
}

impl UciqeComponents {
    pub fn score(&self) -> f64 {
        UCIQE_COEFFS[0] * self.chroma_std
            + UCIQE_COEFFS[1] * self.luminance_contrast
            + UCIQE_COEFFS[2] * self.saturation_mean
    }
}

/// UCIQE terms on Lab with `L` and chroma divided by 100.
pub fn uciqe_components<T: Scalar>(img: &ImagePlanar<T>) -> UciqeComponents {
    let lab = rgb_to_lab(img);
    let n = lab.l.len() as f64;
    let neutral = crate::imgcore::LAB_NEUTRAL;
    let l: Vec<f64> = lab.l.iter().map(|v| v.as_f64() / 100.0).collect();
    let chroma: Vec<f64> = lab
        .a
        .iter()
        .zip(&lab.b)
        .map(|(a, b)| (a.as_f64() - neutral).hypot(b.as_f64() - neutral) / 100.0)
        .collect();
    let mean_c = chroma.iter().sum::<f64>() / n;
    let chroma_std = (chroma.iter().map(|c| (c - mean_c).powi(2)).sum::<f64>() / n).sqrt();
    let mut sorted = l.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let luminance_contrast = quantile(&sorted, 0.99) - quantile(&sorted, 0.01);
    let saturation_mean = chroma
        .iter()
        .zip(&l)
        .map(|(c, l)| if *l > 1e-6 { c / l } else { 0.0 })
        .sum::<f64>()
        / n;
    UciqeComponents {
        chroma_std,
        luminance_contrast,
        saturation_mean,
    }
}

pub fn uciqe<T: Scalar>(img: &ImagePlanar<T>) -> f64 {
    uciqe_components(img).score()
}

/// Axis-aligned rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PatchRect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

/// Nonempty list of neutral reference patches.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GrayPatchSet {
    patches: Vec<PatchRect>,
}

impl GrayPatchSet {
    pub fn new(patches: Vec<PatchRect>) -> Result<Self> {
        if patches.is_empty() {
            return Err(DiverError::InvalidConfig("gray patch set is empty".into()));
        }
        if let Some(i) = patches.iter().position(|p| p.w == 0 || p.h == 0) {
            return Err(DiverError::InvalidConfig(format!(
                "gray patch {i} has zero area"
            )));
        }
        Ok(Self { patches })
    }

    pub fn patches(&self) -> &[PatchRect] {
        &self.patches
    }

    pub fn validate_for(&self, width: usize, height: usize) -> Result<()> {
        match self
            .patches
            .iter()
            .position(|p| p.x + p.w > width || p.y + p.h > height)
        {
            Some(index) => Err(DiverError::PatchOutOfBounds { index }),
            None => Ok(()),
        }
    }
}

/// Gray-patch annotations keyed by image stem. The key `*` holds patches
/// that apply to every image.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PatchFile {
    entries: BTreeMap<String, Vec<PatchRect>>,
}

pub const ANY_STEM: &str = "*";

impl PatchFile {
    /// Parses lines of `stem x y w h` or `x y w h`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, Vec<PatchRect>> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let (stem, nums) = match fields.len() {
                4 => (ANY_STEM, &fields[..]),
                5 => (fields[0], &fields[1..]),
                n => {
                    return Err(DiverError::Parse {
                        line: i + 1,
                        message: format!("expected 4 or 5 fields, found {n}"),
                    });
                }
            };
            let mut v = [0usize; 4];
            for (slot, s) in v.iter_mut().zip(nums) {
                *slot = s.parse().map_err(|_| DiverError::Parse {
                    line: i + 1,
                    message: format!("`{s}` is not a nonnegative integer"),
                })?;
            }
            entries
                .entry(stem.to_string())
                .or_default()
                .push(PatchRect {
                    x: v[0],
                    y: v[1],
                    w: v[2],
                    h: v[3],
                });
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| DiverError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Patches for `stem` followed by the shared ones, if any.
    pub fn for_stem(&self, stem: &str) -> Option<GrayPatchSet> {
        let mut all: Vec<PatchRect> = self.entries.get(stem).cloned().unwrap_or_default();
        if stem != ANY_STEM {
            all.extend(self.entries.get(ANY_STEM).into_iter().flatten().copied());
        }
        GrayPatchSet::new(all).ok()
    }
}

/// Mean angle in degrees between each patch's mean color and the gray axis.
pub fn gpmae<T: Scalar>(img: &ImagePlanar<T>, patches: &GrayPatchSet) -> Result<f64> {
    let (w, h) = img.dims();
    patches.validate_for(w, h)?;
    let mut total = 0.0;
    for (index, p) in patches.patches().iter().enumerate() {
        let mut m = [0.0f64; 3];
        for y in p.y..p.y + p.h {
            for x in p.x..p.x + p.w {
                let px = img.pixel(y * w + x);
                for c in 0..3 {
                    m[c] += px[c].as_f64();
                }
            }
        }
        let k = (p.w * p.h) as f64;
        let m = m.map(|v| v / k);
        let norm = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
        if !(norm > 0.0) {
            return Err(DiverError::ZeroNormPatch { index });
        }
        // atan2 of |m x 1| and m . 1 stays exact on the gray axis, unlike acos near 1
        let cross = [m[1] - m[2], m[2] - m[0], m[0] - m[1]];
        let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
        total += sin.atan2(m[0] + m[1] + m[2]).to_degrees();
    }
    Ok(total / patches.patches().len() as f64)
}

/// Every metric that can be computed for one image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QualityScores {
    pub uiqm: f64,
    pub uciqe: f64,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub gpmae: Option<f64>,
}

pub fn assess<T: Scalar>(
    img: &ImagePlanar<T>,
    reference: Option<&ImagePlanar<T>>,
    patches: Option<&GrayPatchSet>,
) -> Result<QualityScores> {
    let (psnr, ssim) = match reference {
        Some(r) => {
            let s = if img.width().min(img.height()) >= SSIM_WINDOW {
                Some(ssim(img, r)?)
            } else {
                None
            };
            (Some(psnr(img, r)?), s)
        }
        None => (None, None),
    };
    Ok(QualityScores {
        uiqm: uiqm(img),
        uciqe: uciqe(img),
        psnr,
        ssim,
        gpmae: patches.map(|p| gpmae(img, p)).transpose()?,
    })
}

/// Mean of each metric over the images where it is present.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct QualityAggregate {
    pub count: usize,
    pub uiqm: Option<f64>,
    pub uciqe: Option<f64>,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub gpmae: Option<f64>,
}

pub fn aggregate<'a>(scores: impl IntoIterator<Item = &'a QualityScores>) -> QualityAggregate {
    let scores: Vec<&QualityScores> = scores.into_iter().collect();
    let avg = |f: &dyn Fn(&QualityScores) -> Option<f64>| {
        let v: Vec<f64> = scores.iter().filter_map(|s| f(s)).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    QualityAggregate {
        count: scores.len(),
        uiqm: avg(&|s| Some(s.uiqm)),
        uciqe: avg(&|s| Some(s.uciqe)),
        psnr: avg(&|s| s.psnr),
        ssim: avg(&|s| s.ssim),
        gpmae: avg(&|s| s.gpmae),
    }
}

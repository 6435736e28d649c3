//! HSV (hexcone) and CIE Lab (sRGB companding, D65) conversions.
//!
//! Lab is stored with `a` and `b` offset by [`LAB_NEUTRAL`] so the neutral
//! axis sits at 128, the 8-bit convention used by the chroma suppression
//! filter. `L` stays in `[0, 100]`.

use std::sync::OnceLock;

use super::image::ImagePlanar;
use crate::scalar::Scalar;

/// Offset applied to the `a` and `b` Lab components.
pub const LAB_NEUTRAL: f64 = 128.0;

/// Linear sRGB to XYZ. Row sums are the D65 white point, so neutral RGB maps to a = b = 0.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

fn white() -> [f64; 3] {
    RGB_TO_XYZ.map(|r| r[0] + r[1] + r[2])
}

fn xyz_to_rgb() -> &'static [[f64; 3]; 3] {
    static INV: OnceLock<[[f64; 3]; 3]> = OnceLock::new();
    INV.get_or_init(|| {
        let m = RGB_TO_XYZ;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| {
            m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
        };
        let det = m[0][0] * cof(1, 2, 1, 2) - m[0][1] * cof(1, 2, 0, 2) + m[0][2] * cof(1, 2, 0, 1);
        [
            [
                cof(1, 2, 1, 2) / det,
                -cof(0, 2, 1, 2) / det,
                cof(0, 1, 1, 2) / det,
            ],
            [
                -cof(1, 2, 0, 2) / det,
                cof(0, 2, 0, 2) / det,
                -cof(0, 1, 0, 2) / det,
            ],
            [
                cof(1, 2, 0, 1) / det,
                -cof(0, 2, 0, 1) / det,
                cof(0, 1, 0, 1) / det,
            ],
        ]
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HsvImage<T> {
    pub width: usize,
    pub height: usize,
    /// Hue in degrees, `[0, 360)`.
    pub h: Vec<T>,
    pub s: Vec<T>,
    pub v: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabImage<T> {
    pub width: usize,
    pub height: usize,
    /// Lightness, `[0, 100]`.
    pub l: Vec<T>,
    /// Green-red axis, offset so that neutral is 128.
    pub a: Vec<T>,
    /// Blue-yellow axis, offset so that neutral is 128.
    pub b: Vec<T>,
}

pub fn rgb_to_hsv_px<T: Scalar>([r, g, b]: [T; 3]) -> [T; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    if max <= T::zero() {
        return [T::zero(), T::zero(), v];
    }
    let s = delta / max;
    if delta <= T::zero() {
        return [T::zero(), T::zero(), v];
    }
    let sixty = T::lit(60.0);
    let mut h = if max == r {
        sixty * ((g - b) / delta)
    } else if max == g {
        sixty * ((b - r) / delta + T::lit(2.0))
    } else {
        sixty * ((r - g) / delta + T::lit(4.0))
    };
    if h < T::zero() {
        h = h + T::lit(360.0);
    }
    if h >= T::lit(360.0) {
        h = h - T::lit(360.0);
    }
    [h, s, v]
}

pub fn hsv_to_rgb_px<T: Scalar>([h, s, v]: [T; 3]) -> [T; 3] {
    if s <= T::zero() {
        return [v, v, v];
    }
    let six = T::lit(6.0);
    let hp = h / T::lit(60.0) % six;
    let hp = if hp < T::zero() { hp + six } else { hp };
    let sector = hp.floor();
    let f = hp - sector;
    let p = v * (T::one() - s);
    let q = v * (T::one() - s * f);
    let t = v * (T::one() - s * (T::one() - f));
    match sector.to_usize().unwrap_or(0) {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

#[inline]
fn srgb_to_linear<T: Scalar>(c: T) -> T {
    if c <= T::lit(0.040_45) {
        c / T::lit(12.92)
    } else {
        ((c + T::lit(0.055)) / T::lit(1.055)).powf(T::lit(2.4))
    }
}

#[inline]
fn linear_to_srgb<T: Scalar>(c: T) -> T {
    if c <= T::lit(0.003_130_8) {
        c * T::lit(12.92)
    } else {
        T::lit(1.055) * c.powf(T::one() / T::lit(2.4)) - T::lit(0.055)
    }
}

const DELTA: f64 = 6.0 / 29.0;

#[inline]
fn lab_f<T: Scalar>(t: T) -> T {
    if t > T::lit(DELTA * DELTA * DELTA) {
        t.cbrt()
    } else {
        t / T::lit(3.0 * DELTA * DELTA) + T::lit(4.0 / 29.0)
    }
}

#[inline]
fn lab_f_inv<T: Scalar>(t: T) -> T {
    if t > T::lit(DELTA) {
        t * t * t
    } else {
        T::lit(3.0 * DELTA * DELTA) * (t - T::lit(4.0 / 29.0))
    }
}

/// RGB in `[0, 1]` to `(L, a + 128, b + 128)`.
pub fn rgb_to_lab_px<T: Scalar>(rgb: [T; 3]) -> [T; 3] {
    let lin = rgb.map(srgb_to_linear);
    let wp = white();
    let xyz = [0, 1, 2].map(|i| {
        let row = RGB_TO_XYZ[i];
        (T::lit(row[0]) * lin[0] + T::lit(row[1]) * lin[1] + T::lit(row[2]) * lin[2])
            / T::lit(wp[i])
    });
    let f = xyz.map(lab_f);
    let l = T::lit(116.0) * f[1] - T::lit(16.0);
    let a = T::lit(500.0) * (f[0] - f[1]);
    let b = T::lit(200.0) * (f[1] - f[2]);
    [l, a + T::lit(LAB_NEUTRAL), b + T::lit(LAB_NEUTRAL)]
}

/// Inverse of [`rgb_to_lab_px`]; the result is clamped to `[0, 1]`.
pub fn lab_to_rgb_px<T: Scalar>([l, a, b]: [T; 3]) -> [T; 3] {
    let a = a - T::lit(LAB_NEUTRAL);
    let b = b - T::lit(LAB_NEUTRAL);
    let fy = (l + T::lit(16.0)) / T::lit(116.0);
    let fx = fy + a / T::lit(500.0);
    let fz = fy - b / T::lit(200.0);
    let wp = white();
    let xyz = [
        lab_f_inv(fx) * T::lit(wp[0]),
        lab_f_inv(fy) * T::lit(wp[1]),
        lab_f_inv(fz) * T::lit(wp[2]),
    ];
    let inv = xyz_to_rgb();
    [0, 1, 2].map(|i| {
        let row = inv[i];
        let lin = T::lit(row[0]) * xyz[0] + T::lit(row[1]) * xyz[1] + T::lit(row[2]) * xyz[2];
        linear_to_srgb(lin.max(T::zero())).clamp01()
    })
}

pub fn rgb_to_hsv<T: Scalar>(img: &ImagePlanar<T>) -> HsvImage<T> {
    let [h, s, v] = convert_planes(img, rgb_to_hsv_px);
    HsvImage {
        width: img.width(),
        height: img.height(),
        h,
        s,
        v,
    }
}

pub fn hsv_to_rgb<T: Scalar>(hsv: &HsvImage<T>) -> ImagePlanar<T> {
    let planes = convert_triplets(&hsv.h, &hsv.s, &hsv.v, hsv_to_rgb_px);
    ImagePlanar::from_planes_unchecked(hsv.width, hsv.height, planes)
}

pub fn rgb_to_lab<T: Scalar>(img: &ImagePlanar<T>) -> LabImage<T> {
    let [l, a, b] = convert_planes(img, rgb_to_lab_px);
    LabImage {
        width: img.width(),
        height: img.height(),
        l,
        a,
        b,
    }
}

pub fn lab_to_rgb<T: Scalar>(lab: &LabImage<T>) -> ImagePlanar<T> {
    let planes = convert_triplets(&lab.l, &lab.a, &lab.b, lab_to_rgb_px);
    ImagePlanar::from_planes_unchecked(lab.width, lab.height, planes)
}

fn convert_planes<T: Scalar>(img: &ImagePlanar<T>, f: impl Fn([T; 3]) -> [T; 3]) -> [Vec<T>; 3] {
    let [r, g, b] = img.planes();
    convert_triplets(r, g, b, f)
}

fn convert_triplets<T: Scalar>(
    p0: &[T],
    p1: &[T],
    p2: &[T],
    f: impl Fn([T; 3]) -> [T; 3],
) -> [Vec<T>; 3] {
    let n = p0.len();
    let mut out = [
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    ];
    for i in 0..n {
        let px = f([p0[i], p1[i], p2[i]]);
        for c in 0..3 {
            out[c].push(px[c]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
        a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn hsv_reference_points() {
        assert_eq!(rgb_to_hsv_px([1.0f64, 0.0, 0.0]), [0.0, 1.0, 1.0]);
        let gray = rgb_to_hsv_px([0.5f64, 0.5, 0.5]);
        assert_eq!((gray[1], gray[2]), (0.0, 0.5));
        assert_eq!(rgb_to_hsv_px([0.0f64, 1.0, 1.0]), [180.0, 1.0, 1.0]);
        assert_eq!(rgb_to_hsv_px([0.0f64, 0.0, 0.0]), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn lab_reference_points() {
        assert!(close(
            rgb_to_lab_px([1.0, 1.0, 1.0]),
            [100.0, 128.0, 128.0],
            1e-9
        ));
        assert!(close(
            rgb_to_lab_px([0.0, 0.0, 0.0]),
            [0.0, 128.0, 128.0],
            1e-12
        ));
        // independent CIE reference: L=53.2406, a=80.0923, b=67.2028
        assert!(close(
            rgb_to_lab_px([1.0, 0.0, 0.0]),
            [53.240_588, 208.092_308, 195.202_751],
            0.5
        ));
    }

    #[test]
    fn lab_round_trip_primaries() {
        for rgb in [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.2, 0.7, 0.4],
        ] {
            assert!(close(lab_to_rgb_px(rgb_to_lab_px(rgb)), rgb, 1e-9));
        }
    }

    #[test]
    fn f32_conversion_agrees_with_f64() {
        let px64 = rgb_to_lab_px([0.3f64, 0.6, 0.9]);
        let px32 = rgb_to_lab_px([0.3f32, 0.6, 0.9]);
        for c in 0..3 {
            assert!((px64[c] - px32[c] as f64).abs() < 1e-3);
        }
    }
}

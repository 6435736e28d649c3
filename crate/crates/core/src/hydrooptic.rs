//! Physics-constrained restoration: backscatter removal (veil) followed by
//! inverse attenuation (atten), each a per-channel function of depth with a
//! handful of learnable coefficients.
//!
//! ```text
//! U_B(z)   = tanh(B1 * Sc(-b1 z) + B2 * S(-b2 z))
//! U_D      = U_H - U_B
//! alpha(z) = S(sum_p a'_p * S(a_p z))
//! U_J      = U_D * alpha(z)
//! ```
//!
//! `S` is the softplus selected by [`SoftplusVariant`] and `Sc = 1 - S`.
//! Depth is min-max normalized before entering either model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DiverError, Result};
use crate::illuminate::loss_luminous;
use crate::imgcore::{
    convolve3x3, convolve3x3_adjoint, DepthMap, ImagePlanar, Plane, SOBEL_X, SOBEL_Y,
};
use crate::optim::{minimize, AdamConfig, ParamVector};
use crate::scalar::{sigmoid, softplus, Scalar};

const CHANNELS: [&str; 3] = ["r", "g", "b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SoftplusVariant {
    /// `S(x) = 1` for `x <= 0`, `ln(1 + e^-x)` otherwise. Discontinuous at 0;
    /// the constant branch has zero gradient.
    Piecewise,
    /// `S(x) = ln(1 + e^x)`.
    #[default]
    StandardSmooth,
}

impl SoftplusVariant {
    #[inline]
    pub fn eval<T: Scalar>(self, x: T) -> T {
        match self {
            Self::Piecewise => {
                if x <= T::zero() {
                    T::one()
                } else {
                    softplus(-x)
                }
            }
            Self::StandardSmooth => softplus(x),
        }
    }

    /// Complementary form `1 - S(x)`.
    #[inline]
    pub fn complement<T: Scalar>(self, x: T) -> T {
        T::one() - self.eval(x)
    }

    #[inline]
    pub fn derivative<T: Scalar>(self, x: T) -> T {
        match self {
            Self::Piecewise => {
                if x <= T::zero() {
                    T::zero()
                } else {
                    -sigmoid(-x)
                }
            }
            Self::StandardSmooth => sigmoid(x),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "piecewise" => Some(Self::Piecewise),
            "smooth" | "standard" => Some(Self::StandardSmooth),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Piecewise => "piecewise",
            Self::StandardSmooth => "smooth",
        }
    }
}

/// Raw veil coefficients for one channel. Decay rates are realized as
/// `softplus(raw)` and are therefore nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VeilChannel<T> {
    pub b1_mag: T,
    pub b2_mag: T,
    pub b1_raw: T,
    pub b2_raw: T,
}

impl<T: Scalar> VeilChannel<T> {
    pub fn decay1(&self) -> T {
        softplus(self.b1_raw)
    }

    pub fn decay2(&self) -> T {
        softplus(self.b2_raw)
    }

    /// Backscatter at normalized depth `z`, in `(-1, 1)`.
    pub fn eval(&self, z: T, variant: SoftplusVariant) -> T {
        self.inner(z, variant).tanh()
    }

    fn inner(&self, z: T, variant: SoftplusVariant) -> T {
        self.b1_mag * variant.complement(-self.decay1() * z)
            + self.b2_mag * variant.eval(-self.decay2() * z)
    }

    /// Value and gradient w.r.t. `[b1_mag, b2_mag, b1_raw, b2_raw]`.
    fn eval_grad(&self, z: T, variant: SoftplusVariant) -> (T, [T; 4]) {
        let (d1, d2) = (self.decay1(), self.decay2());
        let (x1, x2) = (-d1 * z, -d2 * z);
        let sc1 = variant.complement(x1);
        let s2 = variant.eval(x2);
        let u = self.b1_mag * sc1 + self.b2_mag * s2;
        let out = u.tanh();
        let dt = T::one() - out * out;
        // d Sc(x1)/d raw1 = -S'(x1) * (-z) * sigmoid(raw1)
        let g_r1 = self.b1_mag * variant.derivative(x1) * z * sigmoid(self.b1_raw);
        let g_r2 = -self.b2_mag * variant.derivative(x2) * z * sigmoid(self.b2_raw);
        (out, [sc1 * dt, s2 * dt, g_r1 * dt, g_r2 * dt])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VeilParams<T> {
    pub channels: [VeilChannel<T>; 3],
}

impl<T: Scalar> VeilParams<T> {
    pub const LEN: usize = 12;

    pub fn to_params(&self) -> ParamVector<T> {
        let mut pairs = Vec::with_capacity(Self::LEN);
        for (c, ch) in self.channels.iter().enumerate() {
            let n = CHANNELS[c];
            pairs.push((format!("veil.{n}.B1"), ch.b1_mag));
            pairs.push((format!("veil.{n}.B2"), ch.b2_mag));
            pairs.push((format!("veil.{n}.b1"), ch.b1_raw));
            pairs.push((format!("veil.{n}.b2"), ch.b2_raw));
        }
        ParamVector::from_pairs(pairs)
    }

    pub fn from_values(v: &[T]) -> Self {
        assert_eq!(v.len(), Self::LEN);
        Self {
            channels: [0, 1, 2].map(|c| VeilChannel {
                b1_mag: v[4 * c],
                b2_mag: v[4 * c + 1],
                b1_raw: v[4 * c + 2],
                b2_raw: v[4 * c + 3],
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AttenTerm<T> {
    /// Inner depth coefficient `a_p`.
    pub alpha: T,
    /// Outer weight `a'_p`.
    pub alpha_prime: T,
}

/// Inverse-attenuation coefficients: `P` terms per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct AttenParams<T> {
    pub channels: [Vec<AttenTerm<T>>; 3],
}

impl<T: Scalar> AttenParams<T> {
    pub fn zeros(p_terms: usize) -> Self {
        assert!(p_terms >= 1, "at least one attenuation term");
        Self {
            channels: [0; 3].map(|_| vec![AttenTerm::default(); p_terms]),
        }
    }

    pub fn p_terms(&self) -> usize {
        self.channels[0].len()
    }

    /// Inverse attenuation of channel `c` at normalized depth `z`.
    pub fn eval(&self, c: usize, z: T, variant: SoftplusVariant) -> T {
        let s = self.channels[c]
            .iter()
            .map(|t| t.alpha_prime * variant.eval(t.alpha * z))
            .sum::<T>();
        variant.eval(s)
    }

    pub fn to_params(&self) -> ParamVector<T> {
        let mut pairs = Vec::new();
        for (c, terms) in self.channels.iter().enumerate() {
            for (p, t) in terms.iter().enumerate() {
                pairs.push((format!("atten.{}.a{}", CHANNELS[c], p + 1), t.alpha));
                pairs.push((format!("atten.{}.a'{}", CHANNELS[c], p + 1), t.alpha_prime));
            }
        }
        ParamVector::from_pairs(pairs)
    }

    pub fn from_values(v: &[T], p_terms: usize) -> Self {
        assert_eq!(v.len(), 6 * p_terms);
        Self {
            channels: [0, 1, 2].map(|c| {
                (0..p_terms)
                    .map(|p| AttenTerm {
                        alpha: v[2 * (c * p_terms + p)],
                        alpha_prime: v[2 * (c * p_terms + p) + 1],
                    })
                    .collect()
            }),
        }
    }
}

/// Adaptive Huber settings: quadratic up to `delta`, then `eta * delta * (|x| - delta/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuberConfig<T> {
    pub delta: T,
    pub eta: T,
}

impl<T: Scalar> Default for HuberConfig<T> {
    fn default() -> Self {
        Self {
            delta: T::lit(0.1),
            eta: T::lit(1.0),
        }
    }
}

/// How the physics coefficients are initialized before the Adam phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HydroInit {
    /// Least-squares fit to a dark-pixel backscatter profile and a per-depth
    /// brightness-falloff profile of the input.
    #[default]
    Prior,
    /// Zero backscatter and unit inverse attenuation.
    Neutral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HydroConfig<T> {
    pub lr: T,
    pub iters: usize,
    pub huber: HuberConfig<T>,
    pub p_terms: usize,
    pub softplus: SoftplusVariant,
    /// Target intensity of the luminous term.
    pub target: T,
    pub init: HydroInit,
    pub seed: u64,
    /// Half-width of the uniform jitter added to the initial coefficients.
    pub init_jitter: T,
}

impl<T: Scalar> Default for HydroConfig<T> {
    fn default() -> Self {
        Self {
            lr: T::lit(1e-3),
            iters: 50,
            huber: HuberConfig::default(),
            p_terms: 2,
            softplus: SoftplusVariant::default(),
            target: T::lit(0.5),
            init: HydroInit::default(),
            seed: 0,
            init_jitter: T::lit(1e-3),
        }
    }
}

impl<T: Scalar> HydroConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DiverError::InvalidConfig(m));
        if !(self.lr > T::zero()) {
            return bad(format!("hydro.lr must be positive, got {}", self.lr));
        }
        if self.iters == 0 {
            return bad("hydro.iters must be at least 1".into());
        }
        if self.p_terms == 0 {
            return bad("hydro.p_terms must be at least 1".into());
        }
        if !(self.huber.delta > T::zero() && self.huber.eta > T::zero()) {
            return bad("hydro.delta and hydro.eta must be positive".into());
        }
        if !(self.target >= T::zero() && self.target <= T::one()) {
            return bad(format!(
                "hydro.target must lie in [0, 1], got {}",
                self.target
            ));
        }
        Ok(())
    }
}

/// `B1 (1 - e^(-b1 z)) + B2 e^(-b2 z)` at every depth sample.
pub fn backscatter_physical<T: Scalar>(
    z: &DepthMap<T>,
    b1_mag: T,
    b2_mag: T,
    b1: T,
    b2: T,
) -> Plane<T> {
    z.plane()
        .map(|zz| b1_mag * (T::one() - (-b1 * zz).exp()) + b2_mag * (-b2 * zz).exp())
}

/// Per-channel backscatter map from the veil model at the given depths.
pub fn veilnet_forward<T: Scalar>(
    z: &DepthMap<T>,
    params: &VeilParams<T>,
    variant: SoftplusVariant,
) -> ImagePlanar<T> {
    let (w, h) = z.dims();
    let planes = [0, 1, 2].map(|c| {
        z.as_slice()
            .iter()
            .map(|&zz| params.channels[c].eval(zz, variant))
            .collect()
    });
    ImagePlanar::from_planes_unchecked(w, h, planes)
}

/// `U_H - U_B`, unclamped.
pub fn direct_signal<T: Scalar>(
    hazy: &ImagePlanar<T>,
    backscatter: &ImagePlanar<T>,
) -> Result<ImagePlanar<T>> {
    hazy.ensure_same_dims(backscatter.dims())?;
    let planes = [0, 1, 2].map(|c| {
        hazy.plane(c)
            .iter()
            .zip(backscatter.plane(c))
            .map(|(&u, &b)| u - b)
            .collect()
    });
    Ok(ImagePlanar::from_planes_unchecked(
        hazy.width(),
        hazy.height(),
        planes,
    ))
}

/// Per-channel inverse attenuation map at the given depths.
pub fn attennet_forward<T: Scalar>(
    z: &DepthMap<T>,
    params: &AttenParams<T>,
    variant: SoftplusVariant,
) -> ImagePlanar<T> {
    let (w, h) = z.dims();
    let planes = [0, 1, 2].map(|c| {
        z.as_slice()
            .iter()
            .map(|&zz| params.eval(c, zz, variant))
            .collect()
    });
    ImagePlanar::from_planes_unchecked(w, h, planes)
}

/// `U_D * alpha`, unclamped.
pub fn restore<T: Scalar>(
    direct: &ImagePlanar<T>,
    alpha: &ImagePlanar<T>,
) -> Result<ImagePlanar<T>> {
    direct.ensure_same_dims(alpha.dims())?;
    let planes = [0, 1, 2].map(|c| {
        direct
            .plane(c)
            .iter()
            .zip(alpha.plane(c))
            .map(|(&d, &a)| d * a)
            .collect()
    });
    Ok(ImagePlanar::from_planes_unchecked(
        direct.width(),
        direct.height(),
        planes,
    ))
}

/// Forward image formation `U = J e^(-beta z) + B_inf (1 - e^(-beta z))`,
/// clamped to `[0, 1]`. Used to synthesize degraded test inputs.
pub fn degrade<T: Scalar>(
    clean: &ImagePlanar<T>,
    z: &DepthMap<T>,
    beta: [T; 3],
    b_inf: [T; 3],
) -> Result<ImagePlanar<T>> {
    clean.ensure_same_dims(z.dims())?;
    if beta.iter().any(|&b| !(b >= T::zero())) {
        return Err(DiverError::InvalidConfig(
            "degrade beta must be nonnegative".into(),
        ));
    }
    if b_inf.iter().any(|&b| !(b >= T::zero() && b <= T::one())) {
        return Err(DiverError::InvalidConfig(
            "degrade B_inf must lie in [0, 1]".into(),
        ));
    }
    let zs = z.as_slice();
    let planes = [0, 1, 2].map(|c| {
        clean
            .plane(c)
            .iter()
            .zip(zs)
            .map(|(&j, &zz)| {
                let tr = (-beta[c] * zz).exp();
                (j * tr + b_inf[c] * (T::one() - tr)).clamp01()
            })
            .collect()
    });
    Ok(ImagePlanar::from_planes_unchecked(
        clean.width(),
        clean.height(),
        planes,
    ))
}

#[inline]
fn huber_point<T: Scalar>(v: T, cfg: &HuberConfig<T>) -> (T, T) {
    let a = v.abs();
    if a <= cfg.delta {
        (v * v, v + v)
    } else {
        let sgn = if v > T::zero() { T::one() } else { -T::one() };
        (
            cfg.eta * cfg.delta * (a - cfg.delta / T::lit(2.0)),
            cfg.eta * cfg.delta * sgn,
        )
    }
}

/// Adaptive Huber penalty averaged over all samples.
pub fn loss_huber<T: Scalar>(backscatter: &ImagePlanar<T>, cfg: &HuberConfig<T>) -> T {
    let n = T::from_usize_lossy(3 * backscatter.pixel_count());
    backscatter
        .planes()
        .iter()
        .flatten()
        .map(|&v| huber_point(v, cfg).0)
        .sum::<T>()
        / n
}

/// Sum of squared differences between channel means over the pairs RG, RB, GB.
pub fn loss_color_consistency<T: Scalar>(img: &ImagePlanar<T>) -> T {
    color_consistency_from_means(img.channel_means())
}

fn color_consistency_from_means<T: Scalar>(mu: [T; 3]) -> T {
    let sq = |a: T, b: T| (a - b) * (a - b);
    sq(mu[0], mu[1]) + sq(mu[0], mu[2]) + sq(mu[1], mu[2])
}

/// Mean absolute Sobel-gradient difference between two images, averaged over channels.
pub fn loss_sobel<T: Scalar>(restored: &ImagePlanar<T>, direct: &ImagePlanar<T>) -> Result<T> {
    restored.ensure_same_dims(direct.dims())?;
    let diff = direct_signal(restored, direct)?;
    Ok(sobel_loss_grad(&diff, false).0)
}

/// Sobel loss of a difference image (correlation is linear) and, optionally,
/// its gradient w.r.t. the difference samples.
fn sobel_loss_grad<T: Scalar>(diff: &ImagePlanar<T>, with_grad: bool) -> (T, Option<[Vec<T>; 3]>) {
    let n = T::from_usize_lossy(diff.pixel_count());
    let scale = T::one() / (T::lit(3.0) * n);
    let mut loss = T::zero();
    let mut grads: [Vec<T>; 3] = Default::default();
    for c in 0..3 {
        let p = diff.channel(c);
        let gx = convolve3x3(&p, &SOBEL_X);
        let gy = convolve3x3(&p, &SOBEL_Y);
        loss = loss
            + gx.as_slice()
                .iter()
                .chain(gy.as_slice())
                .map(|v| v.abs())
                .sum::<T>()
                * scale;
        if with_grad {
            let sgn = |pl: &Plane<T>| {
                pl.map(|v| {
                    if v > T::zero() {
                        scale
                    } else if v < T::zero() {
                        -scale
                    } else {
                        T::zero()
                    }
                })
            };
            let ax = convolve3x3_adjoint(&sgn(&gx), &SOBEL_X);
            let ay = convolve3x3_adjoint(&sgn(&gy), &SOBEL_Y);
            grads[c] = ax
                .as_slice()
                .iter()
                .zip(ay.as_slice())
                .map(|(&a, &b)| a + b)
                .collect();
        }
    }
    (loss, with_grad.then_some(grads))
}

/// Huber loss of the veil at `values` and its gradient.
pub fn veil_loss_grad<T: Scalar>(
    z: &[T],
    variant: SoftplusVariant,
    huber: &HuberConfig<T>,
    values: &[T],
) -> (T, Vec<T>) {
    let params = VeilParams::from_values(values);
    let n = T::from_usize_lossy(3 * z.len());
    let mut loss = T::zero();
    let mut grad = vec![T::zero(); VeilParams::<T>::LEN];
    for (c, ch) in params.channels.iter().enumerate() {
        for &zz in z {
            let (v, dv) = ch.eval_grad(zz, variant);
            let (h, dh) = huber_point(v, huber);
            loss = loss + h;
            for k in 0..4 {
                grad[4 * c + k] = grad[4 * c + k] + dh * dv[k];
            }
        }
    }
    (loss / n, grad.into_iter().map(|g| g / n).collect())
}

/// `L_L + L_C + L_S` of the restored image at `values` and its gradient.
pub fn atten_loss_grad<T: Scalar>(
    direct: &ImagePlanar<T>,
    z: &[T],
    variant: SoftplusVariant,
    target: T,
    p_terms: usize,
    values: &[T],
) -> (T, Vec<T>) {
    let params = AttenParams::from_values(values, p_terms);
    let npx = direct.pixel_count();
    let n = T::from_usize_lossy(npx);
    let two = T::lit(2.0);
    let third = T::one() / T::lit(3.0);

    // forward, keeping dalpha/dparam per pixel
    let mut restored: [Vec<T>; 3] = Default::default();
    let mut dalpha: [Vec<T>; 3] = Default::default();
    let width = 2 * p_terms;
    for c in 0..3 {
        restored[c].reserve(npx);
        dalpha[c].reserve(npx * width);
        let terms = &params.channels[c];
        for (i, &zz) in z.iter().enumerate() {
            let s = terms
                .iter()
                .map(|t| t.alpha_prime * variant.eval(t.alpha * zz))
                .sum::<T>();
            let a = variant.eval(s);
            let ds = variant.derivative(s);
            for t in terms {
                dalpha[c].push(ds * t.alpha_prime * variant.derivative(t.alpha * zz) * zz);
                dalpha[c].push(ds * variant.eval(t.alpha * zz));
            }
            restored[c].push(direct.plane(c)[i] * a);
        }
    }
    let restored = ImagePlanar::from_planes_unchecked(direct.width(), direct.height(), restored);
    let mu = restored.channel_means();
    let diff = direct_signal(&restored, direct).expect("same dims");
    let (l_s, g_s) = sobel_loss_grad(&diff, true);
    let g_s = g_s.expect("requested");
    let loss = loss_luminous(&restored, target) + color_consistency_from_means(mu) + l_s;

    let mut grad = vec![T::zero(); 6 * p_terms];
    for c in 0..3 {
        let cc = two * ((mu[c] - mu[(c + 1) % 3]) + (mu[c] - mu[(c + 2) % 3])) / n;
        for i in 0..npx {
            let j = restored.plane(c)[i];
            let dl_dj = two * third * (j - target) / n + cc + g_s[c][i];
            let w = dl_dj * direct.plane(c)[i];
            let base = c * width;
            for k in 0..width {
                grad[base + k] = grad[base + k] + w * dalpha[c][i * width + k];
            }
        }
    }
    (loss, grad)
}

#[derive(Debug, Clone)]
pub struct HydroFit<T> {
    /// Restored radiance clamped to `[0, 1]`.
    pub image: ImagePlanar<T>,
    pub backscatter: ImagePlanar<T>,
    pub direct: ImagePlanar<T>,
    pub veil: VeilParams<T>,
    pub atten: AttenParams<T>,
    pub veil_trace: Vec<T>,
    pub atten_trace: Vec<T>,
}

const PRIOR_BINS: usize = 10;
const PRIOR_MIN_SAMPLES: usize = 4;
const PRIOR_FIT_ITERS: usize = 400;
const PRIOR_FIT_LR: f64 = 0.05;
/// Bound on the fitted log-brightness slope, i.e. at most 8x gain over the depth range.
const MAX_PRIOR_DECAY: f64 = 2.079_441_541_679_836;

/// Groups pixel indices by normalized depth into equal-width bins. Bins
/// holding under a quarter of the uniform share are dropped as too sparse
/// for a stable low quantile.
fn depth_bins<T: Scalar>(z: &[T]) -> Vec<Vec<usize>> {
    let mut bins = vec![Vec::new(); PRIOR_BINS];
    for (i, &zz) in z.iter().enumerate() {
        let k = (zz * T::from_usize_lossy(PRIOR_BINS))
            .floor()
            .to_usize()
            .unwrap_or(0)
            .min(PRIOR_BINS - 1);
        bins[k].push(i);
    }
    let floor = PRIOR_MIN_SAMPLES
        .max(z.len() / (4 * PRIOR_BINS))
        .min(z.len());
    bins.retain(|b| b.len() >= floor);
    bins
}

fn quantile_low<T: Scalar>(mut v: Vec<T>, q: f64) -> T {
    v.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite"));
    let k = ((v.len() as f64 * q).floor() as usize).min(v.len() - 1);
    v[k]
}

/// Per-bin `(mean depth, darkest-1% value)` samples per channel.
pub fn backscatter_profile<T: Scalar>(img: &ImagePlanar<T>, z: &[T]) -> [Vec<(T, T)>; 3] {
    let bins = depth_bins(z);
    [0, 1, 2].map(|c| {
        bins.iter()
            .map(|b| {
                let zm = b.iter().map(|&i| z[i]).sum::<T>() / T::from_usize_lossy(b.len());
                let dark = quantile_low(b.iter().map(|&i| img.plane(c)[i]).collect(), 0.01);
                (zm, dark)
            })
            .collect()
    })
}

/// Per-bin `(mean depth, exp(k z))` samples per channel, where `k` is the
/// least-squares decay rate of log bin brightness against depth.
pub fn falloff_profile<T: Scalar>(direct: &ImagePlanar<T>, z: &[T]) -> [Vec<(T, T)>; 3] {
    let bins = depth_bins(z);
    [0, 1, 2].map(|c| {
        let pts: Vec<(f64, f64)> = bins
            .iter()
            .filter_map(|b| {
                let k = b.len() as f64;
                let zm = b.iter().map(|&i| z[i].as_f64()).sum::<f64>() / k;
                let m = b.iter().map(|&i| direct.plane(c)[i].as_f64()).sum::<f64>() / k;
                (m > 1e-3).then(|| (zm, m.ln()))
            })
            .collect();
        if pts.len() < 2 {
            return Vec::new();
        }
        let n = pts.len() as f64;
        let (mz, ml) = (
            pts.iter().map(|p| p.0).sum::<f64>() / n,
            pts.iter().map(|p| p.1).sum::<f64>() / n,
        );
        let sxx: f64 = pts.iter().map(|p| (p.0 - mz).powi(2)).sum();
        if sxx <= 0.0 {
            return Vec::new();
        }
        let slope = pts.iter().map(|p| (p.0 - mz) * (p.1 - ml)).sum::<f64>() / sxx;
        let decay = (-slope).clamp(-MAX_PRIOR_DECAY, MAX_PRIOR_DECAY);
        pts.iter()
            .map(|&(zm, _)| (T::lit(zm), T::lit((decay * zm).exp())))
            .collect()
    })
}

fn fit_samples<T: Scalar>(
    stage: &'static str,
    init: &mut ParamVector<T>,
    samples: &[(T, T)],
    model: impl Fn(&[T], T) -> (T, Vec<T>),
) -> Result<()> {
    if samples.is_empty() {
        return Ok(());
    }
    let k = T::from_usize_lossy(samples.len());
    minimize(
        stage,
        init,
        AdamConfig::with_lr(T::lit(PRIOR_FIT_LR)),
        PRIOR_FIT_ITERS,
        |p| {
            let mut loss = T::zero();
            let mut grad = vec![T::zero(); p.len()];
            for &(zz, target) in samples {
                let (v, dv) = model(p, zz);
                let r = v - target;
                loss = loss + r * r / k;
                for (g, d) in grad.iter_mut().zip(dv) {
                    *g = *g + T::lit(2.0) * r * d / k;
                }
            }
            (loss, grad)
        },
    )?;
    Ok(())
}

fn jitter<T: Scalar>(rng: &mut ChaCha8Rng, half_width: T) -> T {
    let j = half_width.as_f64();
    if j > 0.0 {
        T::lit(rng.gen_range(-j..=j))
    } else {
        T::zero()
    }
}

fn neutral_atten<T: Scalar>(p_terms: usize, variant: SoftplusVariant) -> AttenParams<T> {
    let mut params = AttenParams::zeros(p_terms);
    if variant == SoftplusVariant::StandardSmooth {
        // softplus(s) = 1  <=>  s = ln(e - 1); each inner term is ln 2 at a_p = 0
        let s = (T::E() - T::one()).ln();
        let w = s / (T::from_usize_lossy(p_terms) * T::LN_2());
        for terms in params.channels.iter_mut() {
            for t in terms.iter_mut() {
                t.alpha_prime = w;
            }
        }
    }
    params
}

fn initial_veil<T: Scalar>(
    profile: Option<&[Vec<(T, T)>; 3]>,
    cfg: &HydroConfig<T>,
    rng: &mut ChaCha8Rng,
) -> Result<VeilParams<T>> {
    let mut veil = VeilParams::default();
    if let Some(profile) = profile {
        for c in 0..3 {
            let pts = &profile[c];
            if pts.is_empty() {
                continue;
            }
            let clip = T::lit(0.95);
            let first = pts[0].1.max(-clip).min(clip).atanh();
            let last = pts[pts.len() - 1].1.max(-clip).min(clip).atanh();
            let mut sub = ParamVector::from_pairs([
                ("B1", last),
                ("B2", first),
                ("b1", T::zero()),
                ("b2", T::zero()),
            ]);
            fit_samples("hydro prior (veil)", &mut sub, pts, |p, zz| {
                let ch = VeilChannel {
                    b1_mag: p[0],
                    b2_mag: p[1],
                    b1_raw: p[2],
                    b2_raw: p[3],
                };
                let (v, g) = ch.eval_grad(zz, cfg.softplus);
                (v, g.to_vec())
            })?;
            let v = sub.values();
            veil.channels[c] = VeilChannel {
                b1_mag: v[0],
                b2_mag: v[1],
                b1_raw: v[2],
                b2_raw: v[3],
            };
        }
    }
    for ch in veil.channels.iter_mut() {
        ch.b1_mag = ch.b1_mag + jitter(rng, cfg.init_jitter);
        ch.b2_mag = ch.b2_mag + jitter(rng, cfg.init_jitter);
        ch.b1_raw = ch.b1_raw + jitter(rng, cfg.init_jitter);
        ch.b2_raw = ch.b2_raw + jitter(rng, cfg.init_jitter);
    }
    Ok(veil)
}

fn initial_atten<T: Scalar>(
    profile: Option<&[Vec<(T, T)>; 3]>,
    cfg: &HydroConfig<T>,
    rng: &mut ChaCha8Rng,
) -> Result<AttenParams<T>> {
    let mut atten = neutral_atten(cfg.p_terms, cfg.softplus);
    if let Some(profile) = profile {
        for c in 0..3 {
            if profile[c].len() < 2 {
                continue;
            }
            let mut start: Vec<T> = Vec::with_capacity(2 * cfg.p_terms);
            for (p, t) in atten.channels[c].iter().enumerate() {
                // spread the inner slopes so the terms are not symmetric
                start.push(t.alpha + T::from_usize_lossy(p));
                start.push(t.alpha_prime);
            }
            let mut sub = ParamVector::from_pairs(
                start.iter().enumerate().map(|(i, &v)| (format!("p{i}"), v)),
            );
            let p_terms = cfg.p_terms;
            let variant = cfg.softplus;
            fit_samples("hydro prior (atten)", &mut sub, &profile[c], |p, zz| {
                let mut s = T::zero();
                for k in 0..p_terms {
                    s = s + p[2 * k + 1] * variant.eval(p[2 * k] * zz);
                }
                let ds = variant.derivative(s);
                let mut g = Vec::with_capacity(2 * p_terms);
                for k in 0..p_terms {
                    g.push(ds * p[2 * k + 1] * variant.derivative(p[2 * k] * zz) * zz);
                    g.push(ds * variant.eval(p[2 * k] * zz));
                }
                (variant.eval(s), g)
            })?;
            let v = sub.values();
            atten.channels[c] = (0..p_terms)
                .map(|k| AttenTerm {
                    alpha: v[2 * k],
                    alpha_prime: v[2 * k + 1],
                })
                .collect();
        }
    }
    for terms in atten.channels.iter_mut() {
        for t in terms.iter_mut() {
            t.alpha = t.alpha + jitter(rng, cfg.init_jitter);
            t.alpha_prime = t.alpha_prime + jitter(rng, cfg.init_jitter);
        }
    }
    Ok(atten)
}

fn merge_profiles<T: Scalar>(profiles: Vec<[Vec<(T, T)>; 3]>) -> [Vec<(T, T)>; 3] {
    let mut out: [Vec<(T, T)>; 3] = Default::default();
    for p in profiles {
        for c in 0..3 {
            out[c].extend_from_slice(&p[c]);
        }
    }
    out
}

/// Two-phase fit of the veil (Huber) and attenuation (`L_L + L_C + L_S`) models.
pub fn fit_hydrooptic<T: Scalar>(
    hazy: &ImagePlanar<T>,
    depth: &DepthMap<T>,
    cfg: &HydroConfig<T>,
) -> Result<HydroFit<T>> {
    let mut fits = fit_hydrooptic_joint(&[(hazy, depth)], cfg)?;
    Ok(fits.pop().expect("one item"))
}

/// Shared veil and attenuation coefficients fitted against the mean loss of
/// several images.
pub fn fit_hydrooptic_joint<T: Scalar>(
    items: &[(&ImagePlanar<T>, &DepthMap<T>)],
    cfg: &HydroConfig<T>,
) -> Result<Vec<HydroFit<T>>> {
    cfg.validate()?;
    if items.is_empty() {
        return Ok(Vec::new());
    }
    for (img, depth) in items {
        img.ensure_same_dims(depth.dims())?;
    }
    let depths: Vec<DepthMap<T>> = items.iter().map(|(_, d)| d.normalized()).collect();
    let k = T::from_usize_lossy(items.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // veil phase
    let veil_profile = (cfg.init == HydroInit::Prior).then(|| {
        merge_profiles(
            items
                .iter()
                .zip(&depths)
                .map(|((img, _), z)| backscatter_profile(img, z.as_slice()))
                .collect(),
        )
    });
    let veil0 = initial_veil(veil_profile.as_ref(), cfg, &mut rng)?;
    let mut veil_pv = veil0.to_params();
    let veil_trace = minimize(
        "hydro (veil)",
        &mut veil_pv,
        AdamConfig::with_lr(cfg.lr),
        cfg.iters,
        |v| {
            let mut loss = T::zero();
            let mut grad = vec![T::zero(); v.len()];
            for z in &depths {
                let (l, g) = veil_loss_grad(z.as_slice(), cfg.softplus, &cfg.huber, v);
                loss = loss + l / k;
                grad.iter_mut().zip(g).for_each(|(a, b)| *a = *a + b / k);
            }
            (loss, grad)
        },
    )?;
    let veil = VeilParams::from_values(veil_pv.values());

    let mut backscatters = Vec::with_capacity(items.len());
    let mut directs = Vec::with_capacity(items.len());
    for ((img, _), z) in items.iter().zip(&depths) {
        let b = veilnet_forward(z, &veil, cfg.softplus);
        directs.push(direct_signal(img, &b)?);
        backscatters.push(b);
    }

    // atten phase
    let atten_profile = (cfg.init == HydroInit::Prior).then(|| {
        merge_profiles(
            directs
                .iter()
                .zip(&depths)
                .map(|(d, z)| falloff_profile(d, z.as_slice()))
                .collect(),
        )
    });
    let atten0 = initial_atten(atten_profile.as_ref(), cfg, &mut rng)?;
    let mut atten_pv = atten0.to_params();
    let atten_trace = minimize(
        "hydro (atten)",
        &mut atten_pv,
        AdamConfig::with_lr(cfg.lr),
        cfg.iters,
        |v| {
            let mut loss = T::zero();
            let mut grad = vec![T::zero(); v.len()];
            for (d, z) in directs.iter().zip(&depths) {
                let (l, g) =
                    atten_loss_grad(d, z.as_slice(), cfg.softplus, cfg.target, cfg.p_terms, v);
                loss = loss + l / k;
                grad.iter_mut().zip(g).for_each(|(a, b)| *a = *a + b / k);
            }
            (loss, grad)
        },
    )?;
    let atten = AttenParams::from_values(atten_pv.values(), cfg.p_terms);

    let mut out = Vec::with_capacity(items.len());
    for ((backscatter, direct), z) in backscatters.into_iter().zip(directs).zip(&depths) {
        let alpha = attennet_forward(z, &atten, cfg.softplus);
        let image = restore(&direct, &alpha)?.clamped();
        image.check_finite()?;
        out.push(HydroFit {
            image,
            backscatter,
            direct,
            veil,
            atten: atten.clone(),
            veil_trace: veil_trace.clone(),
            atten_trace: atten_trace.clone(),
        });
    }
    Ok(out)
}

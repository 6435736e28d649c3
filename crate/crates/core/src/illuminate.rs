//! Low-light luminance recovery.
//!
//! The observation is modeled as `U_R = U_I T + U_G (1 - T)` with a
//! depth-guided transmission map `T` and a learnable global light `U_G`
//! bounded by `tanh`. Inverting gives `U_I = U_G + relu((U_R - U_G) / T)`.
//! `U_G` is fitted per image with Adam against a gray-world term plus a
//! luminous (target intensity) term.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DiverError, Result};
use crate::imgcore::{DepthMap, ImagePlanar, Plane};
use crate::optim::{minimize, AdamConfig, ParamVector};
use crate::scalar::Scalar;

/// Raw per-channel light parameters; the realized light is `tanh(theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalLightParams<T> {
    pub theta: [T; 3],
}

impl<T: Scalar> GlobalLightParams<T> {
    pub fn zero() -> Self {
        Self {
            theta: [T::zero(); 3],
        }
    }

    /// Realized light `U_G^c = tanh(theta_c)`, in `(-1, 1)`.
    pub fn light(&self) -> [T; 3] {
        self.theta.map(|t| t.tanh())
    }

    pub fn to_params(&self) -> ParamVector<T> {
        ParamVector::from_pairs([
            ("light.r", self.theta[0]),
            ("light.g", self.theta[1]),
            ("light.b", self.theta[2]),
        ])
    }

    pub fn from_values(v: &[T]) -> Self {
        Self {
            theta: [v[0], v[1], v[2]],
        }
    }
}

/// Scalar ambient light in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbientLight<T>(pub T);

/// Per-pixel transmission, clamped to `[t_min, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionMap<T>(pub Plane<T>);

impl<T: Scalar> TransmissionMap<T> {
    pub fn plane(&self) -> &Plane<T> {
        &self.0
    }

    pub fn as_slice(&self) -> &[T] {
        self.0.as_slice()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IlluminateConfig<T> {
    /// Half-size of the square transmission patch.
    pub patch_radius: usize,
    pub lr: T,
    pub iters: usize,
    /// Gray-world weight.
    pub lambda1: T,
    /// Luminous weight.
    pub lambda2: T,
    /// Target intensity of the luminous loss.
    pub target: T,
    pub t_min: T,
    pub seed: u64,
    /// Half-width of the uniform jitter applied to the zero initialization.
    pub init_jitter: T,
}

impl<T: Scalar> Default for IlluminateConfig<T> {
    fn default() -> Self {
        Self {
            patch_radius: 7,
            lr: T::lit(1e-3),
            iters: 150,
            lambda1: T::lit(0.25),
            lambda2: T::lit(1.0),
            target: T::lit(0.5),
            t_min: T::lit(0.05),
            seed: 0,
            init_jitter: T::lit(1e-2),
        }
    }
}

impl<T: Scalar> IlluminateConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DiverError::InvalidConfig(m));
        if self.iters == 0 {
            return bad("illuminate.iters must be at least 1".into());
        }
        if !(self.lr > T::zero()) {
            return bad(format!("illuminate.lr must be positive, got {}", self.lr));
        }
        if !(self.lambda1 >= T::zero() && self.lambda2 >= T::zero()) {
            return bad("illuminate.lambda1/lambda2 must be nonnegative".into());
        }
        if !(self.target >= T::zero() && self.target <= T::one()) {
            return bad(format!(
                "illuminate.target must lie in [0, 1], got {}",
                self.target
            ));
        }
        if !(self.t_min > T::zero() && self.t_min <= T::one()) {
            return bad(format!(
                "illuminate.t_min must lie in (0, 1], got {}",
                self.t_min
            ));
        }
        if !(self.init_jitter >= T::zero()) {
            return bad("illuminate init jitter must be nonnegative".into());
        }
        Ok(())
    }
}

/// Mean RGB intensity of the `ceil(0.1% * N)` deepest pixels. Depth ties
/// resolve toward the lower row-major index.
pub fn estimate_ambient<T: Scalar>(
    img: &ImagePlanar<T>,
    depth: &DepthMap<T>,
) -> Result<AmbientLight<T>> {
    img.ensure_same_dims(depth.dims())?;
    let n = img.pixel_count();
    let k = n.div_ceil(1000).max(1);
    let z = depth.as_slice();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        z[b].partial_cmp(&z[a])
            .expect("finite depth")
            .then(a.cmp(&b))
    });
    let sum: T = order[..k]
        .iter()
        .map(|&i| img.pixel(i).into_iter().sum::<T>() / T::lit(3.0))
        .sum();
    Ok(AmbientLight((sum / T::from_usize_lossy(k)).clamp01()))
}

/// `T(x) = max over the patch around x and over channels of |U_R - A| / max(A, 1 - A)`,
/// clamped to `[t_min, 1]`. The patch is truncated at the image border.
pub fn transmission_map<T: Scalar>(
    img: &ImagePlanar<T>,
    ambient: AmbientLight<T>,
    patch_radius: usize,
    t_min: T,
) -> TransmissionMap<T> {
    let (w, h) = img.dims();
    let a = ambient.0;
    let denom = a.max(T::one() - a);
    let dev: Vec<T> = (0..img.pixel_count())
        .map(|i| {
            img.pixel(i)
                .into_iter()
                .map(|v| (v - a).abs())
                .fold(T::zero(), T::max)
                / denom
        })
        .collect();
    let rows = running_max(&dev, w, h, patch_radius, true);
    let full = running_max(&rows, w, h, patch_radius, false);
    let data = full
        .into_iter()
        .map(|v| v.max(t_min).min(T::one()))
        .collect();
    TransmissionMap(Plane::new(w, h, data).expect("dims preserved"))
}

fn running_max<T: Scalar>(src: &[T], w: usize, h: usize, r: usize, horizontal: bool) -> Vec<T> {
    let mut out = vec![T::zero(); src.len()];
    for y in 0..h {
        for x in 0..w {
            let mut m = T::neg_infinity();
            if horizontal {
                for xx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                    m = m.max(src[y * w + xx]);
                }
            } else {
                for yy in y.saturating_sub(r)..=(y + r).min(h - 1) {
                    m = m.max(src[yy * w + x]);
                }
            }
            out[y * w + x] = m;
        }
    }
    out
}

/// `U_I = U_G + relu((U_R - U_G) / T)`, unclamped.
pub fn forward_illuminate<T: Scalar>(
    img: &ImagePlanar<T>,
    transmission: &TransmissionMap<T>,
    params: &GlobalLightParams<T>,
) -> ImagePlanar<T> {
    let light = params.light();
    let t = transmission.as_slice();
    let planes = [0, 1, 2].map(|c| {
        let g = light[c];
        img.plane(c)
            .iter()
            .zip(t)
            .map(|(&u, &tt)| g + ((u - g) / tt).max(T::zero()))
            .collect()
    });
    ImagePlanar::from_planes_unchecked(img.width(), img.height(), planes)
}

/// Mean absolute deviation of the channel means from their average.
pub fn loss_grayworld<T: Scalar>(img: &ImagePlanar<T>) -> T {
    grayworld_from_means(img.channel_means())
}

pub(crate) fn grayworld_from_means<T: Scalar>(mu: [T; 3]) -> T {
    let g = (mu[0] + mu[1] + mu[2]) / T::lit(3.0);
    mu.iter().map(|&m| (m - g).abs()).sum::<T>() / T::lit(3.0)
}

/// Channel-averaged mean squared deviation from a constant target intensity.
pub fn loss_luminous<T: Scalar>(img: &ImagePlanar<T>, target: T) -> T {
    let n = T::from_usize_lossy(img.pixel_count());
    (0..3)
        .map(|c| {
            img.plane(c)
                .iter()
                .map(|&v| (v - target) * (v - target))
                .sum::<T>()
                / n
        })
        .sum::<T>()
        / T::lit(3.0)
}

/// `lambda1 * L_G + lambda2 * L_L` of an enhanced image.
pub fn loss_total<T: Scalar>(img: &ImagePlanar<T>, cfg: &IlluminateConfig<T>) -> T {
    cfg.lambda1 * loss_grayworld(img) + cfg.lambda2 * loss_luminous(img, cfg.target)
}

fn sign<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Combined loss of the forward output at `theta` and its gradient.
pub fn illuminate_loss_grad<T: Scalar>(
    img: &ImagePlanar<T>,
    transmission: &TransmissionMap<T>,
    cfg: &IlluminateConfig<T>,
    theta: &[T],
) -> (T, [T; 3]) {
    let n = T::from_usize_lossy(img.pixel_count());
    let t = transmission.as_slice();
    let mut mu = [T::zero(); 3];
    let mut dmu = [T::zero(); 3];
    let mut lum = [T::zero(); 3];
    let mut dlum = [T::zero(); 3];
    for c in 0..3 {
        let g = theta[c].tanh();
        let (mut s_u, mut s_du, mut s_sq, mut s_dsq) = (T::zero(), T::zero(), T::zero(), T::zero());
        for (&u, &tt) in img.plane(c).iter().zip(t) {
            let q = (u - g) / tt;
            let (ui, dui) = if q > T::zero() {
                (g + q, T::one() - T::one() / tt)
            } else {
                (g, T::one())
            };
            let r = ui - cfg.target;
            s_u = s_u + ui;
            s_du = s_du + dui;
            s_sq = s_sq + r * r;
            s_dsq = s_dsq + r * dui;
        }
        mu[c] = s_u / n;
        dmu[c] = s_du / n;
        lum[c] = s_sq / n;
        dlum[c] = T::lit(2.0) * s_dsq / n;
    }
    let third = T::one() / T::lit(3.0);
    let gray = (mu[0] + mu[1] + mu[2]) * third;
    let sg = mu.map(|m| sign(m - gray));
    let sg_mean = (sg[0] + sg[1] + sg[2]) * third;
    let loss =
        cfg.lambda1 * grayworld_from_means(mu) + cfg.lambda2 * (lum[0] + lum[1] + lum[2]) * third;
    let grad = [0, 1, 2].map(|c| {
        let sech2 = T::one() - theta[c].tanh().powi(2);
        let d_gray = third * (sg[c] - sg_mean) * dmu[c];
        let d_lum = third * dlum[c];
        (cfg.lambda1 * d_gray + cfg.lambda2 * d_lum) * sech2
    });
    (loss, grad)
}

#[derive(Debug, Clone)]
pub struct IlluminateFit<T> {
    /// Enhanced image, clamped to `[0, 1]`.
    pub image: ImagePlanar<T>,
    pub params: GlobalLightParams<T>,
    /// Loss before every Adam step, then at the final parameters.
    pub trace: Vec<T>,
    pub ambient: AmbientLight<T>,
    pub transmission: TransmissionMap<T>,
}

/// Seeded starting point: uniform jitter of half-width `cfg.init_jitter` around zero.
pub fn initial_light<T: Scalar>(cfg: &IlluminateConfig<T>) -> GlobalLightParams<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let j = cfg.init_jitter.as_f64();
    GlobalLightParams {
        theta: [0; 3].map(|_| {
            if j > 0.0 {
                T::lit(rng.gen_range(-j..=j))
            } else {
                T::zero()
            }
        }),
    }
}

/// Fits the global light for a fixed transmission map starting at `init`.
pub fn fit_global_light<T: Scalar>(
    img: &ImagePlanar<T>,
    transmission: &TransmissionMap<T>,
    init: GlobalLightParams<T>,
    cfg: &IlluminateConfig<T>,
) -> Result<(GlobalLightParams<T>, Vec<T>)> {
    cfg.validate()?;
    img.ensure_same_dims(transmission.plane().dims())?;
    let mut params = init.to_params();
    let trace = minimize(
        "illuminate",
        &mut params,
        AdamConfig::with_lr(cfg.lr),
        cfg.iters,
        |theta| {
            let (l, g) = illuminate_loss_grad(img, transmission, cfg, theta);
            (l, g.to_vec())
        },
    )?;
    Ok((GlobalLightParams::from_values(params.values()), trace))
}

/// Ambient light, transmission map and a per-image fit of the global light.
pub fn fit_illuminate<T: Scalar>(
    img: &ImagePlanar<T>,
    depth: &DepthMap<T>,
    cfg: &IlluminateConfig<T>,
) -> Result<IlluminateFit<T>> {
    let ambient = estimate_ambient(img, depth)?;
    let transmission = transmission_map(img, ambient, cfg.patch_radius, cfg.t_min);
    let (params, trace) = fit_global_light(img, &transmission, initial_light(cfg), cfg)?;
    let image = forward_illuminate(img, &transmission, &params).clamped();
    Ok(IlluminateFit {
        image,
        params,
        trace,
        ambient,
        transmission,
    })
}

/// One global light shared by several images; the loss is the mean of the
/// per-image losses.
pub fn fit_illuminate_joint<T: Scalar>(
    items: &[(&ImagePlanar<T>, &DepthMap<T>)],
    cfg: &IlluminateConfig<T>,
) -> Result<Vec<IlluminateFit<T>>> {
    cfg.validate()?;
    if items.is_empty() {
        return Ok(Vec::new());
    }
    let mut prepared = Vec::with_capacity(items.len());
    for &(img, depth) in items {
        let ambient = estimate_ambient(img, depth)?;
        prepared.push((
            img,
            ambient,
            transmission_map(img, ambient, cfg.patch_radius, cfg.t_min),
        ));
    }
    let k = T::from_usize_lossy(items.len());
    let mut params = initial_light(cfg).to_params();
    let trace = minimize(
        "illuminate",
        &mut params,
        AdamConfig::with_lr(cfg.lr),
        cfg.iters,
        |theta| {
            let mut loss = T::zero();
            let mut grad = vec![T::zero(); 3];
            for (img, _, tm) in &prepared {
                let (l, g) = illuminate_loss_grad(img, tm, cfg, theta);
                loss = loss + l / k;
                for c in 0..3 {
                    grad[c] = grad[c] + g[c] / k;
                }
            }
            (loss, grad)
        },
    )?;
    let light = GlobalLightParams::from_values(params.values());
    Ok(prepared
        .into_iter()
        .map(|(img, ambient, transmission)| IlluminateFit {
            image: forward_illuminate(img, &transmission, &light).clamped(),
            params: light,
            trace: trace.clone(),
            ambient,
            transmission,
        })
        .collect())
}

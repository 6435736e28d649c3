use super::*;
use diver_core::aocm::{cef, hssf, hue_mask, DualStretch, HssfConfig};
use diver_core::hydrooptic::{
    attennet_forward, degrade, fit_hydrooptic, loss_color_consistency, loss_huber, loss_sobel,
    veilnet_forward, AttenParams, HuberConfig, HydroConfig, SoftplusVariant, VeilParams,
};
use diver_core::illuminate::{
    fit_illuminate, forward_illuminate, loss_grayworld, loss_luminous, loss_total,
    transmission_map, AmbientLight, GlobalLightParams, IlluminateConfig,
};
use diver_core::imgcore::{
    channel_stats, convolve3x3, hsv_to_rgb_px, lab_to_rgb_px, rgb_to_hsv_px, rgb_to_lab_px,
    DepthMap, ImagePlanar, Plane, SOBEL_X, SOBEL_Y,
};
use diver_core::metrics::{gpmae, psnr, ssim, uciqe, GrayPatchSet, PatchRect};
use diver_core::optim::{grad_check, AdamConfig, AdamState, ParamVector};
use diver_core::pipeline::{process_image, PipelineConfig, Stage, StageSet};
use diver_core::router::{assess_illumination, classify};
use diver_core::sef::{apply_sef, SefConfig};
use rand::Rng;

/// Every invariant by name; each panics on a violation.
pub const ALL: &[(&str, fn())] = &[
    ("hsv_round_trip", hsv_round_trip),
    ("lab_round_trip", lab_round_trip),
    (
        "channel_stats_ignore_pixel_order",
        channel_stats_ignore_pixel_order,
    ),
    ("convolution_is_linear", convolution_is_linear),
    ("route_is_scale_invariant", route_is_scale_invariant),
    ("route_ignores_pixel_order", route_ignores_pixel_order),
    ("sef_is_monotone_per_channel", sef_is_monotone_per_channel),
    (
        "sef_moves_means_toward_strongest_channel",
        sef_moves_means_toward_strongest_channel,
    ),
    ("sef_small_alpha_is_identity", sef_small_alpha_is_identity),
    ("transmission_is_local", transmission_is_local),
    (
        "forward_illuminate_is_monotone_in_input",
        forward_illuminate_is_monotone_in_input,
    ),
    (
        "illuminate_losses_are_nonnegative_and_grayworld_ignores_order",
        illuminate_losses_are_nonnegative_and_grayworld_ignores_order,
    ),
    (
        "illuminate_fit_is_deterministic_and_descends",
        illuminate_fit_is_deterministic_and_descends,
    ),
    ("cef_is_monotone", cef_is_monotone),
    ("cef_endpoints", cef_endpoints),
    ("hssf_preserves_lightness", hssf_preserves_lightness),
    (
        "hssf_with_empty_mask_is_identity",
        hssf_with_empty_mask_is_identity,
    ),
    (
        "hydro_forwards_are_pointwise_in_depth",
        hydro_forwards_are_pointwise_in_depth,
    ),
    (
        "huber_and_color_losses_are_nonnegative",
        huber_and_color_losses_are_nonnegative,
    ),
    (
        "sobel_loss_vanishes_exactly_for_channel_offsets",
        sobel_loss_vanishes_exactly_for_channel_offsets,
    ),
    (
        "degrade_is_monotone_and_bounded",
        degrade_is_monotone_and_bounded,
    ),
    (
        "hydro_fit_descends_in_both_phases",
        hydro_fit_descends_in_both_phases,
    ),
    (
        "adam_ignores_parameter_labels",
        adam_ignores_parameter_labels,
    ),
    (
        "grad_check_error_shrinks_with_step",
        grad_check_error_shrinks_with_step,
    ),
    ("psnr_and_ssim_are_symmetric", psnr_and_ssim_are_symmetric),
    (
        "gpmae_is_scale_free_and_bounded",
        gpmae_is_scale_free_and_bounded,
    ),
    (
        "uciqe_of_achromatic_constant_is_zero",
        uciqe_of_achromatic_constant_is_zero,
    ),
    (
        "forward_stages_are_pure_and_clamped",
        forward_stages_are_pure_and_clamped,
    ),
    (
        "full_pipeline_is_pure_and_clamped",
        full_pipeline_is_pure_and_clamped,
    ),
];

const VARIANTS: [SoftplusVariant; 2] =
    [SoftplusVariant::StandardSmooth, SoftplusVariant::Piecewise];

// imgcore

pub fn hsv_round_trip() {
    let mut r = rng(1);
    for _ in 0..10_000 {
        let px: [f64; 3] = [r.gen(), r.gen(), r.gen()];
        let back = hsv_to_rgb_px(rgb_to_hsv_px(px));
        for c in 0..3 {
            assert!((back[c] - px[c]).abs() <= 1e-6, "{px:?} -> {back:?}");
        }
    }
}

pub fn lab_round_trip() {
    let mut r = rng(2);
    for _ in 0..10_000 {
        let px: [f64; 3] = [r.gen(), r.gen(), r.gen()];
        let back = lab_to_rgb_px(rgb_to_lab_px(px));
        for c in 0..3 {
            assert!((back[c] - px[c]).abs() <= 2.0 / 255.0, "{px:?} -> {back:?}");
        }
    }
}

pub fn channel_stats_ignore_pixel_order() {
    let mut r = rng(3);
    for _ in 0..CASES {
        let (w, h) = (r.gen_range(1..9), r.gen_range(1..9));
        let img = random_image(&mut r, w, h);
        let perm = permutation(&mut r, w * h);
        let a = channel_stats(&img);
        let b = channel_stats(&permute(&img, &perm));
        for c in 0..3 {
            let (sa, sb) = (a.channels[c], b.channels[c]);
            assert_eq!((sa.median, sa.min, sa.max), (sb.median, sb.min, sb.max));
            assert!((sa.mean - sb.mean).abs() <= 1e-12);
            assert!(sa.min <= sa.median && sa.median <= sa.max);
            assert!(sa.min <= sa.mean && sa.mean <= sa.max);
        }
    }
}

pub fn convolution_is_linear() {
    let mut r = rng(4);
    for _ in 0..CASES {
        let (w, h) = (r.gen_range(1..10), r.gen_range(1..10));
        let p = Plane::from_fn(w, h, |_, _| r.gen_range(-1.0..1.0));
        let q = Plane::from_fn(w, h, |_, _| r.gen_range(-1.0..1.0));
        let (a, b): (f64, f64) = (r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0));
        let mix = Plane::new(
            w,
            h,
            p.as_slice()
                .iter()
                .zip(q.as_slice())
                .map(|(x, y)| a * x + b * y)
                .collect(),
        )
        .unwrap();
        for k in [SOBEL_X, SOBEL_Y] {
            let lhs = convolve3x3(&mix, &k);
            let (cp, cq) = (convolve3x3(&p, &k), convolve3x3(&q, &k));
            for i in 0..w * h {
                let rhs = a * cp.as_slice()[i] + b * cq.as_slice()[i];
                assert!((lhs.as_slice()[i] - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
            }
        }
    }
}

// router

pub fn route_is_scale_invariant() {
    let mut r = rng(5);
    for _ in 0..CASES {
        let img = random_image(&mut r, 6, 5);
        let k = r.gen_range(0.05..1.0);
        let before = assess_illumination(&img).branch;
        assert_eq!(assess_illumination(&img.map(|v| v * k)).branch, before);
        // powers of two scale exactly, so the rule holds even at the boundary
        let m = [
            r.gen_range(0.0..1.0),
            r.gen_range(0.0..1.0),
            r.gen_range(0.0..1.0),
        ];
        let s = 2f64.powi(r.gen_range(-20..20));
        assert_eq!(classify(m.map(|v| v * s)).branch, classify(m).branch);
    }
}

pub fn route_ignores_pixel_order() {
    let mut r = rng(6);
    for _ in 0..CASES {
        let img = random_image(&mut r, 5, 7).map_channels(|c, v| if c == 0 { v * 0.3 } else { v });
        let perm = permutation(&mut r, 35);
        assert_eq!(
            assess_illumination(&permute(&img, &perm)).branch,
            assess_illumination(&img).branch
        );
    }
}

// sef

pub fn sef_is_monotone_per_channel() {
    let mut r = rng(7);
    for _ in 0..CASES {
        let img = random_image(&mut r, 6, 6);
        let cfg = SefConfig {
            alpha: r.gen_range(0.01..=1.0),
            epsilon: 1e-6,
        };
        let out = apply_sef(&img, &cfg);
        for c in 0..3 {
            for i in 0..36 {
                for j in 0..36 {
                    if img.plane(c)[i] <= img.plane(c)[j] {
                        assert!(out.plane(c)[i] <= out.plane(c)[j]);
                    }
                }
            }
        }
    }
}

pub fn sef_moves_means_toward_strongest_channel() {
    let mut r = rng(8);
    for _ in 0..CASES {
        let img = random_image(&mut r, 8, 8).map_channels(|c, v| v * [0.4, 1.0, 0.7][c]);
        let cfg = SefConfig {
            alpha: r.gen_range(0.01..=1.0),
            epsilon: 1e-6,
        };
        let (before, after) = (img.channel_means(), apply_sef(&img, &cfg).channel_means());
        let sup = (0..3)
            .max_by(|&a, &b| before[a].partial_cmp(&before[b]).unwrap())
            .unwrap();
        for c in (0..3).filter(|&c| c != sup) {
            assert!(
                after[c] >= before[c] - 1e-12,
                "channel {c}: {} -> {}",
                before[c],
                after[c]
            );
        }
    }
}

pub fn sef_small_alpha_is_identity() {
    let mut r = rng(9);
    for _ in 0..CASES {
        let img = random_image(&mut r, 6, 6).map_channels(|c, v| v * [0.1, 1.0, 0.5][c]);
        let out = apply_sef(
            &img,
            &SefConfig {
                alpha: 1e-6,
                epsilon: 1e-6,
            },
        );
        assert!(max_abs_diff(&img, &out) <= 1e-4);
    }
}

// illuminate

pub fn transmission_is_local() {
    let mut r = rng(10);
    for _ in 0..CASES {
        let (w, h) = (r.gen_range(4..14), r.gen_range(4..14));
        let img = random_image(&mut r, w, h);
        let radius = r.gen_range(0..4);
        let ambient = AmbientLight(r.gen_range(0.0..1.0));
        let (px, py) = (r.gen_range(0..w), r.gen_range(0..h));
        let outside = |x: usize, y: usize| x.abs_diff(px) > radius || y.abs_diff(py) > radius;
        let mut other = img.clone();
        for y in 0..h {
            for x in 0..w {
                if outside(x, y) {
                    other.set_pixel(y * w + x, [r.gen(), r.gen(), r.gen()]);
                }
            }
        }
        let a = transmission_map(&img, ambient, radius, 0.05);
        let b = transmission_map(&other, ambient, radius, 0.05);
        assert_eq!(a.plane().get(px, py), b.plane().get(px, py));
        assert!(a.as_slice().iter().all(|&t| (0.05..=1.0).contains(&t)));
    }
}

pub fn forward_illuminate_is_monotone_in_input() {
    let mut r = rng(11);
    for _ in 0..CASES {
        let img = random_image(&mut r, 6, 6);
        let tm = transmission_map(&img, AmbientLight(r.gen_range(0.0..1.0)), 1, 0.05);
        let params = GlobalLightParams {
            theta: [
                r.gen_range(-2.0..2.0),
                r.gen_range(-2.0..2.0),
                r.gen_range(-2.0..2.0),
            ],
        };
        let brighter = add_noise(&mut r, &img, 0.0, 0.2);
        let (lo, hi) = (
            forward_illuminate(&img, &tm, &params),
            forward_illuminate(&brighter, &tm, &params),
        );
        let light = params.light();
        for c in 0..3 {
            for i in 0..36 {
                assert!(hi.plane(c)[i] >= lo.plane(c)[i]);
                if img.plane(c)[i] > light[c] && brighter.plane(c)[i] > img.plane(c)[i] {
                    assert!(hi.plane(c)[i] > lo.plane(c)[i]);
                }
            }
        }
    }
}

pub fn illuminate_losses_are_nonnegative_and_grayworld_ignores_order() {
    let mut r = rng(12);
    let cfg = IlluminateConfig::<f64>::default();
    for _ in 0..CASES {
        let img = random_image_in(&mut r, 5, 5, -0.5, 1.5);
        let perm = permutation(&mut r, 25);
        assert!(loss_grayworld(&img) >= 0.0);
        assert!(loss_luminous(&img, r.gen_range(0.0..=1.0)) >= 0.0);
        assert!(loss_total(&img, &cfg) >= 0.0);
        assert!((loss_grayworld(&permute(&img, &perm)) - loss_grayworld(&img)).abs() <= 1e-12);
    }
}

pub fn illuminate_fit_is_deterministic_and_descends() {
    let mut r = rng(13);
    for case in 0..CASES {
        let img = random_image(&mut r, 6, 6).map_channels(|c, v| if c == 0 { v * 0.1 } else { v });
        let depth = random_depth(&mut r, 6, 6);
        let cfg = IlluminateConfig {
            seed: case as u64,
            iters: 40,
            patch_radius: 1,
            ..IlluminateConfig::default()
        };
        let a = fit_illuminate(&img, &depth, &cfg).unwrap();
        let b = fit_illuminate(&img, &depth, &cfg).unwrap();
        assert_eq!(
            a.trace.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.trace.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert!(
            a.trace.last().unwrap() <= &a.trace[0],
            "case {case}: {:?}",
            a.trace
        );
    }
}

// aocm

pub fn cef_is_monotone() {
    let mut r = rng(14);
    for _ in 0..CASES {
        let img = random_image(&mut r, 5, 5);
        let out = cef(&img);
        for c in 0..3 {
            for i in 0..25 {
                for j in 0..25 {
                    if img.plane(c)[i] <= img.plane(c)[j] {
                        assert!(out.plane(c)[i] <= out.plane(c)[j]);
                    }
                }
            }
        }
    }
}

pub fn cef_endpoints() {
    let mut r = rng(15);
    let mut checked = 0;
    while checked < CASES {
        let img = random_image(&mut r, 7, 7);
        let stats = channel_stats(&img);
        let out = cef(&img);
        for c in 0..3 {
            let d = DualStretch::from_stats(&stats.channels[c]);
            if !(d.min < d.pivot && d.pivot < d.max) {
                continue;
            }
            checked += 1;
            for i in 0..49 {
                let v = img.plane(c)[i];
                if v == d.min {
                    assert!((out.plane(c)[i] - d.min / 2.0).abs() <= 1e-12);
                }
                if v == d.max {
                    assert!((out.plane(c)[i] - 1.0).abs() <= 1e-12);
                }
            }
        }
    }
}

pub fn hssf_preserves_lightness() {
    let mut r = rng(16);
    for _ in 0..CASES {
        let img = random_image(&mut r, 6, 6);
        let cfg = HssfConfig {
            hue_low: r.gen_range(0.0..180.0),
            hue_high: r.gen_range(180.0..359.0),
            s_min: r.gen_range(0.0..0.5),
            v_min: r.gen_range(0.0..0.5),
            lambda: r.gen_range(0.0..=1.0),
        };
        let out = hssf(&img, &cfg);
        for i in 0..36 {
            let (l0, l1) = (
                rgb_to_lab_px(img.pixel(i))[0],
                rgb_to_lab_px(out.pixel(i))[0],
            );
            assert!((l0 - l1).abs() <= 1.0, "L {l0} -> {l1}");
        }
    }
}

pub fn hssf_with_empty_mask_is_identity() {
    let mut r = rng(17);
    for _ in 0..CASES {
        let lo = r.gen_range(0.0..300.0);
        let cfg = HssfConfig {
            hue_low: lo,
            hue_high: lo + r.gen_range(0.0..59.0),
            lambda: r.gen_range(0.0..=1.0),
            ..HssfConfig::default()
        };
        // hues drawn outside the band
        let img = ImagePlanar::from_fn(5, 5, |_, _| {
            let mut h: f64 = r.gen_range(0.0..360.0);
            while h >= cfg.hue_low && h <= cfg.hue_high {
                h = r.gen_range(0.0..360.0);
            }
            hsv_to_rgb_px([h, r.gen(), r.gen()])
        });
        assert!(hue_mask(&img, &cfg).iter().all(|m| !m));
        assert_eq!(hssf(&img, &cfg), img);
    }
}

// hydrooptic

fn random_veil(r: &mut rand_chacha::ChaCha8Rng) -> VeilParams<f64> {
    VeilParams::from_values(&(0..12).map(|_| r.gen_range(-3.0..3.0)).collect::<Vec<_>>())
}

fn random_atten(r: &mut rand_chacha::ChaCha8Rng) -> AttenParams<f64> {
    AttenParams::from_values(
        &(0..12).map(|_| r.gen_range(-3.0..3.0)).collect::<Vec<_>>(),
        2,
    )
}

pub fn hydro_forwards_are_pointwise_in_depth() {
    let mut r = rng(18);
    for case in 0..CASES {
        let variant = VARIANTS[case % 2];
        let z = DepthMap::from_fn(5, 4, |_, _| r.gen_range(0.0..1.0)).unwrap();
        let perm = permutation(&mut r, 20);
        let zp = DepthMap::new(5, 4, perm.iter().map(|&i| z.as_slice()[i]).collect()).unwrap();
        let (veil, atten) = (random_veil(&mut r), random_atten(&mut r));
        let b = veilnet_forward(&z, &veil, variant);
        assert_eq!(veilnet_forward(&zp, &veil, variant), permute(&b, &perm));
        let a = attennet_forward(&z, &atten, variant);
        assert_eq!(attennet_forward(&zp, &atten, variant), permute(&a, &perm));
        for c in 0..3 {
            let ch = veil.channels[c];
            assert!(ch.decay1() >= 0.0 && ch.decay2() >= 0.0);
            assert!(b.plane(c).iter().all(|v| v.abs() < 1.0));
            assert!(a.plane(c).iter().all(|&v| v > 0.0 && v.is_finite()));
        }
    }
}

pub fn huber_and_color_losses_are_nonnegative() {
    let mut r = rng(19);
    for _ in 0..CASES {
        let img = random_image_in(&mut r, 5, 5, -1.0, 1.0);
        let huber = HuberConfig {
            delta: r.gen_range(0.01..1.0),
            eta: r.gen_range(0.01..2.0),
        };
        assert!(loss_huber(&img, &huber) >= 0.0);
        let cc = loss_color_consistency(&img);
        assert!(cc >= 0.0);
        let perm = permutation(&mut r, 25);
        assert!((loss_color_consistency(&permute(&img, &perm)) - cc).abs() <= 1e-12);
    }
}

pub fn sobel_loss_vanishes_exactly_for_channel_offsets() {
    let mut r = rng(20);
    for _ in 0..CASES {
        let a = random_image(&mut r, 8, 8);
        let offset = [
            r.gen_range(-0.5..0.5),
            r.gen_range(-0.5..0.5),
            r.gen_range(-0.5..0.5),
        ];
        let shifted = a.map_channels(|c, v| v + offset[c]);
        let l = loss_sobel(&shifted, &a).unwrap();
        assert!((0.0..=1e-12).contains(&l), "offset loss {l}");
        let b = random_image(&mut r, 8, 8);
        // interior crop differs by more than a per-channel constant
        assert!(loss_sobel(&b, &a).unwrap() > 0.0);
    }
}

pub fn degrade_is_monotone_and_bounded() {
    let mut r = rng(21);
    for _ in 0..CASES {
        let clean = random_image(&mut r, 4, 4);
        let brighter = add_noise(&mut r, &clean, 0.0, 0.3);
        let z = random_depth(&mut r, 4, 4);
        let beta = [
            r.gen_range(0.0..2.0),
            r.gen_range(0.0..2.0),
            r.gen_range(0.0..2.0),
        ];
        let binf = [r.gen(), r.gen(), r.gen()];
        let (u, ub) = (
            degrade(&clean, &z, beta, binf).unwrap(),
            degrade(&brighter, &z, beta, binf).unwrap(),
        );
        for c in 0..3 {
            for i in 0..16 {
                let j = clean.plane(c)[i];
                let v = u.plane(c)[i];
                assert!(ub.plane(c)[i] >= v);
                assert!(v >= j.min(binf[c]) - 1e-12 && v <= j.max(binf[c]) + 1e-12);
            }
        }
    }
}

pub fn hydro_fit_descends_in_both_phases() {
    let mut r = rng(22);
    for seed in 0..CASES as u64 {
        let img = random_image(&mut r, 10, 10);
        let depth = random_depth(&mut r, 10, 10);
        let cfg = HydroConfig {
            seed,
            ..HydroConfig::default()
        };
        let fit = fit_hydrooptic(&img, &depth, &cfg).unwrap();
        assert!(
            fit.veil_trace.last().unwrap() <= &fit.veil_trace[0],
            "seed {seed} veil {:?}",
            fit.veil_trace
        );
        assert!(
            fit.atten_trace.last().unwrap() <= &fit.atten_trace[0],
            "seed {seed} atten {:?}",
            fit.atten_trace
        );
    }
}

// optim

pub fn adam_ignores_parameter_labels() {
    let mut r = rng(23);
    for _ in 0..CASES {
        let n = r.gen_range(1..8);
        let values: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
        let names: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
        let perm = permutation(&mut r, n);
        let cfg = AdamConfig::with_lr(r.gen_range(1e-4..0.1));
        let mut a = ParamVector::new(names.clone(), values.clone()).unwrap();
        let mut b = ParamVector::new(
            perm.iter().map(|&i| format!("q{}", names[i])).collect(),
            perm.iter().map(|&i| values[i]).collect(),
        )
        .unwrap();
        let (mut sa, mut sb) = (AdamState::new(n, cfg), AdamState::new(n, cfg));
        for _ in 0..5 {
            let g: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
            let (ga, gb) = (
                a.with_values(g.clone()).unwrap(),
                b.with_values(perm.iter().map(|&i| g[i]).collect()).unwrap(),
            );
            sa.step(&mut a, &ga).unwrap();
            sb.step(&mut b, &gb).unwrap();
        }
        for (k, &i) in perm.iter().enumerate() {
            assert_eq!(a.values()[i].to_bits(), b.values()[k].to_bits());
        }
    }
}

pub fn grad_check_error_shrinks_with_step() {
    let mut r = rng(24);
    let f = |p: &[f64]| p[0].tanh();
    for _ in 0..CASES {
        let x: f64 = r.gen_range(-2.0..2.0);
        let d = [1.0 - x.tanh().powi(2)];
        let errs: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&h| grad_check(f, &[x], &d, h))
            .collect();
        assert!(errs[2] < errs[0], "x {x}: {errs:?}");
        assert!(errs[2] <= 1e-8);
    }
}

// metrics

pub fn psnr_and_ssim_are_symmetric() {
    let mut r = rng(25);
    for _ in 0..CASES {
        let a = random_image(&mut r, 12, 12);
        let b = add_noise(&mut r, &a, -0.2, 0.2);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() <= 1e-12);
    }
}

fn random_patches(r: &mut rand_chacha::ChaCha8Rng, w: usize, h: usize) -> GrayPatchSet {
    let n = r.gen_range(1..5);
    GrayPatchSet::new(
        (0..n)
            .map(|_| {
                let (x, y) = (r.gen_range(0..w), r.gen_range(0..h));
                PatchRect {
                    x,
                    y,
                    w: r.gen_range(1..=w - x),
                    h: r.gen_range(1..=h - y),
                }
            })
            .collect(),
    )
    .unwrap()
}

pub fn gpmae_is_scale_free_and_bounded() {
    let mut r = rng(26);
    for _ in 0..CASES {
        let img = random_image_in(&mut r, 8, 8, 0.01, 1.0);
        let patches = random_patches(&mut r, 8, 8);
        let g = gpmae(&img, &patches).unwrap();
        assert!((0.0..=90.0).contains(&g));
        assert!(g > 0.0);
        let k = r.gen_range(0.05..1.0);
        assert!((gpmae(&img.map(|v| v * k), &patches).unwrap() - g).abs() <= 1e-9);
        let gray = ImagePlanar::from_fn(8, 8, |_, _| [r.gen_range(0.01..1.0); 3]);
        assert!(gpmae(&gray, &patches).unwrap().abs() <= 1e-6);
    }
}

pub fn uciqe_of_achromatic_constant_is_zero() {
    let mut r = rng(27);
    for _ in 0..CASES {
        let v: f64 = r.gen();
        let img = ImagePlanar::filled(r.gen_range(1..12), r.gen_range(1..12), [v; 3]);
        assert!(uciqe(&img).abs() <= 1e-9, "gray {v}: {}", uciqe(&img));
    }
}

// pipeline

pub fn forward_stages_are_pure_and_clamped() {
    let mut r = rng(28);
    let cfg = PipelineConfig {
        stages: StageSet::through(Stage::Aocm),
        ..PipelineConfig::default()
    };
    for _ in 0..CASES {
        let red = r.gen_range(0.01..1.0);
        let img = random_image(&mut r, 9, 7).map_channels(|c, v| if c == 0 { v * red } else { v });
        let a = process_image(&img, None, &cfg).unwrap();
        let b = process_image(&img, None, &cfg).unwrap();
        assert_eq!(a.stages, b.stages);
        for (_, out) in &a.stages {
            assert!(out
                .planes()
                .iter()
                .flatten()
                .all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
        }
    }
}

pub fn full_pipeline_is_pure_and_clamped() {
    let mut r = rng(29);
    for seed in 0..CASES as u64 {
        let img = random_image(&mut r, 8, 8).map_channels(|c, v| {
            if c == 0 && seed % 2 == 1 {
                v * 0.05
            } else {
                v
            }
        });
        let depth = random_depth(&mut r, 8, 8);
        let mut cfg = PipelineConfig::default();
        cfg.seed = seed;
        cfg.illuminate.iters = 30;
        cfg.hydro.iters = 20;
        cfg.illuminate.patch_radius = 1;
        let a = process_image(&img, Some(&depth), &cfg).unwrap();
        let b = process_image(&img, Some(&depth), &cfg).unwrap();
        assert_eq!(a.stages, b.stages);
        assert_eq!(a.traces, b.traces);
        let out = a.output().unwrap();
        assert!(out
            .planes()
            .iter()
            .flatten()
            .all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
    }
}

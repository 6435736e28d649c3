//! Built-in checks run by `diver selftest`: closed-form oracles for every
//! stage formula and finite-difference checks of every analytic gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aocm::{hssf, suppress_chroma, DualStretch, HssfConfig};
use crate::hydrooptic::{
    atten_loss_grad, backscatter_physical, degrade, loss_color_consistency, loss_huber, loss_sobel,
    veil_loss_grad, HuberConfig, SoftplusVariant,
};
use crate::illuminate::{
    estimate_ambient, illuminate_loss_grad, loss_grayworld, loss_luminous, transmission_map,
    IlluminateConfig,
};
use crate::imgcore::{DepthMap, ImagePlanar, PlaneStats};
use crate::metrics::{gpmae, psnr, GrayPatchSet, PatchRect};
use crate::optim::grad_check;
use crate::router::{classify, Branch};
use crate::sef::sef_gains;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SelfTestReport {
    pub checks: Vec<Check>,
}

impl SelfTestReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn near(&mut self, name: &str, got: f64, want: f64, tol: f64) {
        let passed = (got - want).abs() <= tol;
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail: format!("got {got:.9}, want {want:.9}"),
        });
    }

    fn truth(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail,
        });
    }
}

/// Outcome of [`gradient_sweep`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSummary {
    pub accepted: usize,
    /// Points skipped because a kink lay within the difference step.
    pub rejected: usize,
    pub worst: f64,
}

/// Checks `loss_grad` at `points` random parameter vectors drawn by `sample`.
///
/// A point is rejected (and redrawn) when the central differences at `h`
/// and `h / 4` disagree by more than `tol`, meaning a non-differentiable
/// point lies within the step. At most `points` rejections are allowed.
pub fn gradient_sweep(
    loss_grad: impl Fn(&[f64]) -> (f64, Vec<f64>),
    mut sample: impl FnMut(&mut ChaCha8Rng) -> Vec<f64>,
    points: usize,
    seed: u64,
    h: f64,
    tol: f64,
) -> SweepSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = SweepSummary {
        accepted: 0,
        rejected: 0,
        worst: 0.0,
    };
    while s.accepted < points && s.rejected <= points {
        let at = sample(&mut rng);
        let (_, analytic) = loss_grad(&at);
        let f = |p: &[f64]| loss_grad(p).0;
        let coarse = grad_check(f, &at, &analytic, h);
        if coarse > tol {
            // compare the two numeric estimates directly
            let numeric = |step: f64| {
                (0..at.len())
                    .map(|i| {
                        let mut p = at.clone();
                        p[i] += step;
                        let fp = f(&p);
                        p[i] -= 2.0 * step;
                        (fp - f(&p)) / (2.0 * step)
                    })
                    .collect::<Vec<_>>()
            };
            let spread = grad_check(f, &at, &numeric(h / 4.0), h);
            if spread > tol {
                s.rejected += 1;
                continue;
            }
        }
        s.worst = s.worst.max(coarse);
        s.accepted += 1;
    }
    s
}

/// 32x32 textured image used by the gradient checks.
pub fn gradient_fixture() -> (ImagePlanar<f64>, DepthMap<f64>) {
    let img = ImagePlanar::from_fn(32, 32, |x, y| {
        let (fx, fy) = (x as f64 / 31.0, y as f64 / 31.0);
        [
            0.1 + 0.25 * (0.5 + 0.5 * (7.0 * fx + 3.0 * fy).sin()),
            0.2 + 0.5 * (0.5 + 0.5 * (5.0 * fy).cos()),
            0.25 + 0.45 * (0.5 + 0.5 * (4.0 * (fx - fy)).sin()),
        ]
    });
    let depth =
        DepthMap::from_fn(32, 32, |x, y| (x + 2 * y) as f64 / 93.0).expect("nonnegative ramp");
    (img, depth)
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

const GRAD_POINTS: usize = 10;
const GRAD_STEP: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-4;

fn sweep_check(report: &mut SelfTestReport, name: &str, s: SweepSummary) {
    report.truth(
        name,
        s.accepted >= GRAD_POINTS && s.worst <= GRAD_TOL,
        format!(
            "{} points, {} rejected near kinks, worst relative error {:.2e}",
            s.accepted, s.rejected, s.worst
        ),
    );
}

pub fn run() -> SelfTestReport {
    let mut r = SelfTestReport::default();

    r.truth(
        "route: r < g/5 is low light",
        classify([0.05, 0.5, 0.3]).branch == Branch::LowLight,
        String::new(),
    );
    r.truth(
        "route: r = g/5 is well lit",
        classify([0.1, 0.5, 0.3]).branch == Branch::WellLit,
        String::new(),
    );

    let g = sef_gains([0.2, 0.6, 0.4], 0.0);
    r.near("sef: gain R", g[0], 3.0, 1e-12);
    r.near("sef: gain B", g[2], 1.5, 1e-12);

    let d = DualStretch::from_stats(&PlaneStats {
        mean: 100.0 / 255.0,
        median: 80.0 / 255.0,
        min: 0.0,
        max: 1.0,
    });
    r.near("cef: below pivot", d.map(45.0 / 255.0) * 255.0, 63.75, 1e-9);
    r.near("cef: at pivot", d.map(90.0 / 255.0) * 255.0, 127.5, 1e-9);
    r.near(
        "cef: above pivot",
        d.map(172.5 / 255.0) * 255.0,
        191.25,
        1e-9,
    );
    r.near(
        "hssf: half suppression",
        suppress_chroma(180.0, 0.5),
        154.0,
        1e-12,
    );
    let red = ImagePlanar::<f64>::filled(2, 2, [0.8, 0.1, 0.1]);
    r.truth(
        "hssf: out-of-band pixels untouched",
        hssf(&red, &HssfConfig::default()) == red,
        String::new(),
    );

    let pure_red = ImagePlanar::<f64>::filled(2, 2, [1.0, 0.0, 0.0]);
    r.near(
        "loss: gray-world of pure red",
        loss_grayworld(&pure_red),
        4.0 / 9.0,
        1e-12,
    );
    r.near(
        "loss: luminous at target",
        loss_luminous(&ImagePlanar::<f64>::filled(2, 2, [0.5; 3]), 0.5),
        0.0,
        1e-15,
    );
    let huber = HuberConfig::default();
    r.near(
        "loss: huber quadratic",
        loss_huber(&ImagePlanar::filled(2, 2, [0.05; 3]), &huber),
        0.0025,
        1e-12,
    );
    r.near(
        "loss: huber linear",
        loss_huber(&ImagePlanar::filled(2, 2, [0.5; 3]), &huber),
        0.045,
        1e-12,
    );
    r.near(
        "loss: color consistency",
        loss_color_consistency(&ImagePlanar::<f64>::filled(2, 2, [0.2, 0.6, 0.4])),
        0.24,
        1e-12,
    );
    let zero = ImagePlanar::<f64>::filled(6, 6, [0.0; 3]);
    let step = ImagePlanar::<f64>::from_fn(6, 6, |x, _| [if x >= 3 { 1.0 } else { 0.0 }, 0.0, 0.0]);
    r.near(
        "loss: sobel step edge",
        loss_sobel(&step, &zero).unwrap_or(f64::NAN),
        4.0 / 9.0,
        1e-12,
    );

    let z1 = DepthMap::filled(1, 1, 1.0);
    r.near(
        "veil: physical backscatter",
        backscatter_physical(&z1, 0.3, 0.1, 0.8, 1.2).get(0, 0),
        0.195_320_731_956_053_73,
        1e-12,
    );
    let u = degrade(
        &ImagePlanar::filled(1, 1, [0.8; 3]),
        &DepthMap::filled(1, 1, 2.0),
        [0.5; 3],
        [0.2; 3],
    );
    r.near(
        "degrade: single pixel",
        u.map(|u| u.plane(0)[0]).unwrap_or(f64::NAN),
        0.420_727_664_702_865_4,
        1e-12,
    );

    let patches = GrayPatchSet::new(vec![PatchRect {
        x: 0,
        y: 0,
        w: 2,
        h: 2,
    }])
    .expect("nonempty");
    r.near(
        "gpmae: pure red patch",
        gpmae(&pure_red, &patches).unwrap_or(f64::NAN),
        54.735_610_317_245_35,
        1e-9,
    );
    let a = ImagePlanar::<f64>::filled(4, 4, [0.3, 0.5, 0.7]);
    r.near(
        "psnr: offset 0.1",
        psnr(&a, &a.map(|v| v + 0.1)).unwrap_or(f64::NAN),
        20.0,
        1e-9,
    );
    r.near(
        "psnr: offset 0.01",
        psnr(&a, &a.map(|v| v + 0.01)).unwrap_or(f64::NAN),
        40.0,
        1e-9,
    );

    let (img, depth) = gradient_fixture();
    let cfg = IlluminateConfig::<f64>::default();
    match estimate_ambient(&img, &depth) {
        Ok(ambient) => {
            let tm = transmission_map(&img, ambient, cfg.patch_radius, cfg.t_min);
            let s = gradient_sweep(
                |t| {
                    let (l, g) = illuminate_loss_grad(&img, &tm, &cfg, t);
                    (l, g.to_vec())
                },
                |rng| uniform(rng, 3, -1.5, 1.5),
                GRAD_POINTS,
                1,
                GRAD_STEP,
                GRAD_TOL,
            );
            sweep_check(&mut r, "gradient: illuminate total loss", s);
        }
        Err(e) => r.truth("gradient: illuminate total loss", false, e.to_string()),
    }

    let z = depth.normalized();
    let zs = z.as_slice();
    for variant in [SoftplusVariant::StandardSmooth, SoftplusVariant::Piecewise] {
        let s = gradient_sweep(
            |v| veil_loss_grad(zs, variant, &huber, v),
            |rng| {
                let mut v = uniform(rng, 12, -0.6, 0.6);
                v.iter_mut().skip(2).step_by(4).for_each(|x| *x *= 3.0);
                v.iter_mut().skip(3).step_by(4).for_each(|x| *x *= 3.0);
                v
            },
            GRAD_POINTS,
            2,
            GRAD_STEP,
            GRAD_TOL,
        );
        sweep_check(
            &mut r,
            &format!("gradient: veil huber loss ({})", variant.name()),
            s,
        );

        let direct = img.map(|v| v * 0.8);
        let s = gradient_sweep(
            |v| atten_loss_grad(&direct, zs, variant, 0.5, 2, v),
            |rng| uniform(rng, 12, -1.5, 1.5),
            GRAD_POINTS,
            3,
            GRAD_STEP,
            GRAD_TOL,
        );
        sweep_check(
            &mut r,
            &format!("gradient: atten composite loss ({})", variant.name()),
            s,
        );
    }
    r
}

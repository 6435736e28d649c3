use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::config::{PipelineConfig, Stage};
use super::depth::{depth_for, fallback_prior, DepthOrigin, DepthSource};
use super::manifest::{
    EntryTiming, LossTraces, ManifestEntry, MetricsReport, RunManifest, REPORT_VERSION,
};
use crate::aocm::aocm;
use crate::error::{DiverError, Result};
use crate::hydrooptic::{fit_hydrooptic, fit_hydrooptic_joint};
use crate::illuminate::{fit_illuminate, fit_illuminate_joint};
use crate::imgcore::{io, DepthMap, ImagePlanar};
use crate::metrics::{aggregate, assess, PatchFile};
use crate::router::{assess_illumination, Branch, RouteDecision};
use crate::scalar::Scalar;
use crate::sef::apply_sef;

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// Enhancement method chosen by the router.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnhanceMethod {
    Illuminate,
    Sef,
}

impl EnhanceMethod {
    pub fn for_branch(branch: Branch) -> Self {
        match branch {
            Branch::LowLight => EnhanceMethod::Illuminate,
            Branch::WellLit => EnhanceMethod::Sef,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EnhanceMethod::Illuminate => "illuminate",
            EnhanceMethod::Sef => "sef",
        }
    }
}

/// Settings of a file-based run beyond the per-image [`PipelineConfig`].
#[derive(Debug, Clone)]
pub struct RunOptions<T> {
    pub config: PipelineConfig<T>,
    pub depth: DepthSource,
    /// Where stage outputs go; nothing is written when absent.
    pub output_dir: Option<PathBuf>,
    /// Also write the enhance and aocm outputs, not only the final image.
    pub save_intermediates: bool,
    pub metrics: bool,
    pub reference_dir: Option<PathBuf>,
    pub patches: Option<PatchFile>,
    /// Fit one shared parameter set per stage across all images.
    pub joint: bool,
}

impl<T: Scalar> RunOptions<T> {
    pub fn new(config: PipelineConfig<T>) -> Self {
        Self {
            config,
            depth: DepthSource::FallbackPrior,
            output_dir: None,
            save_intermediates: false,
            metrics: false,
            reference_dir: None,
            patches: None,
            joint: false,
        }
    }
}

/// In-memory result of [`process_image`].
#[derive(Debug, Clone)]
pub struct ImageResult<T> {
    pub route: RouteDecision<T>,
    pub enhance: Option<EnhanceMethod>,
    /// Output of every executed stage after routing, in order.
    pub stages: Vec<(Stage, ImagePlanar<T>)>,
    pub depth: Option<DepthOrigin>,
    pub traces: LossTraces,
}

impl<T: Scalar> ImageResult<T> {
    /// Last stage output, if any stage after routing ran.
    pub fn output(&self) -> Option<&ImagePlanar<T>> {
        self.stages.last().map(|(_, img)| img)
    }
}

struct Work<T> {
    entry: ManifestEntry,
    timing: BTreeMap<String, f64>,
    input: Option<ImagePlanar<T>>,
    current: Option<ImagePlanar<T>>,
    route: Option<RouteDecision<T>>,
    enhance: Option<EnhanceMethod>,
    depth: Option<DepthMap<T>>,
    depth_origin: Option<DepthOrigin>,
    stages: Vec<(Stage, ImagePlanar<T>)>,
    /// In-memory depth supplied by the caller instead of a [`DepthSource`].
    given_depth: Option<DepthMap<T>>,
    error: Option<DiverError>,
}

impl<T: Scalar> Work<T> {
    fn new(source: &Path, stem: &str) -> Self {
        Self {
            entry: ManifestEntry::new(source, stem),
            timing: BTreeMap::new(),
            input: None,
            current: None,
            route: None,
            enhance: None,
            depth: None,
            depth_origin: None,
            stages: Vec::new(),
            given_depth: None,
            error: None,
        }
    }

    fn alive(&self) -> bool {
        self.current.is_some() && self.entry.ok
    }

    fn fail(&mut self, stage: &str, err: DiverError) {
        log::warn!("{}: {stage} failed: {err}", self.entry.source);
        self.entry.fail(stage, &err);
        self.current = None;
        self.error = Some(err);
    }

    fn advance(&mut self, stage: Stage, img: ImagePlanar<T>) {
        self.stages.push((stage, img.clone()));
        self.current = Some(img);
    }

    fn record_time(&mut self, stage: &str, ms: f64) {
        *self.timing.entry(stage.to_string()).or_insert(0.0) += ms;
    }

    /// Loads depth on first use. In file mode a well-lit image without a
    /// depth file falls back to the prior; a low-light one fails.
    fn ensure_depth(&mut self, source: &DepthSource) -> Result<()> {
        if self.depth.is_some() {
            return Ok(());
        }
        let img = self.input.as_ref().expect("loaded");
        if let Some(d) = self.given_depth.take() {
            img.ensure_same_dims(d.dims())?;
            self.depth = Some(d.normalized());
            self.depth_origin = Some(DepthOrigin::File(PathBuf::from("<memory>")));
        } else {
            let (d, origin) = match depth_for(img, source, &self.entry.stem) {
                Err(DiverError::MissingDepth(what))
                    if self.route.map(|r| r.branch) == Some(Branch::WellLit) =>
                {
                    log::info!(
                        "{}: no depth file ({what}); using the fallback prior",
                        self.entry.source
                    );
                    (fallback_prior(img), DepthOrigin::Prior)
                }
                other => other?,
            };
            self.depth = Some(d);
            self.depth_origin = Some(origin);
        }
        self.entry.depth = self.depth_origin.as_ref().map(|o| o.label());
        Ok(())
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn stage_route<T: Scalar>(works: &mut [Work<T>]) {
    works.par_iter_mut().filter(|w| w.alive()).for_each(|w| {
        let t = Instant::now();
        let d = assess_illumination(w.current.as_ref().expect("alive"));
        w.route = Some(d);
        w.entry.route = Some((&d).into());
        w.record_time("route", ms_since(t));
    });
}

fn stage_enhance<T: Scalar>(
    works: &mut [Work<T>],
    cfg: &PipelineConfig<T>,
    source: &DepthSource,
    joint: bool,
) {
    let ill_cfg = cfg.illuminate_effective();
    works.par_iter_mut().filter(|w| w.alive()).for_each(|w| {
        let method = EnhanceMethod::for_branch(w.route.expect("routed").branch);
        w.enhance = Some(method);
        w.entry.enhance = Some(method.name().to_string());
        let t = Instant::now();
        match method {
            EnhanceMethod::Sef => {
                let out = apply_sef(w.current.as_ref().expect("alive"), &cfg.sef);
                w.advance(Stage::Enhance, out);
                w.record_time("enhance", ms_since(t));
            }
            EnhanceMethod::Illuminate => {
                if let Err(e) = w.ensure_depth(source) {
                    w.fail("depth", e);
                } else if !joint {
                    let img = w.current.as_ref().expect("alive");
                    match fit_illuminate(img, w.depth.as_ref().expect("depth"), &ill_cfg) {
                        Ok(fit) => {
                            w.entry.traces.illuminate = Some(LossTraces::to_f64(&fit.trace));
                            w.advance(Stage::Enhance, fit.image);
                        }
                        Err(e) => w.fail("enhance", e),
                    }
                }
                w.record_time("enhance", ms_since(t));
            }
        }
    });
    if !joint {
        return;
    }
    let idx: Vec<usize> = (0..works.len())
        .filter(|&i| works[i].alive() && works[i].enhance == Some(EnhanceMethod::Illuminate))
        .collect();
    if idx.is_empty() {
        return;
    }
    let t = Instant::now();
    let items: Vec<_> = idx
        .iter()
        .map(|&i| {
            (
                works[i].current.as_ref().unwrap(),
                works[i].depth.as_ref().unwrap(),
            )
        })
        .collect();
    let result = fit_illuminate_joint(&items, &ill_cfg);
    let ms = ms_since(t);
    match result {
        Ok(fits) => {
            for (&i, fit) in idx.iter().zip(fits) {
                works[i].entry.traces.illuminate = Some(LossTraces::to_f64(&fit.trace));
                works[i].advance(Stage::Enhance, fit.image);
                works[i].record_time("enhance", ms);
            }
        }
        Err(e) => {
            let msg = e.to_string();
            works[idx[0]].fail("enhance", e);
            for &i in &idx[1..] {
                works[i].fail(
                    "enhance",
                    DiverError::InvalidConfig(format!("joint fit failed: {msg}")),
                );
            }
        }
    }
}

fn stage_aocm<T: Scalar>(works: &mut [Work<T>], cfg: &PipelineConfig<T>) {
    works.par_iter_mut().filter(|w| w.alive()).for_each(|w| {
        let t = Instant::now();
        let out = aocm(w.current.as_ref().expect("alive"), &cfg.aocm);
        w.advance(Stage::Aocm, out);
        w.record_time("aocm", ms_since(t));
    });
}

fn stage_hydro<T: Scalar>(
    works: &mut [Work<T>],
    cfg: &PipelineConfig<T>,
    source: &DepthSource,
    joint: bool,
) {
    let hydro_cfg = cfg.hydro_effective();
    works.par_iter_mut().filter(|w| w.alive()).for_each(|w| {
        let t = Instant::now();
        if let Err(e) = w.ensure_depth(source) {
            w.fail("depth", e);
        } else if !joint {
            match fit_hydrooptic(
                w.current.as_ref().expect("alive"),
                w.depth.as_ref().expect("depth"),
                &hydro_cfg,
            ) {
                Ok(fit) => {
                    w.entry.traces.veil = Some(LossTraces::to_f64(&fit.veil_trace));
                    w.entry.traces.atten = Some(LossTraces::to_f64(&fit.atten_trace));
                    w.advance(Stage::Hydro, fit.image);
                }
                Err(e) => w.fail("hydro", e),
            }
        }
        w.record_time("hydro", ms_since(t));
    });
    if !joint {
        return;
    }
    let idx: Vec<usize> = (0..works.len()).filter(|&i| works[i].alive()).collect();
    if idx.is_empty() {
        return;
    }
    let t = Instant::now();
    let items: Vec<_> = idx
        .iter()
        .map(|&i| {
            (
                works[i].current.as_ref().unwrap(),
                works[i].depth.as_ref().unwrap(),
            )
        })
        .collect();
    let result = fit_hydrooptic_joint(&items, &hydro_cfg);
    let ms = ms_since(t);
    match result {
        Ok(fits) => {
            for (&i, fit) in idx.iter().zip(fits) {
                works[i].entry.traces.veil = Some(LossTraces::to_f64(&fit.veil_trace));
                works[i].entry.traces.atten = Some(LossTraces::to_f64(&fit.atten_trace));
                works[i].advance(Stage::Hydro, fit.image);
                works[i].record_time("hydro", ms);
            }
        }
        Err(e) => {
            let msg = e.to_string();
            works[idx[0]].fail("hydro", e);
            for &i in &idx[1..] {
                works[i].fail(
                    "hydro",
                    DiverError::InvalidConfig(format!("joint fit failed: {msg}")),
                );
            }
        }
    }
}

fn execute<T: Scalar>(
    works: &mut [Work<T>],
    cfg: &PipelineConfig<T>,
    source: &DepthSource,
    joint: bool,
) {
    for stage in cfg.stages.iter() {
        match stage {
            Stage::Route => stage_route(works),
            Stage::Enhance => stage_enhance(works, cfg, source, joint),
            Stage::Aocm => stage_aocm(works, cfg),
            Stage::Hydro => stage_hydro(works, cfg, source, joint),
        }
    }
}

/// Runs the configured stage prefix on one in-memory image.
///
/// Without `depth`, stages that need one use the red-attenuation prior.
pub fn process_image<T: Scalar>(
    img: &ImagePlanar<T>,
    depth: Option<&DepthMap<T>>,
    cfg: &PipelineConfig<T>,
) -> Result<ImageResult<T>> {
    cfg.validate()?;
    img.check_finite()?;
    let mut w = Work::new(Path::new("<memory>"), "image");
    w.input = Some(img.clone());
    w.current = Some(img.clone());
    w.given_depth = depth.cloned();
    let mut works = [w];
    execute(&mut works, cfg, &DepthSource::FallbackPrior, false);
    let [mut w] = works;
    if let Some(err) = w.error.take() {
        return Err(err);
    }
    Ok(ImageResult {
        route: w.route.expect("route always runs"),
        enhance: w.enhance,
        stages: w.stages,
        depth: w.depth_origin,
        traces: w.entry.traces,
    })
}

fn has_image_extension(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// A single file, or every PNG/JPEG directly inside a directory, sorted by path.
pub fn collect_inputs(path: &Path) -> Result<Vec<PathBuf>> {
    let io_err = |source| DiverError::Io {
        path: path.to_path_buf(),
        source,
    };
    let meta = std::fs::metadata(path).map_err(io_err)?;
    if meta.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(path).map_err(io_err)? {
        let p = entry.map_err(io_err)?.path();
        if p.is_file() && has_image_extension(&p) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

pub fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Reference image with the same stem in `dir`, if present.
pub fn find_reference(dir: &Path, stem: &str) -> Option<PathBuf> {
    IMAGE_EXTENSIONS
        .iter()
        .flat_map(|e| [e.to_string(), e.to_ascii_uppercase()])
        .map(|e| dir.join(format!("{stem}.{e}")))
        .find(|p| p.is_file())
}

fn score<T: Scalar>(
    entry: &mut ManifestEntry,
    img: &ImagePlanar<T>,
    reference_dir: Option<&Path>,
    patches: Option<&PatchFile>,
) -> Result<()> {
    let reference = match reference_dir.and_then(|d| find_reference(d, &entry.stem)) {
        Some(p) => Some(io::load_rgb::<T>(&p)?),
        None => None,
    };
    let set = patches.and_then(|p| p.for_stem(&entry.stem));
    entry.metrics = Some(assess(img, reference.as_ref(), set.as_ref())?);
    Ok(())
}

fn load_all<T: Scalar>(inputs: &[PathBuf]) -> Vec<Work<T>> {
    inputs
        .par_iter()
        .map(|p| {
            let mut w = Work::new(p, &stem_of(p));
            let t = Instant::now();
            match io::load_rgb::<T>(p) {
                Ok(img) => {
                    w.input = Some(img.clone());
                    w.current = Some(img);
                }
                Err(e) => w.fail("load", e),
            }
            w.record_time("load", ms_since(t));
            w
        })
        .collect()
}

/// Processes every input file and assembles the manifest in input order.
pub fn run_pipeline<T: Scalar>(inputs: &[PathBuf], opts: &RunOptions<T>) -> Result<RunManifest> {
    if inputs.is_empty() {
        return Err(DiverError::InvalidConfig("no input images".into()));
    }
    opts.config.validate()?;
    let mut works = load_all::<T>(inputs);
    execute(&mut works, &opts.config, &opts.depth, opts.joint);

    works.par_iter_mut().filter(|w| w.alive()).for_each(|w| {
        let t = Instant::now();
        if let Some(dir) = &opts.output_dir {
            let last = w.stages.len();
            for (k, (stage, img)) in w.stages.iter().enumerate() {
                let is_final = k + 1 == last;
                if !is_final && !opts.save_intermediates {
                    continue;
                }
                let name = if is_final {
                    format!("{}.png", w.entry.stem)
                } else {
                    format!("{}.{}.png", w.entry.stem, stage.name())
                };
                let path = dir.join(name);
                if let Err(e) = io::save_rgb(&path, img) {
                    w.entry.fail("output", &e);
                    log::warn!("{}: output failed: {e}", w.entry.source);
                    break;
                }
                w.entry
                    .outputs
                    .insert(stage.name().to_string(), path.display().to_string());
            }
        }
        if opts.metrics && w.entry.ok {
            let egress = w.current.clone().expect("alive");
            if let Err(e) = score(
                &mut w.entry,
                &egress,
                opts.reference_dir.as_deref(),
                opts.patches.as_ref(),
            ) {
                w.fail("metrics", e);
            }
        }
        w.record_time("finish", ms_since(t));
    });

    let aggregate = opts
        .metrics
        .then(|| aggregate(works.iter().filter_map(|w| w.entry.metrics.as_ref())));
    let timing = works
        .iter()
        .map(|w| EntryTiming {
            source: w.entry.source.clone(),
            stages_ms: w.timing.clone(),
        })
        .collect();
    Ok(RunManifest {
        version: REPORT_VERSION,
        seed: opts.config.seed,
        stages: opts
            .config
            .stages
            .names()
            .into_iter()
            .map(String::from)
            .collect(),
        joint: opts.joint,
        entries: works.into_iter().map(|w| w.entry).collect(),
        aggregate,
        timing: Some(timing),
    })
}

/// Scores existing images without processing them.
pub fn score_images<T: Scalar>(
    inputs: &[PathBuf],
    reference_dir: Option<&Path>,
    patches: Option<&PatchFile>,
) -> Result<MetricsReport> {
    if inputs.is_empty() {
        return Err(DiverError::InvalidConfig("no input images".into()));
    }
    let entries: Vec<ManifestEntry> = inputs
        .par_iter()
        .map(|p| {
            let mut entry = ManifestEntry::new(p, &stem_of(p));
            match io::load_rgb::<T>(p) {
                Ok(img) => {
                    if let Err(e) = score(&mut entry, &img, reference_dir, patches) {
                        entry.fail("metrics", &e);
                    }
                }
                Err(e) => entry.fail("load", &e),
            }
            entry
        })
        .collect();
    let aggregate = aggregate(entries.iter().filter_map(|e| e.metrics.as_ref()));
    Ok(MetricsReport {
        version: REPORT_VERSION,
        entries,
        aggregate,
    })
}

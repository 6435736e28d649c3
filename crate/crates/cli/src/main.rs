use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use diver_core::hydrooptic::degrade;
use diver_core::imgcore::{io, DepthMap};
use diver_core::metrics::PatchFile;
use diver_core::pipeline::{self, DepthSource, PipelineConfig, RunOptions, StageSet};
use diver_core::{selftest, Config};

#[derive(Parser)]
#[command(name = "diver", version, about = "Underwater image restoration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the restoration pipeline on an image or a folder.
    Enhance(EnhanceArgs),
    /// Synthesize underwater images from clean images and depth maps.
    Degrade(DegradeArgs),
    /// Score images without processing them.
    Metrics(MetricsArgs),
    /// Run formula oracles and gradient checks.
    Selftest,
}

#[derive(Args)]
struct EnhanceArgs {
    /// Image file or folder of PNG/JPEG images.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Folder of 16-bit depth PNGs named after the inputs. Without it the
    /// red-attenuation prior is used.
    #[arg(long)]
    depth: Option<PathBuf>,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated stage prefix, e.g. `route,illuminate,aocm`.
    #[arg(long)]
    stages: Option<String>,
    /// Compute quality metrics of every output.
    #[arg(long)]
    metrics: bool,
    /// Folder of reference images for PSNR and SSIM.
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    /// Gray-patch annotation file for GPMAE.
    #[arg(long)]
    patches: Option<PathBuf>,
    /// Where to write the JSON run manifest (default: `<output>/report.json`).
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fit one parameter set per stage across the whole folder.
    #[arg(long)]
    joint: bool,
    /// Also write the enhance and aocm outputs.
    #[arg(long)]
    save_stages: bool,
}

#[derive(Args)]
struct DegradeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    depth: PathBuf,
    /// Attenuation coefficients `r,g,b`.
    #[arg(long, value_parser = parse_triple)]
    beta: [f64; 3],
    /// Veiling light `r,g,b`.
    #[arg(long, value_parser = parse_triple)]
    binf: [f64; 3],
    #[arg(long)]
    output: PathBuf,
    /// Multiplier applied to the depth values (16-bit PNG value / 65535).
    #[arg(long, default_value_t = 1.0)]
    depth_scale: f64,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    #[arg(long)]
    patches: Option<PathBuf>,
    #[arg(long)]
    report: PathBuf,
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got `{s}`"));
    }
    let mut out = [0.0f64; 3];
    for (slot, p) in out.iter_mut().zip(parts) {
        *slot = p.parse().map_err(|_| format!("`{p}` is not a number"))?;
        if !slot.is_finite() {
            return Err(format!("`{p}` is not finite"));
        }
    }
    Ok(out)
}

fn load_patches(path: Option<&Path>) -> Result<Option<PatchFile>> {
    path.map(|p| PatchFile::load(p).with_context(|| format!("reading patches {}", p.display())))
        .transpose()
}

fn enhance(args: EnhanceArgs) -> Result<bool> {
    let mut config: Config = match &args.config {
        Some(p) => {
            PipelineConfig::load(p).with_context(|| format!("reading config {}", p.display()))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(list) = &args.stages {
        config.stages = StageSet::parse(list)?;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let inputs = pipeline::collect_inputs(&args.input)?;
    if inputs.is_empty() {
        bail!("no PNG or JPEG images found in {}", args.input.display());
    }
    let opts = RunOptions {
        config,
        depth: args
            .depth
            .map_or(DepthSource::FallbackPrior, DepthSource::Files),
        output_dir: Some(args.output.clone()),
        save_intermediates: args.save_stages,
        metrics: args.metrics,
        reference_dir: args.reference,
        patches: load_patches(args.patches.as_deref())?,
        joint: args.joint,
    };
    let manifest = pipeline::run_pipeline(&inputs, &opts)?;
    let report = args
        .report
        .unwrap_or_else(|| args.output.join("report.json"));
    manifest.write(&report)?;
    for e in &manifest.entries {
        match (&e.error, &e.route) {
            (Some(err), _) => println!("{}: FAILED at {}: {}", e.source, err.stage, err.message),
            (None, Some(r)) => println!(
                "{}: {:?}, {} output(s)",
                e.source,
                r.branch,
                e.outputs.len()
            ),
            (None, None) => println!("{}: ok", e.source),
        }
    }
    println!("report: {}", report.display());
    Ok(manifest.failures() == 0)
}

fn degrade_cmd(args: DegradeArgs) -> Result<bool> {
    if !(args.depth_scale > 0.0 && args.depth_scale.is_finite()) {
        bail!("--depth-scale must be positive");
    }
    let inputs = pipeline::collect_inputs(&args.input)?;
    if inputs.is_empty() {
        bail!("no PNG or JPEG images found in {}", args.input.display());
    }
    let mut ok = true;
    for path in inputs {
        let stem = pipeline::stem_of(&path);
        let result = (|| -> Result<PathBuf> {
            let clean = io::load_rgb::<f64>(&path)?;
            let depth_path = pipeline::depth_file(&args.depth, &stem);
            let raw: DepthMap<f64> =
                io::load_depth(&depth_path).with_context(|| format!("depth for {stem}"))?;
            let scaled = DepthMap::new(
                raw.width(),
                raw.height(),
                raw.as_slice()
                    .iter()
                    .map(|v| v * args.depth_scale)
                    .collect(),
            )?;
            let out = degrade(&clean, &scaled, args.beta, args.binf)?;
            let dest = args.output.join(format!("{stem}.png"));
            io::save_rgb(&dest, &out)?;
            Ok(dest)
        })();
        match result {
            Ok(dest) => println!("{} -> {}", path.display(), dest.display()),
            Err(e) => {
                ok = false;
                eprintln!("{}: {e:#}", path.display());
            }
        }
    }
    Ok(ok)
}

fn metrics_cmd(args: MetricsArgs) -> Result<bool> {
    let inputs = pipeline::collect_inputs(&args.input)?;
    if inputs.is_empty() {
        bail!("no PNG or JPEG images found in {}", args.input.display());
    }
    let patches = load_patches(args.patches.as_deref())?;
    let report =
        pipeline::score_images::<f64>(&inputs, args.reference.as_deref(), patches.as_ref())?;
    report.write(&args.report)?;
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
    for e in &report.entries {
        match (&e.metrics, &e.error) {
            (Some(m), _) => println!(
                "{}: uiqm {:.4} uciqe {:.4} psnr {} ssim {} gpmae {}",
                e.stem,
                m.uiqm,
                m.uciqe,
                fmt(m.psnr),
                fmt(m.ssim),
                fmt(m.gpmae)
            ),
            (None, Some(err)) => println!("{}: FAILED at {}: {}", e.stem, err.stage, err.message),
            (None, None) => {}
        }
    }
    Ok(report.entries.iter().all(|e| e.ok))
}

fn selftest_cmd() -> bool {
    let report = selftest::run();
    for c in &report.checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        if c.detail.is_empty() {
            println!("{mark} {}", c.name);
        } else {
            println!("{mark} {} ({})", c.name, c.detail);
        }
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {failed} failed", report.checks.len());
    failed == 0
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Enhance(a) => enhance(a),
        Command::Degrade(a) => degrade_cmd(a),
        Command::Metrics(a) => metrics_cmd(a),
        Command::Selftest => Ok(selftest_cmd()),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(2)
        }
    }
}

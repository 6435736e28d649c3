//! Orchestration: route, enhance (IlluminateNet or SEF), AOCM and
//! Hydro-OpticNet over single images or folders, with depth ingestion,
//! flat-file configuration and a JSON run manifest.
//!
//! Images are independent unless a joint run is requested, so a folder is
//! processed in parallel and every per-image result depends only on the
//! image, its depth, the configuration and the seed.

mod config;
mod depth;
mod manifest;
mod run;

pub use self::config::{PipelineConfig, Stage, StageSet};
pub use self::depth::{depth_file, depth_for, fallback_prior, DepthOrigin, DepthSource};
pub use self::manifest::{
    EntryError, EntryTiming, LossTraces, ManifestEntry, MetricsReport, RouteRecord, RunManifest,
    REPORT_VERSION,
};
pub use self::run::{
    collect_inputs, find_reference, process_image, run_pipeline, score_images, stem_of,
    EnhanceMethod, ImageResult, RunOptions,
};

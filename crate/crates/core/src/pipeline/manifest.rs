use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{DiverError, Result};
use crate::metrics::{QualityAggregate, QualityScores};
use crate::router::{Branch, RouteDecision};
use crate::scalar::Scalar;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RouteRecord {
    pub branch: Branch,
    pub r_avg: f64,
    pub g_avg: f64,
    pub b_avg: f64,
}

impl<T: Scalar> From<&RouteDecision<T>> for RouteRecord {
    fn from(d: &RouteDecision<T>) -> Self {
        Self {
            branch: d.branch,
            r_avg: d.r_avg.as_f64(),
            g_avg: d.g_avg.as_f64(),
            b_avg: d.b_avg.as_f64(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LossTraces {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub illuminate: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub veil: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atten: Option<Vec<f64>>,
}

impl LossTraces {
    pub(crate) fn to_f64<T: Scalar>(trace: &[T]) -> Vec<f64> {
        trace.iter().map(|v| v.as_f64()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryError {
    /// Stage that failed: `load`, `depth`, one of the pipeline stages, `output` or `metrics`.
    pub stage: String,
    pub message: String,
}

/// One record per input image.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub source: String,
    pub stem: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<EntryError>,
    /// Depth file path, `prior`, or absent when no stage needed depth.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub route: Option<RouteRecord>,
    /// `illuminate` or `sef`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enhance: Option<String>,
    /// Stage name to written file.
    pub outputs: BTreeMap<String, String>,
    pub traces: LossTraces,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<QualityScores>,
}

impl ManifestEntry {
    pub fn new(source: &Path, stem: &str) -> Self {
        Self {
            source: source.display().to_string(),
            stem: stem.to_string(),
            ok: true,
            error: None,
            depth: None,
            route: None,
            enhance: None,
            outputs: BTreeMap::new(),
            traces: LossTraces::default(),
            metrics: None,
        }
    }

    pub fn fail(&mut self, stage: &str, err: &DiverError) {
        self.ok = false;
        self.error = Some(EntryError {
            stage: stage.to_string(),
            message: err.to_string(),
        });
    }
}

/// Wall-clock milliseconds per stage for one entry.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EntryTiming {
    pub source: String,
    pub stages_ms: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub version: u32,
    pub seed: u64,
    pub stages: Vec<String>,
    pub joint: bool,
    pub entries: Vec<ManifestEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<QualityAggregate>,
    /// Parallel to `entries`; the only non-deterministic part of a run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Vec<EntryTiming>>,
}

impl RunManifest {
    pub fn failures(&self) -> usize {
        self.entries.iter().filter(|e| !e.ok).count()
    }

    /// Copy with wall-clock fields removed.
    pub fn without_timing(&self) -> Self {
        Self {
            timing: None,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_json())
    }
}

/// Report of the standalone metrics command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub version: u32,
    pub entries: Vec<ManifestEntry>,
    pub aggregate: QualityAggregate,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_json())
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let io_err = |source| DiverError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err)?;
    }
    std::fs::write(path, format!("{text}\n")).map_err(io_err)
}

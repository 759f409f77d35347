//! Versioned JSON artifacts written and read by the command-line tool.
//!
//! Every document carries a `schema` tag of the form `kansr.<kind>/<version>`.
//! Checkpoints and patch caches are compact JSON, reports are pretty-printed.
//! Serialization is deterministic, so identical inputs give identical bytes.

use std::fs;
use std::path::Path;

use kansr_core::concepts::{ConceptMap, DriftRecord, Segmentation};
use kansr_core::ingest::GroundTruth;
use kansr_core::metrics::EvalReport;
use kansr_core::patching::PatchSet;
use kansr_core::selfrep::{LossBreakdown, SelfRepModel, TrainConfig, TrainReport};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const CHECKPOINT_SCHEMA: &str = "kansr.checkpoint/1";
pub const PATCHES_SCHEMA: &str = "kansr.patches/1";
pub const TRAIN_REPORT_SCHEMA: &str = "kansr.train_report/1";
pub const CONCEPTS_SCHEMA: &str = "kansr.concepts/1";
pub const DRIFT_SCHEMA: &str = "kansr.drift/1";
pub const FORECAST_SCHEMA: &str = "kansr.forecast/1";
pub const EVAL_SCHEMA: &str = "kansr.eval/1";

/// Shape of the patch set a model was trained on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchMeta {
    pub width: usize,
    pub n: usize,
    pub dim: usize,
    pub channels: usize,
    /// SHA-256 of the compact JSON encoding of the patch matrix.
    pub patches_sha256: String,
}

impl PatchMeta {
    pub fn of(patches: &PatchSet) -> Result<Self> {
        Ok(Self {
            width: patches.width,
            n: patches.len(),
            dim: patches.dim(),
            channels: patches.channels,
            patches_sha256: digest(&patches.patches)?,
        })
    }
}

fn digest<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema: String,
    pub patch_meta: PatchMeta,
    pub train_config: TrainConfig,
    pub config: serde_json::Value,
    pub model: SelfRepModel,
}

impl Checkpoint {
    pub fn new(
        model: SelfRepModel,
        patches: &PatchSet,
        train_config: TrainConfig,
        config: serde_json::Value,
    ) -> Result<Self> {
        Ok(Self {
            schema: CHECKPOINT_SCHEMA.to_string(),
            patch_meta: PatchMeta::of(patches)?,
            train_config,
            config,
            model,
        })
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.schema != CHECKPOINT_SCHEMA {
            return Err(format!("unsupported schema {:?}", self.schema));
        }
        self.model.validate().map_err(|e| e.to_string())?;
        let meta = &self.patch_meta;
        if meta.dim != meta.width * meta.channels {
            return Err("patch dim differs from width times channels".into());
        }
        if self.model.n() != meta.n || self.model.input_dim() != meta.dim {
            return Err("model shape does not match its patch metadata".into());
        }
        Ok(())
    }

    /// Errors unless `patches` is the exact set this model was trained on.
    pub fn check_patches(&self, patches: &PatchSet, path: &Path) -> Result<()> {
        if PatchMeta::of(patches)? != self.patch_meta {
            return Err(CliError::artifact(
                "patch cache",
                path,
                "does not match the checkpoint",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchCache {
    pub schema: String,
    pub patches: PatchSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReportFile {
    pub schema: String,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub final_grad_norm: f64,
    pub trace: Vec<LossBreakdown>,
    pub config: serde_json::Value,
}

impl TrainReportFile {
    /// Wall time is left out so reruns produce identical files.
    pub fn new(report: &TrainReport, config: serde_json::Value) -> Self {
        Self {
            schema: TRAIN_REPORT_SCHEMA.to_string(),
            epochs_run: report.trace.len(),
            stopped_early: report.stopped_early,
            final_grad_norm: report.final_grad_norm,
            trace: report.trace.clone(),
            config,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptsFile {
    pub schema: String,
    pub patch_width: usize,
    pub boundaries: Vec<usize>,
    pub segments: Vec<[usize; 2]>,
    pub segment_labels: Vec<usize>,
    pub labels_per_patch: Vec<usize>,
    pub k: usize,
    pub prototypes: Vec<Vec<f64>>,
    pub config: serde_json::Value,
}

impl ConceptsFile {
    pub fn new(
        width: usize,
        seg: &Segmentation,
        map: &ConceptMap,
        config: serde_json::Value,
    ) -> Self {
        Self {
            schema: CONCEPTS_SCHEMA.to_string(),
            patch_width: width,
            boundaries: seg.boundaries.clone(),
            segments: seg.segments.iter().map(|&(s, e)| [s, e]).collect(),
            segment_labels: map.segment_labels.clone(),
            labels_per_patch: map.patch_labels.clone(),
            k: map.k,
            prototypes: map.prototypes.clone(),
            config,
        }
    }

    pub fn segmentation(&self) -> Result<Segmentation> {
        Ok(Segmentation::from_boundaries(
            self.labels_per_patch.len(),
            self.boundaries.clone(),
        )?)
    }

    pub fn concept_map(&self) -> ConceptMap {
        ConceptMap {
            segment_labels: self.segment_labels.clone(),
            patch_labels: self.labels_per_patch.clone(),
            k: self.k,
            prototypes: self.prototypes.clone(),
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.schema != CONCEPTS_SCHEMA {
            return Err(format!("unsupported schema {:?}", self.schema));
        }
        let seg =
            Segmentation::from_boundaries(self.labels_per_patch.len(), self.boundaries.clone())
                .map_err(|e| e.to_string())?;
        let segments: Vec<[usize; 2]> = seg.segments.iter().map(|&(s, e)| [s, e]).collect();
        if segments != self.segments || self.segment_labels.len() != segments.len() {
            return Err("segments disagree with boundaries".into());
        }
        if self.prototypes.len() != self.k || self.labels_per_patch.iter().any(|&l| l >= self.k) {
            return Err("labels or prototypes disagree with k".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftFile {
    pub schema: String,
    pub events: Vec<DriftRecord>,
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastFile {
    pub schema: String,
    pub horizon: usize,
    pub concepts: Vec<usize>,
    /// Forecast patches in original units, flattened time-major (`w·N` each).
    pub patches: Vec<Vec<f64>>,
    /// Per forecast step, `[1-based patch index, α]` pairs.
    pub weights: Vec<Vec<(usize, f64)>>,
    pub patch_width: usize,
    pub channels: usize,
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalFile {
    pub schema: String,
    #[serde(flatten)]
    pub report: EvalReport,
    pub config: serde_json::Value,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T, pretty: bool) -> Result<()> {
    let mut bytes = if pretty {
        serde_json::to_vec_pretty(value)
    } else {
        serde_json::to_vec(value)
    }
    .map_err(|e| CliError::Config(e.to_string()))?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn read_json<T: DeserializeOwned>(what: &'static str, path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::artifact(what, path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let ckpt: Checkpoint = read_json("checkpoint", path)?;
    ckpt.check()
        .map_err(|m| CliError::artifact("checkpoint", path, m))?;
    Ok(ckpt)
}

pub fn save_patch_cache(path: &Path, patches: &PatchSet) -> Result<()> {
    let cache = PatchCache {
        schema: PATCHES_SCHEMA.to_string(),
        patches: patches.clone(),
    };
    write_json(path, &cache, false)
}

pub fn load_patch_cache(path: &Path) -> Result<PatchSet> {
    let cache: PatchCache = read_json("patch cache", path)?;
    if cache.schema != PATCHES_SCHEMA {
        return Err(CliError::artifact(
            "patch cache",
            path,
            format!("unsupported schema {:?}", cache.schema),
        ));
    }
    cache
        .patches
        .validate()
        .map_err(|e| CliError::artifact("patch cache", path, e))?;
    Ok(cache.patches)
}

pub fn load_concepts(path: &Path) -> Result<ConceptsFile> {
    let file: ConceptsFile = read_json("concepts", path)?;
    file.check()
        .map_err(|m| CliError::artifact("concepts", path, m))?;
    Ok(file)
}

pub fn load_ground_truth(path: &Path) -> Result<GroundTruth> {
    let truth: GroundTruth = read_json("ground truth", path)?;
    let sorted = truth.boundaries.windows(2).all(|w| w[0] < w[1]);
    let in_range = truth
        .boundaries
        .iter()
        .all(|&b| b > 0 && b < truth.labels.len());
    if !sorted || !in_range {
        return Err(CliError::artifact(
            "ground truth",
            path,
            "boundaries must increase inside the series",
        ));
    }
    Ok(truth)
}

pub fn load_forecast(path: &Path) -> Result<ForecastFile> {
    let file: ForecastFile = read_json("forecast", path)?;
    if file.schema != FORECAST_SCHEMA {
        return Err(CliError::artifact(
            "forecast",
            path,
            format!("unsupported schema {:?}", file.schema),
        ));
    }
    let d = file.patch_width * file.channels;
    if file.patches.len() != file.horizon || file.patches.iter().any(|p| p.len() != d) {
        return Err(CliError::artifact(
            "forecast",
            path,
            "patch shapes disagree with the header",
        ));
    }
    Ok(file)
}

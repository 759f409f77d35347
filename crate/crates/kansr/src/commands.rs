//! The pipeline stages behind each subcommand. Each returns the files it wrote.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use kansr_core::concepts::{
    boundary_scores, cluster_segments, detect_boundaries, drift_monitor, scan_drift, DriftKind,
    DriftRecord,
};
use kansr_core::forecast::forecast_horizon;
use kansr_core::ingest::generate_synthetic_labeled;
use kansr_core::linalg::euclidean;
use kansr_core::metrics::evaluate;
use kansr_core::patching::{normalize_patches, patchify, PatchSet};
use kansr_core::selfrep::{difference_matrix, train_with_clock};
use kansr_core::Matrix;

use crate::artifacts::{
    load_checkpoint, load_concepts, load_forecast, load_ground_truth, load_patch_cache,
    save_patch_cache, write_json, Checkpoint, ConceptsFile, DriftFile, EvalFile, ForecastFile,
    TrainReportFile, DRIFT_SCHEMA, EVAL_SCHEMA, FORECAST_SCHEMA,
};
use crate::config::RunConfig;
use crate::csv_io::{format_sig12, load_csv, save_csv};
use crate::error::{CliError, Result};

pub const SERIES_CSV: &str = "series.csv";
pub const TRUTH_JSON: &str = "truth.json";
pub const CHECKPOINT_JSON: &str = "model.json";
pub const PATCHES_JSON: &str = "patches.json";
pub const TRAIN_REPORT_JSON: &str = "train_report.json";
pub const LOSS_TRACE_CSV: &str = "loss_trace.csv";
pub const CONCEPTS_JSON: &str = "concepts.json";
pub const MU_B_CSV: &str = "mu_b.csv";
pub const DRIFT_JSON: &str = "drift.json";
pub const FORECAST_JSON: &str = "forecast.json";
pub const FORECAST_CSV: &str = "forecast.csv";
pub const EVAL_JSON: &str = "eval.json";

fn ensure_output_dir(config: &RunConfig) -> Result<()> {
    fs::create_dir_all(&config.output_dir).map_err(|e| CliError::io(&config.output_dir, e))
}

fn write_rows<I, R>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let fail =
        |e: csv::Error| CliError::Config(format!("csv write to {} failed: {e}", path.display()));
    let mut wtr = csv::Writer::from_path(path).map_err(fail)?;
    wtr.write_record(header).map_err(fail)?;
    for row in rows {
        wtr.write_record(row).map_err(fail)?;
    }
    wtr.flush().map_err(|e| CliError::io(path, e))
}

/// Writes the synthetic series and its ground truth.
pub fn cmd_synth(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let (spec, labels) = config.synth.spec(config.seed)?;
    let (series, truth) = generate_synthetic_labeled(&spec, &labels)?;
    ensure_output_dir(config)?;
    let series_path = config.output_path(SERIES_CSV);
    let truth_path = config.output_path(TRUTH_JSON);
    save_csv(&series_path, &series, true)?;
    write_json(&truth_path, &truth, false)?;
    Ok(vec![series_path, truth_path])
}

pub struct TrainOutcome {
    pub files: Vec<PathBuf>,
    pub wall_time_secs: f64,
    pub epochs_run: usize,
}

/// Loads, patches and normalizes the input, trains, and writes the
/// checkpoint, the patch cache, the report and the loss trace.
pub fn cmd_train(config: &RunConfig) -> Result<TrainOutcome> {
    let input = config
        .data
        .input
        .as_ref()
        .ok_or_else(|| CliError::Config("data.input is required for train".into()))?;
    let series = load_csv(input, config.data.csv_options())?;
    let raw = patchify(&series, config.data.width, config.data.strict)?;
    let patches = normalize_patches(&raw)?;
    let started = Instant::now();
    let (model, report) =
        train_with_clock(&patches, &config.train, || started.elapsed().as_secs_f64())?;

    ensure_output_dir(config)?;
    let echo = config.echo();
    let ckpt_path = config.output_path(CHECKPOINT_JSON);
    let patches_path = config.output_path(PATCHES_JSON);
    let report_path = config.output_path(TRAIN_REPORT_JSON);
    let trace_path = config.output_path(LOSS_TRACE_CSV);
    let ckpt = Checkpoint::new(model, &patches, config.train.clone(), echo.clone())?;
    write_json(&ckpt_path, &ckpt, false)?;
    save_patch_cache(&patches_path, &patches)?;
    write_json(&report_path, &TrainReportFile::new(&report, echo), true)?;
    let header: Vec<String> = [
        "epoch",
        "total",
        "reconstruction",
        "sparsity",
        "selfrep",
        "smoothness",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    write_rows(
        &trace_path,
        &header,
        report.trace.iter().enumerate().map(|(e, l)| {
            vec![
                (e + 1).to_string(),
                format_sig12(l.total),
                format_sig12(l.reconstruction),
                format_sig12(l.sparsity),
                format_sig12(l.selfrep),
                format_sig12(l.smoothness),
            ]
        }),
    )?;
    Ok(TrainOutcome {
        files: vec![ckpt_path, patches_path, report_path, trace_path],
        wall_time_secs: report.wall_time_secs,
        epochs_run: report.trace.len(),
    })
}

fn load_model_and_patches(checkpoint: &Path, patches: &Path) -> Result<(Checkpoint, PatchSet)> {
    let ckpt = load_checkpoint(checkpoint)?;
    let set = load_patch_cache(patches)?;
    ckpt.check_patches(&set, patches)?;
    Ok((ckpt, set))
}

/// Reads boundaries and concepts out of a trained checkpoint.
pub fn cmd_segment(config: &RunConfig, checkpoint: &Path, patches: &Path) -> Result<Vec<PathBuf>> {
    let (ckpt, set) = load_model_and_patches(checkpoint, patches)?;
    let model = &ckpt.model;
    let latent = model.encode(&set.patches)?;
    let r = difference_matrix(set.len())?;
    let scores = boundary_scores(&model.theta_s, &r)?;
    let seg = detect_boundaries(&scores, &config.segment.peak_options())?;
    let map = cluster_segments(
        &seg,
        &latent,
        &model.theta_s,
        &config.segment.cluster_options(),
    )?;

    ensure_output_dir(config)?;
    let concepts_path = config.output_path(CONCEPTS_JSON);
    let mu_path = config.output_path(MU_B_CSV);
    write_json(
        &concepts_path,
        &ConceptsFile::new(set.width, &seg, &map, config.echo()),
        true,
    )?;
    write_rows(
        &mu_path,
        &["boundary".to_string(), "mu_b".to_string()],
        scores
            .mu_b
            .iter()
            .enumerate()
            .map(|(j, &v)| vec![(j + 1).to_string(), format_sig12(v)]),
    )?;
    Ok(vec![concepts_path, mu_path])
}

/// Drift report. Without `input` the training patches are replayed and both
/// boundary crossings and prototype approaches are listed. With `input` the
/// new series is encoded and monitored for prototype approaches, starting
/// from the concept nearest to its first patch.
pub fn cmd_drift(
    config: &RunConfig,
    checkpoint: &Path,
    patches: &Path,
    concepts: &Path,
    input: Option<&Path>,
) -> Result<Vec<PathBuf>> {
    let (ckpt, set) = load_model_and_patches(checkpoint, patches)?;
    let concepts = load_concepts(concepts)?;
    let map = concepts.concept_map();
    let events = match input {
        None => {
            if concepts.labels_per_patch.len() != set.len() {
                return Err(CliError::Config(
                    "concepts file does not match the patch cache".into(),
                ));
            }
            let latent = ckpt.model.encode(&set.patches)?;
            let r = difference_matrix(set.len())?;
            let scores = boundary_scores(&ckpt.model.theta_s, &r)?;
            scan_drift(&map, &concepts.segmentation()?, &latent, Some(&scores.mu_b))?
        }
        Some(path) => {
            let series = load_csv(path, config.data.csv_options())?;
            if series.channels() != set.channels {
                return Err(kansr_core::Error::dims(
                    "input channels",
                    set.channels,
                    series.channels(),
                )
                .into());
            }
            let fresh = normalize_patches(&patchify(&series, set.width, config.data.strict)?)?;
            let latent = ckpt.model.encode(&fresh.patches)?;
            monitor(&map, &latent)?
        }
    };
    ensure_output_dir(config)?;
    let path = config.output_path(DRIFT_JSON);
    let file = DriftFile {
        schema: DRIFT_SCHEMA.to_string(),
        events,
        config: config.echo(),
    };
    write_json(&path, &file, true)?;
    Ok(vec![path])
}

fn monitor(map: &kansr_core::concepts::ConceptMap, latent: &Matrix) -> Result<Vec<DriftRecord>> {
    let mut events = Vec::new();
    if latent.rows() == 0 {
        return Ok(events);
    }
    let first = latent.row(0);
    let mut current = 0;
    for (c, proto) in map.prototypes.iter().enumerate() {
        if euclidean(first, proto) < euclidean(first, &map.prototypes[current]) {
            current = c;
        }
    }
    for t in 0..latent.rows() {
        if let Some(ev) = drift_monitor(map, latent.row(t), current, t + 1)? {
            events.push(DriftRecord {
                kind: DriftKind::PrototypeApproach,
                patch: ev.patch,
                from_concept: ev.from_concept,
                to_concept: ev.to_concept,
                score: ev.score,
            });
            current = ev.to_concept;
        }
    }
    Ok(events)
}

/// Forecasts `horizon` patches past the end of the training series.
pub fn cmd_forecast(
    config: &RunConfig,
    checkpoint: &Path,
    patches: &Path,
    concepts: &Path,
    horizon: usize,
) -> Result<Vec<PathBuf>> {
    let (_, set) = load_model_and_patches(checkpoint, patches)?;
    let concepts = load_concepts(concepts)?;
    if concepts.labels_per_patch.len() != set.len() {
        return Err(CliError::Config(
            "concepts file does not match the patch cache".into(),
        ));
    }
    let fc = config.forecast.forecast_config(config.seed);
    let forecasts = forecast_horizon(&set, &concepts.labels_per_patch, &fc, horizon)?;

    ensure_output_dir(config)?;
    let json_path = config.output_path(FORECAST_JSON);
    let csv_path = config.output_path(FORECAST_CSV);
    let file = ForecastFile {
        schema: FORECAST_SCHEMA.to_string(),
        horizon,
        concepts: forecasts.iter().map(|f| f.concept).collect(),
        patches: forecasts
            .iter()
            .map(|f| f.denormalized.as_slice().to_vec())
            .collect(),
        weights: forecasts.iter().map(|f| f.weights_used.clone()).collect(),
        patch_width: set.width,
        channels: set.channels,
        config: config.echo(),
    };
    write_json(&json_path, &file, true)?;
    let mut header = vec!["step".to_string(), "t".to_string(), "concept".to_string()];
    header.extend((0..set.channels).map(|c| format!("ch{c}")));
    let start = set.len() * set.width;
    write_rows(
        &csv_path,
        &header,
        forecasts.iter().enumerate().flat_map(|(h, f)| {
            (0..set.width).map(move |s| {
                let mut row = vec![
                    (h + 1).to_string(),
                    (start + h * f.denormalized.rows() + s).to_string(),
                    f.concept.to_string(),
                ];
                row.extend(f.denormalized.row(s).iter().map(|&v| format_sig12(v)));
                row
            })
        }),
    )?;
    Ok(vec![json_path, csv_path])
}

/// Inputs of the `eval` command; any supported pairing may be given.
#[derive(Debug, Clone, Default)]
pub struct EvalInputs {
    pub concepts: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub forecast: Option<PathBuf>,
    /// Observed continuation of the series, compared against the forecast.
    pub actual: Option<PathBuf>,
}

pub fn cmd_eval(config: &RunConfig, inputs: &EvalInputs) -> Result<Vec<PathBuf>> {
    let segmentation = match (&inputs.concepts, &inputs.truth) {
        (Some(c), Some(t)) => {
            let concepts = load_concepts(c)?;
            let truth = load_ground_truth(t)?;
            let n = concepts.labels_per_patch.len();
            let w = concepts.patch_width;
            if truth.labels.len() < n * w {
                return Err(CliError::Config(format!(
                    "ground truth covers {} steps but the segmentation spans {}",
                    truth.labels.len(),
                    n * w
                )));
            }
            Some((
                concepts,
                truth.patch_boundaries(w, n),
                truth.patch_labels(w, n),
            ))
        }
        (None, None) => None,
        _ => {
            return Err(CliError::Config(
                "eval needs both --concepts and --truth".into(),
            ))
        }
    };
    let values = match (&inputs.forecast, &inputs.actual) {
        (Some(f), Some(a)) => {
            let fc = load_forecast(f)?;
            let actual = load_csv(a, config.data.csv_options())?;
            let steps = fc.horizon * fc.patch_width;
            if actual.len() < steps || actual.channels() != fc.channels {
                return Err(CliError::Config(format!(
                    "actual series must hold at least {steps} rows of {} channels",
                    fc.channels
                )));
            }
            let predicted = Matrix::from_vec(steps, fc.channels, fc.patches.concat())?;
            let observed = Matrix::from_fn(steps, fc.channels, |i, c| actual.values().get(i, c));
            Some((observed, predicted))
        }
        (None, None) => None,
        _ => {
            return Err(CliError::Config(
                "eval needs both --forecast and --actual".into(),
            ))
        }
    };
    if segmentation.is_none() && values.is_none() {
        return Err(CliError::Config(
            "eval needs --concepts/--truth or --forecast/--actual".into(),
        ));
    }
    let report = evaluate(
        segmentation
            .as_ref()
            .map(|(c, tb, _)| (tb.as_slice(), c.boundaries.as_slice())),
        segmentation
            .as_ref()
            .map(|(c, _, tl)| (tl.as_slice(), c.labels_per_patch.as_slice())),
        values.as_ref().map(|(o, p)| (o, p)),
        config.eval.tolerance,
    )?;
    ensure_output_dir(config)?;
    let path = config.output_path(EVAL_JSON);
    let file = EvalFile {
        schema: EVAL_SCHEMA.to_string(),
        report,
        config: config.echo(),
    };
    write_json(&path, &file, true)?;
    Ok(vec![path])
}

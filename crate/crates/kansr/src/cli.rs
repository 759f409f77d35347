//! Argument parsing and dispatch for the `kansr` binary.
//!
//! Settings resolve in increasing precedence: built-in defaults, the
//! `--config` TOML file, the `KANSR_OUTPUT_DIR` environment variable (output
//! directory only), then command-line flags.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kansr_core::forecast::{StatsPolicy, TransitionLevel};
use kansr_core::selfrep::LrSchedule;

use crate::commands::{self, EvalInputs};
use crate::config::{RunConfig, OUTPUT_DIR_ENV};
use crate::error::{exit, Result};

#[derive(Debug, Parser)]
#[command(
    name = "kansr",
    version,
    about = "Concept segmentation, drift detection and forecasting for co-evolving time series"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Directory receiving every output file.
    #[arg(long, global = true, env = OUTPUT_DIR_ENV, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    /// Seed for every randomized stage.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic series with ground truth.
    Synth(SynthArgs),
    /// Train the self-representation autoencoder on a CSV series.
    Train(TrainArgs),
    /// Detect boundaries and concepts from a trained checkpoint.
    Segment(SegmentArgs),
    /// Report boundary crossings and prototype approaches.
    Drift(DriftArgs),
    /// Forecast future concepts and patches.
    Forecast(ForecastArgs),
    /// Score a segmentation or a forecast against ground truth.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Series length in time steps.
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long)]
    pub channels: Option<usize>,
    /// Standard deviation of additive Gaussian noise.
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Built-in regime per segment, e.g. `0,1,0`.
    #[arg(long, value_delimiter = ',')]
    pub concepts: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Input series CSV.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// The input has no header row.
    #[arg(long)]
    pub no_header: bool,
    /// 0-based column holding timestamps, skipped on load.
    #[arg(long)]
    pub timestamp_column: Option<usize>,
    /// Patch width in time steps.
    #[arg(long)]
    pub width: Option<usize>,
    /// Reject series whose length is not a multiple of the width.
    #[arg(long)]
    pub strict: bool,
    /// Maximum training epochs, pre-training included.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Leading epochs that train the plain autoencoder only.
    #[arg(long)]
    pub pretrain_epochs: Option<usize>,
    /// Adam step size for the encoder and decoder.
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Adam step size for the coefficient matrix.
    #[arg(long)]
    pub theta_learning_rate: Option<f64>,
    /// Step-size schedule over the joint epochs.
    #[arg(long, value_enum)]
    pub lr_schedule: Option<ScheduleArg>,
    /// Final step-size factor of the cosine schedule, in [0, 1].
    #[arg(long)]
    pub lr_floor: Option<f64>,
    /// Weight of the sparsity penalty.
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// Weight of the latent self-representation residual.
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Weight of the temporal smoothness penalty.
    #[arg(long)]
    pub lambda3: Option<f64>,
    /// Relative loss improvement below which an epoch counts as stalled.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Consecutive stalled epochs that stop training.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Hidden layer widths, e.g. `64,32`.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// Latent width.
    #[arg(long)]
    pub latent_dim: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScheduleArg {
    Constant,
    Cosine,
}

#[derive(Debug, Args)]
pub struct ArtifactArgs {
    /// Model checkpoint; defaults to `<output-dir>/model.json`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Patch cache written by `train`; defaults to `<output-dir>/patches.json`.
    #[arg(long)]
    pub patches: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[command(flatten)]
    pub artifacts: ArtifactArgs,
    /// Absolute prominence threshold for boundary peaks.
    #[arg(long)]
    pub min_prominence: Option<f64>,
    /// Threshold is mean + factor·std of the boundary scores when no absolute one is set.
    #[arg(long)]
    pub std_factor: Option<f64>,
    /// Minimum distance between boundaries in patches.
    #[arg(long)]
    pub min_distance: Option<usize>,
    /// Fixed concept count.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DriftArgs {
    #[command(flatten)]
    pub artifacts: ArtifactArgs,
    /// Concepts JSON from `segment`; defaults to `<output-dir>/concepts.json`.
    #[arg(long)]
    pub concepts: Option<PathBuf>,
    /// New series to monitor instead of the training patches.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StatsArg {
    LastOfConcept,
    LastPatch,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LevelArg {
    Patch,
    Segment,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub artifacts: ArtifactArgs,
    /// Concepts JSON from `segment`; defaults to `<output-dir>/concepts.json`.
    #[arg(long)]
    pub concepts: Option<PathBuf>,
    /// Number of patches to forecast.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Recency decay of the patch weights, in (0, 1].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Gaussian noise added to the transition probabilities.
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Which patch supplies the denormalization statistics.
    #[arg(long, value_enum)]
    pub stats_policy: Option<StatsArg>,
    /// Whether transitions are counted between patches or segments.
    #[arg(long, value_enum)]
    pub transition_level: Option<LevelArg>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Concepts JSON to score; defaults to `<output-dir>/concepts.json` when `--truth` is given.
    #[arg(long)]
    pub concepts: Option<PathBuf>,
    /// Ground-truth JSON from `synth`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Forecast JSON to score.
    #[arg(long)]
    pub forecast: Option<PathBuf>,
    /// CSV holding the observed continuation of the series.
    #[arg(long)]
    pub actual: Option<PathBuf>,
    /// Boundary matching tolerance in patches.
    #[arg(long)]
    pub tolerance: Option<usize>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl Cli {
    /// The effective configuration for this invocation.
    pub fn resolve_config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        set(&mut c.output_dir, self.output_dir.clone());
        set(&mut c.seed, self.seed);
        match &self.command {
            Command::Synth(a) => {
                set(&mut c.synth.length, a.length);
                set(&mut c.synth.channels, a.channels);
                set(&mut c.synth.noise_sigma, a.noise_sigma);
                if let Some(concepts) = &a.concepts {
                    c.synth.concepts = concepts.clone();
                    c.synth.regimes = None;
                    c.synth.regime_labels = None;
                }
            }
            Command::Train(a) => {
                if a.input.is_some() {
                    c.data.input = a.input.clone();
                }
                if a.no_header {
                    c.data.has_header = false;
                }
                if a.timestamp_column.is_some() {
                    c.data.timestamp_column = a.timestamp_column;
                }
                set(&mut c.data.width, a.width);
                c.data.strict |= a.strict;
                let t = &mut c.train;
                set(&mut t.epochs, a.epochs);
                set(&mut t.pretrain_epochs, a.pretrain_epochs);
                set(&mut t.learning_rate, a.learning_rate);
                if a.theta_learning_rate.is_some() {
                    t.theta_learning_rate = a.theta_learning_rate;
                }
                match (a.lr_schedule, a.lr_floor) {
                    (Some(ScheduleArg::Constant), _) => t.lr_schedule = LrSchedule::Constant,
                    (Some(ScheduleArg::Cosine), floor) => {
                        let current = match t.lr_schedule {
                            LrSchedule::Cosine { floor } => floor,
                            LrSchedule::Constant => 0.0,
                        };
                        t.lr_schedule = LrSchedule::Cosine {
                            floor: floor.unwrap_or(current),
                        }
                    }
                    (None, Some(floor)) => t.lr_schedule = LrSchedule::Cosine { floor },
                    (None, None) => {}
                }
                set(&mut t.loss_weights.lambda1, a.lambda1);
                set(&mut t.loss_weights.lambda2, a.lambda2);
                set(&mut t.loss_weights.lambda3, a.lambda3);
                set(&mut t.tolerance, a.tolerance);
                set(&mut t.patience, a.patience);
                set(&mut t.arch.hidden, a.hidden.clone());
                set(&mut t.arch.latent_dim, a.latent_dim);
            }
            Command::Segment(a) => {
                if a.min_prominence.is_some() {
                    c.segment.min_prominence = a.min_prominence;
                }
                set(&mut c.segment.std_factor, a.std_factor);
                set(&mut c.segment.min_distance, a.min_distance);
                if a.k.is_some() {
                    c.segment.k = a.k;
                }
            }
            Command::Drift(_) => {}
            Command::Forecast(a) => {
                set(&mut c.forecast.horizon, a.horizon);
                set(&mut c.forecast.gamma, a.gamma);
                set(&mut c.forecast.noise_sigma, a.noise_sigma);
                if let Some(p) = a.stats_policy {
                    c.forecast.stats_policy = match p {
                        StatsArg::LastOfConcept => StatsPolicy::LastOfConcept,
                        StatsArg::LastPatch => StatsPolicy::LastPatch,
                    };
                }
                if let Some(l) = a.transition_level {
                    c.forecast.transition_level = match l {
                        LevelArg::Patch => TransitionLevel::Patch,
                        LevelArg::Segment => TransitionLevel::Segment,
                    };
                }
            }
            Command::Eval(a) => set(&mut c.eval.tolerance, a.tolerance),
        }
        c.resolve()
    }
}

fn or_default(path: &Option<PathBuf>, config: &RunConfig, name: &str) -> PathBuf {
    path.clone().unwrap_or_else(|| config.output_path(name))
}

/// Runs one parsed invocation, returning the files written.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    let config = cli.resolve_config()?;
    let ckpt = |a: &ArtifactArgs| or_default(&a.checkpoint, &config, commands::CHECKPOINT_JSON);
    let cache = |a: &ArtifactArgs| or_default(&a.patches, &config, commands::PATCHES_JSON);
    match &cli.command {
        Command::Synth(_) => commands::cmd_synth(&config),
        Command::Train(_) => {
            let outcome = commands::cmd_train(&config)?;
            eprintln!(
                "trained {} epochs in {:.2} s",
                outcome.epochs_run, outcome.wall_time_secs
            );
            Ok(outcome.files)
        }
        Command::Segment(a) => {
            commands::cmd_segment(&config, &ckpt(&a.artifacts), &cache(&a.artifacts))
        }
        Command::Drift(a) => commands::cmd_drift(
            &config,
            &ckpt(&a.artifacts),
            &cache(&a.artifacts),
            &or_default(&a.concepts, &config, commands::CONCEPTS_JSON),
            a.input.as_deref(),
        ),
        Command::Forecast(a) => commands::cmd_forecast(
            &config,
            &ckpt(&a.artifacts),
            &cache(&a.artifacts),
            &or_default(&a.concepts, &config, commands::CONCEPTS_JSON),
            config.forecast.horizon,
        ),
        Command::Eval(a) => {
            let concepts = match (&a.concepts, &a.truth) {
                (None, Some(_)) => Some(config.output_path(commands::CONCEPTS_JSON)),
                (c, _) => c.clone(),
            };
            let inputs = EvalInputs {
                concepts,
                truth: a.truth.clone(),
                forecast: a.forecast.clone(),
                actual: a.actual.clone(),
            };
            commands::cmd_eval(&config, &inputs)
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                exit::CONFIG
            } else {
                exit::OK
            };
        }
    };
    match execute(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            exit::OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

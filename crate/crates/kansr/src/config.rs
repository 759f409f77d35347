//! Run configuration: one TOML file covering every stage.
//!
//! The top-level `seed` is copied into every seeded stage when the config is
//! resolved, so a run is reproducible from the file alone. `output_dir` is
//! never echoed into artifacts, keeping outputs identical across locations.

use std::fs;
use std::path::{Path, PathBuf};

use kansr_core::concepts::{ClusterOptions, PeakOptions};
use kansr_core::forecast::{ForecastConfig, StatsPolicy, TransitionLevel};
use kansr_core::ingest::{RegimeSpec, SyntheticSpec};
use kansr_core::selfrep::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::csv_io::CsvOptions;
use crate::error::{CliError, Result};

pub const OUTPUT_DIR_ENV: &str = "KANSR_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
    pub data: DataConfig,
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub segment: SegmentConfig,
    pub forecast: ForecastSection,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            data: DataConfig::default(),
            synth: SynthConfig::default(),
            train: TrainConfig::default(),
            segment: SegmentConfig::default(),
            forecast: ForecastSection::default(),
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub input: Option<PathBuf>,
    pub has_header: bool,
    pub timestamp_column: Option<usize>,
    /// Patch width `w` in time steps.
    pub width: usize,
    /// Reject series whose length is not a multiple of `width`.
    pub strict: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            input: None,
            has_header: true,
            timestamp_column: None,
            width: 20,
            strict: false,
        }
    }
}

impl DataConfig {
    pub fn csv_options(&self) -> CsvOptions {
        CsvOptions {
            has_header: self.has_header,
            timestamp_column: self.timestamp_column,
        }
    }
}

/// Synthetic stream. Either `concepts` (one built-in sinusoid regime per
/// entry, equal durations) or an explicit `regimes` list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub length: usize,
    pub channels: usize,
    pub noise_sigma: f64,
    pub concepts: Vec<usize>,
    pub regimes: Option<Vec<RegimeSpec>>,
    /// Concept id per explicit regime; defaults to the regime index.
    pub regime_labels: Option<Vec<usize>>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            length: 1200,
            channels: 10,
            noise_sigma: 0.2,
            concepts: vec![0, 1, 2],
            regimes: None,
            regime_labels: None,
        }
    }
}

impl SynthConfig {
    /// The generator spec and the concept id of each regime.
    pub fn spec(&self, seed: u64) -> Result<(SyntheticSpec, Vec<usize>)> {
        match &self.regimes {
            Some(regimes) => {
                let labels = self
                    .regime_labels
                    .clone()
                    .unwrap_or_else(|| (0..regimes.len()).collect());
                let spec = SyntheticSpec {
                    length: self.length,
                    channels: self.channels,
                    regimes: regimes.clone(),
                    noise_sigma: self.noise_sigma,
                    seed,
                };
                Ok((spec, labels))
            }
            None => {
                let spec = SyntheticSpec::sinusoid_regimes(
                    self.length,
                    self.channels,
                    &self.concepts,
                    self.noise_sigma,
                    seed,
                )?;
                Ok((spec, self.concepts.clone()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentConfig {
    /// Absolute prominence threshold; unset means `mean + std_factor·std`.
    pub min_prominence: Option<f64>,
    pub std_factor: f64,
    pub min_distance: usize,
    /// Fixed concept count; unset picks it by eigengap.
    pub k: Option<usize>,
    pub kmeans_iters: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        let peaks = PeakOptions::default();
        let cluster = ClusterOptions::default();
        Self {
            min_prominence: peaks.min_prominence,
            std_factor: peaks.std_factor,
            min_distance: peaks.min_distance,
            k: cluster.k,
            kmeans_iters: cluster.kmeans_iters,
        }
    }
}

impl SegmentConfig {
    pub fn peak_options(&self) -> PeakOptions {
        PeakOptions {
            min_prominence: self.min_prominence,
            std_factor: self.std_factor,
            min_distance: self.min_distance,
        }
    }

    pub fn cluster_options(&self) -> ClusterOptions {
        ClusterOptions {
            k: self.k,
            kmeans_iters: self.kmeans_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastSection {
    pub horizon: usize,
    pub gamma: f64,
    pub noise_sigma: f64,
    pub stats_policy: StatsPolicy,
    pub transition_level: TransitionLevel,
}

impl Default for ForecastSection {
    fn default() -> Self {
        let f = ForecastConfig::default();
        Self {
            horizon: 3,
            gamma: f.gamma,
            noise_sigma: f.noise_sigma,
            stats_policy: f.stats_policy,
            transition_level: f.transition_level,
        }
    }
}

impl ForecastSection {
    pub fn forecast_config(&self, seed: u64) -> ForecastConfig {
        ForecastConfig {
            gamma: self.gamma,
            noise_sigma: self.noise_sigma,
            seed,
            stats_policy: self.stats_policy,
            transition_level: self.transition_level,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Boundary matching tolerance in patches.
    pub tolerance: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { tolerance: 1 }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Propagates the run seed and checks cross-field consistency.
    pub fn resolve(mut self) -> Result<Self> {
        self.train.seed = self.seed;
        self.train.validate()?;
        if self.data.width == 0 {
            return Err(CliError::Config("data.width must be at least 1".into()));
        }
        if self.segment.min_distance == 0 {
            return Err(CliError::Config(
                "segment.min_distance must be at least 1".into(),
            ));
        }
        if self.segment.k == Some(0) {
            return Err(CliError::Config("segment.k must be at least 1".into()));
        }
        if self.forecast.horizon == 0 {
            return Err(CliError::Config(
                "forecast.horizon must be at least 1".into(),
            ));
        }
        if !(self.forecast.gamma > 0.0 && self.forecast.gamma <= 1.0) {
            return Err(CliError::Config("forecast.gamma must lie in (0, 1]".into()));
        }
        if !(self.forecast.noise_sigma >= 0.0 && self.forecast.noise_sigma.is_finite()) {
            return Err(CliError::Config(
                "forecast.noise_sigma must be finite and >= 0".into(),
            ));
        }
        Ok(self)
    }

    /// Configuration echo embedded in every artifact.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn output_path(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml_str("").unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn partial_sections_merge_with_defaults() {
        let c = RunConfig::from_toml_str(
            "seed = 7\n[data]\nwidth = 10\n[train]\nepochs = 5\n[train.loss_weights]\nlambda1 = 1.0\nlambda2 = 10.0\nlambda3 = 3.0\neps_norm = 1e-8\n",
        )
        .unwrap()
        .resolve()
        .unwrap();
        assert_eq!(c.data.width, 10);
        assert_eq!(c.train.epochs, 5);
        assert_eq!(c.train.seed, 7);
        assert_eq!(c.train.loss_weights.lambda3, 3.0);
        assert!(c.data.has_header);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(RunConfig::from_toml_str("[data]\nwidht = 3\n").is_err());
        let c = RunConfig::from_toml_str("[forecast]\ngamma = 0.0\n").unwrap();
        assert!(c.resolve().is_err());
    }

    #[test]
    fn toml_round_trip_without_output_dir() {
        let mut c = RunConfig::default();
        c.segment.k = Some(3);
        let text = c.to_toml_string().unwrap();
        assert!(!text.contains("output_dir"));
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), c);
        assert!(c.echo().get("output_dir").is_none());
    }
}

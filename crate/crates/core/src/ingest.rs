//! Co-evolving series containers and the seeded synthetic regime generator.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::SeededRng;

/// `l` time steps by `N` channels, all values finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMatrix {
    values: Matrix,
    channel_names: Vec<String>,
}

impl SeriesMatrix {
    pub fn new(values: Matrix, channel_names: Vec<String>) -> Result<Self> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(Error::EmptyInput);
        }
        if channel_names.len() != values.cols() {
            return Err(Error::dims(
                "SeriesMatrix channel names",
                values.cols(),
                channel_names.len(),
            ));
        }
        if !values.is_finite() {
            return Err(Error::InvalidConfig(
                "series contains non-finite values".into(),
            ));
        }
        Ok(Self {
            values,
            channel_names,
        })
    }

    /// Channel names default to `c0..c{N-1}`.
    pub fn with_default_names(values: Matrix) -> Result<Self> {
        let names = default_channel_names(values.cols());
        Self::new(values, names)
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    /// Number of time steps `l`.
    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    /// Number of channels `N`.
    pub fn channels(&self) -> usize {
        self.values.cols()
    }
}

pub fn default_channel_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("c{i}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SineComponent {
    pub amplitude: f64,
    /// Period in time steps.
    pub period: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GeneratorFamily {
    /// `x_c(t) = Σ_m a_m · sin(2πt / period_m + phase_m + c · channel_shift)`.
    ///
    /// The per-channel phase lag couples channels; each regime chooses its own
    /// lag, so the joint pattern across channels differs even when individual
    /// channels look alike.
    SinusoidMixture {
        components: Vec<SineComponent>,
        channel_shift: f64,
    },
    /// `x_c(t) = a1·x_c(t−1) + a2·x_c(t−2) + coupling·x_{c−1}(t−1) + innovation·ε`.
    ///
    /// Channel 0 reads channel `N−1` as its coupled neighbour.
    LinearRecurrence {
        a1: f64,
        a2: f64,
        coupling: f64,
        innovation: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    #[serde(flatten)]
    pub generator: GeneratorFamily,
    pub duration: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Total length `l`.
    pub length: usize,
    pub channels: usize,
    pub regimes: Vec<RegimeSpec>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.regimes.is_empty() {
            return Err(Error::InvalidSpec("at least one regime is required".into()));
        }
        if self.channels == 0 || self.length == 0 {
            return Err(Error::InvalidSpec(
                "length and channels must be positive".into(),
            ));
        }
        let total: usize = self.regimes.iter().map(|r| r.duration).sum();
        if total != self.length {
            return Err(Error::InvalidSpec(format!(
                "regime durations sum to {total}, expected {}",
                self.length
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidSpec(
                "noise_sigma must be finite and >= 0".into(),
            ));
        }
        for (i, regime) in self.regimes.iter().enumerate() {
            if regime.duration == 0 {
                return Err(Error::InvalidSpec(format!("regime {i} has zero duration")));
            }
            match &regime.generator {
                GeneratorFamily::SinusoidMixture {
                    components,
                    channel_shift,
                } => {
                    if components.is_empty() {
                        return Err(Error::InvalidSpec(format!("regime {i} has no components")));
                    }
                    let ok = channel_shift.is_finite()
                        && components.iter().all(|c| {
                            c.amplitude.is_finite() && c.phase.is_finite() && c.period > 0.0
                        });
                    if !ok {
                        return Err(Error::InvalidSpec(format!(
                            "regime {i} has an invalid sinusoid component"
                        )));
                    }
                }
                GeneratorFamily::LinearRecurrence {
                    a1,
                    a2,
                    coupling,
                    innovation,
                } => {
                    // AR(2) stationarity triangle, with the coupling eating into the margin.
                    let stable = a2.abs() < 1.0
                        && a1 + a2 + coupling.abs() < 1.0
                        && a2 - a1 + coupling.abs() < 1.0;
                    if !stable || !innovation.is_finite() || *innovation < 0.0 {
                        return Err(Error::InvalidSpec(format!(
                            "regime {i} recurrence is not stable"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// A stream of sinusoid regimes where segment `s` follows
    /// [`concept_generator`]`(concepts[s])`. Durations split the length evenly,
    /// the last segment absorbing the remainder. Pair with
    /// [`generate_synthetic_labeled`] to label recurring concepts alike.
    pub fn sinusoid_regimes(
        length: usize,
        channels: usize,
        concepts: &[usize],
        noise_sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        if concepts.is_empty() {
            return Err(Error::InvalidSpec("at least one regime is required".into()));
        }
        let segs = concepts.len();
        let base = length / segs;
        let mut regimes = Vec::with_capacity(segs);
        for (s, &concept) in concepts.iter().enumerate() {
            let duration = if s + 1 == segs {
                length - base * (segs - 1)
            } else {
                base
            };
            regimes.push(RegimeSpec {
                generator: concept_generator(concept),
                duration,
            });
        }
        Ok(Self {
            length,
            channels,
            regimes,
            noise_sigma,
            seed,
        })
    }
}

/// The `concept`-th member of a fixed family of well-separated sinusoid regimes.
pub fn concept_generator(concept: usize) -> GeneratorFamily {
    // Short periods relative to typical patch widths keep patches of one regime
    // alike after normalization while regimes stay distinct.
    const PERIODS: [f64; 6] = [4.0, 10.0, 6.5, 16.0, 3.0, 8.0];
    const SHIFTS: [f64; 6] = [0.0, 1.3, 2.4, 0.6, 1.9, 3.0];
    let i = concept % PERIODS.len();
    let period = PERIODS[i];
    GeneratorFamily::SinusoidMixture {
        components: vec![
            SineComponent {
                amplitude: 1.0,
                period,
                phase: 0.0,
            },
            SineComponent {
                amplitude: 0.5,
                period: period * 2.7,
                phase: 0.3 * i as f64,
            },
        ],
        channel_shift: SHIFTS[i],
    }
}

/// Regime boundaries and per-step regime ids of a synthetic stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Time steps at which a new regime starts, strictly increasing in `(0, l)`.
    pub boundaries: Vec<usize>,
    pub labels: Vec<usize>,
}

impl GroundTruth {
    /// Boundaries in patch units: `b` means "break after patch `b`" (1-based).
    ///
    /// A step boundary is assigned to the nearest patch edge; boundaries that
    /// fall outside the first `n` patches or collapse onto a previous one are
    /// dropped.
    pub fn patch_boundaries(&self, width: usize, n: usize) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for &t in &self.boundaries {
            let b = (t + width / 2) / width;
            if b >= 1 && b < n && out.last() != Some(&b) {
                out.push(b);
            }
        }
        out
    }

    /// One label per patch: the majority step label inside the patch, ties to
    /// the smaller id.
    pub fn patch_labels(&self, width: usize, n: usize) -> Vec<usize> {
        let max_label = self.labels.iter().copied().max().unwrap_or(0);
        (0..n)
            .map(|p| {
                let mut counts = vec![0usize; max_label + 1];
                for &lab in &self.labels[p * width..((p + 1) * width).min(self.labels.len())] {
                    counts[lab] += 1;
                }
                let mut best = 0;
                for (lab, &c) in counts.iter().enumerate() {
                    if c > counts[best] {
                        best = lab;
                    }
                }
                best
            })
            .collect()
    }
}

/// Renders `spec` into a series and its ground truth. Pure in `spec`.
///
/// Regime labels are the regime indices in `spec.regimes`; call
/// [`generate_synthetic_labeled`] to give recurring regimes a shared id.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(SeriesMatrix, GroundTruth)> {
    let labels: Vec<usize> = (0..spec.regimes.len()).collect();
    generate_synthetic_labeled(spec, &labels)
}

/// As [`generate_synthetic`], with an explicit concept id per regime.
pub fn generate_synthetic_labeled(
    spec: &SyntheticSpec,
    regime_labels: &[usize],
) -> Result<(SeriesMatrix, GroundTruth)> {
    spec.validate()?;
    if regime_labels.len() != spec.regimes.len() {
        return Err(Error::InvalidSpec(format!(
            "{} regime labels for {} regimes",
            regime_labels.len(),
            spec.regimes.len()
        )));
    }
    let n_ch = spec.channels;
    let mut rng = SeededRng::new(spec.seed);
    let mut values = Matrix::zeros(spec.length, n_ch);
    let mut boundaries = Vec::new();
    let mut labels = Vec::with_capacity(spec.length);
    let mut start = 0usize;
    for (r, regime) in spec.regimes.iter().enumerate() {
        if r > 0 {
            boundaries.push(start);
        }
        match &regime.generator {
            GeneratorFamily::SinusoidMixture {
                components,
                channel_shift,
            } => {
                for t in start..start + regime.duration {
                    for c in 0..n_ch {
                        let mut v = 0.0;
                        for comp in components {
                            v += comp.amplitude
                                * libm::sin(
                                    2.0 * PI * t as f64 / comp.period
                                        + comp.phase
                                        + c as f64 * channel_shift,
                                );
                        }
                        values.set(t, c, v);
                    }
                }
            }
            GeneratorFamily::LinearRecurrence {
                a1,
                a2,
                coupling,
                innovation,
            } => {
                // Each regime starts from a fresh state so regimes do not leak.
                let mut prev1 = vec![0.0; n_ch];
                let mut prev2 = vec![0.0; n_ch];
                for _burn in 0..50 {
                    step_recurrence(
                        &mut prev1,
                        &mut prev2,
                        *a1,
                        *a2,
                        *coupling,
                        *innovation,
                        &mut rng,
                    );
                }
                for t in start..start + regime.duration {
                    step_recurrence(
                        &mut prev1,
                        &mut prev2,
                        *a1,
                        *a2,
                        *coupling,
                        *innovation,
                        &mut rng,
                    );
                    for c in 0..n_ch {
                        values.set(t, c, prev1[c]);
                    }
                }
            }
        }
        labels.extend(core::iter::repeat_n(regime_labels[r], regime.duration));
        start += regime.duration;
    }
    if spec.noise_sigma > 0.0 {
        for v in values.as_mut_slice() {
            *v += spec.noise_sigma * rng.normal();
        }
    }
    let series = SeriesMatrix::with_default_names(values)?;
    Ok((series, GroundTruth { boundaries, labels }))
}

fn step_recurrence(
    prev1: &mut [f64],
    prev2: &mut [f64],
    a1: f64,
    a2: f64,
    coupling: f64,
    innovation: f64,
    rng: &mut SeededRng,
) {
    let n = prev1.len();
    let next: Vec<f64> = (0..n)
        .map(|c| {
            let neighbour = prev1[(c + n - 1) % n];
            a1 * prev1[c] + a2 * prev2[c] + coupling * neighbour + innovation * rng.normal()
        })
        .collect();
    prev2.copy_from_slice(prev1);
    prev1.copy_from_slice(&next);
}

//! Concept-conditioned forecasting.
//!
//! The next concept comes from an order-1 transition-frequency model over the
//! concept history, optionally perturbed by Gaussian noise on the probability
//! vector. The next patch is a recency-weighted average of the historical
//! patches of that concept, returned in normalized space and in original
//! units.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::patching::{denormalize_flat, NormStats, PatchSet};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptTransitionModel {
    /// `counts[a][b]`: observed `a → b` steps.
    pub counts: Vec<Vec<u64>>,
    /// Row-normalized counts; all-zero rows stay zero.
    pub probabilities: Vec<Vec<f64>>,
    /// Overall label frequencies, used when a row has no observations.
    pub frequencies: Vec<f64>,
}

impl ConceptTransitionModel {
    pub fn labels(&self) -> usize {
        self.counts.len()
    }
}

/// Counts adjacent label pairs.
pub fn fit_concept_transitions(labels: &[usize]) -> Result<ConceptTransitionModel> {
    if labels.is_empty() {
        return Err(Error::EmptySequence);
    }
    let k = labels.iter().copied().max().unwrap_or(0) + 1;
    let mut counts = vec![vec![0u64; k]; k];
    for w in labels.windows(2) {
        counts[w[0]][w[1]] += 1;
    }
    let probabilities = counts
        .iter()
        .map(|row| {
            let total: u64 = row.iter().sum();
            row.iter()
                .map(|&c| {
                    if total == 0 {
                        0.0
                    } else {
                        c as f64 / total as f64
                    }
                })
                .collect()
        })
        .collect();
    let mut frequencies = vec![0.0; k];
    for &l in labels {
        frequencies[l] += 1.0;
    }
    for f in &mut frequencies {
        *f /= labels.len() as f64;
    }
    Ok(ConceptTransitionModel {
        counts,
        probabilities,
        frequencies,
    })
}

/// Collapses runs: `[0,0,1,1,0]` → `[0,1,0]`.
pub fn segment_sequence(patch_labels: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for &l in patch_labels {
        if out.last() != Some(&l) {
            out.push(l);
        }
    }
    out
}

fn argmax_first(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// Most likely successor of `current`. With `noise_sigma > 0` seeded Gaussian
/// noise is added to the probabilities first. Ties go to the smaller id.
pub fn predict_next_concept(
    model: &ConceptTransitionModel,
    current: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<usize> {
    if current >= model.labels() {
        return Err(Error::UnknownLabel(current));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidConfig(
            "noise_sigma must be finite and >= 0".into(),
        ));
    }
    let row_total: u64 = model.counts[current].iter().sum();
    let mut scores = if row_total == 0 {
        model.frequencies.clone()
    } else {
        model.probabilities[current].clone()
    };
    if noise_sigma > 0.0 {
        let mut rng = SeededRng::new(seed);
        for s in &mut scores {
            *s += noise_sigma * rng.normal();
        }
    }
    Ok(argmax_first(&scores))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatsPolicy {
    /// Statistics of the most recent patch carrying the target concept.
    #[default]
    LastOfConcept,
    /// Statistics of the most recent patch overall.
    LastPatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueForecast {
    pub concept: usize,
    /// Normalized-space prediction, length `D`.
    pub patch_prediction: Vec<f64>,
    /// `w × N` in original units.
    pub denormalized: Matrix,
    /// `(1-based patch index, α)` pairs, most recent first.
    pub weights_used: Vec<(usize, f64)>,
}

/// `p̂ = Σ α_i p_i` over the patches labelled `target`, with
/// `α_i ∝ gamma^age_i` where the most recent such patch has age 0.
pub fn predict_next_patch(
    history: &PatchSet,
    patch_labels: &[usize],
    target: usize,
    gamma: f64,
    policy: StatsPolicy,
) -> Result<ValueForecast> {
    if patch_labels.len() != history.len() {
        return Err(Error::dims(
            "patch labels",
            history.len(),
            patch_labels.len(),
        ));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidConfig("gamma must lie in (0, 1]".into()));
    }
    let members: Vec<usize> = (0..history.len())
        .rev()
        .filter(|&i| patch_labels[i] == target)
        .collect();
    if members.is_empty() {
        return Err(Error::NoHistoryForConcept(target));
    }
    let raw: Vec<f64> = (0..members.len())
        .map(|age| libm::pow(gamma, age as f64))
        .collect();
    let total: f64 = raw.iter().sum();
    let d = history.dim();
    let mut prediction = vec![0.0; d];
    let mut weights_used = Vec::with_capacity(members.len());
    for (&i, &r) in members.iter().zip(&raw) {
        let alpha = r / total;
        for (p, v) in prediction.iter_mut().zip(history.patches.row(i)) {
            *p += alpha * v;
        }
        weights_used.push((i + 1, alpha));
    }
    let stats: &NormStats = match policy {
        StatsPolicy::LastOfConcept => &history.stats[members[0]],
        StatsPolicy::LastPatch => &history.stats[history.len() - 1],
    };
    let denorm = denormalize_flat(&prediction, history.channels, stats)?;
    Ok(ValueForecast {
        concept: target,
        patch_prediction: prediction,
        denormalized: Matrix::from_vec(history.width, history.channels, denorm)?,
        weights_used,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionLevel {
    /// Transitions between consecutive patches.
    #[default]
    Patch,
    /// Transitions between consecutive segments (runs collapsed).
    Segment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastConfig {
    pub gamma: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub stats_policy: StatsPolicy,
    pub transition_level: TransitionLevel,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            noise_sigma: 0.0,
            seed: 0,
            stats_policy: StatsPolicy::LastOfConcept,
            transition_level: TransitionLevel::Patch,
        }
    }
}

/// Iterates concept prediction then patch prediction `horizon` times, feeding
/// each forecast back as history with its predicted label.
pub fn forecast_horizon(
    history: &PatchSet,
    patch_labels: &[usize],
    config: &ForecastConfig,
    horizon: usize,
) -> Result<Vec<ValueForecast>> {
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be at least 1".into()));
    }
    if patch_labels.len() != history.len() {
        return Err(Error::dims(
            "patch labels",
            history.len(),
            patch_labels.len(),
        ));
    }
    if history.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut patches = history.clone();
    let mut labels = patch_labels.to_vec();
    let mut out = Vec::with_capacity(horizon);
    for step in 0..horizon {
        let sequence = match config.transition_level {
            TransitionLevel::Patch => labels.clone(),
            TransitionLevel::Segment => segment_sequence(&labels),
        };
        let model = fit_concept_transitions(&sequence)?;
        let current = *labels.last().ok_or(Error::EmptySequence)?;
        let next = predict_next_concept(
            &model,
            current,
            config.noise_sigma,
            config.seed.wrapping_add(step as u64),
        )?;
        let forecast =
            predict_next_patch(&patches, &labels, next, config.gamma, config.stats_policy)?;

        let stats = match config.stats_policy {
            StatsPolicy::LastOfConcept => forecast
                .weights_used
                .first()
                .map(|&(i, _)| patches.stats[i - 1].clone())
                .ok_or(Error::NoHistoryForConcept(next))?,
            StatsPolicy::LastPatch => patches.stats[patches.len() - 1].clone(),
        };
        let mut rows = patches.patches.to_rows();
        rows.push(forecast.patch_prediction.clone());
        patches.patches = Matrix::from_rows(&rows)?;
        patches.stats.push(stats);
        labels.push(next);
        out.push(forecast);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patching::NormStats;

    const A: usize = 0;
    const B: usize = 1;

    fn history(rows: &[Vec<f64>], channels: usize) -> PatchSet {
        let m = Matrix::from_rows(rows).unwrap();
        let width = m.cols() / channels;
        PatchSet {
            stats: vec![NormStats::identity(channels); m.rows()],
            patches: m,
            width,
            channels,
            dropped_tail: 0,
            normalized: true,
        }
    }

    #[test]
    fn alternating_counts() {
        let m = fit_concept_transitions(&[A, B, A, B, A]).unwrap();
        assert_eq!(m.counts[A][B], 2);
        assert_eq!(m.counts[B][A], 2);
        assert_eq!(m.probabilities[A][B], 1.0);
        assert_eq!(predict_next_concept(&m, A, 0.0, 0).unwrap(), B);
    }

    #[test]
    fn single_concept_and_degenerate_history() {
        let m = fit_concept_transitions(&[A, A, A]).unwrap();
        assert_eq!(m.probabilities[A][A], 1.0);
        assert_eq!(predict_next_concept(&m, A, 0.0, 0).unwrap(), A);
        let m = fit_concept_transitions(&[A]).unwrap();
        assert_eq!(m.frequencies, vec![1.0]);
        assert_eq!(predict_next_concept(&m, A, 0.0, 0).unwrap(), A);
        assert_eq!(fit_concept_transitions(&[]), Err(Error::EmptySequence));
        assert_eq!(
            predict_next_concept(&m, 3, 0.0, 0),
            Err(Error::UnknownLabel(3))
        );
    }

    #[test]
    fn noisy_prediction_is_seeded() {
        let m = fit_concept_transitions(&[A, B, B, A, B, A, A]).unwrap();
        let a = predict_next_concept(&m, A, 0.5, 11).unwrap();
        let b = predict_next_concept(&m, A, 0.5, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_patch_history_is_copied() {
        let h = history(&[vec![0.3, -1.0]], 1);
        let f = predict_next_patch(&h, &[A], A, 0.9, StatsPolicy::LastOfConcept).unwrap();
        assert_eq!(f.patch_prediction, vec![0.3, -1.0]);
        assert_eq!(f.weights_used, vec![(1, 1.0)]);
    }

    #[test]
    fn uniform_and_decayed_weights() {
        let h = history(&[vec![1.0, 2.0], vec![3.0, 4.0]], 1);
        let f = predict_next_patch(&h, &[A, A], A, 1.0, StatsPolicy::LastOfConcept).unwrap();
        assert_eq!(f.patch_prediction, vec![2.0, 3.0]);

        let h = history(&[vec![0.0], vec![1.0]], 1);
        let f = predict_next_patch(&h, &[A, A], A, 0.5, StatsPolicy::LastOfConcept).unwrap();
        assert!((f.patch_prediction[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f.weights_used[0].0, 2);
    }

    #[test]
    fn missing_concept_and_bad_gamma() {
        let h = history(&[vec![0.0]], 1);
        assert_eq!(
            predict_next_patch(&h, &[A], B, 0.9, StatsPolicy::LastOfConcept),
            Err(Error::NoHistoryForConcept(B))
        );
        assert!(predict_next_patch(&h, &[A], A, 0.0, StatsPolicy::LastOfConcept).is_err());
    }

    #[test]
    fn denormalizes_with_concept_stats() {
        let mut h = history(&[vec![1.0, -1.0], vec![0.0, 0.0]], 1);
        h.stats[0] = NormStats {
            mean: vec![10.0],
            std: vec![2.0],
        };
        let f = predict_next_patch(&h, &[A, B], A, 0.9, StatsPolicy::LastOfConcept).unwrap();
        assert_eq!(f.denormalized.as_slice(), &[12.0, 8.0]);
        let f = predict_next_patch(&h, &[A, B], A, 0.9, StatsPolicy::LastPatch).unwrap();
        assert_eq!(f.denormalized.as_slice(), &[1.0, -1.0]);
    }

    #[test]
    fn horizon_chains() {
        let h = history(&[vec![1.0], vec![2.0], vec![1.0], vec![2.0]], 1);
        let cfg = ForecastConfig::default();
        let out = forecast_horizon(&h, &[A, B, A, B], &cfg, 3).unwrap();
        let concepts: Vec<usize> = out.iter().map(|f| f.concept).collect();
        assert_eq!(concepts, vec![A, B, A]);
        let one = forecast_horizon(&h, &[A, B, A, B], &cfg, 1).unwrap();
        let direct = predict_next_patch(&h, &[A, B, A, B], A, cfg.gamma, cfg.stats_policy).unwrap();
        assert_eq!(one[0], direct);
        assert!(forecast_horizon(&h, &[A, B, A, B], &cfg, 0).is_err());
    }

    #[test]
    fn constant_single_concept_is_fixed_point() {
        let h = history(&[vec![0.5, 0.5], vec![0.5, 0.5]], 1);
        let out = forecast_horizon(&h, &[A, A], &ForecastConfig::default(), 5).unwrap();
        assert!(out.iter().all(|f| f.patch_prediction == vec![0.5, 0.5]));
    }

    #[test]
    fn run_collapse() {
        assert_eq!(segment_sequence(&[0, 0, 1, 1, 0]), vec![0, 1, 0]);
    }
}

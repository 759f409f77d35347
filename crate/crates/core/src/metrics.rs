//! Segmentation and forecast scores.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryScore {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ari: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmse: Option<f64>,
    pub tolerance: usize,
}

fn is_sorted(xs: &[usize]) -> bool {
    xs.windows(2).all(|w| w[0] <= w[1])
}

/// Boundary precision, recall and F1 under one-to-one matching.
///
/// Predicted boundaries are visited in ascending order; each takes the
/// earliest unmatched true boundary within `tolerance`. Two empty lists agree
/// perfectly; an empty list against a non-empty one scores zero.
pub fn boundary_f1(
    truth: &[usize],
    predicted: &[usize],
    tolerance: usize,
) -> Result<BoundaryScore> {
    if !is_sorted(truth) || !is_sorted(predicted) {
        return Err(Error::UnsortedInput);
    }
    if truth.is_empty() && predicted.is_empty() {
        return Ok(BoundaryScore {
            f1: 1.0,
            precision: 1.0,
            recall: 1.0,
        });
    }
    if truth.is_empty() || predicted.is_empty() {
        return Ok(BoundaryScore {
            f1: 0.0,
            precision: 0.0,
            recall: 0.0,
        });
    }
    let mut used = vec![false; truth.len()];
    let mut tp = 0usize;
    for &b in predicted {
        let hit = truth
            .iter()
            .enumerate()
            .find(|(j, &t)| !used[*j] && b.abs_diff(t) <= tolerance);
        if let Some((j, _)) = hit {
            used[j] = true;
            tp += 1;
        }
    }
    let precision = tp as f64 / predicted.len() as f64;
    let recall = tp as f64 / truth.len() as f64;
    let f1 = if tp == 0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(BoundaryScore {
        f1,
        precision,
        recall,
    })
}

#[inline]
fn comb2(x: u64) -> f64 {
    (x * x.saturating_sub(1) / 2) as f64
}

/// Adjusted Rand Index from the contingency table of two labelings.
///
/// Two trivial identical partitions (both all-in-one or both all-singletons)
/// score 1.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(Error::EmptySequence);
    }
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let sum_cells: f64 = table.values().map(|&c| comb2(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| comb2(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| comb2(c)).sum();
    let total = comb2(a.len() as u64);
    let expected = sum_rows * sum_cols / total;
    let max_index = 0.5 * (sum_rows + sum_cols);
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((sum_cells - expected) / denom)
}

/// Root mean square of entrywise differences.
pub fn rmse(truth: &Matrix, predicted: &Matrix) -> Result<f64> {
    truth.check_same_shape(predicted, "rmse")?;
    let count = truth.as_slice().len();
    if count == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(libm::sqrt(
        truth.sub(predicted)?.frobenius_sq() / count as f64,
    ))
}

/// Evaluates whichever pieces are provided.
pub fn evaluate(
    boundaries: Option<(&[usize], &[usize])>,
    labels: Option<(&[usize], &[usize])>,
    values: Option<(&Matrix, &Matrix)>,
    tolerance: usize,
) -> Result<EvalReport> {
    let mut report = EvalReport {
        tolerance,
        ..EvalReport::default()
    };
    if let Some((truth, pred)) = boundaries {
        let s = boundary_f1(truth, pred, tolerance)?;
        report.f1 = Some(s.f1);
        report.precision = Some(s.precision);
        report.recall = Some(s.recall);
    }
    if let Some((truth, pred)) = labels {
        report.ari = Some(adjusted_rand_index(truth, pred)?);
    }
    if let Some((truth, pred)) = values {
        report.rmse = Some(rmse(truth, pred)?);
    }
    Ok(report)
}

/// Relabels so ids appear in order of first occurrence: `[5,5,2,5]` → `[0,0,1,0]`.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map: BTreeMap<usize, usize> = BTreeMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

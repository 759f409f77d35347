//! Reading concepts out of the self-representation matrix.
//!
//! `B = |Θs·R|` measures how much consecutive reconstruction-weight columns
//! differ. Its column means `μ^B` peak where one concept hands over to the
//! next. Segments between peaks are grouped into recurring concepts by
//! spectral clustering on the segment-averaged `|Θs|` affinity, and each
//! concept keeps a latent prototype for drift monitoring.

mod cluster;
mod drift;
pub mod peaks;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{mean, std_dev, Matrix};

pub use cluster::{cluster_segments, segment_affinity, ClusterOptions, ConceptMap};
pub use drift::{drift_monitor, scan_drift, DriftEvent, DriftKind, DriftRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryScores {
    /// Column means of `B`, length `n − 1`. Entry `j` (0-based) scores the
    /// break between patches `j + 1` and `j + 2` (1-based).
    pub mu_b: Vec<f64>,
    /// `|Θs·R|`.
    pub b: Matrix,
}

pub fn boundary_scores(theta: &Matrix, r: &Matrix) -> Result<BoundaryScores> {
    if theta.cols() != r.rows() {
        return Err(Error::dims("boundary_scores", theta.cols(), r.rows()));
    }
    let b = theta.matmul(r)?.map(f64::abs);
    let rows = b.rows().max(1) as f64;
    let mu_b = (0..b.cols())
        .map(|j| (0..b.rows()).map(|i| b.get(i, j)).sum::<f64>() / rows)
        .collect();
    Ok(BoundaryScores { mu_b, b })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeakOptions {
    /// Absolute prominence threshold. `None` uses `mean(μ^B) + std_factor·std(μ^B)`.
    pub min_prominence: Option<f64>,
    pub std_factor: f64,
    pub min_distance: usize,
}

impl Default for PeakOptions {
    fn default() -> Self {
        Self {
            min_prominence: None,
            std_factor: 1.0,
            min_distance: 2,
        }
    }
}

/// 1-based segmentation of `n` patches.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    /// `b` means a break after patch `b`; strictly increasing in `[1, n−1]`.
    pub boundaries: Vec<usize>,
    /// Inclusive `(start, end)` patch ranges covering `1..=n`.
    pub segments: Vec<(usize, usize)>,
}

impl Segmentation {
    pub fn from_boundaries(n: usize, boundaries: Vec<usize>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySegments);
        }
        let valid = boundaries.windows(2).all(|w| w[0] < w[1])
            && boundaries.iter().all(|&b| b >= 1 && b < n);
        if !valid {
            return Err(Error::UnsortedInput);
        }
        let mut segments = Vec::with_capacity(boundaries.len() + 1);
        let mut start = 1;
        for &b in &boundaries {
            segments.push((start, b));
            start = b + 1;
        }
        segments.push((start, n));
        Ok(Self {
            boundaries,
            segments,
        })
    }

    pub fn patch_count(&self) -> usize {
        self.segments.last().map_or(0, |s| s.1)
    }

    /// 0-based segment index of every patch.
    pub fn segment_of_patches(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.patch_count());
        for (s, &(a, b)) in self.segments.iter().enumerate() {
            out.extend(core::iter::repeat_n(s, b + 1 - a));
        }
        out
    }
}

/// Peaks of `μ^B` become segment breaks.
pub fn detect_boundaries(scores: &BoundaryScores, options: &PeakOptions) -> Result<Segmentation> {
    let n = scores.mu_b.len() + 1;
    if n < 2 {
        return Err(Error::TooFewPatches {
            required: 2,
            found: n,
        });
    }
    let threshold = options
        .min_prominence
        .unwrap_or_else(|| mean(&scores.mu_b) + options.std_factor * std_dev(&scores.mu_b));
    let peaks = peaks::find_peaks(&scores.mu_b, threshold, options.min_distance.max(1));
    let boundaries = peaks.into_iter().map(|j| j + 1).collect();
    Segmentation::from_boundaries(n, boundaries)
}

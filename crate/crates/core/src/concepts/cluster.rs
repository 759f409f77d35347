use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Segmentation;
use crate::error::{Error, Result};
use crate::linalg::{squared_distance, symmetric_eigen, Matrix};
use crate::metrics::canonical_labels;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptMap {
    /// Concept id per segment, numbered by first appearance.
    pub segment_labels: Vec<usize>,
    /// Concept id per patch.
    pub patch_labels: Vec<usize>,
    pub k: usize,
    /// Latent centroid of each concept, `k × d`.
    pub prototypes: Vec<Vec<f64>>,
}

impl ConceptMap {
    /// Rebuilds the map for given segment labels, recomputing prototypes.
    pub fn from_segment_labels(
        segmentation: &Segmentation,
        segment_labels: &[usize],
        latent: &Matrix,
    ) -> Result<Self> {
        let segs = segmentation.segment_of_patches();
        if segs.len() != latent.rows() {
            return Err(Error::dims("latent rows", segs.len(), latent.rows()));
        }
        if segment_labels.len() != segmentation.segments.len() {
            return Err(Error::dims(
                "segment labels",
                segmentation.segments.len(),
                segment_labels.len(),
            ));
        }
        let segment_labels = canonical_labels(segment_labels);
        let k = segment_labels.iter().copied().max().map_or(0, |m| m + 1);
        let patch_labels: Vec<usize> = segs.iter().map(|&s| segment_labels[s]).collect();
        let prototypes = centroids(latent, &patch_labels, k);
        Ok(Self {
            segment_labels,
            patch_labels,
            k,
            prototypes,
        })
    }
}

pub(crate) fn centroids(latent: &Matrix, labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    let d = latent.cols();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (i, &lab) in labels.iter().enumerate() {
        counts[lab] += 1;
        for (s, v) in sums[lab].iter_mut().zip(latent.row(i)) {
            *s += v;
        }
    }
    for (sum, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            for s in sum.iter_mut() {
                *s /= c as f64;
            }
        }
    }
    sums
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterOptions {
    /// Fixed concept count; `None` picks it by the largest eigengap.
    pub k: Option<usize>,
    pub kmeans_iters: usize,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self {
            k: None,
            kmeans_iters: 100,
        }
    }
}

/// Mean of `(|Θs| + |Θs|ᵀ)/2` over every patch pair drawn from two segments.
pub fn segment_affinity(segmentation: &Segmentation, theta: &Matrix) -> Result<Matrix> {
    let n = segmentation.patch_count();
    if theta.rows() != n || theta.cols() != n {
        return Err(Error::dims("segment_affinity", n, theta.rows()));
    }
    let m = segmentation.segments.len();
    Ok(Matrix::from_fn(m, m, |a, b| {
        let (sa, ea) = segmentation.segments[a];
        let (sb, eb) = segmentation.segments[b];
        let mut total = 0.0;
        for i in sa - 1..ea {
            for j in sb - 1..eb {
                total += 0.5 * (theta.get(i, j).abs() + theta.get(j, i).abs());
            }
        }
        total / ((ea + 1 - sa) * (eb + 1 - sb)) as f64
    }))
}

/// Groups segments into concepts by spectral clustering of the segment
/// affinity, then computes latent prototypes.
///
/// Every segment first gets an extra self-loop equal to the largest
/// within-segment affinity, so a segment whose patches barely take part in
/// the self-representation still counts as its own group instead of being
/// pulled towards whichever neighbour it touches. Without a fixed `k`, the
/// eigenvalues `λ_1 ≤ … ≤ λ_m` of the symmetric normalized Laplacian are
/// extended by a sentinel `λ_{m+1} = 1` and `k` is the index of the largest
/// gap, smaller `k` on ties.
pub fn cluster_segments(
    segmentation: &Segmentation,
    latent: &Matrix,
    theta: &Matrix,
    options: &ClusterOptions,
) -> Result<ConceptMap> {
    let m = segmentation.segments.len();
    if m == 0 {
        return Err(Error::EmptySegments);
    }
    if latent.rows() != segmentation.patch_count() {
        return Err(Error::dims(
            "latent rows",
            segmentation.patch_count(),
            latent.rows(),
        ));
    }
    if options.k == Some(0) {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if m == 1 {
        return ConceptMap::from_segment_labels(segmentation, &[0], latent);
    }
    let mut affinity = segment_affinity(segmentation, theta)?;
    let max_self = (0..m).map(|a| affinity.get(a, a)).fold(0.0, f64::max);
    let self_loop = if max_self > 0.0 { max_self } else { 1.0 };
    for a in 0..m {
        affinity.add_at(a, a, self_loop);
    }
    let degree: Vec<f64> = (0..m).map(|a| affinity.row(a).iter().sum()).collect();
    let laplacian = Matrix::from_fn(m, m, |a, b| {
        let id = if a == b { 1.0 } else { 0.0 };
        id - affinity.get(a, b) / libm::sqrt(degree[a] * degree[b])
    });
    let (values, vectors) = symmetric_eigen(&laplacian)?;

    let k = match options.k {
        Some(k) => k.min(m),
        None => {
            let mut best_k = 1;
            let mut best_gap = f64::NEG_INFINITY;
            for i in 0..m {
                let next = if i + 1 < m { values[i + 1] } else { 1.0 };
                let gap = next - values[i];
                if gap > best_gap + 1e-12 {
                    best_gap = gap;
                    best_k = i + 1;
                }
            }
            best_k
        }
    };

    let mut embedding = Matrix::from_fn(m, k, |a, c| vectors.get(a, c));
    for a in 0..m {
        let row = embedding.row_mut(a);
        let norm = libm::sqrt(row.iter().map(|v| v * v).sum::<f64>());
        if norm > 1e-12 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
    let labels = kmeans(&embedding, k, options.kmeans_iters);
    ConceptMap::from_segment_labels(segmentation, &labels, latent)
}

/// Lloyd's k-means with farthest-first seeding from row 0.
fn kmeans(points: &Matrix, k: usize, iters: usize) -> Vec<usize> {
    let m = points.rows();
    let mut centers: Vec<Vec<f64>> = vec![points.row(0).to_vec()];
    while centers.len() < k {
        let mut best = 0;
        let mut best_d = -1.0;
        for i in 0..m {
            let d = centers
                .iter()
                .map(|c| squared_distance(points.row(i), c))
                .fold(f64::INFINITY, f64::min);
            if d > best_d {
                best_d = d;
                best = i;
            }
        }
        centers.push(points.row(best).to_vec());
    }
    let assign = |centers: &[Vec<f64>]| -> Vec<usize> {
        (0..m)
            .map(|i| {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (c, center) in centers.iter().enumerate() {
                    let d = squared_distance(points.row(i), center);
                    if d < best_d {
                        best_d = d;
                        best = c;
                    }
                }
                best
            })
            .collect()
    };
    let mut labels = assign(&centers);
    for _ in 0..iters {
        let mut sums = vec![vec![0.0; points.cols()]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let next = assign(&centers);
        if next == labels {
            break;
        }
        labels = next;
    }
    labels
}

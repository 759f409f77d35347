//! Boundary detection and concept grouping on planted coefficient matrices.

use kansr_core::concepts::peaks::{find_peaks, local_maxima, prominence};
use kansr_core::concepts::{
    boundary_scores, cluster_segments, detect_boundaries, scan_drift, ClusterOptions, DriftKind,
    PeakOptions, Segmentation,
};
use kansr_core::linalg::Matrix;
use kansr_core::metrics::{adjusted_rand_index, canonical_labels};
use kansr_core::rng::SeededRng;
use kansr_core::selfrep::difference_matrix;
use proptest::prelude::*;

/// Concept id per patch for runs of the given lengths.
fn expand(runs: &[(usize, usize)]) -> Vec<usize> {
    runs.iter()
        .flat_map(|&(c, len)| std::iter::repeat_n(c, len))
        .collect()
}

/// `Θs` whose column `j` draws only on other patches of the same concept.
fn planted_theta(labels: &[usize], noise: f64, seed: u64) -> Matrix {
    let mut rng = SeededRng::new(seed);
    let n = labels.len();
    Matrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else if labels[i] == labels[j] {
            0.5 + 0.2 * rng.uniform()
        } else {
            noise * rng.uniform()
        }
    })
}

fn latent_for(labels: &[usize], seed: u64) -> Matrix {
    let mut rng = SeededRng::new(seed);
    Matrix::from_fn(
        labels.len(),
        4,
        |i, c| if c == labels[i] % 4 { 3.0 } else { 0.0 } + 0.1 * rng.normal(),
    )
}

#[test]
fn recurring_concepts_share_a_label() {
    let truth = expand(&[(0, 8), (1, 6), (0, 7), (2, 9), (1, 6)]);
    let n = truth.len();
    for seed in 0..5 {
        let theta = planted_theta(&truth, 0.02, seed);
        let scores = boundary_scores(&theta, &difference_matrix(n).unwrap()).unwrap();
        let seg = detect_boundaries(&scores, &PeakOptions::default()).unwrap();
        assert_eq!(seg.boundaries, vec![8, 14, 21, 30], "seed {seed}");
        let latent = latent_for(&truth, seed);
        let map = cluster_segments(&seg, &latent, &theta, &ClusterOptions::default()).unwrap();
        assert_eq!(map.k, 3);
        assert_eq!(map.segment_labels, vec![0, 1, 0, 2, 1]);
        assert_eq!(adjusted_rand_index(&truth, &map.patch_labels).unwrap(), 1.0);
        assert_eq!(map.prototypes.len(), 3);
    }
}

#[test]
fn fixed_k_is_honoured() {
    let truth = expand(&[(0, 5), (1, 5), (2, 5), (3, 5)]);
    let theta = planted_theta(&truth, 0.01, 1);
    let seg = Segmentation::from_boundaries(20, vec![5, 10, 15]).unwrap();
    let latent = latent_for(&truth, 1);
    let two = ClusterOptions {
        k: Some(2),
        ..ClusterOptions::default()
    };
    let map = cluster_segments(&seg, &latent, &theta, &two).unwrap();
    assert_eq!(map.k, 2);
    assert_eq!(map.patch_labels, canonical_labels(&map.patch_labels));
    let auto = cluster_segments(&seg, &latent, &theta, &ClusterOptions::default()).unwrap();
    assert_eq!(auto.k, 4);
}

#[test]
fn drift_scan_reports_crossings_in_order() {
    let truth = expand(&[(0, 6), (1, 6), (0, 6)]);
    let theta = planted_theta(&truth, 0.01, 2);
    let seg = Segmentation::from_boundaries(18, vec![6, 12]).unwrap();
    let latent = latent_for(&truth, 2);
    let map = cluster_segments(&seg, &latent, &theta, &ClusterOptions::default()).unwrap();
    let records = scan_drift(&map, &seg, &latent, None).unwrap();
    let crossings: Vec<usize> = records
        .iter()
        .filter(|r| r.kind == DriftKind::BoundaryCrossing)
        .map(|r| r.patch)
        .collect();
    assert_eq!(crossings, vec![7, 13]);
    let approaches: Vec<(usize, usize)> = records
        .iter()
        .filter(|r| r.kind == DriftKind::PrototypeApproach)
        .map(|r| (r.patch, r.to_concept))
        .collect();
    assert_eq!(approaches, vec![(7, 1), (13, 0)]);
    assert!(records.windows(2).all(|w| w[0].patch <= w[1].patch));
}

/// Prominence by definition: for each side, the minimum over the stretch
/// up to the first strictly higher sample.
fn prominence_oracle(xs: &[f64], p: usize) -> f64 {
    let h = xs[p];
    let left_stop = (0..p).rev().find(|&i| xs[i] > h).map_or(0, |i| i + 1);
    let right_stop = (p + 1..xs.len()).find(|&i| xs[i] > h).unwrap_or(xs.len());
    let left = xs[left_stop..=p]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let right = xs[p..right_stop]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    h - left.max(right)
}

proptest! {
    #[test]
    fn peaks_respect_prominence_and_distance(
        xs in proptest::collection::vec(0u8..6, 3..40),
        thr in 0.0f64..3.0,
        dist in 1usize..5,
    ) {
        let xs: Vec<f64> = xs.into_iter().map(f64::from).collect();
        let maxima = local_maxima(&xs);
        for &p in &maxima {
            prop_assert!(p > 0 && p + 1 < xs.len());
            prop_assert_eq!(prominence(&xs, p), prominence_oracle(&xs, p));
        }
        let peaks = find_peaks(&xs, thr, dist);
        prop_assert!(peaks.windows(2).all(|w| w[1] - w[0] >= dist));
        for &p in &peaks {
            prop_assert!(maxima.contains(&p));
            prop_assert!(prominence_oracle(&xs, p) >= thr);
        }
        // every qualifying maximum is kept or blocked by a peak at least as tall
        for &p in &maxima {
            if prominence_oracle(&xs, p) >= thr && !peaks.contains(&p) {
                prop_assert!(peaks.iter().any(|&q| q.abs_diff(p) < dist && xs[q] >= xs[p]));
            }
        }
    }
}

//! Prominence-based peak picking on a 1-D signal.

use alloc::vec::Vec;

/// Interior local maxima. A flat top counts once, at its first index.
pub fn local_maxima(xs: &[f64]) -> Vec<usize> {
    let mut peaks = Vec::new();
    if xs.len() < 3 {
        return peaks;
    }
    let mut i = 1;
    while i < xs.len() - 1 {
        if xs[i] > xs[i - 1] {
            let mut j = i;
            while j + 1 < xs.len() && xs[j + 1] == xs[i] {
                j += 1;
            }
            if j + 1 < xs.len() && xs[j + 1] < xs[i] {
                peaks.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Height of a peak above the higher of its two bases, where each base is
/// the lowest point between the peak and the nearest strictly higher sample
/// (or the signal edge) on that side.
pub fn prominence(xs: &[f64], peak: usize) -> f64 {
    let h = xs[peak];
    let mut left_min = h;
    for &v in xs[..peak].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &xs[peak + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Peaks with prominence at least `min_prominence`, pairwise at least
/// `min_distance` apart. Taller peaks win distance conflicts; equal heights
/// go to the earlier index. Returned in ascending order.
pub fn find_peaks(xs: &[f64], min_prominence: f64, min_distance: usize) -> Vec<usize> {
    let mut candidates: Vec<usize> = local_maxima(xs)
        .into_iter()
        .filter(|&p| prominence(xs, p) >= min_prominence)
        .collect();
    candidates.sort_by(|&a, &b| xs[b].total_cmp(&xs[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for p in candidates {
        if kept.iter().all(|&q| p.abs_diff(q) >= min_distance) {
            kept.push(p);
        }
    }
    kept.sort_unstable();
    kept
}

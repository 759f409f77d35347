use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{ConceptMap, Segmentation};
use crate::error::{Error, Result};
use crate::linalg::{euclidean, Matrix};

/// A latent vector came strictly closer to a foreign prototype than to the
/// prototype of its current concept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftEvent {
    /// 1-based patch position.
    pub patch: usize,
    pub from_concept: usize,
    pub to_concept: usize,
    /// `d(current prototype) − d(nearest prototype)`, always positive.
    pub score: f64,
}

/// Nearest-prototype check for one latent vector. Ties keep the current
/// concept; among equally near foreign prototypes the smaller id wins.
pub fn drift_monitor(
    map: &ConceptMap,
    z: &[f64],
    current_concept: usize,
    patch: usize,
) -> Result<Option<DriftEvent>> {
    if current_concept >= map.prototypes.len() {
        return Err(Error::UnknownConcept(current_concept));
    }
    let current = &map.prototypes[current_concept];
    if current.len() != z.len() {
        return Err(Error::dims("drift_monitor", current.len(), z.len()));
    }
    let d_current = euclidean(z, current);
    let mut best: Option<(usize, f64)> = None;
    for (c, proto) in map.prototypes.iter().enumerate() {
        if c == current_concept {
            continue;
        }
        let d = euclidean(z, proto);
        if d < d_current && best.is_none_or(|(_, bd)| d < bd) {
            best = Some((c, d));
        }
    }
    Ok(best.map(|(c, d)| DriftEvent {
        patch,
        from_concept: current_concept,
        to_concept: c,
        score: d_current - d,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    /// A detected segment boundary was crossed.
    BoundaryCrossing,
    /// The latent vector moved into a foreign prototype's pull.
    PrototypeApproach,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftRecord {
    pub kind: DriftKind,
    /// First patch (1-based) after the change.
    pub patch: usize,
    pub from_concept: usize,
    pub to_concept: usize,
    /// Boundary score `μ^B` for crossings, distance margin for approaches.
    pub score: f64,
}

/// Replays a latent sequence, tracking the current concept from the first
/// patch's label and switching whenever a prototype approach fires. Boundary
/// crossings come from `segmentation`, scored with `mu_b` when given.
pub fn scan_drift(
    map: &ConceptMap,
    segmentation: &Segmentation,
    latent: &Matrix,
    mu_b: Option<&[f64]>,
) -> Result<Vec<DriftRecord>> {
    if latent.rows() == 0 {
        return Ok(Vec::new());
    }
    let mut records = Vec::new();
    for (s, &b) in segmentation.boundaries.iter().enumerate() {
        records.push(DriftRecord {
            kind: DriftKind::BoundaryCrossing,
            patch: b + 1,
            from_concept: map.segment_labels[s],
            to_concept: map.segment_labels[s + 1],
            score: mu_b.and_then(|m| m.get(b - 1)).copied().unwrap_or(0.0),
        });
    }
    let mut current = *map.patch_labels.first().ok_or(Error::EmptySegments)?;
    for t in 0..latent.rows() {
        if let Some(ev) = drift_monitor(map, latent.row(t), current, t + 1)? {
            records.push(DriftRecord {
                kind: DriftKind::PrototypeApproach,
                patch: ev.patch,
                from_concept: ev.from_concept,
                to_concept: ev.to_concept,
                score: ev.score,
            });
            current = ev.to_concept;
        }
    }
    records.sort_by_key(|r| (r.patch, r.kind as u8));
    Ok(records)
}

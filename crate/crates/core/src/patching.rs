//! Non-overlapping patches with reversible per-patch, per-channel
//! instance normalization.
//!
//! A patch of width `w` over `N` channels is flattened time-major: all
//! channels of step 1, then all channels of step 2, and so on, giving a vector
//! of length `D = w·N`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::SeriesMatrix;
use crate::linalg::Matrix;

/// Floor applied to per-channel standard deviations.
pub const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    /// 1-based position in the series.
    pub index: usize,
    pub width: usize,
    pub channels: usize,
    /// Time-major, length `width * channels`.
    pub data: Vec<f64>,
}

impl Patch {
    #[inline]
    pub fn get(&self, step: usize, channel: usize) -> f64 {
        self.data[step * self.channels + channel]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    /// Population standard deviation, never below [`NORM_EPS`].
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn identity(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchSet {
    /// `n × D` matrix, one flattened patch per row.
    pub patches: Matrix,
    /// One entry per patch; identity statistics until normalized.
    pub stats: Vec<NormStats>,
    pub width: usize,
    pub channels: usize,
    /// Trailing time steps that did not fill a whole patch.
    pub dropped_tail: usize,
    pub normalized: bool,
}

impl PatchSet {
    /// Patch count `n`.
    pub fn len(&self) -> usize {
        self.patches.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.rows() == 0
    }

    /// Checks shapes and finiteness, e.g. after deserialization.
    pub fn validate(&self) -> Result<()> {
        if self.patches.cols() != self.dim() {
            return Err(Error::dims(
                "patch dimension",
                self.dim(),
                self.patches.cols(),
            ));
        }
        if self.stats.len() != self.len() {
            return Err(Error::dims("patch stats", self.len(), self.stats.len()));
        }
        for st in &self.stats {
            if st.mean.len() != self.channels || st.std.len() != self.channels {
                return Err(Error::dims("stats channels", self.channels, st.mean.len()));
            }
            if st.std.iter().any(|s| !(*s > 0.0 && s.is_finite()))
                || st.mean.iter().any(|m| !m.is_finite())
            {
                return Err(Error::InvalidDims(
                    "stats must be finite with positive std".into(),
                ));
            }
        }
        if !self.patches.is_finite() {
            return Err(Error::InvalidDims("patches must be finite".into()));
        }
        Ok(())
    }

    /// Flattened dimension `D = w·N`.
    pub fn dim(&self) -> usize {
        self.width * self.channels
    }

    /// Patch `i` (0-based) as a [`Patch`] with its 1-based position.
    pub fn patch(&self, i: usize) -> Patch {
        Patch {
            index: i + 1,
            width: self.width,
            channels: self.channels,
            data: self.patches.row(i).to_vec(),
        }
    }

    /// Stitches denormalized patches back into an `(n·w) × N` series.
    pub fn reconstruct_series(&self) -> Result<Matrix> {
        let mut out = Matrix::zeros(self.len() * self.width, self.channels);
        for i in 0..self.len() {
            let p = denormalize_patch(&self.patch(i), &self.stats[i])?;
            for s in 0..self.width {
                for c in 0..self.channels {
                    out.set(i * self.width + s, c, p.get(s, c));
                }
            }
        }
        Ok(out)
    }
}

/// Cuts `series` into `⌊l/w⌋` consecutive patches. Patch `i` (1-based) holds
/// exactly steps `(i−1)·w .. i·w`, so no patch sees a later step than its own.
pub fn patchify(series: &SeriesMatrix, width: usize, strict: bool) -> Result<PatchSet> {
    let len = series.len();
    if width == 0 {
        return Err(Error::InvalidConfig("patch width must be positive".into()));
    }
    if width > len {
        return Err(Error::WidthTooLarge { len, width });
    }
    if strict && !len.is_multiple_of(width) {
        return Err(Error::IndivisibleLength { len, width });
    }
    let n = len / width;
    let channels = series.channels();
    let values = series.values();
    let mut patches = Matrix::zeros(n, width * channels);
    for i in 0..n {
        let row = patches.row_mut(i);
        for s in 0..width {
            row[s * channels..(s + 1) * channels].copy_from_slice(values.row(i * width + s));
        }
    }
    Ok(PatchSet {
        patches,
        stats: vec![NormStats::identity(channels); n],
        width,
        channels,
        dropped_tail: len - n * width,
        normalized: false,
    })
}

/// Per-channel mean and floored population std of one flattened patch.
pub fn patch_stats(data: &[f64], width: usize, channels: usize) -> NormStats {
    let mut mean = vec![0.0; channels];
    for s in 0..width {
        for c in 0..channels {
            mean[c] += data[s * channels + c];
        }
    }
    for m in &mut mean {
        *m /= width as f64;
    }
    let mut var = vec![0.0; channels];
    for s in 0..width {
        for c in 0..channels {
            let d = data[s * channels + c] - mean[c];
            var[c] += d * d;
        }
    }
    let std = var
        .iter()
        .map(|v| libm::sqrt(v / width as f64).max(NORM_EPS))
        .collect();
    NormStats { mean, std }
}

/// Standardizes every channel of every patch to zero mean and unit variance.
pub fn normalize_patches(raw: &PatchSet) -> Result<PatchSet> {
    if raw.normalized {
        return Err(Error::InvalidConfig(
            "patch set is already normalized".into(),
        ));
    }
    let (w, ch) = (raw.width, raw.channels);
    let mut patches = raw.patches.clone();
    let mut stats = Vec::with_capacity(raw.len());
    for i in 0..raw.len() {
        let row = patches.row_mut(i);
        let st = patch_stats(row, w, ch);
        for s in 0..w {
            for c in 0..ch {
                let v = &mut row[s * ch + c];
                *v = (*v - st.mean[c]) / st.std[c];
            }
        }
        stats.push(st);
    }
    Ok(PatchSet {
        patches,
        stats,
        width: w,
        channels: ch,
        dropped_tail: raw.dropped_tail,
        normalized: true,
    })
}

/// Restores original units: `x · std + mean` per channel.
pub fn denormalize_patch(patch: &Patch, stats: &NormStats) -> Result<Patch> {
    denormalize_flat(&patch.data, patch.channels, stats).map(|data| Patch {
        data,
        ..patch.clone()
    })
}

pub(crate) fn denormalize_flat(
    data: &[f64],
    channels: usize,
    stats: &NormStats,
) -> Result<Vec<f64>> {
    if stats.mean.len() != channels {
        return Err(Error::dims("denormalize mean", channels, stats.mean.len()));
    }
    if stats.std.len() != channels {
        return Err(Error::dims("denormalize std", channels, stats.std.len()));
    }
    if channels == 0 || !data.len().is_multiple_of(channels) {
        return Err(Error::dims("denormalize data", channels, data.len()));
    }
    Ok(data
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let c = k % channels;
            x * stats.std[c] + stats.mean[c]
        })
        .collect())
}

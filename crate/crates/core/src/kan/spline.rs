//! Clamped uniform B-spline bases.
//!
//! The knot vector repeats each end of `[t_min, t_max]` `k + 1` times around
//! `G − 1` uniformly spaced interior knots, so there are `G + k` basis
//! functions, the first equals 1 at `t_min` and the last equals 1 at `t_max`.
//! Inputs are clamped into the range before evaluation.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest supported spline order (degree).
pub const MAX_ORDER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub t_min: f64,
    pub t_max: f64,
    /// Interior interval count `G`.
    pub intervals: usize,
    /// Spline degree `k`.
    pub order: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            t_min: -2.0,
            t_max: 2.0,
            intervals: 5,
            order: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridConfig", into = "GridConfig")]
pub struct SplineGrid {
    config: GridConfig,
    knots: Vec<f64>,
}

impl TryFrom<GridConfig> for SplineGrid {
    type Error = Error;

    fn try_from(config: GridConfig) -> Result<Self> {
        SplineGrid::new(config)
    }
}

impl From<SplineGrid> for GridConfig {
    fn from(grid: SplineGrid) -> Self {
        grid.config
    }
}

/// The `k + 1` basis functions that can be non-zero at a point.
///
/// `values[r]` is `B_{first + r}(x)`.
#[derive(Debug, Clone, Copy)]
pub struct LocalBasis {
    pub first: usize,
    pub values: [f64; MAX_ORDER + 1],
    pub derivs: [f64; MAX_ORDER + 1],
}

impl SplineGrid {
    pub fn new(config: GridConfig) -> Result<Self> {
        let GridConfig {
            t_min,
            t_max,
            intervals,
            order,
        } = config;
        if !(t_min.is_finite() && t_max.is_finite() && t_min < t_max) {
            return Err(Error::InvalidConfig(
                "grid range must satisfy t_min < t_max".into(),
            ));
        }
        if intervals == 0 {
            return Err(Error::InvalidConfig(
                "grid needs at least one interval".into(),
            ));
        }
        if order == 0 || order > MAX_ORDER {
            return Err(Error::InvalidConfig("spline order must be in 1..=8".into()));
        }
        let h = (t_max - t_min) / intervals as f64;
        let mut knots = Vec::with_capacity(intervals + 2 * order + 1);
        knots.extend(core::iter::repeat_n(t_min, order + 1));
        for i in 1..intervals {
            knots.push(t_min + i as f64 * h);
        }
        knots.extend(core::iter::repeat_n(t_max, order + 1));
        Ok(Self { config, knots })
    }

    pub fn config(&self) -> GridConfig {
        self.config
    }

    pub fn t_min(&self) -> f64 {
        self.config.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.config.t_max
    }

    pub fn order(&self) -> usize {
        self.config.order
    }

    pub fn intervals(&self) -> usize {
        self.config.intervals
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions, `G + k`.
    pub fn basis_len(&self) -> usize {
        self.config.intervals + self.config.order
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.config.t_min, self.config.t_max)
    }

    /// Knot span `s` with `knots[s] <= x < knots[s+1]`; `x = t_max` maps to the
    /// last non-empty span.
    fn span(&self, x: f64) -> usize {
        let k = self.config.order;
        let g = self.config.intervals;
        let h = (self.config.t_max - self.config.t_min) / g as f64;
        let guess = ((x - self.config.t_min) / h) as usize;
        let mut s = k + guess.min(g - 1);
        while s > k && x < self.knots[s] {
            s -= 1;
        }
        while s < k + g - 1 && x >= self.knots[s + 1] {
            s += 1;
        }
        s
    }

    /// Non-zero basis values and their derivatives at `x` (clamped).
    ///
    /// Derivatives are zero outside `[t_min, t_max]`, where the clamped spline
    /// is constant.
    pub fn local_basis(&self, x: f64) -> LocalBasis {
        let k = self.config.order;
        let xc = self.clamp(x);
        let s = self.span(xc);
        let t = &self.knots;

        let mut n = [0.0; MAX_ORDER + 1];
        let mut lower = [0.0; MAX_ORDER + 1];
        let mut left = [0.0; MAX_ORDER + 1];
        let mut right = [0.0; MAX_ORDER + 1];
        n[0] = 1.0;
        for j in 1..=k {
            if j == k {
                lower = n;
            }
            left[j] = xc - t[s + 1 - j];
            right[j] = t[s + j] - xc;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }

        let first = s - k;
        let mut derivs = [0.0; MAX_ORDER + 1];
        if x >= self.config.t_min && x <= self.config.t_max {
            // `lower[m]` is B_{s-k+1+m, k-1}.
            let kf = k as f64;
            let lower_at = |i: usize| -> f64 {
                if i > first && i <= s {
                    lower[i - first - 1]
                } else {
                    0.0
                }
            };
            for (r, d) in derivs.iter_mut().enumerate().take(k + 1) {
                let i = first + r;
                let mut v = 0.0;
                let a = t[i + k] - t[i];
                if a > 0.0 {
                    v += kf * lower_at(i) / a;
                }
                let b = t[i + k + 1] - t[i + 1];
                if b > 0.0 {
                    v -= kf * lower_at(i + 1) / b;
                }
                *d = v;
            }
        }
        LocalBasis {
            first,
            values: n,
            derivs,
        }
    }

    /// Spline value `Σ_j coeffs[j]·B_j(x)` and its derivative in `x`.
    #[inline]
    pub fn eval_with_deriv(&self, coeffs: &[f64], basis: &LocalBasis) -> (f64, f64) {
        let k = self.config.order;
        let mut v = 0.0;
        let mut d = 0.0;
        for r in 0..=k {
            let c = coeffs[basis.first + r];
            v += c * basis.values[r];
            d += c * basis.derivs[r];
        }
        (v, d)
    }
}

/// Full basis vector of length `G + k` at `x`.
pub fn bspline_basis(x: f64, grid: &SplineGrid) -> Vec<f64> {
    let local = grid.local_basis(x);
    let mut out = vec![0.0; grid.basis_len()];
    for r in 0..=grid.order() {
        out[local.first + r] = local.values[r];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SplineGrid {
        SplineGrid::new(GridConfig::default()).unwrap()
    }

    #[test]
    fn knot_vector_shape() {
        let g = grid();
        assert_eq!(g.knots().len(), 5 + 2 * 3 + 1);
        assert_eq!(g.basis_len(), 8);
        assert!(g.knots().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn clamped_ends() {
        let g = grid();
        let b = bspline_basis(-2.0, &g);
        assert_eq!(b[0], 1.0);
        assert!(b[1..].iter().all(|&v| v == 0.0));
        let b = bspline_basis(2.0, &g);
        assert!((b[7] - 1.0).abs() < 1e-15);
        // clamping: far outside behaves like the end point
        assert_eq!(bspline_basis(-50.0, &g), bspline_basis(-2.0, &g));
    }

    #[test]
    fn partition_of_unity_across_orders() {
        for order in 1..=5 {
            let g = SplineGrid::new(GridConfig {
                t_min: -1.0,
                t_max: 3.0,
                intervals: 7,
                order,
            })
            .unwrap();
            for i in 0..=400 {
                let x = -1.0 + 4.0 * i as f64 / 400.0;
                let s: f64 = bspline_basis(x, &g).iter().sum();
                assert!((s - 1.0).abs() < 1e-12, "order {order} x {x} sum {s}");
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let g = grid();
        let coeffs = [0.3, -1.0, 0.7, 2.0, -0.4, 0.1, 0.9, -0.6];
        for i in 1..40 {
            let x = -1.97 + 3.94 * i as f64 / 40.0;
            let (_, d) = g.eval_with_deriv(&coeffs, &g.local_basis(x));
            let h = 1e-6;
            let (vp, _) = g.eval_with_deriv(&coeffs, &g.local_basis(x + h));
            let (vm, _) = g.eval_with_deriv(&coeffs, &g.local_basis(x - h));
            let fd = (vp - vm) / (2.0 * h);
            assert!((d - fd).abs() < 1e-6, "x {x}: {d} vs {fd}");
        }
        let (_, d) = g.eval_with_deriv(&coeffs, &g.local_basis(3.0));
        assert_eq!(d, 0.0);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            GridConfig {
                t_min: 1.0,
                t_max: 1.0,
                ..GridConfig::default()
            },
            GridConfig {
                intervals: 0,
                ..GridConfig::default()
            },
            GridConfig {
                order: 0,
                ..GridConfig::default()
            },
        ];
        for cfg in bad {
            assert!(SplineGrid::new(cfg).is_err());
        }
    }
}

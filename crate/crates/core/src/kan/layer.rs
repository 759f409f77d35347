use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::spline::{GridConfig, LocalBasis, SplineGrid};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::SeededRng;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

#[inline]
pub fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

#[inline]
pub fn silu_deriv(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// One Kolmogorov-Arnold layer.
///
/// Edge `(q, p)` carries
/// `φ_{q,p}(x) = base_weights[q,p]·silu(x) + spline_scales[q,p]·Σ_j spline_coeffs[q,p,j]·B_j(x)`
/// and output `q` sums its incoming edges in ascending `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLayer", into = "RawLayer")]
pub struct KanLayer {
    in_dim: usize,
    out_dim: usize,
    grid: SplineGrid,
    /// Flat `out × in × (G+k)`, index `((q·in) + p)·(G+k) + j`.
    pub spline_coeffs: Vec<f64>,
    /// Flat `out × in`, index `q·in + p`.
    pub base_weights: Vec<f64>,
    /// Flat `out × in`, index `q·in + p`.
    pub spline_scales: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawLayer {
    in_dim: usize,
    out_dim: usize,
    grid: SplineGrid,
    spline_coeffs: Vec<f64>,
    base_weights: Vec<f64>,
    spline_scales: Vec<f64>,
}

impl TryFrom<RawLayer> for KanLayer {
    type Error = Error;

    fn try_from(raw: RawLayer) -> Result<Self> {
        let layer = KanLayer {
            in_dim: raw.in_dim,
            out_dim: raw.out_dim,
            grid: raw.grid,
            spline_coeffs: raw.spline_coeffs,
            base_weights: raw.base_weights,
            spline_scales: raw.spline_scales,
        };
        layer.validate()?;
        Ok(layer)
    }
}

impl From<KanLayer> for RawLayer {
    fn from(l: KanLayer) -> Self {
        RawLayer {
            in_dim: l.in_dim,
            out_dim: l.out_dim,
            grid: l.grid,
            spline_coeffs: l.spline_coeffs,
            base_weights: l.base_weights,
            spline_scales: l.spline_scales,
        }
    }
}

/// Parameter gradients of one layer, laid out like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub spline_coeffs: Vec<f64>,
    pub base_weights: Vec<f64>,
    pub spline_scales: Vec<f64>,
}

impl LayerGrad {
    pub fn zeros_like(layer: &KanLayer) -> Self {
        Self {
            spline_coeffs: vec![0.0; layer.spline_coeffs.len()],
            base_weights: vec![0.0; layer.base_weights.len()],
            spline_scales: vec![0.0; layer.spline_scales.len()],
        }
    }

    pub fn tensors(&self) -> [&[f64]; 3] {
        [&self.spline_coeffs, &self.base_weights, &self.spline_scales]
    }
}

impl KanLayer {
    /// A layer with every parameter zero.
    pub fn zeros(in_dim: usize, out_dim: usize, grid: SplineGrid) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidDims("layer widths must be positive".into()));
        }
        let edges = in_dim * out_dim;
        Ok(Self {
            in_dim,
            out_dim,
            spline_coeffs: vec![0.0; edges * grid.basis_len()],
            base_weights: vec![0.0; edges],
            spline_scales: vec![0.0; edges],
            grid,
        })
    }

    /// Seeded initialization: base weights uniform in `±1/√in_dim`, spline
    /// coefficients `Normal(0, 0.1²)`, spline scales 1.
    pub fn init(
        in_dim: usize,
        out_dim: usize,
        grid: SplineGrid,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let mut layer = Self::zeros(in_dim, out_dim, grid)?;
        let bound = 1.0 / libm::sqrt(in_dim as f64);
        for w in &mut layer.base_weights {
            *w = rng.uniform_range(-bound, bound);
        }
        for c in &mut layer.spline_coeffs {
            *c = rng.normal_with(0.0, 0.1);
        }
        layer.spline_scales.fill(1.0);
        Ok(layer)
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 {
            return Err(Error::InvalidDims("layer widths must be positive".into()));
        }
        let edges = self.in_dim * self.out_dim;
        let checks = [
            (
                "spline_coeffs",
                edges * self.grid.basis_len(),
                self.spline_coeffs.len(),
            ),
            ("base_weights", edges, self.base_weights.len()),
            ("spline_scales", edges, self.spline_scales.len()),
        ];
        for (ctx, expected, found) in checks {
            if expected != found {
                return Err(Error::dims(ctx, expected, found));
            }
        }
        let finite = self
            .tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::InvalidConfig(
                "layer parameters must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn grid(&self) -> &SplineGrid {
        &self.grid
    }

    pub fn grid_config(&self) -> GridConfig {
        self.grid.config()
    }

    #[inline]
    pub fn edge_coeffs(&self, q: usize, p: usize) -> &[f64] {
        let nb = self.grid.basis_len();
        let start = (q * self.in_dim + p) * nb;
        &self.spline_coeffs[start..start + nb]
    }

    pub fn edge_coeffs_mut(&mut self, q: usize, p: usize) -> &mut [f64] {
        let nb = self.grid.basis_len();
        let start = (q * self.in_dim + p) * nb;
        &mut self.spline_coeffs[start..start + nb]
    }

    /// Parameter tensors in the fixed order coeffs, base, scales.
    pub fn tensors(&self) -> [&[f64]; 3] {
        [&self.spline_coeffs, &self.base_weights, &self.spline_scales]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 3] {
        [
            &mut self.spline_coeffs,
            &mut self.base_weights,
            &mut self.spline_scales,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.spline_coeffs.len() + self.base_weights.len() + self.spline_scales.len()
    }

    #[inline]
    fn edge_value(&self, q: usize, p: usize, silu_x: f64, basis: &LocalBasis) -> f64 {
        let e = q * self.in_dim + p;
        let (spline, _) = self.grid.eval_with_deriv(self.edge_coeffs(q, p), basis);
        self.base_weights[e] * silu_x + self.spline_scales[e] * spline
    }

    /// `y_q = Σ_p φ_{q,p}(x_p)`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim {
            return Err(Error::dims("layer_forward", self.in_dim, x.len()));
        }
        let mut y = vec![0.0; self.out_dim];
        self.forward_into(x, &mut y);
        Ok(y)
    }

    fn forward_into(&self, x: &[f64], y: &mut [f64]) {
        let bases: Vec<LocalBasis> = x.iter().map(|&v| self.grid.local_basis(v)).collect();
        let silus: Vec<f64> = x.iter().map(|&v| silu(v)).collect();
        for (q, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in 0..self.in_dim {
                acc += self.edge_value(q, p, silus[p], &bases[p]);
            }
            *out = acc;
        }
    }

    /// Row-wise forward over an `n × in_dim` batch.
    pub fn forward_batch(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.in_dim {
            return Err(Error::dims("layer_forward", self.in_dim, x.cols()));
        }
        let mut out = Matrix::zeros(x.rows(), self.out_dim);
        for i in 0..x.rows() {
            self.forward_into(x.row(i), out.row_mut(i));
        }
        Ok(out)
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx` for the
    /// batch, given the layer input `x` and `dL/dy`.
    pub fn backward_batch(&self, x: &Matrix, dy: &Matrix, grad: &mut LayerGrad) -> Result<Matrix> {
        if x.cols() != self.in_dim || dy.cols() != self.out_dim || x.rows() != dy.rows() {
            return Err(Error::CacheMismatch);
        }
        let nb = self.grid.basis_len();
        let k = self.grid.order();
        let mut dx = Matrix::zeros(x.rows(), self.in_dim);
        for i in 0..x.rows() {
            let xr = x.row(i);
            let dyr = dy.row(i);
            let bases: Vec<LocalBasis> = xr.iter().map(|&v| self.grid.local_basis(v)).collect();
            let silus: Vec<f64> = xr.iter().map(|&v| silu(v)).collect();
            let dsilus: Vec<f64> = xr.iter().map(|&v| silu_deriv(v)).collect();
            let dxr = dx.row_mut(i);
            for (q, &g) in dyr.iter().enumerate() {
                for p in 0..self.in_dim {
                    let e = q * self.in_dim + p;
                    let basis = &bases[p];
                    let (spline, dspline) =
                        self.grid.eval_with_deriv(self.edge_coeffs(q, p), basis);
                    let scale = self.spline_scales[e];
                    grad.base_weights[e] += g * silus[p];
                    grad.spline_scales[e] += g * spline;
                    let cg = &mut grad.spline_coeffs[e * nb..(e + 1) * nb];
                    let gs = g * scale;
                    for r in 0..=k {
                        cg[basis.first + r] += gs * basis.values[r];
                    }
                    dxr[p] += g * (self.base_weights[e] * dsilus[p] + scale * dspline);
                }
            }
        }
        Ok(dx)
    }

    /// `φ_{q,p}` evaluated at every sample point.
    pub fn sample_edge(&self, q: usize, p: usize, xs: &[f64]) -> Result<Vec<f64>> {
        if q >= self.out_dim {
            return Err(Error::IndexOutOfRange {
                what: "output",
                index: q,
                bound: self.out_dim,
            });
        }
        if p >= self.in_dim {
            return Err(Error::IndexOutOfRange {
                what: "input",
                index: p,
                bound: self.in_dim,
            });
        }
        Ok(xs
            .iter()
            .map(|&x| self.edge_value(q, p, silu(x), &self.grid.local_basis(x)))
            .collect())
    }
}

/// Free-function form of [`KanLayer::forward`].
pub fn layer_forward(layer: &KanLayer, x: &[f64]) -> Result<Vec<f64>> {
    layer.forward(x)
}

/// Free-function form of [`KanLayer::sample_edge`].
pub fn sample_edge_activation(
    layer: &KanLayer,
    q: usize,
    p: usize,
    xs: &[f64],
) -> Result<Vec<f64>> {
    layer.sample_edge(q, p, xs)
}

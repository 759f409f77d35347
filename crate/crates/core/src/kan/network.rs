use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::layer::{KanLayer, LayerGrad};
use super::spline::{GridConfig, SplineGrid};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::SeededRng;

/// `KAN(x) = (Φ_{L−1} ∘ ⋯ ∘ Φ_0)(x)`, applied row-wise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNetwork", into = "RawNetwork")]
pub struct KanNetwork {
    layers: Vec<KanLayer>,
}

#[derive(Serialize, Deserialize)]
struct RawNetwork {
    layers: Vec<KanLayer>,
}

impl TryFrom<RawNetwork> for KanNetwork {
    type Error = Error;

    fn try_from(raw: RawNetwork) -> Result<Self> {
        KanNetwork::new(raw.layers)
    }
}

impl From<KanNetwork> for RawNetwork {
    fn from(net: KanNetwork) -> Self {
        RawNetwork { layers: net.layers }
    }
}

/// Inputs seen by each layer during a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub layer_inputs: Vec<Matrix>,
    pub output: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub layers: Vec<LayerGrad>,
    /// `dL/dX` for the network input.
    pub input: Matrix,
}

impl GradientBundle {
    pub fn is_finite(&self) -> bool {
        self.input.is_finite()
            && self
                .layers
                .iter()
                .all(|g| g.tensors().iter().all(|t| t.iter().all(|v| v.is_finite())))
    }
}

impl KanNetwork {
    pub fn new(layers: Vec<KanLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidDims(
                "network needs at least one layer".into(),
            ));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::InvalidDims(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        for layer in &layers {
            layer.validate()?;
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[KanLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [KanLayer] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Layer widths `[in, h1, …, out]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.layers.iter().map(KanLayer::in_dim).collect();
        d.push(self.out_dim());
        d
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(KanLayer::param_count).sum()
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
        if x.cols() != self.in_dim() {
            return Err(Error::dims("network_forward", self.in_dim(), x.cols()));
        }
        let mut layer_inputs = Vec::with_capacity(self.layers.len());
        let mut current = x.clone();
        for layer in &self.layers {
            let next = layer.forward_batch(&current)?;
            layer_inputs.push(current);
            current = next;
        }
        let cache = ForwardCache {
            layer_inputs,
            output: current.clone(),
        };
        Ok((current, cache))
    }

    /// Output only, without keeping the cache.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.in_dim() {
            return Err(Error::dims("network_forward", self.in_dim(), x.cols()));
        }
        let mut current = x.clone();
        for layer in &self.layers {
            current = layer.forward_batch(&current)?;
        }
        Ok(current)
    }

    pub fn backward(&self, cache: &ForwardCache, d_out: &Matrix) -> Result<GradientBundle> {
        if cache.layer_inputs.len() != self.layers.len() {
            return Err(Error::CacheMismatch);
        }
        if d_out.shape() != cache.output.shape() || d_out.cols() != self.out_dim() {
            return Err(Error::CacheMismatch);
        }
        let mut grads: Vec<LayerGrad> = self.layers.iter().map(LayerGrad::zeros_like).collect();
        let mut delta = d_out.clone();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            delta = layer.backward_batch(&cache.layer_inputs[idx], &delta, &mut grads[idx])?;
        }
        Ok(GradientBundle {
            layers: grads,
            input: delta,
        })
    }
}

pub fn network_forward(net: &KanNetwork, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
    net.forward(x)
}

pub fn network_backward(
    net: &KanNetwork,
    cache: &ForwardCache,
    d_out: &Matrix,
) -> Result<GradientBundle> {
    net.backward(cache, d_out)
}

/// Seeded network with widths `dims` sharing one grid configuration.
pub fn init_network(dims: &[usize], grid: GridConfig, seed: u64) -> Result<KanNetwork> {
    let mut rng = SeededRng::new(seed);
    init_network_with(dims, grid, &mut rng)
}

pub(crate) fn init_network_with(
    dims: &[usize],
    grid: GridConfig,
    rng: &mut SeededRng,
) -> Result<KanNetwork> {
    if dims.len() < 2 {
        return Err(Error::InvalidDims(
            "need at least input and output widths".into(),
        ));
    }
    if dims.contains(&0) {
        return Err(Error::InvalidDims("layer widths must be positive".into()));
    }
    let grid = SplineGrid::new(grid)?;
    let layers = dims
        .windows(2)
        .map(|w| KanLayer::init(w[0], w[1], grid.clone(), rng))
        .collect::<Result<Vec<_>>>()?;
    KanNetwork::new(layers)
}

//! Kolmogorov-Arnold layers with B-spline edge activations.

mod layer;
mod network;
mod spline;

pub use layer::{
    layer_forward, sample_edge_activation, sigmoid, silu, silu_deriv, KanLayer, LayerGrad,
};
pub(crate) use network::init_network_with;
pub use network::{
    init_network, network_backward, network_forward, ForwardCache, GradientBundle, KanNetwork,
};
pub use spline::{bspline_basis, GridConfig, LocalBasis, SplineGrid, MAX_ORDER};

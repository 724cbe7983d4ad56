//! Neural fields: template, hypernetwork-conditioned deformation, and the
//! semantic-aware deformation codes that tie them to part semantics.

pub mod extract;
pub mod hyper;
pub mod mlp;
pub mod model;
pub mod sdc;

pub use extract::{features_at, shape_grid_values, shape_mesh, template_grid_values, template_mesh};
pub use hyper::{HyperBlocks, HyperNet};
pub use mlp::{forward_dual, Activation, LayerSpec, MlpBlocks, MlpSpec, MlpWeights};
pub use model::{DeformOut, Deformer, Model, ModelBlocks, ModelConfig, ShapeField, ShapeTape};
pub use sdc::{sdc, sdc_hard, sdc_soft, SdcMode};

/// Anything that can be evaluated as a signed distance with a spatial gradient.
pub trait ImplicitField {
    fn value(&self, x: [f64; 3]) -> f64;
    fn value_grad(&self, x: [f64; 3]) -> (f64, [f64; 3]);
}

impl<F: Fn([f64; 3]) -> (f64, [f64; 3])> ImplicitField for F {
    fn value(&self, x: [f64; 3]) -> f64 {
        self(x).0
    }
    fn value_grad(&self, x: [f64; 3]) -> (f64, [f64; 3]) {
        self(x)
    }
}

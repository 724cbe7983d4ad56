//! Hypernetwork mapping a shape latent code to the full weight set of the
//! deformation net: one small ReLU MLP per target layer.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::mlp::{forward_tape, MlpBlocks, MlpSpec, MlpWeights};
use crate::autodiff::{Binder, Layout, ParamVector, Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct HyperNet {
    pub target: MlpSpec,
    pub latent_dim: usize,
    pub hidden: usize,
    /// One ReLU MLP per target layer, emitting `out·in` weights then `out` biases.
    pub heads: Vec<MlpSpec>,
}

impl HyperNet {
    pub const DEPTH: usize = 3;

    pub fn new(target: MlpSpec, latent_dim: usize, hidden: usize) -> Self {
        let heads = target
            .layers
            .iter()
            .map(|l| MlpSpec::relu(latent_dim, hidden, Self::DEPTH, l.param_count()))
            .collect();
        Self {
            target,
            latent_dim,
            hidden,
            heads,
        }
    }

    pub fn param_count(&self) -> usize {
        self.heads.iter().map(MlpSpec::param_count).sum()
    }

    pub fn register(&self, layout: &mut Layout, prefix: &str) -> HyperBlocks {
        HyperBlocks {
            heads: self
                .heads
                .iter()
                .enumerate()
                .map(|(l, h)| h.register(layout, &format!("{prefix}{l}.")))
                .collect(),
        }
    }

    pub fn find(&self, layout: &Layout, prefix: &str) -> Result<HyperBlocks> {
        Ok(HyperBlocks {
            heads: self
                .heads
                .iter()
                .enumerate()
                .map(|(l, h)| MlpBlocks::find(h, layout, &format!("{prefix}{l}.")))
                .collect::<Result<_>>()?,
        })
    }

    /// Initialize so that every code maps close to a freshly initialized
    /// target net: hidden layers He-uniform, output weights He-normal / 100,
    /// output biases set to a sinusoidal-network initialization of the target.
    pub fn init<R: Rng + ?Sized>(&self, params: &mut ParamVector, blocks: &HyperBlocks, rng: &mut R) {
        let target = MlpWeights::init(&self.target, rng);
        for ((head, hb), (tw, tb)) in self.heads.iter().zip(&blocks.heads).zip(&target.layers) {
            let mut w = MlpWeights::init(head, rng);
            let last = w.layers.len() - 1;
            let fan_in = head.layers[last].inputs.max(1) as f64;
            let normal = Normal::new(0.0, (2.0 / fan_in).sqrt() / 100.0).expect("positive std");
            for v in w.layers[last].0.data_mut() {
                *v = normal.sample(rng);
            }
            let bias = w.layers[last].1.data_mut();
            let (nw, nb) = (tw.len(), tb.len());
            bias[..nw].copy_from_slice(tw.data());
            bias[nw..nw + nb].copy_from_slice(tb.data());
            w.store(params, hb);
        }
    }

    /// Predicted deformation-net weights for code `z`.
    pub fn generate(&self, params: &ParamVector, blocks: &HyperBlocks, z: &[f64]) -> Result<MlpWeights> {
        if z.len() != self.latent_dim {
            return Err(Error::config(format!(
                "latent code has {} entries, hypernetwork expects {}",
                z.len(),
                self.latent_dim
            )));
        }
        let layers = self
            .heads
            .iter()
            .zip(&blocks.heads)
            .zip(&self.target.layers)
            .map(|((head, hb), t)| {
                let w = MlpWeights::from_params(head, params, hb);
                let flat = w.forward(head, z);
                let nw = t.outputs * t.inputs;
                (
                    Tensor::from_vec(t.outputs, t.inputs, flat[..nw].to_vec()),
                    Tensor::from_vec(1, t.outputs, flat[nw..].to_vec()),
                )
            })
            .collect();
        Ok(MlpWeights { layers })
    }

    /// Tape version of [`generate`](Self::generate); `z` is a 1×d node.
    pub fn generate_tape(
        &self,
        tape: &mut Tape,
        binder: &mut Binder<'_>,
        blocks: &HyperBlocks,
        z: Var,
    ) -> Vec<(Var, Var)> {
        self.heads
            .iter()
            .zip(&blocks.heads)
            .zip(&self.target.layers)
            .map(|((head, hb), t)| {
                let layers = hb.bind(tape, binder);
                let flat = forward_tape(head, tape, &layers, z);
                let nw = t.outputs * t.inputs;
                let w = tape.slice_cols(flat, 0, nw);
                let w = tape.reshape(w, t.outputs, t.inputs);
                let b = tape.slice_cols(flat, nw, t.outputs);
                (w, b)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HyperBlocks {
    pub heads: Vec<MlpBlocks>,
}

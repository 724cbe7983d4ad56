//! Test-time optimization of a latent code for an unseen shape with every
//! network weight and part prior frozen.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::adam::{AdamConfig, AdamState};
use super::train::stream_seed;
use crate::autodiff::{Binder, ParamVector, Tape, Tensor};
use crate::error::{Error, Result};
use crate::fields::model::Model;
use crate::geometry::sample::ShapeSample;
use crate::losses::{total_loss_tape, BatchShape, Breakdown, LossWeights};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitConfig {
    pub steps: usize,
    pub n_surface: usize,
    pub n_query: usize,
    pub adam: AdamConfig,
    /// Reconstruction weights, `delta` and the correction weight are used;
    /// all other terms are ignored.
    pub weights: LossWeights,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            steps: 300,
            n_surface: 512,
            n_query: 512,
            adam: AdamConfig {
                lr: 1e-3,
                ..AdamConfig::default()
            },
            weights: LossWeights::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    /// Code with the lowest observed objective.
    pub z: Vec<f64>,
    pub initial: Vec<f64>,
    /// `(step, loss)` at the code before each update, plus the final code.
    pub log: Vec<(usize, Breakdown)>,
    pub best_step: usize,
    /// Set when a non-finite loss ended the run early.
    pub diverged: bool,
}

const FIT_INIT: u64 = 3;
const FIT_SAMPLE: u64 = 4;

fn fit_weights(w: &LossWeights) -> LossWeights {
    LossWeights {
        correction: w.correction,
        delta: w.delta,
        recon: w.recon,
        ..LossWeights::recon_only()
    }
}

/// Minimize reconstruction plus correction over a fresh code.
pub fn fit_latent(model: &Model, params: &ParamVector, shape: &ShapeSample, config: &FitConfig) -> Result<FitResult> {
    config.adam.validate()?;
    if params.layout().as_ref() != model.layout.as_ref() {
        return Err(Error::config("parameters do not match the model layout"));
    }
    let d = model.config.latent_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, FIT_INIT, 0));
    let normal = Normal::new(0.0, model.config.code_std).map_err(|e| Error::config(e.to_string()))?;
    let initial: Vec<f64> = (0..d).map(|_| normal.sample(&mut rng)).collect();
    let weights = fit_weights(&config.weights);
    let mut z = initial.clone();
    let mut adam = AdamState::new(d);
    let mut log = Vec::new();
    let mut best = (f64::INFINITY, initial.clone(), 0);
    let mut diverged = false;
    for step in 0..=config.steps {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, FIT_SAMPLE, step as u64));
        let sub = shape.subsample(config.n_surface, config.n_query, &mut rng);
        let mut tape = Tape::new();
        let mut binder = Binder::with_trainable(params, &[]);
        let code = tape.param(Tensor::row_vector(z.clone()));
        let batch = [BatchShape { index: 0, sample: &sub }];
        let (root, loss) = total_loss_tape(&mut tape, &mut binder, model, &batch, &[code], &weights)?;
        if !loss.is_finite() {
            diverged = true;
            break;
        }
        log.push((step, loss));
        if loss.total < best.0 {
            best = (loss.total, z.clone(), step);
        }
        if step == config.steps {
            break;
        }
        let grads = tape.backward(root);
        let g = grads.get(code).map(|t| t.data().to_vec()).unwrap_or_else(|| vec![0.0; d]);
        if adam.step_slice(&config.adam, &mut z, &g).is_err() || !z.iter().all(|v| v.is_finite()) {
            diverged = true;
            break;
        }
    }
    Ok(FitResult {
        z: best.1,
        initial,
        log,
        best_step: best.2,
        diverged,
    })
}

//! Auto-decoder training of the shared networks, per-shape latent codes and
//! part priors.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{clip_global_norm, AdamConfig, AdamState};
use crate::autodiff::ParamVector;
use crate::error::{Error, Result};
use crate::fields::model::Model;
use crate::geometry::sample::ShapeSample;
use crate::losses::{total_loss_grad, BatchShape, Breakdown, LossWeights};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Stop after this many steps even if epochs remain.
    pub max_steps: Option<usize>,
    pub batch_size: usize,
    /// Surface and query points drawn per shape per step.
    pub n_surface: usize,
    pub n_query: usize,
    pub adam: AdamConfig,
    /// Global gradient-norm bound; `0` disables clipping.
    pub clip: f64,
    pub weights: LossWeights,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            max_steps: None,
            batch_size: 8,
            n_surface: 512,
            n_query: 512,
            adam: AdamConfig::default(),
            clip: 10.0,
            weights: LossWeights::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, shapes: usize) -> Result<()> {
        self.adam.validate()?;
        self.weights.validate()?;
        if shapes == 0 {
            return Err(Error::config("training set is empty"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        if self.n_surface + self.n_query == 0 {
            return Err(Error::config("no points per shape"));
        }
        if !(self.clip.is_finite() && self.clip >= 0.0) {
            return Err(Error::config(format!("invalid clip norm {}", self.clip)));
        }
        if self.weights.any_consistency() && (self.batch_size < 2 || shapes < 2) {
            return Err(Error::config("consistency terms need batches of at least two shapes"));
        }
        Ok(())
    }

    /// Batches per epoch; a trailing single shape joins the previous batch.
    pub fn steps_per_epoch(&self, shapes: usize) -> usize {
        let full = shapes / self.batch_size;
        match shapes % self.batch_size {
            0 => full,
            1 if full > 0 => full,
            _ => full + 1,
        }
    }

    pub fn total_steps(&self, shapes: usize) -> usize {
        let n = self.epochs * self.steps_per_epoch(shapes);
        self.max_steps.map_or(n, |m| m.min(n))
    }
}

/// Decorrelated seed for a numbered stream derived from the run seed.
pub fn stream_seed(seed: u64, tag: u64, n: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0xa076_1d64_78bd_642f) ^ n.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const SHUFFLE: u64 = 1;
const SUBSAMPLE: u64 = 2;

/// Shape indices of each batch in one epoch.
pub fn epoch_batches(config: &TrainConfig, shapes: usize, epoch: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..shapes).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(stream_seed(config.seed, SHUFFLE, epoch as u64)));
    let mut batches: Vec<Vec<usize>> = order.chunks(config.batch_size).map(<[usize]>::to_vec).collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() == 1) {
        let last = batches.pop().expect("nonempty");
        batches.last_mut().expect("nonempty").extend(last);
    }
    batches
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub loss: Breakdown,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
}

impl TrainLog {
    pub fn header() -> String {
        format!("step,{}", Breakdown::CSV_HEADER)
    }

    pub fn csv_row(row: &LogRow) -> String {
        let mut s = row.step.to_string();
        for v in row.loss.values() {
            s.push(',');
            s.push_str(&crate::io::fmt_g9(v));
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut out = Self::header();
        out.push('\n');
        for r in &self.rows {
            out.push_str(&Self::csv_row(r));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainStatus {
    Completed,
    /// A non-finite loss or gradient; parameters are those before the step.
    Aborted { step: usize, loss: Breakdown, reason: String },
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub params: ParamVector,
    pub adam: AdamState,
    pub log: TrainLog,
    pub status: TrainStatus,
}

/// Sub-sampled batch for global step `step`.
pub fn step_batch(config: &TrainConfig, samples: &[ShapeSample], indices: &[usize], step: usize) -> Vec<ShapeSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, SUBSAMPLE, step as u64));
    indices
        .iter()
        .map(|&i| samples[i].subsample(config.n_surface, config.n_query, &mut rng))
        .collect()
}

/// One optimizer step on a prepared batch. Returns the loss before the
/// update; on a non-finite loss or gradient nothing is changed.
pub fn train_step(
    model: &Model,
    params: &mut ParamVector,
    adam: &mut AdamState,
    config: &TrainConfig,
    batch: &[BatchShape<'_>],
) -> Result<Breakdown> {
    let (loss, mut grad) = total_loss_grad(model, params, batch, &config.weights)?;
    if !loss.is_finite() {
        return Err(Error::numerical(format!("non-finite loss {loss:?}")));
    }
    if !grad.all_finite() {
        return Err(Error::numerical("non-finite gradient"));
    }
    if config.clip > 0.0 {
        clip_global_norm(grad.data_mut(), config.clip);
    }
    adam.step(&config.adam, params, &grad, &[model.blocks.latent])?;
    Ok(loss)
}

/// Train from `params` with fresh optimizer state.
pub fn train(model: &Model, params: ParamVector, samples: &[ShapeSample], config: &TrainConfig) -> Result<TrainOutput> {
    let adam = AdamState::new(params.len());
    train_resume(model, params, adam, samples, config)
}

/// Continue training; the optimizer step count selects the position in the
/// epoch and sampling streams, so an interrupted run resumes exactly.
pub fn train_resume(
    model: &Model,
    mut params: ParamVector,
    mut adam: AdamState,
    samples: &[ShapeSample],
    config: &TrainConfig,
) -> Result<TrainOutput> {
    config.validate(samples.len())?;
    if samples.len() != model.config.shapes {
        return Err(Error::config(format!(
            "{} training shapes but the model holds {} latent codes",
            samples.len(),
            model.config.shapes
        )));
    }
    if params.layout().as_ref() != model.layout.as_ref() || adam.len() != params.len() {
        return Err(Error::config("parameters or optimizer state do not match the model layout"));
    }
    let spe = config.steps_per_epoch(samples.len());
    let total = config.total_steps(samples.len());
    let mut log = TrainLog::default();
    let mut epoch_cache: Option<(usize, Vec<Vec<usize>>)> = None;
    for step in adam.step as usize..total {
        let epoch = step / spe;
        if epoch_cache.as_ref().is_none_or(|(e, _)| *e != epoch) {
            epoch_cache = Some((epoch, epoch_batches(config, samples.len(), epoch)));
        }
        let indices = &epoch_cache.as_ref().expect("cached").1[step % spe];
        let sub = step_batch(config, samples, indices, step);
        let batch: Vec<BatchShape<'_>> = indices.iter().zip(&sub).map(|(&index, sample)| BatchShape { index, sample }).collect();
        match train_step(model, &mut params, &mut adam, config, &batch) {
            Ok(loss) => log.rows.push(LogRow { step, loss }),
            Err(Error::Numerical(reason)) => {
                let loss = crate::losses::total_loss(model, &params, &batch, &config.weights).unwrap_or_default();
                return Ok(TrainOutput {
                    params,
                    adam,
                    log,
                    status: TrainStatus::Aborted { step, loss, reason },
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(TrainOutput {
        params,
        adam,
        log,
        status: TrainStatus::Completed,
    })
}

//! Minibatch SGD over graph pairs.
//!
//! Each step samples a batch of pairs (seeded), runs the full forward for
//! every pair on its own tape (in parallel), accumulates the mean-squared
//! -error gradient in a fixed order, and applies a plain SGD update. Runs
//! are deterministic functions of (model init, data, config seed).

use super::{GraphInput, Model, NnError, Tape, Tensor};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Multiplies the loss (and therefore the gradients); 1.0 by default.
    pub loss_scale: f64,
    /// Steps between validation rows in the returned log.
    pub eval_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            learning_rate: 1e-2,
            epochs: 20,
            seed: 0,
            loss_scale: 1.0,
            eval_interval: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.batch_size == 0 {
            return Err(NnError::BadConfig("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(NnError::BadConfig("learning_rate must be finite and >= 0".into()));
        }
        if !(self.loss_scale > 0.0) || !self.loss_scale.is_finite() {
            return Err(NnError::BadConfig("loss_scale must be finite and > 0".into()));
        }
        if self.eval_interval == 0 {
            return Err(NnError::BadConfig("eval_interval must be >= 1".into()));
        }
        Ok(())
    }
}

/// One supervised pair: indices into a shared [`GraphInput`] slice plus the
/// target similarity in (0, 1].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainPair {
    pub a: usize,
    pub b: usize,
    pub target: f64,
}

/// One row of the training log (written as CSV `step,loss,val_mse`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub loss: f64,
    pub val_mse: f64,
}

/// Squared-error loss and per-slot gradients for a single ordered pair.
pub fn pair_loss_and_grads(
    model: &Model,
    a: &GraphInput,
    b: &GraphInput,
    target: f64,
    align_seed: u64,
) -> Result<(f64, Vec<Option<Tensor>>), NnError> {
    let mut tape = Tape::new();
    let pred = model.forward(&mut tape, a, b, align_seed)?;
    let t = tape.constant(Tensor::scalar(target));
    let loss = tape.squared_error(pred, t)?;
    let value = tape.value(loss).scalar_value();
    let grads = tape.backward(loss, model.params.len())?;
    Ok((value, grads))
}

/// Mean squared error of single-order predictions over a pair list.
pub fn mean_squared_error(
    model: &Model,
    inputs: &[GraphInput],
    pairs: &[TrainPair],
) -> Result<f64, NnError> {
    if pairs.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    let total: f64 = pairs
        .par_iter()
        .map(|p| {
            model
                .predict(&inputs[p.a], &inputs[p.b])
                .map(|pred| (pred - p.target) * (pred - p.target))
        })
        .collect::<Result<Vec<f64>, NnError>>()?
        .into_iter()
        .sum();
    Ok(total / pairs.len() as f64)
}

fn align_seed_for(seed: u64, step: usize, slot: usize) -> u64 {
    seed ^ (step as u64).wrapping_mul(0x9E3779B97F4A7C15)
        ^ (slot as u64).wrapping_mul(0xD1B54A32D192ED03)
}

/// Trains the model in place; returns the log (one row per eval interval,
/// plus the final step). Aborts with [`NnError::NonFiniteLoss`] if the loss
/// diverges.
pub fn train(
    model: &mut Model,
    inputs: &[GraphInput],
    train_pairs: &[TrainPair],
    val_pairs: &[TrainPair],
    config: &TrainConfig,
) -> Result<Vec<LogRow>, NnError> {
    config.validate()?;
    if train_pairs.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
    let steps_per_epoch = train_pairs.len().div_ceil(config.batch_size);
    let total_steps = config.epochs * steps_per_epoch;
    let mut log = Vec::new();

    for step in 1..=total_steps {
        let batch: Vec<usize> = (0..config.batch_size)
            .map(|_| rng.gen_range(0..train_pairs.len()))
            .collect();

        let results: Vec<(f64, Vec<Option<Tensor>>)> = batch
            .par_iter()
            .enumerate()
            .map(|(slot, &idx)| {
                let p = &train_pairs[idx];
                pair_loss_and_grads(
                    model,
                    &inputs[p.a],
                    &inputs[p.b],
                    p.target,
                    align_seed_for(config.seed, step, slot),
                )
            })
            .collect::<Result<_, _>>()?;

        let loss = config.loss_scale * results.iter().map(|(l, _)| l).sum::<f64>()
            / config.batch_size as f64;
        if !loss.is_finite() {
            return Err(NnError::NonFiniteLoss { step });
        }

        // Fixed-order reduction keeps runs bit-reproducible.
        let scale = config.learning_rate * config.loss_scale / config.batch_size as f64;
        for (_, grads) in &results {
            for (slot, grad) in grads.iter().enumerate() {
                if let Some(g) = grad {
                    for (w, d) in model.params[slot].data.iter_mut().zip(&g.data) {
                        *w -= scale * d;
                    }
                }
            }
        }

        if step % config.eval_interval == 0 || step == total_steps {
            let val_mse = if val_pairs.is_empty() {
                f64::NAN
            } else {
                mean_squared_error(model, inputs, val_pairs)?
            };
            log.push(LogRow { step, loss, val_mse });
        }
    }
    Ok(log)
}

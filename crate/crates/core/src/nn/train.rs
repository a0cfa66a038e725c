//! Mini-batch training loop. Per-example passes of a batch run in parallel;
//! their gradients are summed in example order, so results do not depend on
//! the thread count.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::model::{accumulate, loss_scce, FusionCnnModel};
use super::optim::{adam_step, AdamState};
use super::{NnError, Tensor};
use crate::class::argmax;
use crate::features::FeatureVector;
use crate::imaging::ImageSlice;

pub const DEFAULT_BATCH_SIZE: usize = 16;

#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub image: &'a ImageSlice,
    pub metadata: Option<&'a FeatureVector>,
    pub label: usize,
}

/// Summed loss and summed gradients over `batch`.
pub fn batch_gradients(model: &FusionCnnModel, batch: &[Example<'_>]) -> Result<(f64, Vec<Tensor>), NnError> {
    let per: Vec<(f64, Vec<Tensor>)> = batch
        .par_iter()
        .map(|ex| {
            let (probs, cache) = model.forward(ex.image, ex.metadata)?;
            let loss = loss_scce(&probs, ex.label)?;
            Ok((loss, model.backward(&cache, ex.label)?))
        })
        .collect::<Result<_, NnError>>()?;
    let mut total = 0.0;
    let mut grads: Vec<Tensor> = model.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
    for (loss, g) in &per {
        total += loss;
        accumulate(&mut grads, g)?;
    }
    Ok((total, grads))
}

/// One shuffled pass over `examples`, one Adam step per batch on the mean
/// gradient. Returns the mean pre-update example loss.
pub fn train_epoch<R: Rng>(
    model: &mut FusionCnnModel,
    state: &mut AdamState,
    examples: &[Example<'_>],
    batch_size: usize,
    rng: &mut R,
) -> Result<f64, NnError> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(rng);
    let mut total = 0.0;
    for chunk in order.chunks(batch_size.max(1)) {
        let batch: Vec<Example<'_>> = chunk.iter().map(|&i| examples[i]).collect();
        let (loss, mut grads) = batch_gradients(model, &batch)?;
        total += loss;
        let scale = 1.0 / batch.len() as f64;
        for g in &mut grads {
            for v in g.values_mut() {
                *v *= scale;
            }
        }
        adam_step(model.params_mut(), &grads, state)?;
    }
    Ok(total / examples.len() as f64)
}

pub fn predict_all(model: &FusionCnnModel, examples: &[Example<'_>]) -> Result<Vec<Vec<f64>>, NnError> {
    examples
        .par_iter()
        .map(|ex| model.predict(ex.image, ex.metadata))
        .collect()
}

pub fn mean_loss(model: &FusionCnnModel, examples: &[Example<'_>]) -> Result<f64, NnError> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let probs = predict_all(model, examples)?;
    let mut total = 0.0;
    for (p, ex) in probs.iter().zip(examples) {
        total += loss_scce(p, ex.label)?;
    }
    Ok(total / examples.len() as f64)
}

pub fn accuracy(model: &FusionCnnModel, examples: &[Example<'_>]) -> Result<f64, NnError> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let probs = predict_all(model, examples)?;
    let hits = probs
        .iter()
        .zip(examples)
        .filter(|(p, ex)| argmax(p) == ex.label)
        .count();
    Ok(hits as f64 / examples.len() as f64)
}

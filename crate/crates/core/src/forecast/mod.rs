//! Transformer trajectory prediction for surrounding vehicles: attention,
//! the encoder model, dataset collection, training and MAD/FAD metrics.

mod dataset;
mod metrics;
mod model;

pub use dataset::{collect_dataset, constant_velocity_dataset, localize, read_jsonl, write_jsonl, TrajectorySample};
pub use metrics::{mad_fad, PredictionMetrics};
pub use model::{positional_encoding, Predictor, PredictorConfig};

use crate::error::{contract, Result};
use crate::gradcore::{self, Adam, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const HISTORY_LEN: usize = crate::percept::HISTORY_LEN;
pub const FUTURE_LEN: usize = 10;

/// Single-sequence multi-head attention `softmax(QK^T / sqrt(d_k)) V`.
/// `q` and `k` are `t x (d_k * heads)`, `v` is `t_k x d_v`.
pub fn attention(q: &Tensor, k: &Tensor, v: &Tensor, heads: usize) -> Result<Tensor> {
    gradcore::attention(q, k, v, 1, heads, None).map(|(out, _)| out)
}

/// Position history of one neighbor in any fixed frame; `mask` marks
/// observed steps.
pub type NeighborHistory = ([[f64; 2]; HISTORY_LEN], [bool; HISTORY_LEN]);

/// Future positions (same frame as the input) for each neighbor. Neighbors
/// with no observed step yield zeros.
pub fn predict_future(model: &Predictor, histories: &[NeighborHistory]) -> Result<Vec<[[f64; 2]; FUTURE_LEN]>> {
    let mut out = vec![[[0.0; 2]; FUTURE_LEN]; histories.len()];
    let mut local = Vec::new();
    let mut masks = Vec::new();
    let mut anchors = Vec::new();
    let mut slots = Vec::new();
    for (i, (pos, mask)) in histories.iter().enumerate() {
        if !mask.iter().any(|&m| m) {
            continue;
        }
        let mut full = [false; HISTORY_LEN + FUTURE_LEN];
        full[..HISTORY_LEN].copy_from_slice(mask);
        let (h, _, anchor) = localize(pos, &[[0.0; 2]; FUTURE_LEN], &full);
        local.push(h);
        masks.push(*mask);
        anchors.push(anchor);
        slots.push(i);
    }
    let offsets = model.predict_offsets(&local, &masks)?;
    for ((slot, anchor), off) in slots.into_iter().zip(anchors).zip(offsets) {
        for (dst, o) in out[slot].iter_mut().zip(off) {
            *dst = [anchor[0] + o[0], anchor[1] + o[1]];
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorTraining {
    pub model: PredictorConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub validation_ratio: f64,
    pub seed: u64,
    /// Stop starting new epochs once this many seconds have elapsed.
    pub time_budget_secs: Option<f64>,
}

impl Default for PredictorTraining {
    fn default() -> Self {
        Self {
            model: PredictorConfig::default(),
            epochs: 8,
            batch_size: 32,
            learning_rate: 1e-3,
            validation_ratio: 0.1,
            seed: 0,
            time_budget_secs: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation: PredictionMetrics,
}

#[derive(Clone, Debug)]
pub struct TrainedPredictor {
    pub predictor: Predictor,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Dataset-level MAD/FAD of `model` on `samples` (local frame).
pub fn evaluate_predictor(model: &Predictor, samples: &[TrajectorySample]) -> Result<PredictionMetrics> {
    let mut per = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(256) {
        let histories: Vec<_> = chunk.iter().map(|s| s.history).collect();
        let masks: Vec<_> = chunk.iter().map(model::history_mask).collect();
        let preds = model.predict_offsets(&histories, &masks)?;
        for (s, p) in chunk.iter().zip(&preds) {
            per.push(mad_fad(p, &s.future)?);
        }
    }
    Ok(PredictionMetrics::mean(&per))
}

/// Minimizes mean squared displacement with Adam over shuffled minibatches
/// and returns the parameters with the best validation MAD.
pub fn train_predictor(dataset: &[TrajectorySample], hyper: &PredictorTraining) -> Result<TrainedPredictor> {
    if dataset.is_empty() {
        return contract("train_predictor needs a non-empty dataset");
    }
    if !(hyper.validation_ratio > 0.0 && hyper.validation_ratio < 1.0) {
        return contract(format!("validation_ratio must lie in (0, 1), got {}", hyper.validation_ratio));
    }
    if hyper.batch_size == 0 || hyper.epochs == 0 {
        return contract("batch_size and epochs must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((dataset.len() as f64 * hyper.validation_ratio).round() as usize).clamp(1, dataset.len());
    let (val_idx, train_idx) = order.split_at(n_val);
    // A single sample serves as both splits.
    let train_idx: Vec<usize> = if train_idx.is_empty() { val_idx.to_vec() } else { train_idx.to_vec() };
    let validation: Vec<TrajectorySample> = val_idx.iter().map(|&i| dataset[i].clone()).collect();

    let mut model = Predictor::new(hyper.model, hyper.seed)?;
    let mut opt = Adam::new(&model.params, hyper.learning_rate);
    let started = std::time::Instant::now();
    let mut epochs = Vec::new();
    let mut best: Option<(f64, usize, Predictor)> = None;
    let mut shuffled = train_idx;
    for epoch in 0..hyper.epochs {
        if hyper.time_budget_secs.is_some_and(|b| started.elapsed().as_secs_f64() > b) && epoch > 0 {
            break;
        }
        shuffled.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in shuffled.chunks(hyper.batch_size) {
            let batch: Vec<&TrajectorySample> = chunk.iter().map(|&i| &dataset[i]).collect();
            let mut tape = gradcore::Tape::new();
            let bound = model.params.bind(&mut tape);
            let loss = model.loss(&mut tape, &bound, &batch)?;
            loss_sum += tape.value(loss).item();
            batches += 1;
            let grads = tape.backward(loss)?;
            opt.step(&mut model.params, &bound.collect(&grads))?;
        }
        let validation_metrics = evaluate_predictor(&model, &validation)?;
        log::info!(
            "predictor epoch {epoch}: loss {:.5} val MAD {:.4} FAD {:.4}",
            loss_sum / batches as f64,
            validation_metrics.mad,
            validation_metrics.fad
        );
        epochs.push(EpochRecord { epoch, train_loss: loss_sum / batches as f64, validation: validation_metrics });
        if best.as_ref().is_none_or(|b| validation_metrics.mad < b.0) {
            best = Some((validation_metrics.mad, epoch, model.clone()));
        }
    }
    let (_, best_epoch, predictor) = best.expect("at least one epoch ran");
    Ok(TrainedPredictor { predictor, epochs, best_epoch })
}

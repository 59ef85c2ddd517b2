//! Seeded mini-batch training and evaluation.

mod optimizer;

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::ExampleSet;
use crate::error::{Error, Result};
use crate::model::{NetworkParams, MIN_SPATIAL};
use crate::tensor::{BatchNormMode, Dims4, Matrix, Tensor4};

pub use optimizer::{Optimizer, OptimizerConfig};

/// Examples per forward pass during evaluation.
pub const EVAL_BATCH: usize = 32;

/// Stream of the shuffling RNG; model initialization uses stream 0.
const SHUFFLE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerConfig,
    pub shuffle: bool,
}

impl TrainConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            batch_size: 64,
            epochs: 30,
            optimizer: OptimizerConfig::default(),
            shuffle: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        let lr = self.optimizer.lr();
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {lr}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainLog {
    /// One JSON object per line. Wall-clock time is only written when asked
    /// for, so logs of identical runs are byte-identical by default.
    pub fn to_jsonl(&self, wall_clock: bool) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            let mut e = e.clone();
            if !wall_clock {
                e.seconds = None;
            }
            out.push_str(&serde_json::to_string(&e).expect("epoch log serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>, wall_clock: bool) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_jsonl(wall_clock)).map_err(|e| Error::io(path, e))
    }
}

/// Stacks the tiles at `indices` into a `[n, rows, cols, 1]` tensor.
pub fn batch_tensor(set: &ExampleSet, indices: &[usize]) -> Result<Tensor4<f32>> {
    let first = &set.examples[indices[0]].tile;
    let (rows, cols) = (first.rows(), first.cols());
    let mut data = Vec::with_capacity(indices.len() * rows * cols);
    for &i in indices {
        let t = &set.examples[i].tile;
        if (t.rows(), t.cols()) != (rows, cols) {
            return Err(Error::shape(
                "batch",
                format!("{rows}x{cols} tiles"),
                format!("{}x{}", t.rows(), t.cols()),
            ));
        }
        data.extend_from_slice(t.values());
    }
    Tensor4::from_vec(Dims4::new(indices.len(), rows, cols, 1), data)
}

/// Index of the largest value, preferring the lowest index on ties.
pub fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub predictions: Vec<usize>,
    pub accuracy: f64,
}

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> f64 {
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as f64 / labels.len().max(1) as f64
}

/// Eval-mode logits for every example, in set order.
pub fn predict_logits(params: &NetworkParams, set: &ExampleSet) -> Result<Vec<Vec<f32>>> {
    let indices: Vec<usize> = (0..set.len()).collect();
    let chunks: Vec<Matrix<f32>> = indices
        .par_chunks(EVAL_BATCH)
        .map(|idx| params.forward_eval(&batch_tensor(set, idx)?))
        .collect::<Result<_>>()?;
    Ok(chunks
        .iter()
        .flat_map(|m| (0..m.rows()).map(|r| m.row(r).to_vec()))
        .collect())
}

/// Argmax predictions and accuracy in eval mode. Batches are fixed-size
/// chunks of the set, so the result does not depend on the thread count.
pub fn evaluate(params: &NetworkParams, set: &ExampleSet) -> Result<Evaluation> {
    let predictions: Vec<usize> = predict_logits(params, set)?.iter().map(|l| argmax(l)).collect();
    let accuracy = accuracy(&predictions, &set.labels());
    Ok(Evaluation { predictions, accuracy })
}

fn check_set(set: &ExampleSet, params: &NetworkParams, what: &str) -> Result<(usize, usize)> {
    if set.is_empty() {
        return Err(Error::InvalidArgument(format!("{what} set is empty")));
    }
    let dims = set.tile_dims()?;
    if dims.0 < MIN_SPATIAL || dims.1 < MIN_SPATIAL {
        return Err(Error::shape(
            "trainer",
            format!("tiles of at least {MIN_SPATIAL}x{MIN_SPATIAL}"),
            format!("{}x{}", dims.0, dims.1),
        ));
    }
    if let Some(e) = set.examples.iter().find(|e| e.label >= params.classes()) {
        return Err(Error::InvalidArgument(format!(
            "{what} label {} is not below the model's {} classes",
            e.label,
            params.classes()
        )));
    }
    Ok(dims)
}

/// Batch boundaries over `n` shuffled positions. A trailing batch of one
/// example is folded into the previous batch, since batch statistics of a
/// single row are degenerate.
fn batch_ranges(n: usize, batch: usize) -> Vec<std::ops::Range<usize>> {
    let mut ranges: Vec<_> = (0..n).step_by(batch).map(|s| s..(s + batch).min(n)).collect();
    if ranges.len() > 1 && ranges.last().map(|r| r.len()) == Some(1) {
        ranges.pop();
        ranges.last_mut().expect("at least one batch").end = n;
    }
    ranges
}

/// Epoch-at-a-time training driver.
pub struct Trainer<'a> {
    params: NetworkParams,
    train: &'a ExampleSet,
    test: &'a ExampleSet,
    config: TrainConfig,
    optimizer: Optimizer<f32>,
    rng: ChaCha8Rng,
    log: TrainLog,
}

impl<'a> Trainer<'a> {
    pub fn new(
        params: NetworkParams,
        train: &'a ExampleSet,
        test: &'a ExampleSet,
        config: TrainConfig,
    ) -> Result<Self> {
        config.validate()?;
        let a = check_set(train, &params, "train")?;
        let b = check_set(test, &params, "test")?;
        if a != b {
            return Err(Error::shape(
                "trainer",
                format!("test tiles of {}x{}", a.0, a.1),
                format!("{}x{}", b.0, b.1),
            ));
        }
        let sizes: Vec<usize> = params.trainable().iter().map(|(_, t)| t.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(SHUFFLE_STREAM);
        Ok(Self {
            optimizer: Optimizer::new(config.optimizer, &sizes),
            params,
            train,
            test,
            config,
            rng,
            log: TrainLog::default(),
        })
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn log(&self) -> &TrainLog {
        &self.log
    }

    pub fn epochs_done(&self) -> usize {
        self.log.epochs.len()
    }

    pub fn into_parts(self) -> (NetworkParams, TrainLog) {
        (self.params, self.log)
    }

    /// One pass over the training set followed by a test evaluation.
    pub fn run_epoch(&mut self) -> Result<&EpochLog> {
        let start = Instant::now();
        let epoch = self.epochs_done() + 1;
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        if self.config.shuffle {
            order.shuffle(&mut self.rng);
        }
        let (mut loss_sum, mut hits) = (0.0, 0usize);
        for (step, range) in batch_ranges(order.len(), self.config.batch_size)
            .into_iter()
            .enumerate()
        {
            let idx = &order[range];
            let batch = batch_tensor(self.train, idx)?;
            let labels: Vec<usize> = idx.iter().map(|&i| self.train.examples[i].label).collect();
            let out = self.params.loss_batch(&batch, &labels, BatchNormMode::Train)?;
            if !out.loss.is_finite() || !out.grads.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    step: step + 1,
                    loss: out.loss,
                });
            }
            loss_sum += out.loss * idx.len() as f64;
            hits += (0..out.logits.rows())
                .filter(|&r| argmax(out.logits.row(r)) == labels[r])
                .count();
            self.optimizer.step(self.params.trainable_mut(), &out.grads.tensors);
        }
        if !self.params.is_finite() {
            return Err(Error::Diverged {
                epoch,
                step: self.optimizer.steps() as usize,
                loss: f64::NAN,
            });
        }
        let test_accuracy = evaluate(&self.params, self.test)?.accuracy;
        let n = self.train.len() as f64;
        self.log.epochs.push(EpochLog {
            epoch,
            train_loss: loss_sum / n,
            train_accuracy: hits as f64 / n,
            test_accuracy,
            seconds: Some(start.elapsed().as_secs_f64()),
        });
        Ok(self.log.epochs.last().expect("just pushed"))
    }
}

/// Runs `config.epochs` epochs.
pub fn train(
    params: NetworkParams,
    train_set: &ExampleSet,
    test_set: &ExampleSet,
    config: &TrainConfig,
) -> Result<(NetworkParams, TrainLog)> {
    let mut trainer = Trainer::new(params, train_set, test_set, *config)?;
    for _ in 0..config.epochs {
        trainer.run_epoch()?;
    }
    Ok(trainer.into_parts())
}

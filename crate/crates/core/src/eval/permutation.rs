use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::ExampleSet;
use crate::error::Result;
use crate::model::NetworkParams;
use crate::train::{accuracy, evaluate};

/// Accuracy of every trial. `mean` is `None` when no trials were run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub trials: Vec<f64>,
    pub mean: Option<f64>,
}

impl PermutationResult {
    fn from_trials(trials: Vec<f64>) -> Self {
        let mean = (!trials.is_empty()).then(|| trials.iter().sum::<f64>() / trials.len() as f64);
        Self { trials, mean }
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64))
}

/// Accuracy when example `i` is scored against `labels[perm[i]]`.
pub fn permuted_accuracy(predictions: &[usize], labels: &[usize], perm: &[usize]) -> f64 {
    let shuffled: Vec<usize> = perm.iter().map(|&p| labels[p]).collect();
    accuracy(predictions, &shuffled)
}

/// Accuracy of fixed predictions against uniformly shuffled labels; trial
/// `t` uses seed `seed + t`.
pub fn label_permutation_accuracies(
    predictions: &[usize],
    labels: &[usize],
    trials: usize,
    seed: u64,
) -> PermutationResult {
    let accs = (0..trials)
        .map(|t| {
            let mut perm: Vec<usize> = (0..labels.len()).collect();
            perm.shuffle(&mut trial_rng(seed, t));
            permuted_accuracy(predictions, labels, &perm)
        })
        .collect();
    PermutationResult::from_trials(accs)
}

pub fn permutation_test_labels(
    params: &NetworkParams,
    set: &ExampleSet,
    trials: usize,
    seed: u64,
) -> Result<PermutationResult> {
    let predictions = evaluate(params, set)?.predictions;
    Ok(label_permutation_accuracies(&predictions, &set.labels(), trials, seed))
}

/// Copy of `params` with the elements of each trainable array shuffled in
/// place. Running batchnorm statistics are left as they are.
pub fn shuffle_weights(params: &NetworkParams, seed: u64) -> NetworkParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = params.clone();
    for tensor in out.trainable_mut() {
        tensor.shuffle(&mut rng);
    }
    out
}

/// Accuracy of `trials` weight-shuffled copies of the model; trials run in
/// parallel and trial `t` uses seed `seed + t`.
pub fn permutation_test_weights(
    params: &NetworkParams,
    set: &ExampleSet,
    trials: usize,
    seed: u64,
) -> Result<PermutationResult> {
    let accs = (0..trials)
        .into_par_iter()
        .map(|t| {
            let shuffled = shuffle_weights(params, seed.wrapping_add(t as u64));
            Ok(evaluate(&shuffled, set)?.accuracy)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(PermutationResult::from_trials(accs))
}

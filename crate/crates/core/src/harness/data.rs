//! Synthetic token-classification task.
//!
//! Each token carries a hidden affinity to every class; a sequence belongs to
//! the class with the largest summed affinity, so the task is linearly
//! separable in bag-of-tokens space. Samples whose top-two margin is small
//! are rejected, and every split is class-balanced.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::TrainingParams;

/// Minimum top-two margin, in units of the per-token affinity scale.
const MIN_MARGIN: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub tokens: Vec<usize>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenTask {
    pub vocab: usize,
    pub classes: usize,
    pub seq_len: usize,
    /// `vocab × classes`, row-major, zero mean per token.
    affinity: Vec<f64>,
}

impl TokenTask {
    pub fn new<R: Rng + ?Sized>(p: &TrainingParams, rng: &mut R) -> Self {
        let c = p.classes;
        let mut affinity = Vec::with_capacity(p.vocab * c);
        for _ in 0..p.vocab {
            let row: Vec<f64> = (0..c).map(|_| StandardNormal.sample(rng)).collect();
            let mean = row.iter().sum::<f64>() / c as f64;
            affinity.extend(row.into_iter().map(|a| a - mean));
        }
        Self {
            vocab: p.vocab,
            classes: c,
            seq_len: p.seq_len,
            affinity,
        }
    }

    /// Label and top-two margin of a token sequence.
    pub fn score(&self, tokens: &[usize]) -> (usize, f64) {
        let c = self.classes;
        let mut s = vec![0.0; c];
        for &t in tokens {
            for (k, v) in s.iter_mut().enumerate() {
                *v += self.affinity[t * c + k];
            }
        }
        let label = super::model::argmax(&s);
        let runner_up = s
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != label)
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        (label, s[label] - runner_up)
    }

    /// `n` samples with exactly balanced labels (up to `n mod classes`).
    pub fn balanced<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Sample> {
        let c = self.classes;
        let quota: Vec<usize> = (0..c).map(|k| n / c + usize::from(k < n % c)).collect();
        let mut have = vec![0; c];
        let mut out = Vec::with_capacity(n);
        let min_margin = MIN_MARGIN * (self.seq_len as f64).sqrt();
        while out.len() < n {
            let tokens: Vec<usize> = (0..self.seq_len).map(|_| rng.random_range(0..self.vocab)).collect();
            let (label, margin) = self.score(&tokens);
            if margin < min_margin || have[label] >= quota[label] {
                continue;
            }
            have[label] += 1;
            out.push(Sample { tokens, label });
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientData {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
}

/// Equal, independent splits for every client.
pub fn make_clients<R: Rng + ?Sized>(
    task: &TokenTask,
    p: &TrainingParams,
    clients: usize,
    rng: &mut R,
) -> Vec<ClientData> {
    (0..clients)
        .map(|_| ClientData {
            train: task.balanced(p.samples_per_client, rng),
            val: task.balanced(p.eval_samples, rng),
        })
        .collect()
}

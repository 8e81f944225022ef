//! Training loop: per-batch uplink draws shared by all clients, local SGD
//! with gradient clipping, FedAvg after every round, and per-round metrics
//! of the aggregated model.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{make_clients, ClientData, Sample, TokenTask};
use super::link::{draw_uplink, transport, Corruption, Scenario, Uplink};
use super::model::{fedavg, Gradients, HeadLoss, ToyModel};
use super::stream_rng;
use crate::bounds::{
    estimate_smoothness, expected_divergence_bound, outage_rates, SmoothnessProfile,
    SmoothnessSampling,
};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};

const TAG_DATA: u64 = 1;
const TAG_INIT: u64 = 2;
const TAG_SHUFFLE: u64 = 3;
const TAG_CHANNEL: u64 = 4;
const TAG_NOISE: u64 = 5;
const TAG_EVAL_CHANNEL: u64 = 6;
const TAG_EVAL_NOISE: u64 = 7;
const TAG_SMOOTHNESS: u64 = 8;

/// Metrics of one global round, per client where applicable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: usize,
    pub scenario: Scenario,
    pub seed: u64,
    /// `10 log10 μ_q` averaged (linearly) over the round's uplinks; `−∞` for
    /// the baseline.
    pub per_client_mse_db: Vec<f64>,
    /// Accuracy of the aggregated model on each client's validation split,
    /// sent through that client's uplink.
    pub accuracy: Vec<f64>,
    pub loss: Vec<f64>,
    /// Accuracy of the aggregated model on clean validation embeddings.
    pub clean_accuracy: f64,
    pub divergence_bound: Vec<f64>,
    pub empirical_divergence: Vec<f64>,
    /// Mean sum rate of the round's uplinks in nats; NaN for the baseline.
    pub sum_rate: f64,
    pub r_out_1: Vec<f64>,
    pub r_out_2: Vec<f64>,
    pub optimizer_iterations: f64,
}

impl RoundMetrics {
    /// Validation accuracy averaged over clients.
    pub fn mean_accuracy(&self) -> f64 {
        self.accuracy.iter().sum::<f64>() / self.accuracy.len().max(1) as f64
    }
}

fn embed_batch(model: &ToyModel, samples: &[&Sample]) -> Vec<Vec<f64>> {
    samples
        .iter()
        .flat_map(|s| s.tokens.iter().map(|&t| model.embed_token(t)))
        .collect()
}

fn corruption(config: &ScenarioConfig) -> Corruption {
    Corruption {
        mode: config.training.corruption,
        shape: config.training.noise_shape,
        sensitivity: config.training.noise_sensitivity,
        sigma2: config.noise_power,
    }
}

/// Runs the full training schedule of one scenario under one seed.
pub fn run_training(config: &ScenarioConfig, scenario: Scenario, seed: u64) -> Result<Vec<RoundMetrics>> {
    config.validate()?;
    let p = &config.training;
    let q_count = config.users;
    let mut data_rng = stream_rng(seed, &[TAG_DATA]);
    let task = TokenTask::new(p, &mut data_rng);
    let clients = make_clients(&task, p, q_count, &mut data_rng);
    let mut global = ToyModel::new(p, &mut stream_rng(seed, &[TAG_INIT]));
    let batches_per_epoch = p.samples_per_client.div_ceil(p.batch_size);
    let mut out = Vec::with_capacity(config.n_rounds);
    for round in 0..config.n_rounds {
        let mut locals = vec![global.clone(); q_count];
        let mut mse_acc = vec![0.0; q_count];
        let mut rate_acc = 0.0;
        let mut iter_acc = 0.0;
        let mut steps = 0usize;
        for epoch in 0..config.n_epochs {
            let orders: Vec<Vec<usize>> = (0..q_count)
                .map(|q| {
                    let mut idx: Vec<usize> = (0..clients[q].train.len()).collect();
                    idx.shuffle(&mut stream_rng(seed, &[TAG_SHUFFLE, round as u64, epoch as u64, q as u64]));
                    idx
                })
                .collect();
            for b in 0..batches_per_epoch {
                let step = (epoch * batches_per_epoch + b) as u64;
                let uplink = draw_uplink(config, scenario, &mut stream_rng(seed, &[TAG_CHANNEL, round as u64, step]))?;
                let picked: Vec<Vec<&Sample>> = (0..q_count)
                    .map(|q| {
                        let from = b * p.batch_size;
                        let to = (from + p.batch_size).min(orders[q].len());
                        orders[q][from..to].iter().map(|&i| &clients[q].train[i]).collect()
                    })
                    .collect();
                let embedded: Vec<Vec<Vec<f64>>> = (0..q_count).map(|q| embed_batch(&locals[q], &picked[q])).collect();
                let mut noise_rng = stream_rng(seed, &[TAG_NOISE, scenario.index(), round as u64, step]);
                let received = transport(&embedded, uplink.as_ref(), corruption(config), &mut noise_rng)?;
                let losses: Vec<f64> = locals
                    .par_iter_mut()
                    .zip(received.par_iter().zip(picked.par_iter()))
                    .map(|(model, (rx, samples))| local_step(model, samples, rx, p.clip_tau, p.learning_rate))
                    .collect();
                if let Some(client) = losses.iter().position(|l| !l.is_finite()) {
                    return Err(Error::Diverged { round, client });
                }
                if let Some(link) = &uplink {
                    for q in 0..q_count {
                        mse_acc[q] += link.report.mse_per_user[q];
                    }
                    rate_acc += link.report.sum_rate;
                    iter_acc += link.optimizer_iterations as f64;
                }
                steps += 1;
            }
        }
        global = fedavg(&locals)?;
        if !global.is_finite() {
            return Err(Error::Diverged { round, client: 0 });
        }
        let steps_f = steps.max(1) as f64;
        let mse_db: Vec<f64> = if scenario == Scenario::Baseline {
            vec![f64::NEG_INFINITY; q_count]
        } else {
            mse_acc.iter().map(|m| 10.0 * (m / steps_f).log10()).collect()
        };
        let sum_rate = if scenario == Scenario::Baseline { f64::NAN } else { rate_acc / steps_f };
        let eval = evaluate(config, scenario, seed, round, &global, &clients)?;
        out.push(RoundMetrics {
            round,
            scenario,
            seed,
            per_client_mse_db: mse_db,
            accuracy: eval.accuracy,
            loss: eval.loss,
            clean_accuracy: eval.clean_accuracy,
            divergence_bound: eval.bound,
            empirical_divergence: eval.divergence,
            sum_rate,
            r_out_1: eval.r_out_1,
            r_out_2: eval.r_out_2,
            optimizer_iterations: iter_acc / steps_f,
        });
    }
    Ok(out)
}

/// One clipped SGD step on a client's batch; returns the mean loss.
fn local_step(model: &mut ToyModel, samples: &[&Sample], received: &[Vec<f64>], tau: f64, lr: f64) -> f64 {
    let mut grads = Gradients::zeros_like(model);
    let t = model.seq_len;
    let mut total = 0.0;
    for (i, s) in samples.iter().enumerate() {
        let e: Vec<f64> = received[i * t..(i + 1) * t].iter().flatten().copied().collect();
        let (loss, grad_e) = model.head_backward(&e, s.label, &mut grads);
        model.embed_backward(&s.tokens, &grad_e, &mut grads);
        total += loss;
    }
    let n = samples.len().max(1) as f64;
    grads.scale(1.0 / n);
    grads.clip(tau);
    model.apply(&grads, lr);
    total / n
}

struct Evaluation {
    accuracy: Vec<f64>,
    loss: Vec<f64>,
    clean_accuracy: f64,
    bound: Vec<f64>,
    divergence: Vec<f64>,
    r_out_1: Vec<f64>,
    r_out_2: Vec<f64>,
}

/// Coordinate-wise profile of the per-sample loss, maximized over classes.
pub fn estimate_profile(
    model: &ToyModel,
    centers: &[(Vec<f64>, usize)],
    pairs: usize,
    seed: u64,
    round: usize,
) -> Result<SmoothnessProfile> {
    let dim = model.sample_dim();
    let mut l0 = vec![0.0; dim];
    let mut l1 = vec![0.0; dim];
    let mut rejected = 0;
    for class in 0..model.classes {
        let xs: Vec<Vec<f64>> = centers.iter().filter(|c| c.1 == class).map(|c| c.0.clone()).collect();
        if xs.is_empty() {
            continue;
        }
        let loss = HeadLoss { model, label: class };
        let sampling = SmoothnessSampling {
            pairs,
            ..SmoothnessSampling::default()
        };
        let mut rng = stream_rng(seed, &[TAG_SMOOTHNESS, round as u64, class as u64]);
        let prof = estimate_smoothness(&loss, &xs, sampling, &mut rng)?;
        for j in 0..dim {
            l0[j] = f64::max(l0[j], prof.l0[j]);
            l1[j] = f64::max(l1[j], prof.l1[j]);
        }
        rejected += prof.rejected;
    }
    let mut profile = SmoothnessProfile::new(l0, l1);
    profile.rejected = rejected;
    Ok(profile)
}

fn evaluate(
    config: &ScenarioConfig,
    scenario: Scenario,
    seed: u64,
    round: usize,
    global: &ToyModel,
    clients: &[ClientData],
) -> Result<Evaluation> {
    let p = &config.training;
    let q_count = clients.len();
    let t = global.seq_len;
    let uplink: Option<Uplink> = draw_uplink(config, scenario, &mut stream_rng(seed, &[TAG_EVAL_CHANNEL, round as u64]))?;
    let refs: Vec<Vec<&Sample>> = clients.iter().map(|c| c.val.iter().collect()).collect();
    let clean: Vec<Vec<Vec<f64>>> = refs.iter().map(|s| embed_batch(global, s)).collect();
    let mut noise_rng = stream_rng(seed, &[TAG_EVAL_NOISE, scenario.index(), round as u64]);
    let received = transport(&clean, uplink.as_ref(), corruption(config), &mut noise_rng)?;

    let per_sample = |tokens: &[Vec<f64>], i: usize| -> Vec<f64> {
        tokens[i * t..(i + 1) * t].iter().flatten().copied().collect()
    };
    let n_centers = (p.smoothness_pairs / 4).clamp(1, 64);
    let centers: Vec<(Vec<f64>, usize)> = (0..n_centers)
        .map(|i| {
            let q = i % q_count;
            let k = (i / q_count) % refs[q].len();
            (per_sample(&clean[q], k), refs[q][k].label)
        })
        .collect();
    let profile = estimate_profile(global, &centers, p.smoothness_pairs, seed, round)?;
    let tau_eff = p.clip_tau.max(global.lipschitz_bound());
    let delta = profile.clipped_curvature_norm(tau_eff);

    let mut ev = Evaluation {
        accuracy: Vec::with_capacity(q_count),
        loss: Vec::with_capacity(q_count),
        clean_accuracy: 0.0,
        bound: Vec::with_capacity(q_count),
        divergence: Vec::with_capacity(q_count),
        r_out_1: Vec::with_capacity(q_count),
        r_out_2: Vec::with_capacity(q_count),
    };
    let mut clean_hits = 0usize;
    let mut clean_total = 0usize;
    for q in 0..q_count {
        let n = refs[q].len();
        let mut hits = 0usize;
        let mut loss = 0.0;
        let mut div = 0.0;
        for (i, s) in refs[q].iter().enumerate() {
            let e = per_sample(&clean[q], i);
            let e_hat = per_sample(&received[q], i);
            let l_hat = global.loss(&e_hat, s.label);
            hits += usize::from(global.predict(&e_hat) == s.label);
            clean_hits += usize::from(global.predict(&e) == s.label);
            loss += l_hat;
            div += (l_hat - global.loss(&e, s.label)).abs();
        }
        clean_total += n;
        ev.accuracy.push(hits as f64 / n as f64);
        ev.loss.push(loss / n as f64);
        ev.divergence.push(div / n as f64);
        match &uplink {
            Some(link) => {
                let symbols_per_sample = (t * global.dim / 2) as f64;
                let mse = symbols_per_sample * link.report.mean_mse(q) * p.noise_sensitivity.powi(2);
                ev.bound.push(expected_divergence_bound(tau_eff, delta, mse));
                let o = outage_rates(&profile, link.report.r_q[q], tau_eff, delta, p.epsilon_target);
                ev.r_out_1.push(o.r_out_1);
                ev.r_out_2.push(o.r_out_2);
            }
            None => {
                ev.bound.push(0.0);
                ev.r_out_1.push(f64::NAN);
                ev.r_out_2.push(f64::NAN);
            }
        }
    }
    ev.clean_accuracy = clean_hits as f64 / clean_total.max(1) as f64;
    Ok(ev)
}

//! Joint iterative scheduling, beamforming and power allocation
//! (iterative water-filling with per-user top-`B_q` scheduling).

mod power;
mod surrogate;
mod waterfill;

pub use power::{max_eigpair, EigPair};
pub use surrogate::{surrogate_covariance, SurrogateCov};
pub use waterfill::{waterfill, Waterfill};

use rayon::prelude::*;

use crate::channel::ChannelSet;
use crate::config::ScenarioConfig;
use crate::error::{dim_err, Result};
use crate::linalg::{solve_hpd_mat, CMatrix, CVector};
use crate::phy::{interference_cov, mac_sum_rate, set_mmse_filters, Allocation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    /// Relative sum-rate change below which the loop stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerReport {
    pub iterations: usize,
    /// Sum rate (nats) after initialization and after each outer iteration.
    pub rate_trajectory: Vec<f64>,
    pub converged: bool,
    pub final_alloc: Allocation,
}

/// Best response of one user against fixed interference-plus-noise.
#[derive(Debug, Clone, PartialEq)]
pub struct UserUpdate {
    pub alpha: Vec<bool>,
    pub p: Vec<f64>,
    pub w: Vec<CVector>,
    /// `λ_max(H^H X^{-1} H)` per RE.
    pub lambdas: Vec<f64>,
}

/// Dominant eigenpair per RE, top-`B_q` scheduling (ties to the lower RE
/// index), eigen-beamforming and water-filling over the scheduled REs.
pub fn single_user_update(
    q: usize,
    channels: &ChannelSet,
    x: &[CMatrix],
    power: f64,
    max_blocks: usize,
) -> Result<UserUpdate> {
    let res = channels.resource_elements();
    if x.len() != res {
        return Err(dim_err("interference grid", res, x.len()));
    }
    let pairs: Vec<EigPair> = (0..res)
        .into_par_iter()
        .map(|re| {
            let h = &channels.h[q][re];
            let xinv_h = solve_hpd_mat(&x[re], h)?;
            Ok(max_eigpair(&(h.adjoint() * xinv_h)))
        })
        .collect::<Result<_>>()?;
    let lambdas: Vec<f64> = pairs.iter().map(|e| e.value.max(0.0)).collect();
    let mut order: Vec<usize> = (0..res).collect();
    order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]).then(a.cmp(&b)));
    let chosen = &order[..max_blocks.min(res)];
    let chosen_lambdas: Vec<f64> = chosen.iter().map(|&re| lambdas[re]).collect();
    let wf = waterfill(&chosen_lambdas, power);
    let n_t = channels.tx_antennas(q);
    let mut alpha = vec![false; res];
    let mut p = vec![0.0; res];
    let mut w = vec![CVector::zeros(n_t); res];
    for (slot, &re) in chosen.iter().enumerate() {
        alpha[re] = true;
        p[re] = wf.powers[slot];
        w[re] = pairs[re].vector.clone();
    }
    Ok(UserUpdate { alpha, p, w, lambdas })
}

fn apply(alloc: &mut Allocation, q: usize, update: UserUpdate) {
    alloc.alpha[q] = update.alpha;
    alloc.p[q] = update.p;
    alloc.w[q] = update.w;
}

/// Runs the optimizer with the surrogate covariance as the believed
/// composite noise.
pub fn optimize(
    channels: &ChannelSet,
    config: &ScenarioConfig,
    surrogate: &SurrogateCov,
) -> Result<(Allocation, OptimizerReport)> {
    let believed = surrogate.per_re(channels.resource_elements());
    optimize_against(
        channels,
        config.user_power,
        config.blocks_per_user(),
        &believed,
        OptimizerSettings::default(),
    )
}

/// Iterative water-filling against an arbitrary believed composite noise
/// `c` per RE. Receive filters are MMSE filters against the same belief.
pub fn optimize_against(
    channels: &ChannelSet,
    power: f64,
    max_blocks: usize,
    c: &[CMatrix],
    settings: OptimizerSettings,
) -> Result<(Allocation, OptimizerReport)> {
    let res = channels.resource_elements();
    if c.len() != res {
        return Err(dim_err("believed noise grid", res, c.len()));
    }
    let mut alloc = Allocation::empty(channels);
    for q in 0..channels.users() {
        let update = single_user_update(q, channels, c, power, max_blocks)?;
        apply(&mut alloc, q, update);
    }
    let mut trajectory = vec![mac_sum_rate(&alloc, channels, c)?];
    let mut best = (trajectory[0], alloc.clone());
    let mut converged = false;
    let mut iterations = 0;
    while iterations < settings.max_iter {
        iterations += 1;
        for q in 0..channels.users() {
            let x = (0..res)
                .map(|re| interference_cov(&alloc, channels, &c[re], q, re))
                .collect::<Result<Vec<_>>>()?;
            let update = single_user_update(q, channels, &x, power, max_blocks)?;
            apply(&mut alloc, q, update);
        }
        let rate = mac_sum_rate(&alloc, channels, c)?;
        let prev = *trajectory.last().expect("trajectory starts non-empty");
        trajectory.push(rate);
        if rate > best.0 {
            best = (rate, alloc.clone());
        }
        if (rate - prev).abs() <= settings.tol * prev.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    let mut final_alloc = if converged { alloc } else { best.1 };
    set_mmse_filters(&mut final_alloc, channels, c)?;
    let report = OptimizerReport {
        iterations,
        rate_trajectory: trajectory,
        converged,
        final_alloc: final_alloc.clone(),
    };
    Ok((final_alloc, report))
}

//! Self-checks run by `rsfl verify`: quick randomized property sweeps at the
//! antenna counts of a given config.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{barrage, worst_case};
use crate::bounds::{clip_gradient, norm, quadratic_root};
use crate::channel::{realize_channels, sample_doas};
use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::harness::{fedavg, stream_rng, ToyModel};
use crate::linalg::{complex_gaussian_matrix, complex_gaussian_vector, random_psd, scaled_identity, C64};
use crate::optimizer::{optimize_against, waterfill, OptimizerSettings};
use crate::phy::{evaluate_link, mmse_filter, sinr, symbol_error};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

/// Runs every property sweep; `trials` controls the random instances per check.
pub fn run_checks(config: &ScenarioConfig, trials: usize) -> Result<Vec<Check>> {
    config.validate()?;
    let mut rng = stream_rng(config.seed, &[0x7e51]);
    let mut out = Vec::new();

    let (n_r, n_t) = (config.rx_antennas, config.tx_antennas);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let h = complex_gaussian_matrix(&mut rng, n_r, n_t, 1.0);
        let x = random_psd(&mut rng, n_r, n_r) + scaled_identity(n_r, 0.1);
        let mut w = complex_gaussian_vector(&mut rng, n_t, 1.0);
        w /= C64::new(w.norm(), 0.0);
        let p: f64 = rng.random_range(0.1..10.0);
        let b = w.clone() * C64::new(p.sqrt(), 0.0);
        let v = mmse_filter(&h, &b, &x)?;
        let mu = symbol_error(&h, &v, &x, p, &w);
        let gamma = sinr(&w, &h, &x)?;
        let target = (-(1.0 + p * gamma).ln()).exp();
        worst = worst.max((mu - target).abs() / target);
    }
    out.push(check("mmse_rate_identity", worst < 1e-9, format!("max relative error {worst:.3e}")));

    let mut violations = 0;
    let draws = trials.clamp(1, 5);
    let mut r_small = config.clone();
    r_small.subcarriers = r_small.subcarriers.min(8);
    r_small.symbols = r_small.symbols.min(4);
    r_small.max_blocks = None;
    let res = r_small.resource_elements();
    let mut jam_ok = true;
    for _ in 0..draws {
        let doas = sample_doas(&r_small, &mut rng);
        let ch = realize_channels(&r_small, &doas, &mut rng)?;
        let white = vec![scaled_identity(n_r, r_small.noise_power); res];
        let (alloc, _) = optimize_against(&ch, r_small.user_power, r_small.blocks_per_user(), &white, OptimizerSettings::default())?;
        let rep = evaluate_link(&alloc, &ch, &white)?;
        for q in 0..rep.r_q.len() {
            let r = rep.r_q[q] as f64;
            if r > 0.0 && rep.mse_per_user[q] < r * (-rep.rate_per_user[q] / r).exp() * (1.0 - 1e-12) {
                violations += 1;
            }
        }
        let (wc, _) = worst_case(&ch, &alloc, r_small.jammer_power)?;
        jam_ok &= wc.check_constraints(r_small.jammer_power).is_ok();
        jam_ok &= barrage(&r_small).check_constraints(r_small.jammer_power).is_ok();
    }
    out.push(check("jensen_outage_bound", violations == 0, format!("{violations} violations over {draws} draws")));
    out.push(check("jammer_power_budget", jam_ok, format!("P_J = {:.3e} W", r_small.jammer_power)));

    let mut kkt_err = 0.0f64;
    for _ in 0..trials {
        let n = rng.random_range(1..=8);
        let lambdas: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
        let power = rng.random_range(0.01..3.0);
        let wf = waterfill(&lambdas, power);
        let total: f64 = wf.powers.iter().sum();
        kkt_err = kkt_err.max((total - power).abs());
        for (l, p) in lambdas.iter().zip(&wf.powers) {
            let gap = if *p > 0.0 {
                (wf.level - 1.0 / l - p).abs()
            } else if *l > 0.0 {
                (1.0 / l - wf.level).min(0.0).abs()
            } else {
                0.0
            };
            kkt_err = kkt_err.max(gap);
        }
    }
    out.push(check("waterfill_kkt", kkt_err < 1e-10, format!("max KKT residual {kkt_err:.3e}")));

    let mut clip_ok = true;
    for _ in 0..trials {
        let g: Vec<f64> = (0..16).map(|_| rng.random_range(-5.0..5.0)).collect();
        let tau = rng.random_range(0.1..3.0);
        let c = clip_gradient(&g, tau);
        clip_ok &= norm(&c) <= tau * (1.0 + 1e-12) && clip_gradient(&c, tau) == c;
    }
    out.push(check("clip_idempotent", clip_ok, "norm ≤ τ and clip∘clip = clip".into()));

    let mut residual = 0.0f64;
    for _ in 0..trials {
        let (g, d, e) = (
            10f64.powf(rng.random_range(-3.0..3.0)),
            10f64.powf(rng.random_range(-3.0..3.0)),
            10f64.powf(rng.random_range(-3.0..3.0)),
        );
        let y = quadratic_root(g, d, e);
        residual = residual.max((d * y * y + g * y - e).abs() / e);
    }
    out.push(check("quadratic_root_residual", residual < 1e-12, format!("max relative residual {residual:.3e}")));

    let models: Vec<ToyModel> = (0..3).map(|_| ToyModel::new(&config.training, &mut rng)).collect();
    let avg = fedavg(&models)?;
    let fed_err = (0..avg.w1.len())
        .map(|i| (avg.w1[i] - models.iter().map(|m| m.w1[i]).sum::<f64>() / 3.0).abs())
        .fold(0.0, f64::max);
    out.push(check("fedavg_mean", fed_err < 1e-12, format!("max deviation {fed_err:.3e}")));

    Ok(out)
}

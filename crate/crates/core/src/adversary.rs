//! Jamming strategies: silent, barrage, the approximate worst-case jammer and
//! a projected-gradient reference solver for small instances.

use crate::channel::ChannelSet;
use crate::config::ScenarioConfig;
use crate::error::{dim_err, Error, Result};
use crate::linalg::{
    hermitian_eigen, inv_hpd, pinv, scaled_identity, singular_values, trace_re, CMatrix,
    C64,
};
use crate::phy::{composite_noise_cov, Allocation, JammerKind, JammingStrategy};

/// Singular values of `G` below this fraction of `σ_max` are dropped.
pub const PINV_TOL: f64 = 1e-10;

/// Largest `N_J² · NK` accepted by [`oracle_worst_case`].
pub const ORACLE_LIMIT: usize = 200;

/// `C_u = P_J / (N_J N K) · I` on every RE.
pub fn barrage(config: &ScenarioConfig) -> JammingStrategy {
    barrage_for(config.jammer_antennas, config.resource_elements(), config.jammer_power)
}

pub fn barrage_for(jammer_antennas: usize, resource_elements: usize, p_j: f64) -> JammingStrategy {
    let level = p_j / (jammer_antennas * resource_elements) as f64;
    JammingStrategy {
        c_u: vec![scaled_identity(jammer_antennas, level); resource_elements],
        kind: JammerKind::Barrage,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorstCaseReport {
    pub q_star: usize,
    pub h: Vec<f64>,
    pub g: Vec<f64>,
    /// Nonzero eigenvalues of the target's alignment matrix per RE,
    /// descending.
    pub lambdas: Vec<Vec<f64>>,
    /// Nobody was scheduled with positive power on any RE; barrage was used.
    pub fallback_barrage: bool,
}

/// Approximate worst-case jammer against the strongest user.
pub fn worst_case(
    channels: &ChannelSet,
    alloc: &Allocation,
    p_j: f64,
) -> Result<(JammingStrategy, WorstCaseReport)> {
    worst_case_with_target(channels, alloc, p_j, None)
}

/// As [`worst_case`], optionally forcing the targeted user.
///
/// The alignment matrix `R = G† H H^H G†^H` equals `B B^H` with `B = G† H`,
/// so its eigenvalues are the squared singular values of `B` and
/// `U Λ U^H = g R / tr R`; both facts are used to avoid an `N_J × N_J`
/// eigendecomposition per RE.
pub fn worst_case_with_target(
    channels: &ChannelSet,
    alloc: &Allocation,
    p_j: f64,
    target: Option<usize>,
) -> Result<(JammingStrategy, WorstCaseReport)> {
    let res = channels.resource_elements();
    let n_j = channels.jammer_antennas();
    if alloc.resource_elements() != res || alloc.users() != channels.users() {
        return Err(dim_err("allocation grid", res, alloc.resource_elements()));
    }
    if let Some(t) = target {
        if t >= channels.users() {
            return Err(dim_err("jamming target", format!("< {}", channels.users()), t));
        }
    }
    let g_pinv: Vec<CMatrix> = channels.g.iter().map(|g| pinv(g, PINV_TOL)).collect();
    let q_star = match target {
        Some(t) => t,
        None => strongest_user(channels, alloc, &g_pinv),
    };
    let mut lambdas = Vec::with_capacity(res);
    let mut align = Vec::with_capacity(res);
    let mut h = Vec::with_capacity(res);
    for re in 0..res {
        let b = &g_pinv[re] * &channels.h[q_star][re];
        let sv = singular_values(&b);
        let eig: Vec<f64> = sv
            .iter()
            .map(|s| s * s)
            .filter(|&l| l > 0.0)
            .collect();
        let total: f64 = eig.iter().sum();
        let p = if alloc.alpha[q_star][re] { alloc.p[q_star][re] } else { 0.0 };
        h.push(p * total);
        lambdas.push(eig);
        align.push((b.clone() * b.adjoint(), total));
    }
    let root_sum: f64 = h.iter().map(|x| x.sqrt()).sum();
    if !(root_sum > 0.0) {
        let strategy = barrage_for(n_j, res, p_j);
        let report = WorstCaseReport {
            q_star,
            g: vec![p_j / res as f64; res],
            h,
            lambdas,
            fallback_barrage: true,
        };
        return Ok((strategy, report));
    }
    let g: Vec<f64> = h.iter().map(|x| p_j * x.sqrt() / root_sum).collect();
    let c_u = align
        .into_iter()
        .zip(&g)
        .map(|((r, total), &gk)| {
            if gk > 0.0 && total > 0.0 {
                r * C64::new(gk / total, 0.0)
            } else {
                CMatrix::zeros(n_j, n_j)
            }
        })
        .collect();
    let strategy = JammingStrategy {
        c_u,
        kind: JammerKind::WorstCase,
    };
    Ok((
        strategy,
        WorstCaseReport {
            q_star,
            h,
            g,
            lambdas,
            fallback_barrage: false,
        },
    ))
}

/// `argmax_q max_{scheduled re} λ_max(G† H_q H_q^H G†^H)`, lowest `q` on ties.
fn strongest_user(channels: &ChannelSet, alloc: &Allocation, g_pinv: &[CMatrix]) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for q in 0..channels.users() {
        let mut top = f64::NEG_INFINITY;
        for (re, gp) in g_pinv.iter().enumerate() {
            if !alloc.alpha[q][re] {
                continue;
            }
            let b = gp * &channels.h[q][re];
            let s = singular_values(&b).first().copied().unwrap_or(0.0);
            top = top.max(s * s);
        }
        if top > best.1 {
            best = (q, top);
        }
    }
    best.0
}

/// Sum rate `Σ_re log(1 + Σ_q α p γ_q(C_z))` as a function of the jamming
/// covariances, with its gradient; the allocation is held fixed.
struct RateObjective {
    /// `Σ_q α p (H w)(H w)^H` per RE.
    signal: Vec<CMatrix>,
    g: Vec<CMatrix>,
    sigma2: f64,
}

impl RateObjective {
    fn new(channels: &ChannelSet, alloc: &Allocation, sigma2: f64) -> Self {
        let n_r = channels.rx_antennas();
        let signal = (0..channels.resource_elements())
            .map(|re| {
                let mut s = CMatrix::zeros(n_r, n_r);
                for q in 0..channels.users() {
                    if alloc.alpha[q][re] {
                        let a = &channels.h[q][re] * &alloc.w[q][re];
                        s += (&a * a.adjoint()) * C64::new(alloc.p[q][re], 0.0);
                    }
                }
                s
            })
            .collect();
        Self {
            signal,
            g: channels.g.clone(),
            sigma2,
        }
    }

    fn value(&self, c_u: &[CMatrix]) -> Result<f64> {
        let mut total = 0.0;
        for re in 0..c_u.len() {
            let cz_inv = inv_hpd(&composite_noise_cov(&self.g[re], &c_u[re], self.sigma2)?)?;
            total += trace_re(&(&self.signal[re] * cz_inv)).max(0.0).ln_1p();
        }
        Ok(total)
    }

    fn gradient(&self, c_u: &[CMatrix]) -> Result<Vec<CMatrix>> {
        (0..c_u.len())
            .map(|re| {
                let cz_inv = inv_hpd(&composite_noise_cov(&self.g[re], &c_u[re], self.sigma2)?)?;
                let t = trace_re(&(&self.signal[re] * &cz_inv)).max(0.0);
                let inner = &cz_inv * &self.signal[re] * &cz_inv;
                Ok(-(self.g[re].adjoint() * inner * &self.g[re]) / C64::new(1.0 + t, 0.0))
            })
            .collect()
    }
}

/// Joint projection onto `{C_re ⪰ 0, Σ_re tr C_re ≤ budget}`: eigenvalues of
/// all REs are shifted by one common threshold.
fn project(c: &[CMatrix], budget: f64) -> Vec<CMatrix> {
    let eig: Vec<(Vec<f64>, CMatrix)> = c.iter().map(hermitian_eigen).collect();
    let clipped_total: f64 = eig.iter().flat_map(|(v, _)| v.iter()).map(|l| l.max(0.0)).sum();
    let shift = if clipped_total <= budget {
        0.0
    } else {
        let mut lo = 0.0;
        let mut hi = eig
            .iter()
            .flat_map(|(v, _)| v.iter().copied())
            .fold(0.0, f64::max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let t: f64 = eig
                .iter()
                .flat_map(|(v, _)| v.iter())
                .map(|l| (l - mid).max(0.0))
                .sum();
            if t > budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    eig.into_iter()
        .map(|(vals, vecs)| {
            let mut scaled = vecs.clone();
            for (j, l) in vals.iter().enumerate() {
                let s = C64::new((l - shift).max(0.0), 0.0);
                for i in 0..scaled.nrows() {
                    scaled[(i, j)] *= s;
                }
            }
            let m = scaled * vecs.adjoint();
            (&m + m.adjoint()) * C64::new(0.5, 0.0)
        })
        .collect()
}

/// Reference minimizer of the sum rate over jamming covariances with
/// projected gradient descent and backtracking, started from barrage.
/// Refuses instances above [`ORACLE_LIMIT`].
pub fn oracle_worst_case(
    channels: &ChannelSet,
    alloc: &Allocation,
    p_j: f64,
    sigma2: f64,
) -> Result<JammingStrategy> {
    let res = channels.resource_elements();
    let n_j = channels.jammer_antennas();
    let variables = n_j * n_j * res;
    if variables > ORACLE_LIMIT {
        return Err(Error::DimensionGuard {
            variables,
            limit: ORACLE_LIMIT,
        });
    }
    if p_j == 0.0 {
        return Ok(JammingStrategy {
            c_u: vec![CMatrix::zeros(n_j, n_j); res],
            kind: JammerKind::WorstCase,
        });
    }
    let obj = RateObjective::new(channels, alloc, sigma2);
    let mut c = barrage_for(n_j, res, p_j).c_u;
    let mut f = obj.value(&c)?;
    let mut step = p_j;
    for _ in 0..3000 {
        let grad = obj.gradient(&c)?;
        let gnorm: f64 = grad.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt();
        if gnorm == 0.0 {
            break;
        }
        let mut accepted = false;
        let mut trial_step = step * 2.0;
        while trial_step > 1e-18 * p_j {
            let moved: Vec<CMatrix> = c
                .iter()
                .zip(&grad)
                .map(|(ci, gi)| ci - gi * C64::new(trial_step / gnorm, 0.0))
                .collect();
            let candidate = project(&moved, p_j);
            let fc = obj.value(&candidate)?;
            if fc < f {
                let improvement = f - fc;
                c = candidate;
                f = fc;
                step = trial_step;
                accepted = true;
                if improvement <= 1e-13 * f.abs().max(1e-300) {
                    return Ok(finish(c));
                }
                break;
            }
            trial_step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(finish(c))
}

fn finish(c_u: Vec<CMatrix>) -> JammingStrategy {
    JammingStrategy {
        c_u,
        kind: JammerKind::WorstCase,
    }
}

/// Sum rate of a fixed allocation under the given jamming strategy.
pub fn rate_under(
    channels: &ChannelSet,
    alloc: &Allocation,
    strategy: &JammingStrategy,
    sigma2: f64,
) -> Result<f64> {
    let cz = strategy.composite(channels, sigma2)?;
    Ok(crate::phy::sum_rate(alloc, channels, &cz)?.sum_rate)
}

//! Coordinate-wise `(L0, L1)`-smoothness: profile estimation, loss-divergence
//! bounds with and without gradient clipping, and outage rates.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result};

/// A scalar loss with a gradient, as seen from its input vector.
pub trait DifferentiableLoss {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

impl<L: DifferentiableLoss + ?Sized> DifferentiableLoss for &L {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (**self).gradient(x)
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Rescales `g` to norm `tau` when it is longer. Norms within a few ulps of
/// `tau` count as already clipped, so clipping twice is a no-op.
pub fn clip_gradient(g: &[f64], tau: f64) -> Vec<f64> {
    let n = norm(g);
    if n <= tau * (1.0 + 8.0 * f64::EPSILON) {
        g.to_vec()
    } else {
        g.iter().map(|x| x * tau / n).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessProfile {
    pub l0: Vec<f64>,
    pub l1: Vec<f64>,
    /// `1 / ‖L1‖_∞`, infinite when `L1 = 0`.
    pub proximity_radius: f64,
    /// Sample pairs dropped because of non-finite gradients.
    pub rejected: usize,
}

impl SmoothnessProfile {
    pub fn new(l0: Vec<f64>, l1: Vec<f64>) -> Self {
        let inf = l1.iter().copied().fold(0.0, f64::max);
        Self {
            l0,
            l1,
            proximity_radius: if inf > 0.0 { 1.0 / inf } else { f64::INFINITY },
            rejected: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.l0.len()
    }

    pub fn l1_inf(&self) -> f64 {
        self.l1.iter().copied().fold(0.0, f64::max)
    }

    /// `‖L0 + L1 ⊙ |g|‖₂`.
    pub fn curvature_norm(&self, grad: &[f64]) -> f64 {
        self.l0
            .iter()
            .zip(&self.l1)
            .zip(grad)
            .map(|((a, b), g)| (a + b * g.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `‖L0 + τ L1‖₂`.
    pub fn clipped_curvature_norm(&self, tau: f64) -> f64 {
        self.l0
            .iter()
            .zip(&self.l1)
            .map(|(a, b)| (a + tau * b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Sampling plan for [`estimate_smoothness`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessSampling {
    pub pairs: usize,
    /// Perturbation radius as a fraction of `‖x‖` (absolute when `x = 0`).
    pub relative_radius: f64,
    /// Multiplicative safety margin on the fitted constants.
    pub inflation: f64,
}

impl Default for SmoothnessSampling {
    fn default() -> Self {
        Self {
            pairs: 512,
            relative_radius: 0.1,
            inflation: 1.05,
        }
    }
}

struct Sample {
    distance: f64,
    grad_x: Vec<f64>,
    grad_diff: Vec<f64>,
}

/// Fits the smallest `(L0_j, L1_j) ≥ 0` with
/// `|∂_j L(y) − ∂_j L(x)| ≤ (L0_j/√E + L1_j |∂_j L(x)|) ‖y − x‖` on sampled
/// pairs around the given centers, then inflates them.
///
/// A quarter of the pairs are axis-aligned probes. For each coordinate the
/// fit minimizes the mean right-hand side over the samples subject to
/// covering every sample.
pub fn estimate_smoothness<L: DifferentiableLoss, R: Rng + ?Sized>(
    loss: &L,
    centers: &[Vec<f64>],
    sampling: SmoothnessSampling,
    rng: &mut R,
) -> Result<SmoothnessProfile> {
    let e = loss.dim();
    if let Some(c) = centers.iter().find(|c| c.len() != e) {
        return Err(dim_err("smoothness center", e, c.len()));
    }
    let mut samples = Vec::with_capacity(sampling.pairs);
    let mut rejected = 0;
    if !centers.is_empty() {
        for i in 0..sampling.pairs {
            let x = &centers[i % centers.len()];
            let scale = {
                let n = norm(x);
                if n > 0.0 { sampling.relative_radius * n } else { sampling.relative_radius }
            };
            let r = scale * rng.random_range(0.05..=1.0);
            let dir: Vec<f64> = if i % 4 == 3 {
                let j = rng.random_range(0..e);
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                (0..e).map(|k| if k == j { sign } else { 0.0 }).collect()
            } else {
                let raw: Vec<f64> = (0..e).map(|_| StandardNormal.sample(rng)).collect();
                let n = norm(&raw);
                raw.into_iter().map(|v| v / n).collect()
            };
            let y: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + r * d).collect();
            let gx = loss.gradient(x);
            let gy = loss.gradient(&y);
            if gx.iter().chain(&gy).any(|v| !v.is_finite()) {
                rejected += 1;
                continue;
            }
            samples.push(Sample {
                distance: r,
                grad_diff: gy.iter().zip(&gx).map(|(a, b)| (a - b).abs()).collect(),
                grad_x: gx,
            });
        }
    }
    let root_e = (e as f64).sqrt();
    let mut l0 = vec![0.0; e];
    let mut l1 = vec![0.0; e];
    for j in 0..e {
        let rows: Vec<(f64, f64, f64)> = samples
            .iter()
            .map(|s| (s.grad_diff[j], s.distance, s.grad_x[j].abs() * s.distance))
            .collect();
        let (a, b) = fit_coordinate(&rows);
        l0[j] = a * root_e * sampling.inflation;
        l1[j] = b * sampling.inflation;
    }
    let mut profile = SmoothnessProfile::new(l0, l1);
    profile.rejected = rejected;
    Ok(profile)
}

/// Minimizes `mean(a n_i + b m_i)` over `a, b ≥ 0` subject to
/// `r_i ≤ a n_i + b m_i` for rows `(r_i, n_i, m_i)`.
fn fit_coordinate(rows: &[(f64, f64, f64)]) -> (f64, f64) {
    if rows.is_empty() {
        return (0.0, 0.0);
    }
    let a_for = |b: f64| {
        rows.iter()
            .filter(|r| r.1 > 0.0)
            .map(|&(r, n, m)| ((r - b * m) / n).max(0.0))
            .fold(0.0, f64::max)
    };
    let mean_n = rows.iter().map(|r| r.1).sum::<f64>() / rows.len() as f64;
    let mean_m = rows.iter().map(|r| r.2).sum::<f64>() / rows.len() as f64;
    let cost = |b: f64| a_for(b) * mean_n + b * mean_m;
    // Beyond this slope every row is covered by the `b` term alone.
    let b_max = rows
        .iter()
        .filter(|r| r.2 > 0.0)
        .map(|&(r, _, m)| r / m)
        .fold(0.0, f64::max);
    let (mut lo, mut hi) = (0.0, b_max);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        if hi - lo <= 1e-12 * b_max.max(1e-300) {
            break;
        }
        let c = hi - phi * (hi - lo);
        let d = lo + phi * (hi - lo);
        if cost(c) <= cost(d) {
            hi = d;
        } else {
            lo = c;
        }
    }
    let mut best = (cost(0.0), 0.0);
    for b in [lo, hi, 0.5 * (lo + hi), b_max] {
        let c = cost(b);
        if c < best.0 {
            best = (c, b);
        }
    }
    (a_for(best.1), best.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub divergence_bound: f64,
    pub empirical_divergence: f64,
    pub clipped: bool,
    pub tau: Option<f64>,
    /// `L0 + L1 ⊙ |∇L(x)|`.
    pub u_vec: Vec<f64>,
    /// `‖y − x‖ ≤ 1 / ‖L1‖_∞`.
    pub within_proximity: bool,
}

/// Bound on `|L(y) − L(x)|`.
///
/// Without clipping: `‖∇L(x)‖ ‖d‖ + ‖L0 + L1 ⊙ |∇L(x)|‖ ‖d‖²`. With a
/// threshold `τ`: `τ ‖d‖ + ‖L0 + τ L1‖ ‖d‖²`.
pub fn loss_divergence_bound<L: DifferentiableLoss>(
    loss: &L,
    x: &[f64],
    y: &[f64],
    grad_x: &[f64],
    profile: &SmoothnessProfile,
    tau: Option<f64>,
) -> Result<BoundReport> {
    let e = profile.dim();
    for (what, len) in [("x", x.len()), ("y", y.len()), ("gradient", grad_x.len())] {
        if len != e {
            return Err(dim_err("loss divergence bound", e, format!("{what} of length {len}")));
        }
    }
    let d = distance(x, y);
    let u_vec: Vec<f64> = profile
        .l0
        .iter()
        .zip(&profile.l1)
        .zip(grad_x)
        .map(|((a, b), g)| a + b * g.abs())
        .collect();
    let divergence_bound = match tau {
        Some(t) => t * d + profile.clipped_curvature_norm(t) * d * d,
        None => norm(grad_x) * d + norm(&u_vec) * d * d,
    };
    Ok(BoundReport {
        divergence_bound,
        empirical_divergence: (loss.value(y) - loss.value(x)).abs(),
        clipped: tau.is_some(),
        tau,
        u_vec,
        within_proximity: d <= profile.proximity_radius,
    })
}

/// `a √mse + b · mse`.
pub fn expected_divergence_bound(a: f64, b: f64, mse: f64) -> f64 {
    a * mse.max(0.0).sqrt() + b * mse.max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageReport {
    pub r_out_1: f64,
    pub r_out_2: f64,
    pub r_out: f64,
    pub r_q: usize,
    pub gamma: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub y_root: f64,
    /// `ε = 0`: no finite rate suffices.
    pub lossless: bool,
}

/// Nonnegative root of `δ y² + γ y − ε = 0` for `δ > 0`, `γ, ε ≥ 0`.
pub fn quadratic_root(gamma: f64, delta: f64, epsilon: f64) -> f64 {
    if epsilon <= 0.0 {
        return 0.0;
    }
    // Cancellation-free form of (−γ + √(γ² + 4δε)) / 2δ.
    let disc = (gamma * gamma + 4.0 * delta * epsilon).sqrt();
    2.0 * epsilon / (gamma + disc)
}

/// `R_out,1 = r log(‖L1‖_∞² r)`, `R_out,2 = r log(r / y²)`, and their
/// minimum.
pub fn outage_rates(
    profile: &SmoothnessProfile,
    r_q: usize,
    gamma: f64,
    delta: f64,
    epsilon: f64,
) -> OutageReport {
    let r = r_q as f64;
    let l1 = profile.l1_inf();
    let r_out_1 = if l1 > 0.0 && r_q > 0 {
        r * (l1 * l1 * r).ln()
    } else {
        f64::NEG_INFINITY
    };
    let y = quadratic_root(gamma, delta, epsilon);
    let lossless = epsilon <= 0.0;
    let r_out_2 = if lossless { f64::INFINITY } else { r * (r / (y * y)).ln() };
    OutageReport {
        r_out_1,
        r_out_2,
        r_out: r_out_1.min(r_out_2),
        r_q,
        gamma,
        delta,
        epsilon,
        y_root: y,
        lossless,
    }
}

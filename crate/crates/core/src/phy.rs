//! Uplink transmit/receive chain over the multiple-access channel:
//! composite noise, interference covariances, MMSE equalization, SINR,
//! symbol error and sum rate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{dim_err, Error, Result};
use crate::linalg::{
    complex_gaussian_vector, is_hermitian, is_psd, outer, psd_sqrt, quad_form, scaled_identity,
    solve_hpd, trace_re, CMatrix, CVector, C64,
};

/// Scheduling, power, beamformers and receive filters for every
/// `(user, resource element)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub alpha: Vec<Vec<bool>>,
    pub p: Vec<Vec<f64>>,
    pub w: Vec<Vec<CVector>>,
    pub v: Vec<Vec<CVector>>,
}

impl Allocation {
    /// Nothing scheduled, zero beamformers and filters.
    pub fn empty(channels: &ChannelSet) -> Self {
        let res = channels.resource_elements();
        let n_r = channels.rx_antennas();
        let q = channels.users();
        Self {
            alpha: vec![vec![false; res]; q],
            p: vec![vec![0.0; res]; q],
            w: (0..q)
                .map(|u| vec![CVector::zeros(channels.tx_antennas(u)); res])
                .collect(),
            v: vec![vec![CVector::zeros(n_r); res]; q],
        }
    }

    pub fn users(&self) -> usize {
        self.alpha.len()
    }

    pub fn resource_elements(&self) -> usize {
        self.alpha.first().map_or(0, Vec::len)
    }

    /// `b = α √p w`.
    pub fn b(&self, q: usize, re: usize) -> CVector {
        if self.alpha[q][re] {
            &self.w[q][re] * C64::new(self.p[q][re].max(0.0).sqrt(), 0.0)
        } else {
            CVector::zeros(self.w[q][re].len())
        }
    }

    /// Scheduled-block count r_q.
    pub fn scheduled(&self, q: usize) -> usize {
        self.alpha[q].iter().filter(|&&a| a).count()
    }

    pub fn power_used(&self, q: usize) -> f64 {
        self.alpha[q]
            .iter()
            .zip(&self.p[q])
            .filter(|(a, _)| **a)
            .map(|(_, p)| *p)
            .sum()
    }

    /// Checks scheduling, block, power and beamformer-norm constraints.
    pub fn check_constraints(&self, max_blocks: usize, power: f64) -> Result<()> {
        for q in 0..self.users() {
            if self.p[q].iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::Invariant(format!("user {q}: negative or NaN power")));
            }
            let r = self.scheduled(q);
            if r > max_blocks {
                return Err(Error::Invariant(format!(
                    "user {q}: {r} scheduled blocks exceed B_q = {max_blocks}"
                )));
            }
            let used = self.power_used(q);
            if used > power * (1.0 + 1e-9) {
                return Err(Error::Invariant(format!(
                    "user {q}: power {used} exceeds P_q = {power}"
                )));
            }
            if let Some(re) = self.w[q].iter().position(|w| w.norm() > 1.0 + 1e-9) {
                return Err(Error::Invariant(format!(
                    "user {q}, RE {re}: beamformer norm exceeds 1"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JammerKind {
    None,
    Barrage,
    WorstCase,
}

/// Per-RE jamming covariance `C_u` (N_J × N_J).
#[derive(Debug, Clone, PartialEq)]
pub struct JammingStrategy {
    pub c_u: Vec<CMatrix>,
    pub kind: JammerKind,
}

impl JammingStrategy {
    pub fn none(jammer_antennas: usize, resource_elements: usize) -> Self {
        Self {
            c_u: vec![CMatrix::zeros(jammer_antennas, jammer_antennas); resource_elements],
            kind: JammerKind::None,
        }
    }

    pub fn total_power(&self) -> f64 {
        self.c_u.iter().map(trace_re).sum()
    }

    /// Hermitian, PSD and total-trace checks.
    pub fn check_constraints(&self, budget: f64) -> Result<()> {
        for (re, c) in self.c_u.iter().enumerate() {
            if !is_hermitian(c, 1e-9) {
                return Err(Error::Invariant(format!("RE {re}: C_u not Hermitian")));
            }
            if !is_psd(c, 1e-9) {
                return Err(Error::Invariant(format!("RE {re}: C_u not PSD")));
            }
        }
        let total = self.total_power();
        if total > budget * (1.0 + 1e-9) + 1e-300 {
            return Err(Error::Invariant(format!(
                "jamming power {total} exceeds P_J = {budget}"
            )));
        }
        Ok(())
    }

    /// `C_z` for every RE.
    pub fn composite(&self, channels: &ChannelSet, sigma2: f64) -> Result<Vec<CMatrix>> {
        if self.c_u.len() != channels.resource_elements() {
            return Err(dim_err(
                "jamming strategy grid",
                channels.resource_elements(),
                self.c_u.len(),
            ));
        }
        channels
            .g
            .iter()
            .zip(&self.c_u)
            .map(|(g, c)| composite_noise_cov(g, c, sigma2))
            .collect()
    }
}

/// `C_z = G C_u G^H + σ² I`.
pub fn composite_noise_cov(g: &CMatrix, c_u: &CMatrix, sigma2: f64) -> Result<CMatrix> {
    if c_u.nrows() != g.ncols() || !c_u.is_square() {
        return Err(dim_err(
            "composite noise",
            format!("{0}x{0} jamming covariance", g.ncols()),
            format!("{}x{}", c_u.nrows(), c_u.ncols()),
        ));
    }
    Ok(g * c_u * g.adjoint() + scaled_identity(g.nrows(), sigma2))
}

/// `X_q = Σ_{q'≠q} H_{q'} b_{q'} b_{q'}^H H_{q'}^H + C_z` at one RE.
pub fn interference_cov(
    alloc: &Allocation,
    channels: &ChannelSet,
    c_z: &CMatrix,
    q: usize,
    re: usize,
) -> Result<CMatrix> {
    let n_r = channels.rx_antennas();
    if c_z.nrows() != n_r || c_z.ncols() != n_r {
        return Err(dim_err("interference covariance", n_r, c_z.nrows()));
    }
    let mut x = c_z.clone();
    for other in 0..channels.users() {
        if other == q || !alloc.alpha[other][re] {
            continue;
        }
        let hb = &channels.h[other][re] * alloc.b(other, re);
        x += outer(&hb, &hb);
    }
    Ok(x)
}

/// `v = (X + H b b^H H^H)^{-1} H b`.
pub fn mmse_filter(h: &CMatrix, b: &CVector, x: &CMatrix) -> Result<CVector> {
    if h.ncols() != b.len() || h.nrows() != x.nrows() {
        return Err(dim_err("MMSE filter", h.ncols(), b.len()));
    }
    let hb = h * b;
    solve_hpd(&(x + outer(&hb, &hb)), &hb)
}

/// `μ = |√p v^H H w − 1|² + v^H X v`.
pub fn symbol_error(h: &CMatrix, v: &CVector, x: &CMatrix, p: f64, w: &CVector) -> f64 {
    let gain = (v.adjoint() * h * w)[(0, 0)] * p.max(0.0).sqrt();
    (gain - C64::new(1.0, 0.0)).norm_sqr() + quad_form(v, x)
}

/// `γ = w^H H^H C^{-1} H w`.
pub fn sinr(w: &CVector, h: &CMatrix, c: &CMatrix) -> Result<f64> {
    if h.ncols() != w.len() || h.nrows() != c.nrows() {
        return Err(dim_err("SINR", h.ncols(), w.len()));
    }
    let hw = h * w;
    let z = solve_hpd(c, &hw)?;
    Ok((hw.adjoint() * z)[(0, 0)].re.max(0.0))
}

/// Rates of one allocation under given composite noise.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// `R = Σ_re log(1 + Σ_q α p γ(C_z))`, nats.
    pub sum_rate: f64,
    /// `R_q = Σ_re α log(1 + p γ(X_q))`, nats.
    pub per_user: Vec<f64>,
    /// `γ_q(C_z)` per `[q][re]` (all REs, scheduled or not).
    pub sinr: Vec<Vec<f64>>,
}

pub fn sum_rate(alloc: &Allocation, channels: &ChannelSet, c_z: &[CMatrix]) -> Result<RateReport> {
    let q_count = channels.users();
    let res = channels.resource_elements();
    if c_z.len() != res {
        return Err(dim_err("composite noise grid", res, c_z.len()));
    }
    let mut sinr_grid = vec![vec![0.0; res]; q_count];
    let mut per_user = vec![0.0; q_count];
    let mut total = 0.0;
    for re in 0..res {
        let mut acc = 0.0;
        for q in 0..q_count {
            let g = sinr(&alloc.w[q][re], &channels.h[q][re], &c_z[re])?;
            sinr_grid[q][re] = g;
            if alloc.alpha[q][re] {
                acc += alloc.p[q][re] * g;
                let x = interference_cov(alloc, channels, &c_z[re], q, re)?;
                let gx = sinr(&alloc.w[q][re], &channels.h[q][re], &x)?;
                per_user[q] += (alloc.p[q][re] * gx).ln_1p();
            }
        }
        total += acc.ln_1p();
    }
    Ok(RateReport {
        sum_rate: total,
        per_user,
        sinr: sinr_grid,
    })
}

/// Exact MAC sum rate `Σ_re log det(I + C^{-1} Σ_q H b b^H H^H)` with
/// successive decoding. Used as the optimizer's progress measure.
pub fn mac_sum_rate(alloc: &Allocation, channels: &ChannelSet, c: &[CMatrix]) -> Result<f64> {
    let mut total = 0.0;
    for (re, c_re) in c.iter().enumerate() {
        let mut s = c_re.clone();
        for q in 0..channels.users() {
            if alloc.alpha[q][re] {
                let hb = &channels.h[q][re] * alloc.b(q, re);
                s += outer(&hb, &hb);
            }
        }
        total += log_det_hpd(&s)? - log_det_hpd(c_re)?;
    }
    Ok(total)
}

fn log_det_hpd(m: &CMatrix) -> Result<f64> {
    let chol = crate::linalg::hermitian_part(m)
        .cholesky()
        .ok_or(Error::Singular("log-determinant"))?;
    let l = chol.l();
    Ok(l.diagonal().iter().map(|d| 2.0 * d.re.ln()).sum())
}

/// Per-user link quality of an allocation under the true composite noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    /// μ_qnk on scheduled REs, 0 elsewhere.
    pub mse_per_re: Vec<Vec<f64>>,
    /// μ_q summed over scheduled REs.
    pub mse_per_user: Vec<f64>,
    pub sinr: Vec<Vec<f64>>,
    pub rate_per_user: Vec<f64>,
    pub sum_rate: f64,
    pub r_q: Vec<usize>,
}

impl LinkReport {
    /// Mean μ over the scheduled REs of user `q` (1 if nothing is scheduled,
    /// i.e. the symbol is lost).
    pub fn mean_mse(&self, q: usize) -> f64 {
        if self.r_q[q] == 0 {
            1.0
        } else {
            self.mse_per_user[q] / self.r_q[q] as f64
        }
    }

    /// μ on scheduled REs of user `q`, in RE order.
    pub fn scheduled_mse(&self, q: usize, alloc: &Allocation) -> Vec<f64> {
        alloc.alpha[q]
            .iter()
            .zip(&self.mse_per_re[q])
            .filter(|(a, _)| **a)
            .map(|(_, m)| *m)
            .collect()
    }
}

/// Evaluates symbol errors with the allocation's own receive filters against
/// the true interference-plus-noise covariance.
pub fn evaluate_link(
    alloc: &Allocation,
    channels: &ChannelSet,
    c_z: &[CMatrix],
) -> Result<LinkReport> {
    let rates = sum_rate(alloc, channels, c_z)?;
    let q_count = channels.users();
    let res = channels.resource_elements();
    let mut mse_per_re = vec![vec![0.0; res]; q_count];
    let mut mse_per_user = vec![0.0; q_count];
    for q in 0..q_count {
        for re in 0..res {
            if !alloc.alpha[q][re] {
                continue;
            }
            let x = interference_cov(alloc, channels, &c_z[re], q, re)?;
            let mu = symbol_error(
                &channels.h[q][re],
                &alloc.v[q][re],
                &x,
                alloc.p[q][re],
                &alloc.w[q][re],
            );
            mse_per_re[q][re] = mu;
            mse_per_user[q] += mu;
        }
    }
    Ok(LinkReport {
        mse_per_re,
        mse_per_user,
        sinr: rates.sinr,
        rate_per_user: rates.per_user,
        sum_rate: rates.sum_rate,
        r_q: (0..q_count).map(|q| alloc.scheduled(q)).collect(),
    })
}

/// Sets every scheduled receive filter to the MMSE filter against the given
/// (believed) composite noise; unscheduled filters become zero.
pub fn set_mmse_filters(
    alloc: &mut Allocation,
    channels: &ChannelSet,
    c_believed: &[CMatrix],
) -> Result<()> {
    let n_r = channels.rx_antennas();
    for q in 0..channels.users() {
        for re in 0..channels.resource_elements() {
            alloc.v[q][re] = if alloc.alpha[q][re] {
                let x = interference_cov(alloc, channels, &c_believed[re], q, re)?;
                mmse_filter(&channels.h[q][re], &alloc.b(q, re), &x)?
            } else {
                CVector::zeros(n_r)
            };
        }
    }
    Ok(())
}

/// Monte-Carlo uplink: draws jamming and noise and applies the receive
/// filters. The square roots of the jamming covariances are computed once.
pub struct Transceiver<'a> {
    alloc: &'a Allocation,
    channels: &'a ChannelSet,
    jam_sqrt: Vec<Option<CMatrix>>,
    sigma2: f64,
}

impl<'a> Transceiver<'a> {
    pub fn new(
        alloc: &'a Allocation,
        channels: &'a ChannelSet,
        strategy: &JammingStrategy,
        sigma2: f64,
    ) -> Result<Self> {
        if strategy.c_u.len() != channels.resource_elements() {
            return Err(dim_err(
                "jamming strategy grid",
                channels.resource_elements(),
                strategy.c_u.len(),
            ));
        }
        let jam_sqrt = strategy
            .c_u
            .iter()
            .map(|c| {
                if trace_re(c) > 0.0 {
                    Some(psd_sqrt(c))
                } else {
                    None
                }
            })
            .collect();
        Ok(Self {
            alloc,
            channels,
            jam_sqrt,
            sigma2,
        })
    }

    /// Receives one RE: `y = Σ_q H_q b_q s_q + G u + η`, `ŝ_q = v_q^H y` for
    /// every user (zero for unscheduled users). `symbols[q]` is ignored when
    /// user `q` is not scheduled on `re`.
    pub fn receive_re<R: Rng + ?Sized>(&self, re: usize, symbols: &[C64], rng: &mut R) -> Vec<C64> {
        let n_r = self.channels.rx_antennas();
        let mut y = complex_gaussian_vector(rng, n_r, self.sigma2);
        if let Some(root) = &self.jam_sqrt[re] {
            let n = complex_gaussian_vector(rng, root.ncols(), 1.0);
            y += &self.channels.g[re] * (root * n);
        }
        for q in 0..self.channels.users() {
            if self.alloc.alpha[q][re] {
                y += &self.channels.h[q][re] * (self.alloc.b(q, re) * symbols[q]);
            }
        }
        (0..self.channels.users())
            .map(|q| {
                if self.alloc.alpha[q][re] {
                    self.alloc.v[q][re].dotc(&y)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect()
    }

    /// Transmits `symbols[q][re]` over every RE and returns `ŝ[q][re]`.
    pub fn transmit_receive<R: Rng + ?Sized>(&self, symbols: &[Vec<C64>], rng: &mut R) -> Vec<Vec<C64>> {
        let q_count = self.channels.users();
        let res = self.channels.resource_elements();
        let mut out = vec![vec![C64::new(0.0, 0.0); res]; q_count];
        let mut column = vec![C64::new(0.0, 0.0); q_count];
        for re in 0..res {
            for q in 0..q_count {
                column[q] = symbols[q][re];
            }
            for (q, s) in self.receive_re(re, &column, rng).into_iter().enumerate() {
                out[q][re] = s;
            }
        }
        out
    }
}

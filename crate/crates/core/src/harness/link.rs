//! Per-batch uplink for each scenario and the embedding corruption it causes.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::symbols::SymbolMap;
use crate::adversary::{barrage, worst_case_with_target};
use crate::channel::{realize_channels, sample_doas, ChannelSet};
use crate::config::{CorruptionMode, NoiseShape, ScenarioConfig};
use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, scaled_identity, C64};
use crate::optimizer::{optimize, optimize_against, surrogate_covariance, OptimizerSettings};
use crate::phy::{evaluate_link, Allocation, JammingStrategy, LinkReport, Transceiver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// No wireless link.
    Baseline,
    /// Noise only.
    Gaussian,
    /// Worst-case jammer against a jamming-unaware allocation.
    NoProtection,
    /// Worst-case jammer against the surrogate-aware allocation.
    Protection,
    /// Barrage jammer against a jamming-unaware allocation.
    Barrage,
    /// Worst-case jammer aimed at client 0 only.
    SingleClient,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Baseline,
        Scenario::Gaussian,
        Scenario::NoProtection,
        Scenario::Protection,
        Scenario::Barrage,
        Scenario::SingleClient,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Baseline => "baseline",
            Scenario::Gaussian => "gaussian",
            Scenario::NoProtection => "no_protection",
            Scenario::Protection => "protection",
            Scenario::Barrage => "barrage",
            Scenario::SingleClient => "single_client",
        }
    }

    /// Stable small integer used to derive RNG streams.
    pub fn index(self) -> u64 {
        Scenario::ALL.iter().position(|s| *s == self).expect("listed") as u64
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|x| x.name() == s.trim())
            .ok_or_else(|| Error::InvalidValue {
                key: "scenario".into(),
                reason: format!("unknown scenario `{s}`"),
            })
    }
}

/// One uplink realization: channels, allocation, jammer and per-client link
/// quality under the true covariance.
#[derive(Debug, Clone)]
pub struct Uplink {
    pub channels: ChannelSet,
    pub alloc: Allocation,
    pub strategy: JammingStrategy,
    /// Whether client `q` is exposed to the jammer.
    pub jammed: Vec<bool>,
    pub report: LinkReport,
    pub optimizer_iterations: usize,
}

/// Draws channels and builds allocation and jammer for `scenario`.
/// Returns `None` for the baseline.
pub fn draw_uplink<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    scenario: Scenario,
    rng: &mut R,
) -> Result<Option<Uplink>> {
    if scenario == Scenario::Baseline {
        return Ok(None);
    }
    let doas = sample_doas(config, rng);
    let channels = realize_channels(config, &doas, rng)?;
    let res = channels.resource_elements();
    let white = vec![scaled_identity(config.rx_antennas, config.noise_power); res];
    let (alloc, iterations) = if scenario == Scenario::Protection {
        let surrogate = surrogate_covariance(&doas.jammer, config.eta, config.noise_power, config.rx_antennas);
        let (a, r) = optimize(&channels, config, &surrogate)?;
        (a, r.iterations)
    } else {
        let (a, r) = optimize_against(
            &channels,
            config.user_power,
            config.blocks_per_user(),
            &white,
            OptimizerSettings::default(),
        )?;
        (a, r.iterations)
    };
    let q = config.users;
    let (strategy, jammed) = match scenario {
        Scenario::Gaussian | Scenario::Baseline => (
            JammingStrategy::none(config.jammer_antennas, res),
            vec![false; q],
        ),
        Scenario::Barrage => (barrage(config), vec![true; q]),
        Scenario::NoProtection | Scenario::Protection => (
            worst_case_with_target(&channels, &alloc, config.jammer_power, None)?.0,
            vec![true; q],
        ),
        Scenario::SingleClient => {
            let mut jammed = vec![false; q];
            jammed[0] = true;
            (
                worst_case_with_target(&channels, &alloc, config.jammer_power, Some(0))?.0,
                jammed,
            )
        }
    };
    let jam_cz = strategy.composite(&channels, config.noise_power)?;
    let mut report = evaluate_link(&alloc, &channels, &jam_cz)?;
    if jammed.iter().any(|j| !j) {
        let clean = evaluate_link(&alloc, &channels, &white)?;
        for u in 0..q {
            if !jammed[u] {
                report.mse_per_re[u] = clean.mse_per_re[u].clone();
                report.mse_per_user[u] = clean.mse_per_user[u];
                report.sinr[u] = clean.sinr[u].clone();
                report.rate_per_user[u] = clean.rate_per_user[u];
            }
        }
    }
    Ok(Some(Uplink {
        channels,
        alloc,
        strategy,
        jammed,
        report,
        optimizer_iterations: iterations,
    }))
}

/// Settings of the corruption step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corruption {
    pub mode: CorruptionMode,
    pub shape: NoiseShape,
    /// Amplitude multiplier on the symbol error.
    pub sensitivity: f64,
    pub sigma2: f64,
}

/// Sends every client's token embeddings over the uplink and returns the
/// received embeddings, `out[q][token]`. Without an uplink the embeddings
/// pass unchanged.
pub fn transport<R: Rng + ?Sized>(
    batches: &[Vec<Vec<f64>>],
    uplink: Option<&Uplink>,
    corruption: Corruption,
    rng: &mut R,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let Some(link) = uplink else {
        return Ok(batches.to_vec());
    };
    let maps: Vec<(SymbolMap, Vec<C64>)> = batches
        .iter()
        .map(|tokens| {
            let refs: Vec<&[f64]> = tokens.iter().map(|t| t.as_slice()).collect();
            let dim = tokens.first().map_or(0, Vec::len);
            let len = tokens.len() * dim / 2;
            let map = SymbolMap::fit(&refs, dim, len, rng);
            let stream = map.to_stream(&refs);
            (map, stream)
        })
        .collect();
    let streams: Vec<&[C64]> = maps.iter().map(|(_, s)| s.as_slice()).collect();
    let received = match corruption.mode {
        CorruptionMode::Analytic => analytic(&streams, link, corruption, rng),
        CorruptionMode::Simulated => simulated(&streams, link, corruption, rng)?,
    };
    Ok(maps
        .iter()
        .zip(received)
        .map(|((map, _), r)| map.from_stream(&r))
        .collect())
}

fn scheduled(alloc: &Allocation, q: usize) -> Vec<usize> {
    (0..alloc.resource_elements()).filter(|&re| alloc.alpha[q][re]).collect()
}

/// Adds `CN(0, s² μ)` errors, with `μ` either the user's mean symbol error or
/// the error of the RE that carries each stream position.
fn analytic<R: Rng + ?Sized>(
    streams: &[&[C64]],
    link: &Uplink,
    c: Corruption,
    rng: &mut R,
) -> Vec<Vec<C64>> {
    streams
        .iter()
        .enumerate()
        .map(|(q, stream)| {
            let sched = scheduled(&link.alloc, q);
            if sched.is_empty() {
                return vec![C64::new(0.0, 0.0); stream.len()];
            }
            let mean = link.report.mean_mse(q);
            stream
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let mu = match c.shape {
                        NoiseShape::Isotropic => mean,
                        NoiseShape::PerResource => link.report.mse_per_re[q][sched[i % sched.len()]],
                    };
                    s + complex_gaussian(rng, mu) * c.sensitivity
                })
                .collect()
        })
        .collect()
}

/// Transmits the streams slot by slot over the resource grid; stream position
/// `i` of user `q` uses its `(i mod r_q)`-th scheduled RE in slot
/// `⌊i / r_q⌋`. Scheduled users without payload left send filler symbols.
fn simulated<R: Rng + ?Sized>(
    streams: &[&[C64]],
    link: &Uplink,
    c: Corruption,
    rng: &mut R,
) -> Result<Vec<Vec<C64>>> {
    let q_count = streams.len();
    let res = link.channels.resource_elements();
    let sched: Vec<Vec<usize>> = (0..q_count).map(|q| scheduled(&link.alloc, q)).collect();
    // rank[q][re] = position of `re` within user q's scheduled list.
    let mut rank = vec![vec![usize::MAX; res]; q_count];
    for q in 0..q_count {
        for (i, &re) in sched[q].iter().enumerate() {
            rank[q][re] = i;
        }
    }
    let slots = (0..q_count)
        .filter(|&q| !sched[q].is_empty())
        .map(|q| streams[q].len().div_ceil(sched[q].len()))
        .max()
        .unwrap_or(0);
    let jam_rx = Transceiver::new(&link.alloc, &link.channels, &link.strategy, c.sigma2)?;
    let silent = JammingStrategy::none(link.channels.jammer_antennas(), res);
    let clean_rx = Transceiver::new(&link.alloc, &link.channels, &silent, c.sigma2)?;
    let any_jammed = link.jammed.iter().any(|&j| j);
    let any_clean = link.jammed.iter().any(|&j| !j);
    let mut out: Vec<Vec<C64>> = streams.iter().map(|s| vec![C64::new(0.0, 0.0); s.len()]).collect();
    let mut column = vec![C64::new(0.0, 0.0); q_count];
    let mut slot_of = vec![None; q_count];
    for slot in 0..slots {
        for re in 0..res {
            for q in 0..q_count {
                slot_of[q] = None;
                column[q] = C64::new(0.0, 0.0);
                if rank[q][re] == usize::MAX {
                    continue;
                }
                let pos = slot * sched[q].len() + rank[q][re];
                if pos < streams[q].len() {
                    column[q] = streams[q][pos];
                    slot_of[q] = Some(pos);
                } else {
                    column[q] = complex_gaussian(rng, 1.0);
                }
            }
            let jam = if any_jammed { Some(jam_rx.receive_re(re, &column, rng)) } else { None };
            let clean = if any_clean { Some(clean_rx.receive_re(re, &column, rng)) } else { None };
            for q in 0..q_count {
                if let Some(pos) = slot_of[q] {
                    let est = if link.jammed[q] {
                        jam.as_ref().expect("jammed receiver")[q]
                    } else {
                        clean.as_ref().expect("clean receiver")[q]
                    };
                    let s = streams[q][pos];
                    out[q][pos] = s + (est - s) * c.sensitivity;
                }
            }
        }
    }
    Ok(out)
}

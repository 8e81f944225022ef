//! Scenario configuration.
//!
//! Files are small TOML documents with three flat sections (`[wireless]`,
//! `[training]`, `[scenario]`). Powers are written in dBm (plain numbers, or
//! strings such as `"30 dBm"`, `"1 W"`, `"0.5 mW"`), angles in degrees (plain
//! numbers, or `"20 deg"` / `"0.35 rad"`). Absent keys take the Table-I style
//! defaults of [`ScenarioConfig::default`].

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1000.0).log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// How the analytic corruption spreads the link MSE across embedding
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseShape {
    /// `C_ε = (MSE / E) · I`.
    Isotropic,
    /// Coordinate pairs inherit the per-resource MSE of the resource element
    /// that carries them, in transmission order.
    PerResource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionMode {
    Analytic,
    Simulated,
}

/// Toy split-learning parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingParams {
    pub vocab: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub classes: usize,
    /// Tokens per sample; the server head mean-pools their embeddings.
    pub seq_len: usize,
    pub samples_per_client: usize,
    pub eval_samples: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Gradient clipping threshold τ.
    pub clip_tau: f64,
    /// Multiplier on the embedding perturbation magnitude.
    pub noise_sensitivity: f64,
    pub corruption: CorruptionMode,
    pub noise_shape: NoiseShape,
    /// Target loss divergence ε_q used for the second outage rate.
    pub epsilon_target: f64,
    /// Sample pairs used to estimate the smoothness profile each round.
    pub smoothness_pairs: usize,
}

impl Default for TrainingParams {
    fn default() -> Self {
        Self {
            vocab: 64,
            embed_dim: 16,
            hidden: 32,
            classes: 2,
            seq_len: 7,
            samples_per_client: 192,
            eval_samples: 512,
            batch_size: 32,
            learning_rate: 0.2,
            clip_tau: 1.0,
            noise_sensitivity: 1.0,
            corruption: CorruptionMode::Analytic,
            noise_shape: NoiseShape::Isotropic,
            epsilon_target: 0.1,
            smoothness_pairs: 96,
        }
    }
}

/// Wireless and training parameters of one scenario, in linear units and
/// radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Q
    pub users: usize,
    /// N_T
    pub tx_antennas: usize,
    /// N_R
    pub rx_antennas: usize,
    /// N_J
    pub jammer_antennas: usize,
    /// P_q, watts
    pub user_power: f64,
    /// P_J, watts
    pub jammer_power: f64,
    /// σ², watts
    pub noise_power: f64,
    /// N
    pub subcarriers: usize,
    /// K
    pub symbols: usize,
    /// B_q; `None` means ⌊NK/Q⌋.
    pub max_blocks: Option<usize>,
    pub eta: f64,
    /// θ_Hq
    pub user_doa: f64,
    /// θ_J
    pub jammer_doa: f64,
    pub user_spread: f64,
    pub jammer_spread: f64,
    /// Half-width of the uniform departure-angle law at all transmitters.
    pub dod_spread: f64,
    /// L_H
    pub user_paths: usize,
    /// L_G
    pub jammer_paths: usize,
    pub path_loss_db: f64,
    pub carrier_hz: f64,
    /// T_s
    pub symbol_period: f64,
    /// Δf
    pub subcarrier_spacing: f64,
    /// Doppler shifts are drawn from U[−ν_max, ν_max].
    pub doppler_max: f64,
    pub seed: u64,
    pub n_rounds: usize,
    pub n_epochs: usize,
    pub training: TrainingParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            users: 3,
            tx_antennas: 8,
            rx_antennas: 16,
            jammer_antennas: 64,
            user_power: dbm_to_watts(5.0),
            jammer_power: dbm_to_watts(30.0),
            noise_power: dbm_to_watts(-3.0),
            subcarriers: 64,
            symbols: 14,
            max_blocks: None,
            eta: 10.0,
            user_doa: 0.0,
            jammer_doa: 20f64.to_radians(),
            user_spread: 10f64.to_radians(),
            jammer_spread: 5f64.to_radians(),
            dod_spread: 60f64.to_radians(),
            user_paths: 128,
            jammer_paths: 128,
            path_loss_db: 10.0,
            carrier_hz: 2.4e9,
            symbol_period: 1e-3 / 14.0,
            subcarrier_spacing: 15e3,
            doppler_max: 0.0,
            seed: 0,
            n_rounds: 10,
            n_epochs: 10,
            training: TrainingParams::default(),
        }
    }
}

impl ScenarioConfig {
    /// Number of resource elements N·K.
    pub fn resource_elements(&self) -> usize {
        self.subcarriers * self.symbols
    }

    /// B_q, defaulting to ⌊NK/Q⌋.
    pub fn blocks_per_user(&self) -> usize {
        self.max_blocks
            .unwrap_or(self.resource_elements() / self.users.max(1))
    }

    /// Checks every structural invariant of the configuration.
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: usize| {
            if v == 0 {
                Err(invalid(key, "must be at least 1"))
            } else {
                Ok(())
            }
        };
        positive("Q", self.users)?;
        positive("N_T", self.tx_antennas)?;
        positive("N_R", self.rx_antennas)?;
        positive("N_J", self.jammer_antennas)?;
        positive("N", self.subcarriers)?;
        positive("K", self.symbols)?;
        positive("L_H", self.user_paths)?;
        positive("L_G", self.jammer_paths)?;
        if self.blocks_per_user() > self.resource_elements() {
            return Err(invalid("B_q", "B_q ≤ N·K violated"));
        }
        if !(self.user_power > 0.0) {
            return Err(invalid("P_q", "P_q > 0 violated"));
        }
        if !(self.jammer_power >= 0.0) {
            return Err(invalid("P_J", "P_J ≥ 0 violated"));
        }
        if !(self.noise_power > 0.0) {
            return Err(invalid("sigma2", "sigma2 > 0 violated"));
        }
        if !(self.eta >= 0.0) {
            return Err(invalid("eta", "eta ≥ 0 violated"));
        }
        for (key, spread) in [
            ("spread_H", self.user_spread),
            ("spread_G", self.jammer_spread),
            ("spread_dod", self.dod_spread),
        ] {
            if !(spread >= 0.0) {
                return Err(invalid(key, "angle spreads must be nonnegative"));
            }
        }
        let open = |key: &str, centre: f64, spread: f64| {
            if centre - spread <= -FRAC_PI_2 || centre + spread >= FRAC_PI_2 {
                Err(invalid(key, "all angles must lie in (−90°, 90°)"))
            } else {
                Ok(())
            }
        };
        open("theta_H", self.user_doa, self.user_spread)?;
        open("theta_J", self.jammer_doa, self.jammer_spread)?;
        open("spread_dod", 0.0, self.dod_spread)?;
        let t = &self.training;
        positive("vocab", t.vocab)?;
        positive("hidden", t.hidden)?;
        positive("seq_len", t.seq_len)?;
        positive("batch_size", t.batch_size)?;
        positive("samples_per_client", t.samples_per_client)?;
        positive("eval_samples", t.eval_samples)?;
        if t.classes < 2 {
            return Err(invalid("classes", "need at least two classes"));
        }
        if t.embed_dim == 0 || t.embed_dim % 2 != 0 {
            return Err(invalid("embed_dim", "must be a positive even number"));
        }
        if !(t.clip_tau > 0.0) {
            return Err(invalid("clip_tau", "tau > 0 violated"));
        }
        if !(t.learning_rate > 0.0) {
            return Err(invalid("learning_rate", "must be positive"));
        }
        if !(t.noise_sensitivity >= 0.0) {
            return Err(invalid("noise_sensitivity", "must be nonnegative"));
        }
        Ok(())
    }
}

fn invalid(key: &str, reason: &str) -> Error {
    Error::InvalidValue {
        key: key.to_string(),
        reason: reason.to_string(),
    }
}

/// Reads and validates a configuration file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

/// Parses a configuration document; absent keys keep their defaults.
pub fn parse_config_str(text: &str) -> Result<ScenarioConfig> {
    let doc: Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    let mut cfg = ScenarioConfig::default();
    for (section, body) in &doc {
        let table = body
            .as_table()
            .ok_or_else(|| Error::UnknownKey(section.clone()))?;
        match section.as_str() {
            "wireless" => apply_wireless(&mut cfg, table)?,
            "training" => apply_training(&mut cfg, table)?,
            "scenario" => apply_scenario(&mut cfg, table)?,
            other => return Err(Error::UnknownKey(other.to_string())),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn apply_wireless(cfg: &mut ScenarioConfig, table: &Table) -> Result<()> {
    for (key, value) in table {
        let k = key.as_str();
        match k {
            "Q" => cfg.users = count(k, value)?,
            "N_T" => cfg.tx_antennas = count(k, value)?,
            "N_R" => cfg.rx_antennas = count(k, value)?,
            "N_J" => cfg.jammer_antennas = count(k, value)?,
            "P_q" => cfg.user_power = power(k, value)?,
            "P_J" => cfg.jammer_power = power(k, value)?,
            "sigma2" => cfg.noise_power = power(k, value)?,
            "N" => cfg.subcarriers = count(k, value)?,
            "K" => cfg.symbols = count(k, value)?,
            "B_q" => cfg.max_blocks = Some(count(k, value)?),
            "eta" => cfg.eta = real(k, value)?,
            "theta_H" => cfg.user_doa = angle(k, value)?,
            "theta_J" => cfg.jammer_doa = angle(k, value)?,
            "spread_H" => cfg.user_spread = angle(k, value)?,
            "spread_G" => cfg.jammer_spread = angle(k, value)?,
            "spread_dod" => cfg.dod_spread = angle(k, value)?,
            "L_H" => cfg.user_paths = count(k, value)?,
            "L_G" => cfg.jammer_paths = count(k, value)?,
            "path_loss_db" => cfg.path_loss_db = real(k, value)?,
            "f_c" => cfg.carrier_hz = real(k, value)?,
            "T_s" => cfg.symbol_period = real(k, value)?,
            "delta_f" => cfg.subcarrier_spacing = real(k, value)?,
            "doppler_max" => cfg.doppler_max = real(k, value)?,
            _ => return Err(Error::UnknownKey(format!("wireless.{k}"))),
        }
    }
    Ok(())
}

fn apply_training(cfg: &mut ScenarioConfig, table: &Table) -> Result<()> {
    let t = &mut cfg.training;
    for (key, value) in table {
        let k = key.as_str();
        match k {
            "n_rounds" => cfg.n_rounds = count(k, value)?,
            "n_epochs" => cfg.n_epochs = count(k, value)?,
            "vocab" => t.vocab = count(k, value)?,
            "embed_dim" => t.embed_dim = count(k, value)?,
            "hidden" => t.hidden = count(k, value)?,
            "classes" => t.classes = count(k, value)?,
            "seq_len" => t.seq_len = count(k, value)?,
            "samples_per_client" => t.samples_per_client = count(k, value)?,
            "eval_samples" => t.eval_samples = count(k, value)?,
            "batch_size" => t.batch_size = count(k, value)?,
            "learning_rate" => t.learning_rate = real(k, value)?,
            "clip_tau" => t.clip_tau = real(k, value)?,
            "noise_sensitivity" => t.noise_sensitivity = real(k, value)?,
            "epsilon_target" => t.epsilon_target = real(k, value)?,
            "smoothness_pairs" => t.smoothness_pairs = count(k, value)?,
            "corruption" => {
                t.corruption = match text(k, value)? {
                    "analytic" => CorruptionMode::Analytic,
                    "simulated" => CorruptionMode::Simulated,
                    other => return Err(invalid(k, &format!("unknown mode `{other}`"))),
                }
            }
            "noise_shape" => {
                t.noise_shape = match text(k, value)? {
                    "isotropic" => NoiseShape::Isotropic,
                    "per_resource" => NoiseShape::PerResource,
                    other => return Err(invalid(k, &format!("unknown shape `{other}`"))),
                }
            }
            _ => return Err(Error::UnknownKey(format!("training.{k}"))),
        }
    }
    Ok(())
}

fn apply_scenario(cfg: &mut ScenarioConfig, table: &Table) -> Result<()> {
    for (key, value) in table {
        match key.as_str() {
            "seed" => cfg.seed = count("seed", value)? as u64,
            other => return Err(Error::UnknownKey(format!("scenario.{other}"))),
        }
    }
    Ok(())
}

fn count(key: &str, v: &Value) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(invalid(key, "expected a nonnegative integer")),
    }
}

fn real(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Integer(i) => Ok(*i as f64),
        Value::Float(f) => Ok(*f),
        _ => Err(invalid(key, "expected a number")),
    }
}

fn text<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str().ok_or_else(|| invalid(key, "expected a string"))
}

/// Numbers are dBm; strings carry an explicit `dBm`, `W` or `mW` unit.
fn power(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::String(s) => {
            let (num, unit) = split_unit(key, s)?;
            match unit.to_ascii_lowercase().as_str() {
                "dbm" | "" => Ok(dbm_to_watts(num)),
                "w" => Ok(num),
                "mw" => Ok(num / 1000.0),
                other => Err(invalid(key, &format!("unknown power unit `{other}`"))),
            }
        }
        _ => Ok(dbm_to_watts(real(key, v)?)),
    }
}

/// Numbers are degrees; strings carry `deg` or `rad`.
fn angle(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::String(s) => {
            let (num, unit) = split_unit(key, s)?;
            match unit.to_ascii_lowercase().as_str() {
                "deg" | "°" | "" => Ok(num.to_radians()),
                "rad" => Ok(num),
                other => Err(invalid(key, &format!("unknown angle unit `{other}`"))),
            }
        }
        _ => Ok(real(key, v)?.to_radians()),
    }
}

fn split_unit<'a>(key: &str, s: &'a str) -> Result<(f64, &'a str)> {
    let s = s.trim();
    let split = s
        .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == '-' || c == '+' || c == 'e' || c == 'E'))
        .unwrap_or(s.len());
    // "1e-3 W" style exponents are fine, but a trailing unit starting with `e` is not expected.
    let (num, unit) = s.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| invalid(key, &format!("cannot parse `{s}`")))?;
    Ok((value, unit.trim()))
}

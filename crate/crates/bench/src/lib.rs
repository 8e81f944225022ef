//! Fixtures shared by the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rsfl_core::channel::{realize_channels, sample_doas};
use rsfl_core::config::{parse_config_str, ScenarioConfig};
use rsfl_core::linalg::{scaled_identity, CMatrix};
use rsfl_core::ChannelSet;

/// Reference antennas and powers on an `n × k` grid.
pub fn config(n: usize, k: usize) -> ScenarioConfig {
    parse_config_str(&format!("[wireless]\nN = {n}\nK = {k}\n")).expect("static config")
}

/// Channels drawn with a fixed seed.
pub fn channels(cfg: &ScenarioConfig, seed: u64) -> ChannelSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let doas = sample_doas(cfg, &mut rng);
    realize_channels(cfg, &doas, &mut rng).expect("valid config")
}

pub fn white_noise(cfg: &ScenarioConfig) -> Vec<CMatrix> {
    vec![scaled_identity(cfg.rx_antennas, cfg.noise_power); cfg.resource_elements()]
}

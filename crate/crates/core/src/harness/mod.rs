//! Desk-scale split federated learning: synthetic data, a toy split model,
//! the scenario uplinks and the training loop with FedAvg aggregation.

pub mod data;
pub mod link;
pub mod model;
pub mod symbols;
pub mod train;

pub use data::{ClientData, Sample, TokenTask};
pub use link::{draw_uplink, transport, Corruption, Scenario, Uplink};
pub use model::{fedavg, Gradients, HeadLoss, ToyModel};
pub use symbols::SymbolMap;
pub use train::{run_training, RoundMetrics};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent RNG stream for a `(seed, labels…)` tuple.
pub fn stream_rng(seed: u64, labels: &[u64]) -> ChaCha8Rng {
    let mut h = splitmix(seed);
    for &l in labels {
        h = splitmix(h ^ splitmix(l.wrapping_add(0x9e37_79b9)));
    }
    ChaCha8Rng::seed_from_u64(h)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

//! Simulation and optimization library for jamming-resilient split federated
//! learning over MIMO-OFDM uplinks.
//!
//! The crate covers channel generation ([`channel`]), the uplink chain
//! ([`phy`]), anti-jamming resource allocation ([`optimizer`]), jamming
//! strategies ([`adversary`]), loss-divergence and outage bounds
//! ([`bounds`]), and a toy split-learning harness ([`harness`]) driven by
//! [`experiment`].

pub mod adversary;
pub mod bounds;
pub mod channel;
pub mod config;
pub mod error;
pub mod experiment;
pub mod harness;
pub mod linalg;
pub mod optimizer;
pub mod phy;
pub mod verify;

pub use channel::{ChannelSet, Doas, PathParams};
pub use config::{ScenarioConfig, TrainingParams};
pub use error::{Error, Result};
pub use optimizer::{OptimizerReport, SurrogateCov};
pub use phy::{Allocation, JammerKind, JammingStrategy, LinkReport};

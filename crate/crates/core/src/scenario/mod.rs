//! Scenario description: configuration, geometry, channel draws and NOMA
//! user ordering.

pub mod channels;
pub mod config;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use channels::{generate_channels, order_users, path_gain, rician_vector, ChannelSet};
pub use config::{Preset, SystemConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Independent random streams of one experiment cell. Every stream is a
/// ChaCha8 generator seeded with the cell seed; the stream id selects the
/// purpose, so channels and initial phases stay paired across baselines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RngStream {
    Channels = 0,
    Init = 1,
    Baseline = 2,
    MonteCarlo = 3,
}

pub fn rng_for(seed: u64, stream: RngStream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

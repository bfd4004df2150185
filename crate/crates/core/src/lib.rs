pub mod metrics;
pub mod numerics;
pub mod scenario;
pub mod receive_filter;
pub mod active_beamforming;
mod sca;
pub mod passive_beamforming;
pub mod orchestrator;

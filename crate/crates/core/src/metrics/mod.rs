//! Closed-form evaluation of a candidate design: SINRs, rates, radar SNR,
//! constraint residuals and the radiated beampattern.
//!
//! Users are 0-based and sorted strongest first (user 0 has the largest
//! aggregated channel gain). Column `K` of the beamforming matrix is the
//! dedicated sensing beam.

pub mod comm;
pub mod feasibility;
pub mod radar;
pub mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::cmatrix::{CMatrix, C64};

pub use comm::{
    aggregate_user_channel, sinr_decode, sum_rate, sum_rate_for, user_sinr, user_sinr_for, Decoded,
};
pub use feasibility::{check_feasible, check_feasible_for, ConstraintFamily, FeasibilityReport};
pub use radar::{
    composite_target_matrix, radar_snr_lb, radar_snr_mc, sensing_direction, McEstimate,
};
pub use report::{beampattern, RateReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("domain error: {0}")]
    Domain(String),
}

/// How users share the channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccessScheme {
    /// Power-domain NOMA with SIC: the sensing stream is removed first, then
    /// weaker users' streams, then the own stream is decoded.
    Noma,
    /// Every other stream, including the sensing beam, is noise.
    TreatInterferenceAsNoise,
}

/// Which constraint families and rate expressions apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemKind {
    pub scheme: AccessScheme,
    /// Radar SNR constraints and the sensing beam are active.
    pub sensing: bool,
}

impl ProblemKind {
    pub const JOINT: ProblemKind = ProblemKind {
        scheme: AccessScheme::Noma,
        sensing: true,
    };
}

impl Default for ProblemKind {
    fn default() -> Self {
        Self::JOINT
    }
}

/// Auxiliary epigraph variables of the rate surrogate, in physical units
/// (natural log of watts).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuxVars {
    /// Indexed by user; entry 0 is unused under NOMA.
    pub eta: Vec<f64>,
    pub tau: Vec<f64>,
    pub zeta1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Design {
    /// M × (K+1): columns w_1..w_K then the sensing beam.
    pub w: CMatrix,
    /// RIS reflection coefficients, one per element.
    pub v: Vec<C64>,
    /// Receive filters, one per target, each of length M·(K+1).
    pub u: Vec<Vec<C64>>,
    pub aux: AuxVars,
}

impl Design {
    pub fn k(&self) -> usize {
        self.w.cols() - 1
    }

    pub fn total_power(&self) -> f64 {
        self.w.frobenius_norm_sqr()
    }

    /// Sets every RIS coefficient to unit modulus.
    pub fn project_unit_modulus(&mut self) {
        for x in &mut self.v {
            let r = x.norm();
            *x = if r > 0.0 { *x / r } else { C64::new(1.0, 0.0) };
        }
    }
}

use super::{AccessScheme, Design, MetricsError, ProblemKind};
use crate::numerics::cmatrix::{dotu, C64};
use crate::scenario::channels::cascaded_row;
use crate::scenario::{ChannelSet, SystemConfig};

/// `h_{d,k}ᴴ + h_{r,k}ᴴ·diag(v)·G` as a row of length M.
pub fn aggregate_user_channel(ch: &ChannelSet, v: &[C64], k: usize) -> Vec<C64> {
    cascaded_row(&ch.h_d[k], &ch.h_r[k], &ch.g_mat, v)
}

/// Stream decoded at a receiver.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decoded {
    User(usize),
    Sensing,
}

/// Received powers `|H_kᴴ w_j|²` of every column at user `k`.
pub(crate) fn received_powers(ch: &ChannelSet, design: &Design, k: usize) -> Vec<f64> {
    let row = aggregate_user_channel(ch, &design.v, k);
    (0..design.w.cols())
        .map(|j| dotu(&row, design.w.col(j)).norm_sqr())
        .collect()
}

/// SINR at user `k` when decoding stream `j` under SIC.
///
/// The sensing stream goes first and sees every user stream as
/// interference. User stream `j ≥ k` sees streams `0..j` as interference.
/// Decoding a stronger user's stream (`j < k`) is outside the SIC order.
pub fn sinr_decode(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    design: &Design,
    k: usize,
    j: Decoded,
) -> Result<f64, MetricsError> {
    let kk = design.k();
    if k >= kk {
        return Err(MetricsError::Domain(format!(
            "user {k} out of range (K = {kk})"
        )));
    }
    let p = received_powers(ch, design, k);
    let noise = cfg.noise_user(k);
    match j {
        Decoded::Sensing => Ok(p[kk] / (p[..kk].iter().sum::<f64>() + noise)),
        Decoded::User(j) if j >= kk => Err(MetricsError::Domain(format!(
            "stream {j} out of range (K = {kk})"
        ))),
        Decoded::User(j) if j < k => Err(MetricsError::Domain(format!(
            "user {k} cannot decode stronger user {j} before its own stream"
        ))),
        Decoded::User(j) => Ok(p[j] / (p[..j].iter().sum::<f64>() + noise)),
    }
}

/// Own-stream SINR γ_k under SIC.
pub fn user_sinr(cfg: &SystemConfig, ch: &ChannelSet, design: &Design, k: usize) -> f64 {
    sinr_decode(cfg, ch, design, k, Decoded::User(k)).expect("own stream is always decodable")
}

/// Own-stream SINR under the given access scheme.
pub fn user_sinr_for(
    kind: ProblemKind,
    cfg: &SystemConfig,
    ch: &ChannelSet,
    design: &Design,
    k: usize,
) -> f64 {
    match kind.scheme {
        AccessScheme::Noma => user_sinr(cfg, ch, design, k),
        AccessScheme::TreatInterferenceAsNoise => {
            let p = received_powers(ch, design, k);
            let interference: f64 = p
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != k)
                .map(|(_, x)| x)
                .sum();
            p[k] / (interference + cfg.noise_user(k))
        }
    }
}

/// Σ_k log₂(1 + γ_k) under SIC.
pub fn sum_rate(cfg: &SystemConfig, ch: &ChannelSet, design: &Design) -> f64 {
    sum_rate_for(ProblemKind::JOINT, cfg, ch, design)
}

pub fn sum_rate_for(
    kind: ProblemKind,
    cfg: &SystemConfig,
    ch: &ChannelSet,
    design: &Design,
) -> f64 {
    (0..design.k())
        .map(|k| (1.0 + user_sinr_for(kind, cfg, ch, design, k)).log2())
        .sum()
}

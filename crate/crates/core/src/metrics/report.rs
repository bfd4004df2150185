use std::io::Write;

use serde::{Deserialize, Serialize};

use super::comm::{sinr_decode, user_sinr_for, Decoded};
use super::feasibility::{check_feasible_for, FeasibilityReport};
use super::radar::radar_snr_lb;
use super::{Design, ProblemKind};
use crate::numerics::cmatrix::dotu;
use crate::scenario::channels::{cascaded_row, probe_channels};
use crate::scenario::config::Point;
use crate::scenario::{ChannelSet, ScenarioError, SystemConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub sinr: Vec<f64>,
    /// `decode_sinr[k][j]`: stream `j ≥ k` decoded at user `k`; `NaN` for
    /// `j < k`.
    pub decode_sinr: Vec<Vec<f64>>,
    /// Sensing stream decoded at each user.
    pub sensing_sinr: Vec<f64>,
    pub rate: Vec<f64>,
    pub sum_rate: f64,
    pub snr_lb: Vec<f64>,
    pub feasibility: FeasibilityReport,
}

impl RateReport {
    pub fn evaluate(
        kind: ProblemKind,
        cfg: &SystemConfig,
        ch: &ChannelSet,
        design: &Design,
        tol: f64,
    ) -> Self {
        let kk = design.k();
        let sinr: Vec<f64> = (0..kk)
            .map(|k| user_sinr_for(kind, cfg, ch, design, k))
            .collect();
        let decode_sinr = (0..kk)
            .map(|k| {
                (0..kk)
                    .map(|j| sinr_decode(cfg, ch, design, k, Decoded::User(j)).unwrap_or(f64::NAN))
                    .collect()
            })
            .collect();
        let sensing_sinr = (0..kk)
            .map(|k| sinr_decode(cfg, ch, design, k, Decoded::Sensing).expect("k in range"))
            .collect();
        let rate: Vec<f64> = sinr.iter().map(|g| (1.0 + g).log2()).collect();
        let sum_rate = rate.iter().sum();
        let snr_lb = (0..ch.l())
            .map(|l| radar_snr_lb(cfg, ch, design, l))
            .collect();
        let feasibility = check_feasible_for(kind, cfg, ch, design, tol);
        Self {
            sinr,
            decode_sinr,
            sensing_sinr,
            rate,
            sum_rate,
            snr_lb,
            feasibility,
        }
    }

    /// One row per user (`entity = user`, `index`, `sinr`, `rate`,
    /// `sensing_sinr`) then one per target (`entity = target`, `index`,
    /// `snr_lb`).
    pub fn write_csv(&self, out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["entity", "index", "sinr", "rate", "sensing_sinr", "snr_lb"])?;
        for k in 0..self.sinr.len() {
            w.write_record([
                "user".to_string(),
                k.to_string(),
                self.sinr[k].to_string(),
                self.rate[k].to_string(),
                self.sensing_sinr[k].to_string(),
                String::new(),
            ])?;
        }
        for (l, s) in self.snr_lb.iter().enumerate() {
            w.write_record([
                "target".to_string(),
                l.to_string(),
                String::new(),
                String::new(),
                String::new(),
                s.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Radiated energy `‖(h_dᴴ(p) + h_rᴴ(p) Φ G) W‖²` at each point, with
/// deterministic line-of-sight probe channels.
pub fn beampattern(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    design: &Design,
    points: &[Point],
) -> Result<Vec<f64>, ScenarioError> {
    use rayon::prelude::*;
    points
        .par_iter()
        .map(|&p| {
            let (h_d, h_r) = probe_channels(cfg, p)?;
            let row = cascaded_row(&h_d, &h_r, &ch.g_mat, &design.v);
            Ok((0..design.w.cols())
                .map(|j| dotu(&row, design.w.col(j)).norm_sqr())
                .sum())
        })
        .collect()
}

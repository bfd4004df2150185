use serde::{Deserialize, Serialize};

use super::comm::{received_powers, sinr_decode, user_sinr_for, Decoded};
use super::radar::radar_snr_lb;
use super::{AccessScheme, Design, ProblemKind};
use crate::numerics::cmatrix::norm_sqr;
use crate::scenario::{ChannelSet, SystemConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintFamily {
    /// Radar SNR lower bound ≥ Γ_l, residual `snr/Γ − 1`.
    RadarSnr,
    /// Minimum decode SINR of each stream ≥ r_th, residual `sinr/r_th − 1`.
    DecodeSinr,
    /// |v_n| = 1, residual `−max | |v_n| − 1 |`.
    UnitModulus,
    /// Σ‖w‖² ≤ P_th, residual `1 − power/P_th`.
    TransmitPower,
    /// ‖u_l‖ = 1, residual `−max | ‖u_l‖ − 1 |`.
    FilterNorm,
    /// SIC received-power ordering, residual `(a − b)/max(a, b, σ_k²)`.
    SicOrder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyResidual {
    pub family: ConstraintFamily,
    /// Worst signed residual; negative means violated.
    pub worst: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub tol: f64,
    pub families: Vec<FamilyResidual>,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.families.iter().all(|f| f.worst >= -self.tol)
    }

    pub fn violated(&self) -> Vec<ConstraintFamily> {
        self.families
            .iter()
            .filter(|f| f.worst < -self.tol)
            .map(|f| f.family)
            .collect()
    }

    pub fn worst(&self, family: ConstraintFamily) -> Option<f64> {
        self.families
            .iter()
            .find(|f| f.family == family)
            .map(|f| f.worst)
    }

    /// Smallest residual over all families.
    pub fn min_residual(&self) -> f64 {
        self.families
            .iter()
            .map(|f| f.worst)
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn check_feasible(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    design: &Design,
    tol: f64,
) -> FeasibilityReport {
    check_feasible_for(ProblemKind::JOINT, cfg, ch, design, tol)
}

pub fn check_feasible_for(
    kind: ProblemKind,
    cfg: &SystemConfig,
    ch: &ChannelSet,
    design: &Design,
    tol: f64,
) -> FeasibilityReport {
    let kk = design.k();
    let mut families = Vec::new();
    // without targets the sensing beam is pinned to zero
    let sensing = kind.sensing && ch.l() > 0;

    if sensing {
        let worst = (0..ch.l())
            .map(|l| radar_snr_lb(cfg, ch, design, l) / cfg.snr_threshold(l) - 1.0)
            .fold(f64::INFINITY, f64::min);
        families.push(FamilyResidual {
            family: ConstraintFamily::RadarSnr,
            worst: finite_or_zero(worst),
        });
        let worst = design
            .u
            .iter()
            .map(|u| -(norm_sqr(u).sqrt() - 1.0).abs())
            .fold(0.0, f64::min);
        families.push(FamilyResidual {
            family: ConstraintFamily::FilterNorm,
            worst,
        });
    }

    let worst = match kind.scheme {
        AccessScheme::Noma => (1..kk)
            .map(|k| {
                let min_dec = (0..=k)
                    .map(|j| sinr_decode(cfg, ch, design, j, Decoded::User(k)).expect("j <= k"))
                    .fold(f64::INFINITY, f64::min);
                min_dec / cfg.sinr_threshold(k) - 1.0
            })
            .fold(f64::INFINITY, f64::min),
        AccessScheme::TreatInterferenceAsNoise => (0..kk)
            .map(|k| user_sinr_for(kind, cfg, ch, design, k) / cfg.sinr_threshold(k) - 1.0)
            .fold(f64::INFINITY, f64::min),
    };
    families.push(FamilyResidual {
        family: ConstraintFamily::DecodeSinr,
        worst: finite_or_zero(worst),
    });

    let worst = design
        .v
        .iter()
        .map(|x| -(x.norm() - 1.0).abs())
        .fold(0.0, f64::min);
    families.push(FamilyResidual {
        family: ConstraintFamily::UnitModulus,
        worst,
    });

    let worst = 1.0 - design.total_power() / cfg.p_max();
    families.push(FamilyResidual {
        family: ConstraintFamily::TransmitPower,
        worst,
    });

    if kind.scheme == AccessScheme::Noma {
        let mut worst = f64::INFINITY;
        for k in 0..kk {
            let p = received_powers(ch, design, k);
            let floor = cfg.noise_user(k);
            let mut pair = |a: f64, b: f64| {
                worst = worst.min((a - b) / a.max(b).max(floor));
            };
            // sensing ≥ K-1 ≥ … ≥ k, then k ≥ every stronger user's stream.
            if sensing {
                pair(p[kk], p[kk - 1]);
            }
            for j in (k..kk - 1).rev() {
                pair(p[j + 1], p[j]);
            }
            for i in 0..k {
                pair(p[k], p[i]);
            }
        }
        families.push(FamilyResidual {
            family: ConstraintFamily::SicOrder,
            worst: finite_or_zero(worst),
        });
    }

    FeasibilityReport { tol, families }
}

fn finite_or_zero(x: f64) -> f64 {
    if x == f64::INFINITY {
        0.0
    } else {
        x
    }
}

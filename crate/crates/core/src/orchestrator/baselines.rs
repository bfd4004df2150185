use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ao_solve, initialize_with_phases, AoOptions, OrchestratorError, Scenario, SolveTrace};
use crate::metrics::{AccessScheme, Design, ProblemKind};
use crate::numerics::cmatrix::C64;
use crate::passive_beamforming::PhaseProjection;
use crate::scenario::{ChannelSet, SystemConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineKind {
    Proposed,
    /// Radar constraints and the sensing beam removed.
    CommOnly,
    /// Phases restricted to a `2^bits` grid.
    DiscretePhase(u32),
    /// Random phases kept fixed.
    RandomPhase,
    /// No RIS.
    WithoutRis,
    /// Every other stream is noise; per-user SINR constraints, no SIC order.
    WithoutNoma,
}

impl BaselineKind {
    pub fn problem_kind(self) -> ProblemKind {
        match self {
            BaselineKind::CommOnly => ProblemKind { scheme: AccessScheme::Noma, sensing: false },
            BaselineKind::WithoutNoma => ProblemKind { scheme: AccessScheme::TreatInterferenceAsNoise, sensing: true },
            _ => ProblemKind::JOINT,
        }
    }

    pub fn all(bits: u32) -> [BaselineKind; 6] {
        [
            BaselineKind::Proposed,
            BaselineKind::CommOnly,
            BaselineKind::DiscretePhase(bits),
            BaselineKind::RandomPhase,
            BaselineKind::WithoutRis,
            BaselineKind::WithoutNoma,
        ]
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaselineKind::Proposed => write!(f, "proposed"),
            BaselineKind::CommOnly => write!(f, "comm_only"),
            BaselineKind::DiscretePhase(b) => write!(f, "discrete_phase_{b}bit"),
            BaselineKind::RandomPhase => write!(f, "random_phase"),
            BaselineKind::WithoutRis => write!(f, "without_ris"),
            BaselineKind::WithoutNoma => write!(f, "without_noma"),
        }
    }
}

impl FromStr for BaselineKind {
    type Err = String;

    /// Accepts the display names plus `discrete`, `discrete:<bits>` and
    /// `discrete_phase` (3 bits).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase().replace('-', "_");
        let parse_bits = |b: &str| -> Result<u32, String> {
            let bits: u32 = b.parse().map_err(|_| format!("bad bit depth '{b}'"))?;
            if bits == 0 {
                return Err("discrete phase needs at least 1 bit".into());
            }
            Ok(bits)
        };
        Ok(match s.as_str() {
            "proposed" => BaselineKind::Proposed,
            "comm_only" | "commonly" => BaselineKind::CommOnly,
            "random_phase" | "randomphase" => BaselineKind::RandomPhase,
            "without_ris" | "withoutris" | "no_ris" => BaselineKind::WithoutRis,
            "without_noma" | "withoutnoma" | "no_noma" => BaselineKind::WithoutNoma,
            "discrete" | "discrete_phase" | "discretephase" => BaselineKind::DiscretePhase(3),
            other => {
                if let Some(b) = other.strip_prefix("discrete:") {
                    BaselineKind::DiscretePhase(parse_bits(b)?)
                } else if let Some(b) = other.strip_prefix("discrete_phase_").and_then(|r| r.strip_suffix("bit")) {
                    BaselineKind::DiscretePhase(parse_bits(b)?)
                } else {
                    return Err(format!("unknown baseline '{other}'"));
                }
            }
        })
    }
}

/// Result of one baseline on one scenario, evaluated against the
/// configuration and channels that baseline actually used.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineRun {
    pub kind: BaselineKind,
    pub cfg: SystemConfig,
    pub ch: ChannelSet,
    pub design: Design,
    pub trace: SolveTrace,
}

fn solve_from(
    kind: BaselineKind,
    cfg: &SystemConfig,
    ch: &ChannelSet,
    v: &[C64],
    opts: AoOptions,
) -> Result<BaselineRun, OrchestratorError> {
    let (init, rounds) = initialize_with_phases(opts.kind, cfg, ch, v)?;
    let (design, mut trace) = ao_solve(cfg, ch, init, opts);
    trace.restoration_rounds = rounds;
    Ok(BaselineRun { kind, cfg: cfg.clone(), ch: ch.clone(), design, trace })
}

/// Runs one baseline on a prepared scenario. `CommOnly` starts from the
/// proposed design (sensing beam dropped), which it first computes unless
/// `proposed` is supplied.
pub fn run_baseline(
    kind: BaselineKind,
    sc: &Scenario,
    proposed: Option<&BaselineRun>,
) -> Result<BaselineRun, OrchestratorError> {
    let cfg = &sc.cfg;
    let ch = &sc.ch;
    let pk = kind.problem_kind();
    let opts = AoOptions { kind: pk, ..AoOptions::default() };
    match kind {
        BaselineKind::Proposed | BaselineKind::WithoutNoma => solve_from(kind, cfg, ch, &sc.v0, opts),
        BaselineKind::CommOnly => {
            let owned;
            let base = match proposed {
                Some(p) => p,
                None => {
                    owned = run_baseline(BaselineKind::Proposed, sc, None)?;
                    &owned
                }
            };
            let mut init = base.design.clone();
            let k = ch.k();
            init.w.set_col(k, &vec![C64::new(0.0, 0.0); ch.m()]);
            let (design, trace) = ao_solve(cfg, ch, init, opts);
            Ok(BaselineRun { kind, cfg: cfg.clone(), ch: ch.clone(), design, trace })
        }
        BaselineKind::DiscretePhase(bits) => {
            let projection = PhaseProjection::Discrete(bits);
            let mut v = sc.v0.clone();
            projection.apply(&mut v);
            solve_from(kind, cfg, ch, &v, AoOptions { projection, ..opts })
        }
        BaselineKind::RandomPhase => solve_from(kind, cfg, ch, &sc.v0, AoOptions { update_phases: false, ..opts }),
        BaselineKind::WithoutRis => {
            let mut cfg = cfg.clone();
            cfg.n = 0;
            solve_from(kind, &cfg, &ch.without_ris(), &[], AoOptions { update_phases: false, ..opts })
        }
    }
}

/// Runs several baselines on one scenario, computing the proposed design at
/// most once.
/// Copy of a shared error that keeps the infeasible/other distinction.
fn reraise(e: &OrchestratorError) -> OrchestratorError {
    match e {
        OrchestratorError::InfeasibleScenario(m) => OrchestratorError::InfeasibleScenario(m.clone()),
        other => OrchestratorError::Other(other.to_string()),
    }
}

pub fn run_baselines(kinds: &[BaselineKind], sc: &Scenario) -> Vec<(BaselineKind, Result<BaselineRun, OrchestratorError>)> {
    let need_proposed = kinds.iter().any(|k| matches!(k, BaselineKind::Proposed | BaselineKind::CommOnly));
    let proposed = need_proposed.then(|| run_baseline(BaselineKind::Proposed, sc, None));
    kinds
        .iter()
        .map(|&k| {
            let r = match (k, &proposed) {
                (BaselineKind::Proposed, Some(Ok(p))) => Ok(p.clone()),
                (BaselineKind::Proposed | BaselineKind::CommOnly, Some(Err(e))) => Err(reraise(e)),
                (BaselineKind::CommOnly, Some(Ok(p))) => run_baseline(k, sc, Some(p)),
                _ => run_baseline(k, sc, None),
            };
            (k, r)
        })
        .collect()
}

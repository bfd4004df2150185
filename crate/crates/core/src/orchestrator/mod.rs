//! Alternating optimization driver, baselines, experiment sweeps and
//! beampattern export.
//!
//! One AO iteration solves the beamforming step, refreshes the receive
//! filters in closed form and then solves the RIS phase step. Each step is
//! accepted only if it keeps the design feasible and does not lower the
//! sum rate, so the recorded rate trace never decreases.

pub mod baselines;
pub mod beampattern;
pub mod experiment;
pub mod selftest;

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::active_beamforming::{build_p3, solve_p3, P3Linearization, P3Objective};
use crate::metrics::radar::target_row;
use crate::metrics::{aggregate_user_channel, check_feasible_for, sum_rate_for, AuxVars, ConstraintFamily, Design, ProblemKind};
use crate::numerics::cmatrix::{norm_sqr, CMatrix, C64};
use crate::numerics::SolveError;
use crate::passive_beamforming::{build_p7, solve_p7, AffinizationError, PhaseProjection};
use crate::receive_filter::{update_filters, FilterError};
use crate::scenario::channels::generate_channels;
use crate::scenario::{order_users, rng_for, ChannelSet, RngStream, ScenarioError, SystemConfig};

pub use baselines::{run_baseline, run_baselines, BaselineKind};
pub use beampattern::{emit_beampattern, GridSpec};
pub use experiment::{run_experiment, ExperimentSpec, SummaryRow};

/// Feasibility tolerance for accepting intermediate iterates.
pub const STEP_TOL: f64 = 1e-6;
/// Feasibility tolerance for a converged design.
pub const OUTPUT_TOL: f64 = 1e-5;
const RESTORATION_ROUNDS: usize = 10;
const RESTORATION_CAP: f64 = 0.05;

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("infeasible scenario: {0}")]
    InfeasibleScenario(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Affinization(#[from] AffinizationError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    MaxIters,
    FailedFeasibility,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIters => "max_iters",
            SolveStatus::FailedFeasibility => "failed_feasibility",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Beamforming-step surrogate objective in nats.
    pub surrogate: f64,
    /// True sum rate in bits/s/Hz after the iteration.
    pub sum_rate: f64,
    pub residuals: Vec<(ConstraintFamily, f64)>,
    pub rho: f64,
    /// Largest CCP slack of the phase step (0 without a phase step).
    pub max_slack: f64,
    pub phase_step_accepted: bool,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub initial_sum_rate: f64,
    pub restoration_rounds: usize,
    pub iterations: Vec<IterationRecord>,
    pub status: SolveStatus,
    pub message: Option<String>,
}

impl SolveTrace {
    pub fn sum_rates(&self) -> Vec<f64> {
        std::iter::once(self.initial_sum_rate).chain(self.iterations.iter().map(|r| r.sum_rate)).collect()
    }
}

/// What the AO loop optimizes and how phases are handled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AoOptions {
    pub kind: ProblemKind,
    /// Run the phase step; `false` keeps `v` fixed.
    pub update_phases: bool,
    pub projection: PhaseProjection,
}

impl Default for AoOptions {
    fn default() -> Self {
        Self { kind: ProblemKind::JOINT, update_phases: true, projection: PhaseProjection::Continuous }
    }
}

/// A channel draw with users relabelled strongest first.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub cfg: SystemConfig,
    pub ch: ChannelSet,
    /// Initial phases (before any baseline-specific change).
    pub v0: Vec<C64>,
    /// `perm[rank] = original user index`.
    pub perm: Vec<usize>,
}

impl Scenario {
    /// Draws channels and initial phases for `seed` and orders the users by
    /// their aggregated gain under those phases.
    pub fn draw(cfg: &SystemConfig, seed: u64) -> Result<Self, ScenarioError> {
        let mut cfg = cfg.clone();
        cfg.seed = seed;
        let mut ch = generate_channels(&cfg, &mut rng_for(seed, RngStream::Channels))?;
        let v0 = random_phases(cfg.n, &mut rng_for(seed, RngStream::Init));
        let perm = order_users(&ch, &v0);
        ch.permute_users(&perm);
        cfg.permute_users(&perm);
        Ok(Self { cfg, ch, v0, perm })
    }
}

pub fn random_phases(n: usize, rng: &mut impl Rng) -> Vec<C64> {
    (0..n).map(|_| C64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU))).collect()
}

/// Matched-filter beams with equal power, the given phases and optimal
/// filters. No feasibility guarantee.
pub fn matched_design(kind: ProblemKind, cfg: &SystemConfig, ch: &ChannelSet, v: &[C64]) -> Design {
    let (m, k) = (ch.m(), ch.k());
    let sensing = kind.sensing && ch.l() > 0;
    let beams = if sensing { k + 1 } else { k };
    let per = (cfg.p_max() / beams as f64).sqrt();
    let mut w = CMatrix::zeros(m, k + 1);
    let unit = |row: Vec<C64>| -> Vec<C64> {
        let n = norm_sqr(&row).sqrt();
        if n > 0.0 {
            row.iter().map(|x| x.conj() / n * per).collect()
        } else {
            vec![C64::new(per / (m as f64).sqrt(), 0.0); m]
        }
    };
    for i in 0..k {
        w.set_col(i, &unit(aggregate_user_channel(ch, v, i)));
    }
    if sensing {
        let mut dir = vec![C64::new(0.0, 0.0); m];
        for l in 0..ch.l() {
            let row = target_row(ch, v, l);
            let n = norm_sqr(&row).sqrt().max(f64::MIN_POSITIVE);
            for (d, x) in dir.iter_mut().zip(row) {
                *d += x / n;
            }
        }
        w.set_col(k, &unit(dir));
    }
    let mut design = Design { w, v: v.to_vec(), u: vec![Vec::new(); ch.l()], aux: AuxVars::default() };
    if update_filters(ch, &mut design).is_err() {
        design.u = (0..ch.l()).map(|_| unit_filter(m * (k + 1))).collect();
    }
    design
}

fn unit_filter(len: usize) -> Vec<C64> {
    vec![C64::new(1.0 / (len as f64).sqrt(), 0.0); len]
}

/// Starting point of the AO loop: uniform random phases, matched beams and
/// optimal filters, repaired by up to ten rounds of slack maximization when
/// infeasible.
pub fn initialize(
    kind: ProblemKind,
    cfg: &SystemConfig,
    ch: &ChannelSet,
    rng: &mut impl Rng,
) -> Result<(Design, usize), OrchestratorError> {
    let v = random_phases(ch.n(), rng);
    initialize_with_phases(kind, cfg, ch, &v)
}

/// As [`initialize`] with given phases. Returns the design and the number of
/// restoration rounds used.
pub fn initialize_with_phases(
    kind: ProblemKind,
    cfg: &SystemConfig,
    ch: &ChannelSet,
    v: &[C64],
) -> Result<(Design, usize), OrchestratorError> {
    if !(cfg.p_max() > 0.0) {
        return Err(OrchestratorError::InfeasibleScenario("no transmit power".into()));
    }
    let mut design = matched_design(kind, cfg, ch, v);
    if check_feasible_for(kind, cfg, ch, &design, STEP_TOL).feasible() {
        return Ok((design, 0));
    }
    restore(kind, cfg, ch, &mut design)
        .map(|rounds| (design, rounds))
}

/// Repairs `design` in place by maximizing the smallest normalized slack of
/// the beamforming constraints.
pub fn restore(kind: ProblemKind, cfg: &SystemConfig, ch: &ChannelSet, design: &mut Design) -> Result<usize, OrchestratorError> {
    let settings = cfg.solver_settings();
    for round in 1..=RESTORATION_ROUNDS {
        let lin = P3Linearization::new(kind, cfg, ch, design);
        let prog = build_p3(&lin, P3Objective::Restoration { cap: RESTORATION_CAP });
        let sol = match solve_p3(&prog, &settings) {
            Ok(s) => s,
            Err(e) => {
                return Err(OrchestratorError::InfeasibleScenario(format!("restoration round {round}: {e}")));
            }
        };
        design.w = sol.w;
        if kind.sensing && ch.l() > 0 && update_filters(ch, design).is_err() {
            continue;
        }
        if check_feasible_for(kind, cfg, ch, design, STEP_TOL).feasible() {
            return Ok(round);
        }
    }
    let worst = check_feasible_for(kind, cfg, ch, design, STEP_TOL);
    Err(OrchestratorError::InfeasibleScenario(format!(
        "still infeasible after {RESTORATION_ROUNDS} restoration rounds: {:?}",
        worst.violated()
    )))
}

/// Alternating optimization from a feasible `init`.
pub fn ao_solve(cfg: &SystemConfig, ch: &ChannelSet, init: Design, opts: AoOptions) -> (Design, SolveTrace) {
    let kind = opts.kind;
    let settings = cfg.solver_settings();
    let mut design = init;
    let mut rate = sum_rate_for(kind, cfg, ch, &design);
    let mut trace = SolveTrace {
        initial_sum_rate: rate,
        restoration_rounds: 0,
        iterations: Vec::new(),
        status: SolveStatus::MaxIters,
        message: None,
    };
    let mut rho = cfg.ccp_penalty.rho0;
    let mut prev_obj = rate * std::f64::consts::LN_2;
    let phases = opts.update_phases && ch.n() > 0;

    for it in 1..=cfg.max_ao_iters {
        let start = Instant::now();

        let lin = P3Linearization::new(kind, cfg, ch, &design);
        let prog = build_p3(&lin, P3Objective::SumRate);
        let sol = match solve_p3(&prog, &settings) {
            Ok(s) => s,
            Err(e) => {
                trace.status = SolveStatus::FailedFeasibility;
                trace.message = Some(format!("beamforming step, iteration {it}: {e}"));
                break;
            }
        };
        let surrogate = sol.objective;
        let mut cand = design.clone();
        cand.w = sol.w;
        cand.aux = sol.aux;
        let filters_ok = !(kind.sensing && ch.l() > 0) || update_filters(ch, &mut cand).is_ok();
        if filters_ok
            && check_feasible_for(kind, cfg, ch, &cand, STEP_TOL).feasible()
            && sum_rate_for(kind, cfg, ch, &cand) >= rate
        {
            design = cand;
            rate = sum_rate_for(kind, cfg, ch, &design);
        }

        let mut max_slack = 0.0;
        let mut accepted = false;
        if phases {
            let step = build_p7(kind, cfg, ch, &design, rho)
                .map_err(OrchestratorError::from)
                .and_then(|p| {
                    solve_p7(&p, cfg, ch, &design, opts.projection, STEP_TOL, &settings).map_err(OrchestratorError::from)
                });
            match step {
                Ok(out) => {
                    max_slack = out.max_slack;
                    accepted = out.accepted;
                    if out.accepted {
                        design = out.design;
                        rate = sum_rate_for(kind, cfg, ch, &design);
                    }
                }
                Err(e) => {
                    // a failed phase step keeps the previous phases
                    trace.message = Some(format!("phase step, iteration {it}: {e}"));
                }
            }
            rho = (rho * cfg.ccp_penalty.rho_growth).min(cfg.ccp_penalty.rho_max);
        }

        let report = check_feasible_for(kind, cfg, ch, &design, STEP_TOL);
        trace.iterations.push(IterationRecord {
            iteration: it,
            surrogate,
            sum_rate: rate,
            residuals: report.families.iter().map(|f| (f.family, f.worst)).collect(),
            rho,
            max_slack,
            phase_step_accepted: accepted,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });

        if ((surrogate - prev_obj) / prev_obj.abs().max(1e-12)).abs() < cfg.epsilon_conv {
            trace.status = SolveStatus::Converged;
            break;
        }
        prev_obj = surrogate;
    }

    if trace.status != SolveStatus::FailedFeasibility
        && !check_feasible_for(kind, cfg, ch, &design, OUTPUT_TOL).feasible()
    {
        trace.status = SolveStatus::FailedFeasibility;
        trace.message.get_or_insert_with(|| "final design violates a constraint".into());
    }
    (design, trace)
}

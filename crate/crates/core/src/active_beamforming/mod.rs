//! Transmit beamforming update: one successive-convex-approximation step in
//! `W` for fixed RIS phases and receive filters.
//!
//! The program works in normalized units so its data sit near 1:
//!
//! * `w̄ = W/√P_th`, hence the power constraint is `‖w̄‖ ≤ 1`;
//! * `r̄_k = √P_th·H_kᴴ/σ_k`, hence `|r̄_k w̄_j|²` is the power of stream `j`
//!   at user `k` in units of that user's noise;
//! * rate epigraph variables are shifted by `ln σ_k²` (the reported aux
//!   values undo the shift).
//!
//! Every concave-side quadratic `|r̄ w̄|²` is replaced by its tangent plane at
//! the anchor, which under-estimates it, while convex-side quadratics stay
//! exact second-order cones. A point feasible for the program is therefore
//! feasible for the original constraints.

use crate::metrics::radar::{target_column, target_row};
use crate::metrics::{aggregate_user_channel, AccessScheme, AuxVars, Design, ProblemKind};
use crate::numerics::cmatrix::{dotc, dotu, CMatrix, C64};
use crate::numerics::{
    push_quadratic_le, solve_or_relax, CAffine, ConeKind, ConicProgram, LinExpr, SolveError,
    SolverSettings,
};
use crate::sca::CommModel;
pub use crate::sca::sic_pairs;
use crate::scenario::{ChannelSet, SystemConfig};

/// First-order lower bound of `|h·w|²` around `ŵ`, as an affine expression
/// of the complex variable vector `w` stored at `base`:
/// `2 Re{conj(h ŵ)·h w} − |h ŵ|²`.
pub fn taylor_lb_quadratic(h: &[C64], w_hat: &[C64], base: usize) -> LinExpr {
    CAffine::dot_vars(h, base).taylor_lower_bound(dotu(h, w_hat))
}

/// Adds `Σ_i |h·w_i|² + σ² ≤ Δ` for the variable vectors at `bases`, as the
/// cone `‖[2h w_1, …, 2σ, Δ − 1]‖ ≤ Δ + 1` (after dividing by `scale`).
pub fn soc_interference_constraint(
    p: &mut ConicProgram,
    h: &[C64],
    bases: &[usize],
    sigma2: f64,
    delta: LinExpr,
    scale: f64,
    label: impl Into<String>,
) {
    let terms: Vec<CAffine> = bases.iter().map(|&b| CAffine::dot_vars(h, b)).collect();
    push_quadratic_le(p, &terms, sigma2, delta, scale, label);
}

#[derive(Clone, Debug, PartialEq)]
pub struct TargetLin {
    /// Coefficients `c` with `u_lᴴ(I ⊗ G_l) vec(W) = Σ_i c_i vec(W)_i`.
    pub coef: Vec<C64>,
    /// `Γ_l ε_l² u_lᴴu_l / (Q σ_l²)`: required `|u_lᴴ(I ⊗ G_l) vec(W)|²`.
    pub delta2: f64,
}

/// Everything `build_p3` needs from the current AO iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct P3Linearization {
    pub kind: ProblemKind,
    pub m: usize,
    pub k: usize,
    pub p_max: f64,
    /// Normalized anchor columns `ŵ_j/√P_th`, sensing beam last.
    pub anchor: Vec<Vec<C64>>,
    /// Normalized user rows `√P_th·H_kᴴ/σ_k`.
    pub rows: Vec<Vec<C64>>,
    pub noise: Vec<f64>,
    pub sinr_threshold: Vec<f64>,
    /// Normalized `τ̂_k = ln(Σ_{i∈I_k} |r̄_k ŵ_i|² + 1)`; `None` when user `k`
    /// sees no interference.
    pub tau_hat: Vec<Option<f64>>,
    pub targets: Vec<TargetLin>,
}

impl P3Linearization {
    /// Linearizes around `design.w`. Radar constraints are only active when
    /// `kind.sensing` is set and there is at least one target; otherwise the
    /// sensing beam is pinned to zero.
    pub fn new(kind: ProblemKind, cfg: &SystemConfig, ch: &ChannelSet, design: &Design) -> Self {
        let kind = ProblemKind { sensing: kind.sensing && ch.l() > 0, ..kind };
        let (m, k) = (ch.m(), ch.k());
        let p_max = cfg.p_max();
        let sp = p_max.sqrt();
        let anchor = (0..=k).map(|j| design.w.col(j).iter().map(|x| x / sp).collect()).collect();
        let noise: Vec<f64> = (0..k).map(|i| cfg.noise_user(i)).collect();
        let rows = (0..k)
            .map(|i| {
                let s = sp / noise[i].sqrt();
                aggregate_user_channel(ch, &design.v, i).into_iter().map(|x| x * s).collect()
            })
            .collect();
        let targets = if kind.sensing {
            (0..ch.l())
                .map(|l| {
                    let a = target_column(ch, &design.v, l);
                    let b = target_row(ch, &design.v, l);
                    let u = &design.u[l];
                    let mut coef = Vec::with_capacity(m * (k + 1));
                    for j in 0..=k {
                        let ua = dotc(&u[j * m..(j + 1) * m], &a);
                        coef.extend(b.iter().map(|x| ua * x));
                    }
                    let uu: f64 = u.iter().map(|x| x.norm_sqr()).sum();
                    let delta2 =
                        cfg.snr_threshold(l) * cfg.noise_radar(l) * uu / (cfg.q as f64 * cfg.rcs(l));
                    TargetLin { coef, delta2 }
                })
                .collect()
        } else {
            Vec::new()
        };
        let mut lin = Self {
            kind,
            m,
            k,
            p_max,
            anchor,
            rows,
            noise,
            sinr_threshold: (0..k).map(|i| cfg.sinr_threshold(i)).collect(),
            tau_hat: Vec::new(),
            targets,
        };
        lin.tau_hat = (0..k)
            .map(|i| {
                let set = lin.interference_set(i);
                (!set.is_empty()).then(|| (set.iter().map(|&j| lin.anchor_power(i, j)).sum::<f64>() + 1.0).ln())
            })
            .collect();
        lin
    }

    pub fn sensing(&self) -> bool {
        self.kind.sensing
    }

    /// Columns carrying signal: users, plus the sensing beam when active.
    pub fn active_columns(&self) -> Vec<usize> {
        (0..self.k).chain(self.sensing().then_some(self.k)).collect()
    }

    /// Streams treated as interference when user `k` decodes its own.
    pub fn interference_set(&self, k: usize) -> Vec<usize> {
        match self.kind.scheme {
            AccessScheme::Noma => (0..k).collect(),
            AccessScheme::TreatInterferenceAsNoise => self.active_columns().into_iter().filter(|&j| j != k).collect(),
        }
    }

    /// Normalized received power `|r̄_k ŵ_j|²` at the anchor.
    pub fn anchor_power(&self, k: usize, j: usize) -> f64 {
        dotu(&self.rows[k], &self.anchor[j]).norm_sqr()
    }

    pub fn base(&self, j: usize) -> usize {
        2 * self.m * j
    }

    pub(crate) fn comm_model(&self) -> CommModel {
        CommModel {
            scheme: self.kind.scheme,
            sensing: self.sensing(),
            k: self.k,
            streams: (0..self.k)
                .map(|i| (0..=self.k).map(|j| CAffine::dot_vars(&self.rows[i], self.base(j))).collect())
                .collect(),
            anchor: (0..self.k).map(|i| self.anchor.iter().map(|w| dotu(&self.rows[i], w)).collect()).collect(),
            sinr_threshold: self.sinr_threshold.clone(),
        }
    }

    /// Normalized radar expression `√(P/Δ2)·u_lᴴ(I ⊗ G_l) vec(W)`.
    fn radar(&self, l: usize) -> CAffine {
        let t = &self.targets[l];
        let s = (self.p_max / t.delta2).sqrt();
        let coef: Vec<C64> = t.coef.iter().map(|x| x * s).collect();
        CAffine::dot_vars(&coef, 0)
    }

    fn radar_anchor(&self, l: usize) -> C64 {
        let t = &self.targets[l];
        let s = (self.p_max / t.delta2).sqrt();
        let flat: Vec<C64> = self.anchor.iter().flatten().copied().collect();
        dotu(&t.coef, &flat) * s
    }
}

/// What the program maximizes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum P3Objective {
    /// Sum-rate surrogate `Σ(η_k − τ_k)` (with `ζ₁` as `η_0` under NOMA).
    SumRate,
    /// Smallest normalized constraint slack `t`, capped at `cap`; power stays
    /// a hard constraint. Used to find a feasible starting point.
    Restoration { cap: f64 },
}

#[derive(Clone, Debug)]
pub struct P3Program {
    pub program: ConicProgram,
    pub lin: P3Linearization,
    pub objective: P3Objective,
    pub eta: Vec<Option<usize>>,
    pub tau: Vec<Option<usize>>,
    pub slack: Option<usize>,
}

pub fn build_p3(lin: &P3Linearization, objective: P3Objective) -> P3Program {
    let (m, k) = (lin.m, lin.k);
    let nw = 2 * m * (k + 1);
    let mut p = ConicProgram::new(nw);

    if !lin.sensing() {
        let b = lin.base(k);
        p.push(ConeKind::Zero, (b..b + 2 * m).map(LinExpr::var).collect(), "sensing beam off");
    }
    p.push_soc(LinExpr::constant(1.0), (0..nw).map(LinExpr::var).collect(), "power");

    let slack = match objective {
        P3Objective::Restoration { cap } => {
            let t = p.add_vars(1);
            p.push_nonneg(LinExpr::term(t, -1.0).plus_const(cap), "slack cap");
            p.objective = LinExpr::var(t);
            Some(t)
        }
        P3Objective::SumRate => None,
    };

    for l in 0..lin.targets.len() {
        let e_hat = lin.radar_anchor(l);
        let s = e_hat.norm_sqr().max(1.0);
        // |e|² ≥ 1 tightened to its tangent plane
        let mut g = lin.radar(l).taylor_lower_bound(e_hat).plus_const(-1.0).scaled(1.0 / s);
        if let Some(t) = slack {
            g.push(t, -1.0);
        }
        p.push_nonneg(g, format!("radar snr target {l}"));
    }

    let vars = lin.comm_model().push(&mut p, objective == P3Objective::SumRate, slack);
    P3Program { program: p, lin: lin.clone(), objective, eta: vars.eta, tau: vars.tau, slack }
}

#[derive(Clone, Debug, PartialEq)]
pub struct P3Solution {
    /// Physical beamformer, sensing beam last.
    pub w: CMatrix,
    pub aux: AuxVars,
    /// Sum-rate surrogate in nats, or the slack `t` for restoration.
    pub objective: f64,
    pub max_residual: f64,
}

pub fn solve_p3(prog: &P3Program, settings: &SolverSettings) -> Result<P3Solution, SolveError> {
    let sol = solve_or_relax(&prog.program, settings)?;
    Ok(extract(prog, &sol.primal, sol.objective_value, sol.max_residual))
}

/// Maps a primal vector of `prog` back to physical units.
pub fn extract(prog: &P3Program, x: &[f64], objective: f64, max_residual: f64) -> P3Solution {
    let lin = &prog.lin;
    let sp = lin.p_max.sqrt();
    let w = CMatrix::from_fn(lin.m, lin.k + 1, |r, c| {
        let b = lin.base(c) + 2 * r;
        C64::new(x[b], x[b + 1]) * sp
    });
    let ln_noise: Vec<f64> = lin.noise.iter().map(|s| s.ln()).collect();
    let eta: Vec<f64> = (0..lin.k).map(|i| prog.eta[i].map_or(0.0, |e| x[e]) + ln_noise[i]).collect();
    let tau: Vec<f64> = (0..lin.k).map(|i| prog.tau[i].map_or(0.0, |t| x[t]) + ln_noise[i]).collect();
    let zeta1 = eta.first().copied().unwrap_or(0.0);
    P3Solution { w, aux: AuxVars { eta, tau, zeta1 }, objective, max_residual }
}

/// Primal vector of `prog` at the anchor, with aux variables at their
/// tightest values and the restoration slack at `t`.
pub fn anchor_point(prog: &P3Program, t: f64) -> Vec<f64> {
    let lin = &prog.lin;
    let mut x = vec![0.0; prog.program.num_vars];
    for (j, col) in lin.anchor.iter().enumerate() {
        if j == lin.k && !lin.sensing() {
            continue;
        }
        for (r, z) in col.iter().enumerate() {
            x[lin.base(j) + 2 * r] = z.re;
            x[lin.base(j) + 2 * r + 1] = z.im;
        }
    }
    let (eta, tau) = lin.comm_model().anchor_aux();
    for i in 0..lin.k {
        if let (Some(e), Some(v)) = (prog.eta[i], eta[i]) {
            x[e] = v;
        }
        if let (Some(t), Some(v)) = (prog.tau[i], tau[i]) {
            x[t] = v;
        }
    }
    if let Some(s) = prog.slack {
        x[s] = t;
    }
    x
}

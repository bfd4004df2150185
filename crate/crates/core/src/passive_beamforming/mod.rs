//! RIS phase update: one penalty convex-concave step in `v` for fixed
//! beamformer and receive filters.
//!
//! Every communication amplitude is affine in `v`, so the rate, SINR and
//! SIC-order constraints reuse the construction of the beamforming step.
//! The radar term is quadratic in `v` (the RIS appears on both the forward
//! and the return path) and is replaced by a conservative affine bound
//! built in [`SensingAffinization`]. Unit modulus is handled with slacks:
//! `|v_n|² ≤ 1 + b_n` and its tangent `2Re{v̂_n* v_n} − |v̂_n|² ≥ 1 − b_n`,
//! with `ρ Σ b_n` subtracted from the objective.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::metrics::{check_feasible_for, sum_rate_for, AuxVars, Design, ProblemKind};
use crate::numerics::cmatrix::{dotc, dotu, max_eig_symmetric, CMatrix, C64};
use crate::numerics::{push_quadratic_le, solve_or_relax, CAffine, ConicProgram, LinExpr, SolveError, SolverSettings};
use crate::receive_filter::update_filters;
use crate::sca::CommModel;
use crate::scenario::{ChannelSet, SystemConfig};

/// Per-(user, column) coefficients `[h_{r,i}ᴴ diag(G w_j), h_{d,i}ᴴ w_j]`,
/// so that the received amplitude is `coef[..N]·v + coef[N]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveChannels {
    pub n: usize,
    /// Indexed `[user][column]`, each of length `N + 1`.
    pub coef: Vec<Vec<Vec<C64>>>,
}

impl EffectiveChannels {
    /// Received amplitude of column `j` at user `i` for phases `v`.
    pub fn amplitude(&self, i: usize, j: usize, v: &[C64]) -> C64 {
        let c = &self.coef[i][j];
        dotu(&c[..self.n], v) + c[self.n]
    }
}

pub fn build_effective_channels(ch: &ChannelSet, w: &CMatrix) -> EffectiveChannels {
    let n = ch.n();
    let gw: Vec<Vec<C64>> = (0..w.cols()).map(|j| if n > 0 { ch.g_mat.mul_vec(w.col(j)) } else { Vec::new() }).collect();
    let coef = (0..ch.k())
        .map(|i| {
            (0..w.cols())
                .map(|j| {
                    let mut c: Vec<C64> = ch.h_r[i].iter().zip(&gw[j]).map(|(h, g)| h.conj() * g).collect();
                    c.push(dotc(&ch.h_d[i], w.col(j)));
                    c
                })
                .collect()
        })
        .collect();
    EffectiveChannels { n, coef }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AffinizationError {
    #[error("target {target}: {which} identity off by {error:.3e} (relative)")]
    Contract { target: usize, which: &'static str, error: f64 },
}

/// Decomposition of the radar filter output in `v` and the conservative
/// affine form of its SNR constraint around `v̂`.
///
/// With `s(v) = u_lᴴ (I ⊗ G_l(v)) vec(W)`:
///
/// * `(I ⊗ G_l(v)) vec(W) = c₀ + F v + L vec(v vᵀ)`;
/// * `u_lᴴ L vec(v vᵀ) = vᵀ L̃ v` (reshape contract);
/// * `Re{vᵀ L̃ v} = −v̄ᵀ L̄ v̄` with `v̄ = [Re v; Im v]` and
///   `L̄ = [[−Re L̃, Im L̃], [Im L̃, Re L̃]]` (real-embedding contract).
///
/// The bilinear form is `vᵀ L̃ v`, not `vᴴ L̃ v`: the RIS phases enter both
/// factors of `G_l` unconjugated.
///
/// With `λ = λ_max(L̄ + L̄ᵀ) ≥ 0`, `v̄ᵀL̄v̄ ≤ v̂ᵀ(L̄ + L̄ᵀ − λI)v̄ − v̂ᵀL̄v̂ + λN`
/// whenever `‖v̄‖² = N`; an extra `½λ Σ b_n` keeps it valid for
/// `‖v̄‖² ≤ N + Σ b_n`. The radar requirement `Re{s(v)} ≥ Δ₃` then
/// follows from `Re{ũᴴ v} + ½λ Σ b_n ≤ Δ₄`.
#[derive(Clone, Debug, PartialEq)]
pub struct SensingAffinization {
    pub target: usize,
    /// `M(K+1) × N`.
    pub f: CMatrix,
    /// `M(K+1) × N²`, column `n + N n'` multiplies `v_n v_{n'}`.
    pub l: CMatrix,
    pub l_tilde: CMatrix,
    /// `2N × 2N`, row-major.
    pub l_bar: Vec<f64>,
    pub lambda: f64,
    /// `u_lᴴ c₀`, its real part is the direct-path contribution.
    pub direct: C64,
    /// `u_lᴴ F`, the linear part of `s(v)`.
    pub linear: Vec<C64>,
    pub delta3: f64,
    pub delta4: f64,
    pub u_tilde: Vec<C64>,
    pub anchor: Vec<C64>,
    /// Receive filter the decomposition was built with.
    pub filter: Vec<C64>,
}

const CONTRACT_PROBES: usize = 50;
const CONTRACT_TOL: f64 = 1e-10;

impl SensingAffinization {
    pub fn n(&self) -> usize {
        self.anchor.len()
    }

    /// `s(v) = u_lᴴ c₀ + u_lᴴ F v + vᵀ L̃ v`.
    pub fn filter_output(&self, v: &[C64]) -> C64 {
        self.direct + dotu(&self.linear, v) + bilinear(&self.l_tilde, v)
    }

    /// `v̄ᵀ L̄ v̄`.
    pub fn embedded_quadratic(&self, v: &[C64]) -> f64 {
        let vb = embed(v);
        quad_form(&self.l_bar, &vb)
    }

    /// Right-hand side of the second-order bound on `v̄ᵀ L̄ v̄`, assuming
    /// `‖v̄‖² = N`.
    pub fn quadratic_upper_bound(&self, v: &[C64]) -> f64 {
        let n = self.n();
        let vb = embed(v);
        let vh = embed(&self.anchor);
        let mut lin = 0.0;
        for r in 0..2 * n {
            let mut row = 0.0;
            for c in 0..2 * n {
                row += (self.l_bar[r * 2 * n + c] + self.l_bar[c * 2 * n + r]) * vb[c];
            }
            lin += vh[r] * (row - self.lambda * vb[r]);
        }
        lin - quad_form(&self.l_bar, &vh) + self.lambda * n as f64
    }

    /// `Re{ũᴴ v}`; the affinized constraint is `Re{ũᴴ v} ≤ Δ₄` for unit
    /// modulus `v`.
    pub fn affine_value(&self, v: &[C64]) -> f64 {
        dotc(&self.u_tilde, v).re
    }

    /// Exact constraint value `Re{s(v)} − Δ₃`.
    pub fn exact_margin(&self, v: &[C64]) -> f64 {
        self.filter_output(v).re - self.delta3
    }

    /// `Δ₄ − Re{ũᴴ v}`, a lower bound on [`Self::exact_margin`] for unit
    /// modulus `v`, equal to it at the anchor.
    pub fn affine_margin(&self, v: &[C64]) -> f64 {
        self.delta4 - self.affine_value(v)
    }

    /// Checks both identities on random unit-modulus probes.
    pub fn verify_contracts(&self, rng: &mut impl Rng) -> Result<(), AffinizationError> {
        let n = self.n();
        let mut reshape_err = 0.0_f64;
        let mut embed_err = 0.0_f64;
        for _ in 0..CONTRACT_PROBES {
            let v: Vec<C64> = (0..n).map(|_| C64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU))).collect();
            let outer: Vec<C64> = (0..n * n).map(|idx| v[idx % n] * v[idx / n]).collect();
            let via_l = dotc(&self.filter, &self.l.mul_vec(&outer));
            let via_tilde = bilinear(&self.l_tilde, &v);
            let scale = via_l.norm().max(via_tilde.norm()).max(f64::MIN_POSITIVE);
            reshape_err = reshape_err.max((via_l - via_tilde).norm() / scale);
            let re = via_tilde.re;
            let emb = -self.embedded_quadratic(&v);
            embed_err = embed_err.max((re - emb).abs() / re.abs().max(emb.abs()).max(scale));
        }
        if reshape_err > CONTRACT_TOL {
            return Err(AffinizationError::Contract { target: self.target, which: "reshape", error: reshape_err });
        }
        if embed_err > CONTRACT_TOL {
            return Err(AffinizationError::Contract { target: self.target, which: "real-embedding", error: embed_err });
        }
        Ok(())
    }
}

fn embed(v: &[C64]) -> Vec<f64> {
    v.iter().map(|x| x.re).chain(v.iter().map(|x| x.im)).collect()
}

fn quad_form(a: &[f64], x: &[f64]) -> f64 {
    let n = x.len();
    (0..n).map(|r| x[r] * (0..n).map(|c| a[r * n + c] * x[c]).sum::<f64>()).sum()
}

fn bilinear(a: &CMatrix, v: &[C64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for c in 0..a.cols() {
        let col: C64 = (0..a.rows()).map(|r| v[r] * a[(r, c)]).sum();
        acc += col * v[c];
    }
    acc
}

/// Builds the decomposition for target `l` around `v_hat` and checks its
/// contracts.
pub fn build_sensing_affinization(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    w: &CMatrix,
    u: &[C64],
    v_hat: &[C64],
    l: usize,
) -> Result<SensingAffinization, AffinizationError> {
    let (m, n, kk1) = (ch.m(), ch.n(), w.cols());
    // a(v) = g_d + A v with A[:, n] = g_{r,n}·conj(G[n, :])ᵀ
    // b(v)w_j = β_j + B_j v with B_j[n] = conj(g_{r,n})·(G w_j)_n
    let gd = &ch.g_d[l];
    let gr = &ch.g_r[l];
    let a_mat = CMatrix::from_fn(m, n, |r, c| gr[c] * ch.g_mat[(c, r)].conj());
    let beta: Vec<C64> = (0..kk1).map(|j| dotc(gd, w.col(j))).collect();
    let b_rows: Vec<Vec<C64>> = (0..kk1)
        .map(|j| {
            let gw = ch.g_mat.mul_vec(w.col(j));
            gr.iter().zip(gw).map(|(g, x)| g.conj() * x).collect()
        })
        .collect();

    let rows = m * kk1;
    let mut f = CMatrix::zeros(rows, n);
    let mut lm = CMatrix::zeros(rows, n * n);
    let mut c0 = vec![C64::new(0.0, 0.0); rows];
    for j in 0..kk1 {
        for r in 0..m {
            let row = j * m + r;
            c0[row] = gd[r] * beta[j];
            for c in 0..n {
                f[(row, c)] = gd[r] * b_rows[j][c] + beta[j] * a_mat[(r, c)];
                for c2 in 0..n {
                    lm[(row, c + n * c2)] = a_mat[(r, c)] * b_rows[j][c2];
                }
            }
        }
    }
    let direct = dotc(u, &c0);
    let linear: Vec<C64> = (0..n).map(|c| (0..rows).map(|r| u[r].conj() * f[(r, c)]).sum()).collect();
    let ul: Vec<C64> = (0..n * n).map(|c| (0..rows).map(|r| u[r].conj() * lm[(r, c)]).sum()).collect();
    let l_tilde = CMatrix::from_fn(n, n, |r, c| ul[r + n * c]);

    let dim = 2 * n;
    let mut l_bar = vec![0.0; dim * dim];
    for r in 0..n {
        for c in 0..n {
            let z = l_tilde[(r, c)];
            l_bar[r * dim + c] = -z.re;
            l_bar[r * dim + n + c] = z.im;
            l_bar[(n + r) * dim + c] = z.im;
            l_bar[(n + r) * dim + n + c] = z.re;
        }
    }
    let sym: Vec<f64> = (0..dim * dim).map(|idx| l_bar[idx] + l_bar[(idx % dim) * dim + idx / dim]).collect();
    let lambda = if n == 0 { 0.0 } else { max_eig_symmetric(dim, &sym).expect("square").max(0.0) };

    let uu: f64 = u.iter().map(|x| x.norm_sqr()).sum();
    let delta3 = (cfg.snr_threshold(l) * cfg.noise_radar(l) * uu / (cfg.q as f64 * cfg.rcs(l))).sqrt();

    // Re{s(v)} ≥ d + Re{ℓᵀv} − [v̂ᵀ(M̄ − λI)v̄ − f(v̂) + λN]
    let vh = embed(v_hat);
    let mut grad = vec![0.0; dim];
    for r in 0..dim {
        let mut acc = 0.0;
        for c in 0..dim {
            acc += sym[c * dim + r] * vh[c];
        }
        grad[r] = acc - lambda * vh[r];
    }
    let u_tilde: Vec<C64> =
        (0..n).map(|i| C64::new(grad[i] - linear[i].re, grad[n + i] + linear[i].im)).collect();
    let f_hat = quad_form(&l_bar, &vh);
    let delta4 = direct.re + f_hat - lambda * n as f64 - delta3;

    let aff = SensingAffinization {
        target: l,
        f,
        l: lm,
        l_tilde,
        l_bar,
        lambda,
        direct,
        linear,
        delta3,
        delta4,
        u_tilde,
        anchor: v_hat.to_vec(),
        filter: u.to_vec(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ l as u64);
    aff.verify_contracts(&mut rng)?;
    Ok(aff)
}

/// How solved phases are mapped back onto the feasible set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseProjection {
    /// `v_n / |v_n|`.
    Continuous,
    /// Nearest point of the uniform `2^bits` phase grid.
    Discrete(u32),
}

impl PhaseProjection {
    pub fn apply(self, v: &mut [C64]) {
        for x in v.iter_mut() {
            let r = x.norm();
            *x = if r > 0.0 { *x / r } else { C64::new(1.0, 0.0) };
            if let PhaseProjection::Discrete(bits) = self {
                *x = quantize_phase(*x, bits);
            }
        }
    }
}

/// Nearest phase on the grid `{2π q / 2^bits}`.
pub fn quantize_phase(x: C64, bits: u32) -> C64 {
    let levels = f64::from(1u32 << bits.min(30));
    let step = std::f64::consts::TAU / levels;
    let q = (x.arg() / step).round();
    C64::from_polar(1.0, q * step)
}

#[derive(Clone, Debug)]
pub struct P7Program {
    pub program: ConicProgram,
    pub kind: ProblemKind,
    pub n: usize,
    pub eta: Vec<Option<usize>>,
    pub tau: Vec<Option<usize>>,
    /// First CCP slack variable; slacks are contiguous.
    pub slack_base: usize,
    pub affinizations: Vec<SensingAffinization>,
    pub noise: Vec<f64>,
    anchor_eta: Vec<Option<f64>>,
    anchor_tau: Vec<Option<f64>>,
}

/// Builds the phase subproblem around `design.v` for penalty `rho`.
pub fn build_p7(
    kind: ProblemKind,
    cfg: &SystemConfig,
    ch: &ChannelSet,
    design: &Design,
    rho: f64,
) -> Result<P7Program, AffinizationError> {
    let kind = ProblemKind { sensing: kind.sensing && ch.l() > 0, ..kind };
    let n = ch.n();
    let k = ch.k();
    let v_hat = &design.v;
    let eff = build_effective_channels(ch, &design.w);
    let noise: Vec<f64> = (0..k).map(|i| cfg.noise_user(i)).collect();

    let mut p = ConicProgram::new(2 * n);
    let model = CommModel {
        scheme: kind.scheme,
        sensing: kind.sensing,
        k,
        streams: (0..k)
            .map(|i| {
                let s = 1.0 / noise[i].sqrt();
                (0..=k)
                    .map(|j| {
                        let c = &eff.coef[i][j];
                        let coef: Vec<C64> = c[..n].iter().map(|x| x * s).collect();
                        CAffine::dot_vars(&coef, 0).plus_const(c[n] * s)
                    })
                    .collect()
            })
            .collect(),
        anchor: (0..k)
            .map(|i| (0..=k).map(|j| eff.amplitude(i, j, v_hat) / noise[i].sqrt()).collect())
            .collect(),
        sinr_threshold: (0..k).map(|i| cfg.sinr_threshold(i)).collect(),
    };
    let vars = model.push(&mut p, true, None);
    let (anchor_eta, anchor_tau) = model.anchor_aux();

    let slack_base = p.add_vars(n);
    for i in 0..n {
        let b = slack_base + i;
        p.push_nonneg(LinExpr::var(b), format!("ccp slack {i}"));
        let vi = CAffine::dot_vars(&[C64::new(1.0, 0.0)], 2 * i);
        push_quadratic_le(&mut p, &[vi.clone()], 0.0, LinExpr::var(b).plus_const(1.0), 1.0, format!("modulus upper {i}"));
        let mut lower = vi.taylor_lower_bound(v_hat[i]);
        lower.push(b, 1.0);
        p.push_nonneg(lower.plus_const(-1.0), format!("modulus lower {i}"));
        p.objective.push(b, -rho);
    }

    let mut affinizations = Vec::new();
    if kind.sensing {
        for l in 0..ch.l() {
            let aff = build_sensing_affinization(cfg, ch, &design.w, &design.u[l], v_hat, l)?;
            let s = aff.delta3.max(f64::MIN_POSITIVE);
            // (Δ₄ − Re{ũᴴv} − ½λΣb)/Δ₃ ≥ 0
            let mut g = LinExpr::constant(aff.delta4 / s);
            for (i, ut) in aff.u_tilde.iter().enumerate() {
                g.push(2 * i, -ut.re / s);
                g.push(2 * i + 1, -ut.im / s);
                g.push(slack_base + i, -0.5 * aff.lambda / s);
            }
            p.push_nonneg(g, format!("radar snr target {l}"));
            affinizations.push(aff);
        }
    }

    Ok(P7Program { program: p, kind, n, eta: vars.eta, tau: vars.tau, slack_base, affinizations, noise, anchor_eta, anchor_tau })
}

#[derive(Clone, Debug, PartialEq)]
pub struct P7Outcome {
    /// Design with the accepted phases (the anchor phases when rejected)
    /// and filters re-optimized for them.
    pub design: Design,
    pub accepted: bool,
    /// Fraction of the step toward the solution that was kept.
    pub step: f64,
    /// Surrogate objective of the solved program, penalty included.
    pub objective: f64,
    /// Largest CCP slack at the solution.
    pub max_slack: f64,
    pub max_residual: f64,
}

/// Halvings tried when the full phase step is rejected.
const BACKTRACK_STEPS: usize = 5;

/// Solves `prog`, projects the phases and keeps them only if the projected
/// design is feasible within `tol` and does not lower the sum rate. A
/// rejected step is retried along the segment toward the solution, halving
/// the step each time.
pub fn solve_p7(
    prog: &P7Program,
    cfg: &SystemConfig,
    ch: &ChannelSet,
    design: &Design,
    projection: PhaseProjection,
    tol: f64,
    settings: &SolverSettings,
) -> Result<P7Outcome, SolveError> {
    let sol = solve_or_relax(&prog.program, settings)?;
    let x = &sol.primal;
    let target: Vec<C64> = (0..prog.n).map(|i| C64::new(x[2 * i], x[2 * i + 1])).collect();
    let max_slack = (0..prog.n).map(|i| x[prog.slack_base + i]).fold(0.0, f64::max);
    let base_rate = sum_rate_for(prog.kind, cfg, ch, design);

    let mut step = 1.0;
    let mut accepted = None;
    for _ in 0..=BACKTRACK_STEPS {
        let mut v: Vec<C64> = design.v.iter().zip(&target).map(|(a, b)| a + (b - a) * step).collect();
        projection.apply(&mut v);
        let mut candidate = design.clone();
        candidate.v = v;
        let filters_ok = update_filters(ch, &mut candidate).is_ok() || !prog.kind.sensing;
        if filters_ok
            && check_feasible_for(prog.kind, cfg, ch, &candidate, tol).feasible()
            && sum_rate_for(prog.kind, cfg, ch, &candidate) >= base_rate
        {
            accepted = Some(candidate);
            break;
        }
        step *= 0.5;
    }

    let is_accepted = accepted.is_some();
    let mut out = accepted.unwrap_or_else(|| design.clone());
    if is_accepted && step == 1.0 {
        let ln_noise: Vec<f64> = prog.noise.iter().map(|s| s.ln()).collect();
        let eta: Vec<f64> = (0..prog.noise.len()).map(|i| prog.eta[i].map_or(0.0, |e| x[e]) + ln_noise[i]).collect();
        let tau: Vec<f64> = (0..prog.noise.len()).map(|i| prog.tau[i].map_or(0.0, |t| x[t]) + ln_noise[i]).collect();
        let zeta1 = eta.first().copied().unwrap_or(0.0);
        out.aux = AuxVars { eta, tau, zeta1 };
    }
    Ok(P7Outcome {
        design: out,
        accepted: is_accepted,
        step: if is_accepted { step } else { 0.0 },
        objective: sol.objective_value,
        max_slack,
        max_residual: sol.max_residual,
    })
}

/// Primal vector of `prog` at the anchor phases with zero slacks.
pub fn anchor_point(prog: &P7Program, design: &Design) -> Vec<f64> {
    let mut x = vec![0.0; prog.program.num_vars];
    for (i, z) in design.v.iter().enumerate() {
        x[2 * i] = z.re;
        x[2 * i + 1] = z.im;
    }
    for (idx, val) in prog.eta.iter().zip(&prog.anchor_eta).chain(prog.tau.iter().zip(&prog.anchor_tau)) {
        if let (Some(i), Some(v)) = (idx, val) {
            x[*i] = *v;
        }
    }
    x
}

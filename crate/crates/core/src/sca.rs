//! Communication constraints shared by the beamforming and RIS-phase
//! subproblems. Both see every received amplitude as an affine function of
//! their own variables, so the rate epigraph, SINR and SIC-order constraints
//! are built once from those affine maps and their anchor values.

use crate::metrics::AccessScheme;
use crate::numerics::cmatrix::C64;
use crate::numerics::{push_quadratic_le, CAffine, ConicProgram, LinExpr};

/// Received amplitudes at every user, normalized by that user's noise
/// standard deviation.
pub(crate) struct CommModel {
    pub scheme: AccessScheme,
    pub sensing: bool,
    pub k: usize,
    /// `streams[i][j]`: amplitude of column `j` at user `i` (sensing beam at
    /// `j = k`).
    pub streams: Vec<Vec<CAffine>>,
    /// The same amplitudes evaluated at the anchor.
    pub anchor: Vec<Vec<C64>>,
    pub sinr_threshold: Vec<f64>,
}

/// Indices of the epigraph variables added for the rate surrogate.
pub(crate) struct CommVars {
    pub eta: Vec<Option<usize>>,
    pub tau: Vec<Option<usize>>,
}

impl CommModel {
    pub fn power(&self, i: usize, j: usize) -> f64 {
        self.anchor[i][j].norm_sqr()
    }

    pub fn active_columns(&self) -> Vec<usize> {
        (0..self.k).chain(self.sensing.then_some(self.k)).collect()
    }

    pub fn interference_set(&self, i: usize) -> Vec<usize> {
        match self.scheme {
            AccessScheme::Noma => (0..i).collect(),
            AccessScheme::TreatInterferenceAsNoise => self.active_columns().into_iter().filter(|&j| j != i).collect(),
        }
    }

    /// `ln(Σ_{j∈I_i} |·|² + 1)` at the anchor, `None` without interference.
    pub fn tau_hat(&self, i: usize) -> Option<f64> {
        let set = self.interference_set(i);
        (!set.is_empty()).then(|| (set.iter().map(|&j| self.power(i, j)).sum::<f64>() + 1.0).ln())
    }

    fn lb(&self, i: usize, j: usize) -> LinExpr {
        self.streams[i][j].taylor_lower_bound(self.anchor[i][j])
    }

    /// Adds the rate epigraph (when `rate` is set), the decode-SINR
    /// constraints and, under NOMA, the SIC received-power order. Every
    /// inequality is tightened by `t·s` when a slack variable `t` is given,
    /// with `s` the natural magnitude of that inequality at the anchor.
    pub fn push(&self, p: &mut ConicProgram, rate: bool, slack: Option<usize>) -> CommVars {
        let k = self.k;
        let margin = |s: f64| slack.map_or_else(LinExpr::default, |t| LinExpr::term(t, s));
        let mut eta = vec![None; k];
        let mut tau = vec![None; k];
        if rate {
            for i in 0..k {
                let inter = self.interference_set(i);
                let signal: Vec<usize> = inter.iter().copied().chain([i]).collect();
                let shift = (signal.iter().map(|&j| self.power(i, j)).sum::<f64>() + 1.0).ln();
                let e = p.add_vars(1);
                let mut c = LinExpr::constant(1.0);
                for &j in &signal {
                    c.add_assign(&self.lb(i, j));
                }
                // e^{η} ≤ c  ⇔  e^{η − shift} ≤ c·e^{−shift}
                p.push_exp(
                    LinExpr::var(e).plus_const(-shift),
                    LinExpr::constant(1.0),
                    c.scaled((-shift).exp()),
                    format!("rate lb user {i}"),
                );
                p.objective.push(e, 1.0);
                eta[i] = Some(e);
                if let Some(th) = self.tau_hat(i) {
                    let t = p.add_vars(1);
                    let scale = th.exp();
                    // Δ = e^{τ̂}(1 + τ − τ̂) ≥ Σ_{j∈I}|·|² + 1
                    let delta = LinExpr::term(t, scale).plus_const(scale * (1.0 - th));
                    let terms: Vec<CAffine> = inter.iter().map(|&j| self.streams[i][j].clone()).collect();
                    push_quadratic_le(p, &terms, 1.0, delta, scale, format!("interference user {i}"));
                    p.push_nonneg(LinExpr::var(t).plus_const(1.0 - th), format!("delta nonneg user {i}"));
                    p.objective.push(t, -1.0);
                    tau[i] = Some(t);
                }
            }
        }

        // r(Σ_{j∈I} |·_{i,j}|² + 1) ≤ |·_{i,s}|²
        let sinr = |p: &mut ConicProgram, i: usize, s_col: usize, inter: &[usize], r: f64, label: String| {
            let rhs_hat = r * (inter.iter().map(|&j| self.power(i, j)).sum::<f64>() + 1.0);
            let s = rhs_hat.max(self.power(i, s_col)).max(1.0);
            let terms: Vec<CAffine> = inter.iter().map(|&j| self.streams[i][j].clone().scaled(r.sqrt())).collect();
            let mut bound = self.lb(i, s_col);
            bound.add_scaled(&margin(s), -1.0);
            push_quadratic_le(p, &terms, r, bound, s, label);
        };
        match self.scheme {
            AccessScheme::Noma => {
                for s_col in 1..k {
                    let inter: Vec<usize> = (0..s_col).collect();
                    for i in 0..=s_col {
                        let r = self.sinr_threshold[s_col];
                        sinr(p, i, s_col, &inter, r, format!("decode stream {s_col} at user {i}"));
                    }
                }
                for i in 0..k {
                    for (hi, lo) in sic_pairs(k, i, self.sensing) {
                        let s = self.power(i, hi).max(self.power(i, lo)).max(1.0);
                        let mut bound = self.lb(i, hi);
                        bound.add_scaled(&margin(s), -1.0);
                        let label = format!("sic order {hi}>{lo} at user {i}");
                        push_quadratic_le(p, &[self.streams[i][lo].clone()], 0.0, bound, s, label);
                    }
                }
            }
            AccessScheme::TreatInterferenceAsNoise => {
                for i in 0..k {
                    let inter = self.interference_set(i);
                    sinr(p, i, i, &inter, self.sinr_threshold[i], format!("sinr user {i}"));
                }
            }
        }
        CommVars { eta, tau }
    }

    /// Epigraph values at the anchor: `η_i = ln(signal + 1)`, `τ_i = τ̂_i`.
    pub fn anchor_aux(&self) -> (Vec<Option<f64>>, Vec<Option<f64>>) {
        let eta = (0..self.k)
            .map(|i| {
                let s: f64 = self.interference_set(i).iter().chain([&i]).map(|&j| self.power(i, j)).sum();
                Some((s + 1.0).ln())
            })
            .collect();
        let tau = (0..self.k).map(|i| self.tau_hat(i)).collect();
        (eta, tau)
    }
}

/// Received-power pairs `(stronger, weaker)` that must hold at user `i` for
/// its SIC order: sensing ≥ K−1 ≥ … ≥ i, then i ≥ every j < i.
pub fn sic_pairs(k: usize, i: usize, sensing: bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if sensing {
        out.push((k, k - 1));
    }
    for j in (i..k - 1).rev() {
        out.push((j + 1, j));
    }
    for j in 0..i {
        out.push((i, j));
    }
    out
}

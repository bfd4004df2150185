//! Conic programs over real variables: linear, second-order and exponential
//! cones.
//!
//! A block is an affine map `x ↦ F x + g` whose image must lie in a cone:
//!
//! * `Zero`:        every component equals 0
//! * `Nonneg`:      every component is ≥ 0
//! * `Soc`:         `(t, z)` with `t ≥ ‖z‖₂` (first component is `t`)
//! * `Exp`:         `(a, b, c)` with `c ≥ b·exp(a/b)`, `b > 0` (closure included)
//!
//! The objective is always maximized. Solving is delegated to Clarabel; this
//! module only owns the representation, the lowering to Clarabel's
//! `A x + s = b` form, residual evaluation and a plain-text dump.

use std::fmt::Write as _;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use serde::{Deserialize, Serialize};

use super::NumericsError;

/// Sparse affine scalar expression `Σ coef·x[idx] + constant`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(idx: usize) -> Self {
        Self {
            terms: vec![(idx, 1.0)],
            constant: 0.0,
        }
    }

    pub fn term(idx: usize, coef: f64) -> Self {
        Self {
            terms: vec![(idx, coef)],
            constant: 0.0,
        }
    }

    pub fn push(&mut self, idx: usize, coef: f64) -> &mut Self {
        if coef != 0.0 {
            self.terms.push((idx, coef));
        }
        self
    }

    pub fn add_assign(&mut self, other: &LinExpr) {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
    }

    pub fn add_scaled(&mut self, other: &LinExpr, s: f64) {
        self.terms
            .extend(other.terms.iter().map(|&(i, c)| (i, c * s)));
        self.constant += other.constant * s;
    }

    pub fn plus(mut self, other: &LinExpr) -> Self {
        self.add_assign(other);
        self
    }

    pub fn plus_const(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= s;
        }
        self.constant *= s;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
    }

    /// Merges duplicate indices and drops exact zeros; sorted by index.
    pub fn compact(&self) -> Self {
        let mut t = self.terms.clone();
        t.sort_by_key(|&(i, _)| i);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(t.len());
        for (i, c) in t {
            match out.last_mut() {
                Some((j, d)) if *j == i => *d += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        Self {
            terms: out,
            constant: self.constant,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeKind {
    Zero,
    Nonneg,
    Soc,
    Exp,
}

impl ConeKind {
    fn tag(self) -> &'static str {
        match self {
            ConeKind::Zero => "zero",
            ConeKind::Nonneg => "nonneg",
            ConeKind::Soc => "soc",
            ConeKind::Exp => "exp",
        }
    }

    fn from_tag(s: &str) -> Option<Self> {
        Some(match s {
            "zero" => ConeKind::Zero,
            "nonneg" => ConeKind::Nonneg,
            "soc" => ConeKind::Soc,
            "exp" => ConeKind::Exp,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeBlock {
    pub kind: ConeKind,
    pub rows: Vec<LinExpr>,
    /// Free-form label carried into dumps and residual reports.
    pub label: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub num_vars: usize,
    pub objective: LinExpr,
    pub blocks: Vec<ConeBlock>,
}

impl ConicProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: LinExpr::default(),
            blocks: Vec::new(),
        }
    }

    /// Allocates `n` fresh variables and returns the first index.
    pub fn add_vars(&mut self, n: usize) -> usize {
        let first = self.num_vars;
        self.num_vars += n;
        first
    }

    pub fn push(&mut self, kind: ConeKind, rows: Vec<LinExpr>, label: impl Into<String>) {
        self.blocks.push(ConeBlock {
            kind,
            rows,
            label: label.into(),
        });
    }

    /// `expr ≥ 0`.
    pub fn push_nonneg(&mut self, expr: LinExpr, label: impl Into<String>) {
        self.push(ConeKind::Nonneg, vec![expr], label);
    }

    /// `‖z‖ ≤ t`.
    pub fn push_soc(&mut self, t: LinExpr, z: Vec<LinExpr>, label: impl Into<String>) {
        let mut rows = Vec::with_capacity(z.len() + 1);
        rows.push(t);
        rows.extend(z);
        self.push(ConeKind::Soc, rows, label);
    }

    /// `c ≥ b·exp(a/b)`.
    pub fn push_exp(&mut self, a: LinExpr, b: LinExpr, c: LinExpr, label: impl Into<String>) {
        self.push(ConeKind::Exp, vec![a, b, c], label);
    }

    pub fn num_constraint_rows(&self) -> usize {
        self.blocks.iter().map(|b| b.rows.len()).sum()
    }

    pub fn count_blocks(&self, kind: ConeKind) -> usize {
        self.blocks.iter().filter(|b| b.kind == kind).count()
    }

    pub fn validate(&self) -> Result<(), NumericsError> {
        let check = |e: &LinExpr, what: &str| -> Result<(), NumericsError> {
            if let Some(&(i, _)) = e.terms.iter().find(|&&(i, _)| i >= self.num_vars) {
                return Err(NumericsError::InvalidProgram(format!(
                    "{what} references variable {i} but the program has {}",
                    self.num_vars
                )));
            }
            if !e.constant.is_finite() || e.terms.iter().any(|t| !t.1.is_finite()) {
                return Err(NumericsError::InvalidProgram(format!(
                    "{what} has non-finite data"
                )));
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        for (bi, b) in self.blocks.iter().enumerate() {
            match b.kind {
                ConeKind::Exp if b.rows.len() != 3 => {
                    return Err(NumericsError::InvalidProgram(format!(
                        "exponential block {bi} ({}) has dimension {}",
                        b.label,
                        b.rows.len()
                    )))
                }
                _ if b.rows.is_empty() => {
                    return Err(NumericsError::InvalidProgram(format!(
                        "block {bi} ({}) is empty",
                        b.label
                    )))
                }
                _ => {}
            }
            for r in &b.rows {
                check(r, &format!("block {bi} ({})", b.label))?;
            }
        }
        Ok(())
    }

    /// Worst scaled cone violation of `x` over all blocks, with the label of
    /// the offending block. Each block's violation is divided by
    /// `1 + max|component|` so the figure is comparable across scales.
    pub fn max_residual(&self, x: &[f64]) -> (f64, Option<String>) {
        let mut worst = 0.0;
        let mut label = None;
        for b in &self.blocks {
            let y: Vec<f64> = b.rows.iter().map(|r| r.eval(x)).collect();
            let r = block_violation(b.kind, &y);
            if r > worst {
                worst = r;
                label = Some(b.label.clone());
            }
        }
        (worst, label)
    }

    /// Line-oriented text dump. Layout:
    ///
    /// ```text
    /// conic-program v1
    /// vars <n>
    /// maximize <const> [<idx>:<coef>]...
    /// block <zero|nonneg|soc|exp> <dim> <label>
    /// row <const> [<idx>:<coef>]...        (dim times)
    /// ```
    ///
    /// Numbers use Rust's shortest round-trip formatting.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let line = |s: &mut String, head: &str, e: &LinExpr| {
            let e = e.compact();
            let _ = write!(s, "{head} {:e}", e.constant);
            for (i, c) in e.terms {
                let _ = write!(s, " {i}:{c:e}");
            }
            s.push('\n');
        };
        s.push_str("conic-program v1\n");
        let _ = writeln!(s, "vars {}", self.num_vars);
        line(&mut s, "maximize", &self.objective);
        for b in &self.blocks {
            let label = if b.label.is_empty() {
                "-".to_string()
            } else {
                b.label.replace(char::is_whitespace, "_")
            };
            let _ = writeln!(s, "block {} {} {}", b.kind.tag(), b.rows.len(), label);
            for r in &b.rows {
                line(&mut s, "row", r);
            }
        }
        s
    }

    pub fn parse_dump(text: &str) -> Result<Self, NumericsError> {
        let bad = |n: usize, m: &str| NumericsError::Parse(format!("line {}: {m}", n + 1));
        let parse_expr = |n: usize, toks: &[&str]| -> Result<LinExpr, NumericsError> {
            let (c, rest) = toks
                .split_first()
                .ok_or_else(|| bad(n, "missing constant"))?;
            let constant = c.parse::<f64>().map_err(|_| bad(n, "bad constant"))?;
            let mut terms = Vec::with_capacity(rest.len());
            for t in rest {
                let (i, v) = t.split_once(':').ok_or_else(|| bad(n, "bad term"))?;
                terms.push((
                    i.parse::<usize>().map_err(|_| bad(n, "bad index"))?,
                    v.parse::<f64>().map_err(|_| bad(n, "bad coefficient"))?,
                ));
            }
            Ok(LinExpr { terms, constant })
        };
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, l)) if l.trim() == "conic-program v1" => {}
            _ => return Err(NumericsError::Parse("missing header".into())),
        }
        let mut p = ConicProgram::default();
        let mut pending: Option<(ConeKind, usize, String, Vec<LinExpr>)> = None;
        for (n, l) in lines {
            let toks: Vec<&str> = l.split_whitespace().collect();
            match toks[0] {
                "vars" => {
                    p.num_vars = toks
                        .get(1)
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| bad(n, "bad vars"))?
                }
                "maximize" => p.objective = parse_expr(n, &toks[1..])?,
                "block" => {
                    if let Some((k, d, lab, rows)) = pending.take() {
                        if rows.len() != d {
                            return Err(bad(n, "short block"));
                        }
                        p.push(k, rows, lab);
                    }
                    let kind = toks
                        .get(1)
                        .and_then(|t| ConeKind::from_tag(t))
                        .ok_or_else(|| bad(n, "bad cone"))?;
                    let dim = toks
                        .get(2)
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| bad(n, "bad dim"))?;
                    let label = toks.get(3).map(|s| {
                        if *s == "-" {
                            String::new()
                        } else {
                            s.to_string()
                        }
                    });
                    pending = Some((kind, dim, label.unwrap_or_default(), Vec::new()));
                }
                "row" => {
                    let blk = pending
                        .as_mut()
                        .ok_or_else(|| bad(n, "row outside block"))?;
                    blk.3.push(parse_expr(n, &toks[1..])?);
                }
                other => return Err(bad(n, &format!("unknown record {other}"))),
            }
        }
        if let Some((k, d, lab, rows)) = pending {
            if rows.len() != d {
                return Err(NumericsError::Parse("short final block".into()));
            }
            p.push(k, rows, lab);
        }
        p.validate()?;
        Ok(p)
    }
}

fn block_violation(kind: ConeKind, y: &[f64]) -> f64 {
    let scale = 1.0 + y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let v = match kind {
        ConeKind::Zero => y.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        ConeKind::Nonneg => y.iter().fold(0.0_f64, |m, v| m.max(-v)),
        ConeKind::Soc => {
            let tail = y[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
            (tail - y[0]).max(0.0)
        }
        ConeKind::Exp => {
            let (a, b, c) = (y[0], y[1], y[2]);
            if b > 0.0 {
                // b·e^{a/b} can overflow; compare in log space when c > 0.
                let lhs = b.ln() + a / b;
                if c > 0.0 {
                    let diff = lhs - c.ln();
                    if diff > 0.0 {
                        c * diff.exp_m1()
                    } else {
                        0.0
                    }
                } else {
                    lhs.exp() - c
                }
            } else {
                (-b).max(0.0).max(a.max(0.0)).max((-c).max(0.0))
            }
        }
    };
    v / scale
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConicStatus {
    Optimal,
    /// The backend stopped short of its gap target, but the point passes the
    /// feasibility check.
    ReducedAccuracy,
    Infeasible,
    Unbounded,
    NumericalTrouble,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicSolution {
    pub status: ConicStatus,
    pub primal: Vec<f64>,
    pub objective_value: f64,
    pub max_residual: f64,
    pub iterations: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iter: u32,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            max_iter: 200,
        }
    }
}

pub fn solve_conic(p: &ConicProgram) -> Result<ConicSolution, NumericsError> {
    solve_conic_with(p, &SolverSettings::default())
}

/// Solves `p`. `Optimal` and `ReducedAccuracy` are only reported when the
/// returned point also passes [`ConicProgram::max_residual`] at `feas_tol`.
pub fn solve_conic_with(
    p: &ConicProgram,
    settings: &SolverSettings,
) -> Result<ConicSolution, NumericsError> {
    p.validate()?;
    let n = p.num_vars;
    let m = p.num_constraint_rows();

    // s = F x + g  ⇔  A x + s = b with A = −F, b = g.
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut b = Vec::with_capacity(m);
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
    let mut row = 0;
    for blk in &p.blocks {
        for r in &blk.rows {
            for &(j, c) in &r.compact().terms {
                triplets.push((row, j, -c));
            }
            b.push(r.constant);
            row += 1;
        }
        let d = blk.rows.len();
        let cone = match blk.kind {
            ConeKind::Zero => SupportedConeT::ZeroConeT(d),
            ConeKind::Nonneg => SupportedConeT::NonnegativeConeT(d),
            ConeKind::Soc => SupportedConeT::SecondOrderConeT(d),
            ConeKind::Exp => SupportedConeT::ExponentialConeT(),
        };
        cones.push(cone);
    }
    let a = csc_from_triplets(m, n, triplets);
    let pmat = CscMatrix::<f64>::zeros((n, n));
    let mut q = vec![0.0; n];
    for &(j, c) in &p.objective.compact().terms {
        q[j] = -c;
    }

    let cs = DefaultSettings::<f64> {
        verbose: false,
        max_iter: settings.max_iter,
        // The backend measures feasibility on its own scaled residuals; a
        // tighter internal target keeps the unscaled check below feas_tol.
        tol_feas: settings.feas_tol * 1e-2,
        tol_gap_abs: settings.gap_tol,
        tol_gap_rel: settings.gap_tol,
        presolve_enable: false,
        max_threads: 1,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&pmat, &q, &a, &b, &cones, cs)
        .map_err(|e| NumericsError::InvalidProgram(format!("solver setup: {e}")))?;
    solver.solve();
    let sol = &solver.solution;
    let x = sol.x.clone();
    let (resid, _) = p.max_residual(&x);
    let objective_value = p.objective.eval(&x);
    let status = match sol.status {
        SolverStatus::Solved if resid <= settings.feas_tol => ConicStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            ConicStatus::Infeasible
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => ConicStatus::Unbounded,
        SolverStatus::AlmostSolved if resid <= settings.feas_tol => ConicStatus::ReducedAccuracy,
        _ => ConicStatus::NumericalTrouble,
    };
    Ok(ConicSolution {
        status,
        primal: x,
        objective_value,
        max_residual: resid,
        iterations: sol.iterations,
    })
}

fn csc_from_triplets(m: usize, n: usize, mut t: Vec<(usize, usize, f64)>) -> CscMatrix<f64> {
    t.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
    let mut colptr = vec![0usize; n + 1];
    let mut rowval = Vec::with_capacity(t.len());
    let mut nzval: Vec<f64> = Vec::with_capacity(t.len());
    let mut last: Option<(usize, usize)> = None;
    for (r, c, v) in t {
        if last == Some((r, c)) {
            *nzval.last_mut().unwrap() += v;
            continue;
        }
        rowval.push(r);
        nzval.push(v);
        colptr[c + 1] += 1;
        last = Some((r, c));
    }
    for j in 0..n {
        colptr[j + 1] += colptr[j];
    }
    CscMatrix::new(m, n, colptr, rowval, nzval)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lp_maximize_negative_x() {
        let mut p = ConicProgram::new(1);
        p.objective = LinExpr::term(0, -1.0);
        p.push_nonneg(LinExpr::var(0).plus_const(-1.0), "x>=1");
        let s = solve_conic(&p).unwrap();
        assert_eq!(s.status, ConicStatus::Optimal);
        assert!((s.primal[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn soc_norm_of_three_four() {
        let mut p = ConicProgram::new(1);
        p.objective = LinExpr::term(0, -1.0);
        p.push_soc(
            LinExpr::var(0),
            vec![LinExpr::constant(3.0), LinExpr::constant(4.0)],
            "norm",
        );
        let s = solve_conic(&p).unwrap();
        assert_eq!(s.status, ConicStatus::Optimal);
        assert!((s.primal[0] - 5.0).abs() < 5e-6 * 5.0);
    }

    #[test]
    fn exp_cone_e() {
        let mut p = ConicProgram::new(1);
        p.objective = LinExpr::term(0, -1.0);
        p.push_exp(
            LinExpr::constant(1.0),
            LinExpr::constant(1.0),
            LinExpr::var(0),
            "t>=e",
        );
        let s = solve_conic(&p).unwrap();
        assert_eq!(s.status, ConicStatus::Optimal);
        assert!((s.primal[0] - std::f64::consts::E).abs() < 1e-6 * std::f64::consts::E);
    }

    #[test]
    fn infeasible_and_unbounded_are_reported() {
        let mut p = ConicProgram::new(1);
        p.objective = LinExpr::var(0);
        p.push_nonneg(LinExpr::var(0).plus_const(-2.0), "x>=2");
        p.push_nonneg(LinExpr::term(0, -1.0).plus_const(1.0), "x<=1");
        assert_eq!(solve_conic(&p).unwrap().status, ConicStatus::Infeasible);

        let mut q = ConicProgram::new(1);
        q.objective = LinExpr::var(0);
        q.push_nonneg(LinExpr::var(0), "x>=0");
        assert_eq!(solve_conic(&q).unwrap().status, ConicStatus::Unbounded);
    }

    #[test]
    fn validate_rejects_bad_blocks() {
        let mut p = ConicProgram::new(1);
        p.push(
            ConeKind::Exp,
            vec![LinExpr::var(0), LinExpr::var(0)],
            "short",
        );
        assert!(p.validate().is_err());
        let mut q = ConicProgram::new(1);
        q.push_nonneg(LinExpr::var(3), "oob");
        assert!(q.validate().is_err());
    }

    #[test]
    fn residual_measures_each_cone() {
        assert_eq!(block_violation(ConeKind::Soc, &[5.0, 3.0, 4.0]), 0.0);
        assert!(block_violation(ConeKind::Soc, &[4.0, 3.0, 4.0]) > 0.0);
        assert_eq!(block_violation(ConeKind::Exp, &[0.0, 1.0, 1.0]), 0.0);
        assert!(block_violation(ConeKind::Exp, &[1.0, 1.0, 2.0]) > 0.0);
        assert!(block_violation(ConeKind::Zero, &[1e-3]) > 0.0);
    }

    #[test]
    fn dump_round_trips() {
        let mut p = ConicProgram::new(3);
        p.objective = LinExpr::var(0)
            .plus(&LinExpr::term(2, -0.25))
            .plus_const(1.5);
        p.push_soc(
            LinExpr::var(1),
            vec![LinExpr::term(0, 2.0), LinExpr::constant(1e-9)],
            "my soc",
        );
        p.push_exp(LinExpr::var(0), LinExpr::constant(1.0), LinExpr::var(2), "");
        let text = p.dump();
        let back = ConicProgram::parse_dump(&text).unwrap();
        assert_eq!(back.dump(), text);
        assert_eq!(back.num_vars, 3);
        assert_eq!(back.blocks[0].label, "my_soc");
    }
}

//! Complex affine expressions over real decision variables.
//!
//! Complex vectors of decision variables are split into real scalars,
//! interleaved: entry `i` of a vector starting at `base` occupies
//! `base + 2i` (real part) and `base + 2i + 1` (imaginary part).

use super::cmatrix::C64;
use super::conic::{ConicProgram, LinExpr};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CAffine {
    pub re: LinExpr,
    pub im: LinExpr,
}

impl CAffine {
    pub fn constant(c: C64) -> Self {
        Self {
            re: LinExpr::constant(c.re),
            im: LinExpr::constant(c.im),
        }
    }

    /// `Σ_i coef[i]·z[i]` with `z` the complex variable vector at `base`.
    pub fn dot_vars(coef: &[C64], base: usize) -> Self {
        let mut re = LinExpr::default();
        let mut im = LinExpr::default();
        for (i, c) in coef.iter().enumerate() {
            let (ri, ii) = (base + 2 * i, base + 2 * i + 1);
            re.push(ri, c.re);
            re.push(ii, -c.im);
            im.push(ri, c.im);
            im.push(ii, c.re);
        }
        Self { re, im }
    }

    pub fn plus_const(mut self, c: C64) -> Self {
        self.re.constant += c.re;
        self.im.constant += c.im;
        self
    }

    pub fn plus(mut self, other: &CAffine) -> Self {
        self.re.add_assign(&other.re);
        self.im.add_assign(&other.im);
        self
    }

    pub fn scaled(self, s: f64) -> Self {
        Self {
            re: self.re.scaled(s),
            im: self.im.scaled(s),
        }
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        C64::new(self.re.eval(x), self.im.eval(x))
    }

    /// First-order lower bound of `|e|²` around a point where `e = anchor`:
    /// `2 Re{conj(anchor)·e} − |anchor|²`. Never exceeds `|e|²`, equal at
    /// the anchor.
    pub fn taylor_lower_bound(&self, anchor: C64) -> LinExpr {
        let mut out = self.re.clone().scaled(2.0 * anchor.re);
        out.add_scaled(&self.im, 2.0 * anchor.im);
        out.constant -= anchor.norm_sqr();
        out
    }

    /// `Re{c·e}` as a real affine expression.
    pub fn real_part_times(&self, c: C64) -> LinExpr {
        let mut out = self.re.clone().scaled(c.re);
        out.add_scaled(&self.im, -c.im);
        out
    }
}

/// Adds `Σ_i |terms_i|² + constant ≤ bound` as one second-order cone, using
/// `x² ≤ t  ⇔  ‖(2x, t − 1)‖ ≤ t + 1` after dividing both sides by `scale`.
pub fn push_quadratic_le(
    p: &mut ConicProgram,
    terms: &[CAffine],
    constant: f64,
    bound: LinExpr,
    scale: f64,
    label: impl Into<String>,
) {
    debug_assert!(scale > 0.0 && constant >= 0.0);
    let root = scale.sqrt();
    let t = bound.scaled(1.0 / scale);
    let mut z = Vec::with_capacity(2 * terms.len() + 2);
    for e in terms {
        z.push(e.re.clone().scaled(2.0 / root));
        z.push(e.im.clone().scaled(2.0 / root));
    }
    if constant > 0.0 {
        z.push(LinExpr::constant(2.0 * (constant / scale).sqrt()));
    }
    z.push(t.clone().plus_const(-1.0));
    p.push_soc(t.plus_const(1.0), z, label);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::conic::{solve_conic, ConicStatus};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rc(rng: &mut impl Rng) -> C64 {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn dot_vars_matches_complex_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let coef: Vec<C64> = (0..4).map(|_| rc(&mut rng)).collect();
        let z: Vec<C64> = (0..4).map(|_| rc(&mut rng)).collect();
        let mut x = vec![0.0; 1 + 8];
        for (i, v) in z.iter().enumerate() {
            x[1 + 2 * i] = v.re;
            x[2 + 2 * i] = v.im;
        }
        let e = CAffine::dot_vars(&coef, 1);
        let direct: C64 = coef.iter().zip(&z).map(|(a, b)| a * b).sum();
        assert!((e.eval(&x) - direct).norm() < 1e-14);
    }

    #[test]
    fn taylor_bound_is_tangent_and_below() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..200 {
            let e = CAffine::dot_vars(&[C64::new(1.0, 0.0)], 0);
            let anchor = rc(&mut rng);
            let lb = e.taylor_lower_bound(anchor);
            let at_anchor = lb.eval(&[anchor.re, anchor.im]);
            assert!((at_anchor - anchor.norm_sqr()).abs() < 1e-14);
            let z = rc(&mut rng);
            assert!(lb.eval(&[z.re, z.im]) <= z.norm_sqr() + 1e-14);
        }
    }

    #[test]
    fn quadratic_le_matches_direct_check() {
        // minimize t subject to |z|^2 + 0.5 <= t with z fixed at 1+2j.
        let mut p = ConicProgram::new(1);
        p.objective = LinExpr::term(0, -1.0);
        let e = CAffine::constant(C64::new(1.0, 2.0));
        push_quadratic_le(&mut p, &[e], 0.5, LinExpr::var(0), 3.0, "q");
        let s = solve_conic(&p).unwrap();
        assert_eq!(s.status, ConicStatus::Optimal);
        assert!((s.primal[0] - 5.5).abs() < 1e-6);
    }
}

#![allow(dead_code)]

use rand::Rng;
use risnoma::metrics::{AuxVars, Design};
use risnoma::numerics::cmatrix::{CMatrix, C64};

pub fn rc(rng: &mut impl Rng) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn rvec(n: usize, rng: &mut impl Rng) -> Vec<C64> {
    (0..n).map(|_| rc(rng)).collect()
}

pub fn rmat(r: usize, c: usize, rng: &mut impl Rng) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| rc(rng))
}

pub fn unit_phases(n: usize, rng: &mut impl Rng) -> Vec<C64> {
    (0..n).map(|_| C64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU))).collect()
}

pub fn interleave(z: &[C64]) -> Vec<f64> {
    z.iter().flat_map(|c| [c.re, c.im]).collect()
}

/// Random beamformer with total power `p`.
pub fn random_w(m: usize, cols: usize, p: f64, rng: &mut impl Rng) -> CMatrix {
    let w = rmat(m, cols, rng);
    let s = (p / w.frobenius_norm_sqr()).sqrt();
    w.scale(C64::new(s, 0.0))
}

pub fn design(w: CMatrix, v: Vec<C64>, u: Vec<Vec<C64>>) -> Design {
    Design { w, v, u, aux: AuxVars::default() }
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

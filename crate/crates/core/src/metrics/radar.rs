use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Design;
use crate::numerics::cmatrix::{dotc, norm_sqr, CMatrix, C64};
use crate::scenario::channels::{cascaded_row, complex_gaussian};
use crate::scenario::{ChannelSet, SystemConfig};

/// Column factor `g_{d,l} + Gᴴ·diag(v)·g_{r,l}` of the target response.
pub(crate) fn target_column(ch: &ChannelSet, v: &[C64], l: usize) -> Vec<C64> {
    let mut a = ch.g_d[l].clone();
    for (n, (gr, vn)) in ch.g_r[l].iter().zip(v).enumerate() {
        let c = vn * gr;
        for (j, x) in a.iter_mut().enumerate() {
            *x += ch.g_mat[(n, j)].conj() * c;
        }
    }
    a
}

/// Row factor `g_{d,l}ᴴ + g_{r,l}ᴴ·diag(v)·G`.
pub(crate) fn target_row(ch: &ChannelSet, v: &[C64], l: usize) -> Vec<C64> {
    cascaded_row(&ch.g_d[l], &ch.g_r[l], &ch.g_mat, v)
}

/// Round-trip target response `(g_d + Gᴴ Φ g_r)(g_dᴴ + g_rᴴ Φ G)`, with the
/// same Φ = diag(v) in both factors.
pub fn composite_target_matrix(ch: &ChannelSet, v: &[C64], l: usize) -> CMatrix {
    let a = target_column(ch, v, l);
    let b = target_row(ch, v, l);
    CMatrix::from_fn(a.len(), b.len(), |i, j| a[i] * b[j])
}

/// `(I_{K+1} ⊗ G_l)·vec(W)`, i.e. the columns of `G_l W` stacked.
pub fn sensing_direction(ch: &ChannelSet, v: &[C64], w: &CMatrix, l: usize) -> Vec<C64> {
    let a = target_column(ch, v, l);
    let b = target_row(ch, v, l);
    let mut out = Vec::with_capacity(a.len() * w.cols());
    for j in 0..w.cols() {
        let s: C64 = b.iter().zip(w.col(j)).map(|(x, y)| x * y).sum();
        out.extend(a.iter().map(|x| x * s));
    }
    out
}

/// Radar SNR lower bound `Q σ_l² |u_lᴴ (I ⊗ G_l) w̃|² / (ε_l² u_lᴴ u_l)`.
pub fn radar_snr_lb(cfg: &SystemConfig, ch: &ChannelSet, design: &Design, l: usize) -> f64 {
    let d = sensing_direction(ch, &design.v, &design.w, l);
    let u = &design.u[l];
    cfg.q as f64 * cfg.rcs(l) * dotc(u, &d).norm_sqr() / (cfg.noise_radar(l) * norm_sqr(u))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Radar SNR for one symbol block `S` ((K+1) × Q):
/// `σ_l² |u_lᴴ (S Sᴴ ⊗ G_l) w̃|² / (Q ε_l² u_lᴴ u_l)`.
pub fn radar_snr_for_block(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    design: &Design,
    l: usize,
    s: &CMatrix,
) -> f64 {
    let kk1 = design.w.cols();
    assert_eq!(s.rows(), kk1, "symbol block must have K+1 rows");
    let q = s.cols();
    let a = target_column(ch, &design.v, l);
    let b = target_row(ch, &design.v, l);
    let m = a.len();
    let u = &design.u[l];
    // y_j = G_l w_j = a·(b w_j); c_i = u_iᴴ a with u_i the i-th length-M block.
    let bw: Vec<C64> = (0..kk1)
        .map(|j| b.iter().zip(design.w.col(j)).map(|(x, y)| x * y).sum())
        .collect();
    let ua: Vec<C64> = (0..kk1).map(|i| dotc(&u[i * m..(i + 1) * m], &a)).collect();
    let r = s.matmul(&s.adjoint()).expect("S Sᴴ");
    let mut val = C64::new(0.0, 0.0);
    for i in 0..kk1 {
        let mut inner = C64::new(0.0, 0.0);
        for j in 0..kk1 {
            inner += r[(i, j)] * bw[j];
        }
        val += ua[i] * inner;
    }
    cfg.rcs(l) * val.norm_sqr() / (q as f64 * cfg.noise_radar(l) * norm_sqr(u))
}

/// Monte-Carlo estimate of the radar SNR expectation with i.i.d. CN(0, 1)
/// symbols, `cfg.Q` samples per block.
pub fn radar_snr_mc(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    design: &Design,
    l: usize,
    trials: usize,
    rng: &mut impl Rng,
) -> McEstimate {
    assert!(trials >= 2, "need at least two trials for a standard error");
    let kk1 = design.w.cols();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..trials {
        let s = CMatrix::from_fn(kk1, cfg.q, |_, _| complex_gaussian(rng));
        let x = radar_snr_for_block(cfg, ch, design, l, &s);
        sum += x;
        sum_sq += x * x;
    }
    let n = trials as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    McEstimate {
        mean,
        stderr: (var / n).sqrt(),
    }
}

//! Closed-form radar receive filter.
//!
//! For a fixed transmit design the radar SNR lower bound is a Rayleigh
//! quotient in `u_l` whose numerator matrix `a aᴴ` has rank one, with
//! `a = (I_{K+1} ⊗ G_l)·vec(W)`. Its maximizer is `a` itself; the filter is
//! returned with unit norm.

use thiserror::Error;

use crate::metrics::radar::sensing_direction;
use crate::metrics::Design;
use crate::numerics::cmatrix::{kron, norm_sqr, vec, CMatrix, C64};
use crate::scenario::ChannelSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("target {0} receives no echo energy from the current beamformer")]
    DegenerateTarget(usize),
}

/// Unit-norm maximizer of the radar SNR lower bound for a given target
/// response `g` (M × M) and beamformer `w` (M × (K+1)).
pub fn optimal_filter(g: &CMatrix, w: &CMatrix) -> Result<Vec<C64>, FilterError> {
    let a = kron(&CMatrix::identity(w.cols()), g).mul_vec(vec(w).as_slice());
    normalize(a, 0)
}

/// Recomputes every filter of `design` in place from its current `W` and `v`.
pub fn update_filters(ch: &ChannelSet, design: &mut Design) -> Result<(), FilterError> {
    let mut filters = Vec::with_capacity(ch.l());
    for l in 0..ch.l() {
        filters.push(normalize(sensing_direction(ch, &design.v, &design.w, l), l)?);
    }
    design.u = filters;
    Ok(())
}

fn normalize(a: Vec<C64>, l: usize) -> Result<Vec<C64>, FilterError> {
    let n = norm_sqr(&a).sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return Err(FilterError::DegenerateTarget(l));
    }
    Ok(a.into_iter().map(|x| x / n).collect())
}

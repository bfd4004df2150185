//! Geometric channel model: distance path loss, ULA steering and Rician
//! fading.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::{Point, SystemConfig};
use super::ScenarioError;
use crate::numerics::cmatrix::{norm_sqr, CMatrix, C64};

/// Linear power gain `10^{ref_db/10} · d^{-exponent}`.
pub fn path_gain(distance_m: f64, exponent: f64, ref_db: f64) -> Result<f64, ScenarioError> {
    if !(distance_m > 0.0) || !distance_m.is_finite() {
        return Err(ScenarioError::Domain(format!(
            "path gain at distance {distance_m}"
        )));
    }
    Ok(10f64.powf(ref_db / 10.0) * distance_m.powf(-exponent))
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Half-wavelength ULA response at `array` (axis `axis`) toward `toward`:
/// `a_n = exp(jπ n sin θ)` with θ measured from broadside.
pub fn steering(n: usize, array: Point, axis: Point, toward: Point) -> Vec<C64> {
    let d = [toward[0] - array[0], toward[1] - array[1]];
    let r = d[0].hypot(d[1]);
    let sin_theta = if r > 0.0 {
        (d[0] * axis[0] + d[1] * axis[1]) / r
    } else {
        0.0
    };
    (0..n)
        .map(|i| C64::from_polar(1.0, std::f64::consts::PI * i as f64 * sin_theta))
        .collect()
}

/// Circularly symmetric complex Gaussian with unit variance.
pub fn complex_gaussian(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `√gain · (√(κ/(1+κ))·los + √(1/(1+κ))·w)`, `w` i.i.d. CN(0, 1).
pub fn rician_vector(
    dim: usize,
    kappa_linear: f64,
    los: &[C64],
    gain: f64,
    rng: &mut impl Rng,
) -> Vec<C64> {
    assert_eq!(los.len(), dim, "LoS component length");
    let (a, b) = if kappa_linear.is_infinite() {
        (1.0, 0.0)
    } else {
        (
            (kappa_linear / (1.0 + kappa_linear)).sqrt(),
            (1.0 / (1.0 + kappa_linear)).sqrt(),
        )
    };
    let g = gain.sqrt();
    los.iter()
        .map(|l| g * (a * l + b * complex_gaussian(rng)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    /// DFBS → user k, length M each.
    pub h_d: Vec<Vec<C64>>,
    /// RIS → user k, length N each.
    pub h_r: Vec<Vec<C64>>,
    /// DFBS → RIS, N × M.
    pub g_mat: CMatrix,
    /// DFBS → target l, length M each.
    pub g_d: Vec<Vec<C64>>,
    /// RIS → target l, length N each.
    pub g_r: Vec<Vec<C64>>,
}

impl ChannelSet {
    pub fn m(&self) -> usize {
        self.g_mat.cols().max(self.h_d.first().map_or(0, Vec::len))
    }

    pub fn n(&self) -> usize {
        self.g_mat.rows()
    }

    pub fn k(&self) -> usize {
        self.h_d.len()
    }

    pub fn l(&self) -> usize {
        self.g_d.len()
    }

    pub fn check_dims(&self, cfg: &SystemConfig) -> Result<(), ScenarioError> {
        let (m, n) = (cfg.m, cfg.n);
        let ok = self.h_d.len() == cfg.k
            && self.h_r.len() == cfg.k
            && self.g_d.len() == cfg.l
            && self.g_r.len() == cfg.l
            && self.h_d.iter().chain(&self.g_d).all(|v| v.len() == m)
            && self.h_r.iter().chain(&self.g_r).all(|v| v.len() == n)
            && self.g_mat.shape() == (n, if n == 0 { 0 } else { m });
        if !ok {
            return Err(ScenarioError::Config(
                "channel dimensions do not match the configuration".into(),
            ));
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        let fin = |v: &[C64]| v.iter().all(|x| x.re.is_finite() && x.im.is_finite());
        self.h_d
            .iter()
            .chain(&self.h_r)
            .chain(&self.g_d)
            .chain(&self.g_r)
            .all(|v| fin(v))
            && fin(self.g_mat.as_slice())
    }

    /// Reorders users so that new user `i` is old user `perm[i]`.
    pub fn permute_users(&mut self, perm: &[usize]) {
        self.h_d = perm.iter().map(|&i| self.h_d[i].clone()).collect();
        self.h_r = perm.iter().map(|&i| self.h_r[i].clone()).collect();
    }

    /// Same direct links with the RIS removed.
    pub fn without_ris(&self) -> Self {
        Self {
            h_d: self.h_d.clone(),
            h_r: vec![Vec::new(); self.k()],
            g_mat: CMatrix::zeros(0, 0),
            g_d: self.g_d.clone(),
            g_r: vec![Vec::new(); self.l()],
        }
    }
}

/// Draws one channel realization. Rician links (κ from the config) are
/// DFBS–RIS, DFBS–user and RIS–user; DFBS–target and RIS–target are
/// Rayleigh. Draw order is fixed (G, then per user h_d, h_r, then per
/// target g_d, g_r) so a seed reproduces the set exactly.
pub fn generate_channels(
    cfg: &SystemConfig,
    rng: &mut impl Rng,
) -> Result<ChannelSet, ScenarioError> {
    let geo = &cfg.geometry;
    let pl = &cfg.pathloss_exponents;
    let kappa = cfg.kappa();
    let (m, n) = (cfg.m, cfg.n);
    let r0 = cfg.pathloss_ref_db;

    let g_mat = if n == 0 {
        CMatrix::zeros(0, 0)
    } else {
        let gain = path_gain(distance(geo.bs, geo.ris), pl.bs_ris, r0)?;
        let a_ris = steering(n, geo.ris, geo.ris_array_axis, geo.bs);
        let a_bs = steering(m, geo.bs, geo.bs_array_axis, geo.ris);
        let los: Vec<C64> = (0..m)
            .flat_map(|j| {
                let b = a_bs[j].conj();
                a_ris.iter().map(move |ai| ai * b)
            })
            .collect();
        let entries = rician_vector(n * m, kappa, &los, gain, rng);
        CMatrix::from_col_major(n, m, entries).expect("N x M entries")
    };

    let mut h_d = Vec::with_capacity(cfg.k);
    let mut h_r = Vec::with_capacity(cfg.k);
    for &u in &geo.users[..cfg.k] {
        let gd = path_gain(distance(geo.bs, u), pl.bs_user, r0)?;
        h_d.push(rician_vector(
            m,
            kappa,
            &steering(m, geo.bs, geo.bs_array_axis, u),
            gd,
            rng,
        ));
        if n > 0 {
            let gr = path_gain(distance(geo.ris, u), pl.ris_user, r0)?;
            h_r.push(rician_vector(
                n,
                kappa,
                &steering(n, geo.ris, geo.ris_array_axis, u),
                gr,
                rng,
            ));
        } else {
            h_r.push(Vec::new());
        }
    }

    let mut g_d = Vec::with_capacity(cfg.l);
    let mut g_r = Vec::with_capacity(cfg.l);
    for &t in &geo.targets[..cfg.l] {
        let gd = path_gain(distance(geo.bs, t), pl.bs_target, r0)?;
        g_d.push(rician_vector(
            m,
            0.0,
            &steering(m, geo.bs, geo.bs_array_axis, t),
            gd,
            rng,
        ));
        if n > 0 {
            let gr = path_gain(distance(geo.ris, t), pl.ris_target, r0)?;
            g_r.push(rician_vector(
                n,
                0.0,
                &steering(n, geo.ris, geo.ris_array_axis, t),
                gr,
                rng,
            ));
        } else {
            g_r.push(Vec::new());
        }
    }
    Ok(ChannelSet {
        h_d,
        h_r,
        g_mat,
        g_d,
        g_r,
    })
}

/// Probes closer than this to an array are evaluated at this distance.
pub const MIN_PROBE_DISTANCE: f64 = 1.0;

/// Deterministic LoS-only channels toward an arbitrary point, with user-link
/// path-loss exponents. Used to probe the radiated beampattern.
pub fn probe_channels(cfg: &SystemConfig, p: Point) -> Result<(Vec<C64>, Vec<C64>), ScenarioError> {
    let geo = &cfg.geometry;
    let pl = &cfg.pathloss_exponents;
    let near = |a: Point| distance(a, p).max(MIN_PROBE_DISTANCE);
    let gd = path_gain(near(geo.bs), pl.bs_user, cfg.pathloss_ref_db)?.sqrt();
    let h_d = steering(cfg.m, geo.bs, geo.bs_array_axis, p)
        .into_iter()
        .map(|x| x * gd)
        .collect();
    let h_r = if cfg.n > 0 {
        let gr = path_gain(near(geo.ris), pl.ris_user, cfg.pathloss_ref_db)?.sqrt();
        steering(cfg.n, geo.ris, geo.ris_array_axis, p)
            .into_iter()
            .map(|x| x * gr)
            .collect()
    } else {
        Vec::new()
    };
    Ok((h_d, h_r))
}

/// Row vector `h_dᴴ + h_rᴴ·diag(v)·G`.
pub fn cascaded_row(h_d: &[C64], h_r: &[C64], g_mat: &CMatrix, v: &[C64]) -> Vec<C64> {
    let mut row: Vec<C64> = h_d.iter().map(|x| x.conj()).collect();
    for (nidx, (hr, vn)) in h_r.iter().zip(v).enumerate() {
        let c = hr.conj() * vn;
        for (j, r) in row.iter_mut().enumerate() {
            *r += c * g_mat[(nidx, j)];
        }
    }
    row
}

/// Users sorted by aggregated channel gain, strongest first; ties keep the
/// original order. Returns `perm` with `perm[rank] = original index`.
pub fn order_users(ch: &ChannelSet, v: &[C64]) -> Vec<usize> {
    let gains: Vec<f64> = (0..ch.k())
        .map(|k| norm_sqr(&cascaded_row(&ch.h_d[k], &ch.h_r[k], &ch.g_mat, v)))
        .collect();
    let mut perm: Vec<usize> = (0..ch.k()).collect();
    perm.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
    perm
}

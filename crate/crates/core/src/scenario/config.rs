//! Scenario configuration.
//!
//! Files are TOML or JSON with keys named exactly as the struct fields
//! (`M`, `K`, `L`, `N`, `Q` in upper case). A file may be partial: its keys
//! are merged over a named preset (`desk` unless the file sets
//! `preset = "paper"`), so a two-line file that only changes `N` is valid.
//!
//! Power-like quantities are stored in the units they are written in and
//! converted on access:
//!
//! * dBm → watts:   `10^((x − 30)/10)`
//! * dB  → linear:  `10^(x/10)`
//!
//! Per-user and per-target lists may hold a single value, which then applies
//! to every user (target).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::numerics::SolverSettings;

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub type Point = [f64; 2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathlossExponents {
    pub bs_ris: f64,
    pub ris_target: f64,
    pub ris_user: f64,
    pub bs_target: f64,
    pub bs_user: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub bs: Point,
    pub ris: Point,
    pub users: Vec<Point>,
    pub targets: Vec<Point>,
    /// Unit direction of the DFBS array axis; steering angles are measured
    /// from broadside.
    pub bs_array_axis: Point,
    pub ris_array_axis: Point,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CcpPenalty {
    pub rho0: f64,
    pub rho_growth: f64,
    pub rho_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverTolerances {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iter: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "Q")]
    pub q: usize,
    pub noise_user_dbm: Vec<f64>,
    pub noise_radar_dbm: Vec<f64>,
    pub rcs_var: Vec<f64>,
    pub snr_threshold_db: Vec<f64>,
    pub sinr_threshold_db: Vec<f64>,
    pub p_max_dbm: f64,
    pub rician_kappa_db: f64,
    pub pathloss_exponents: PathlossExponents,
    pub pathloss_ref_db: f64,
    pub geometry: Geometry,
    pub seed: u64,
    pub epsilon_conv: f64,
    pub max_ao_iters: usize,
    pub ccp_penalty: CcpPenalty,
    pub discrete_bits: u32,
    pub solver: SolverTolerances,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// M=6, K=4, L=2, N=16: small enough for CI.
    Desk,
    /// Same as desk with N=60.
    Paper,
}

impl Preset {
    pub fn config(self) -> SystemConfig {
        match self {
            Preset::Desk => SystemConfig::desk(),
            Preset::Paper => SystemConfig {
                n: 60,
                ..SystemConfig::desk()
            },
        }
    }
}

fn around(center: Point, radius: f64, degrees: &[f64]) -> Vec<Point> {
    degrees
        .iter()
        .map(|d| {
            let a = d.to_radians();
            [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
        })
        .collect()
}

impl SystemConfig {
    pub fn desk() -> Self {
        let ris = [38.0, 12.5];
        Self {
            m: 6,
            k: 4,
            l: 2,
            n: 16,
            q: 1024,
            noise_user_dbm: vec![-90.0],
            noise_radar_dbm: vec![-90.0],
            rcs_var: vec![1.0],
            snr_threshold_db: vec![10.0],
            sinr_threshold_db: vec![5.0],
            p_max_dbm: 40.0,
            rician_kappa_db: 3.0,
            pathloss_exponents: PathlossExponents {
                bs_ris: 1.1,
                ris_target: 1.1,
                ris_user: 1.2,
                bs_target: 1.2,
                bs_user: 1.7,
            },
            pathloss_ref_db: -30.0,
            geometry: Geometry {
                bs: [0.0, 0.0],
                ris,
                users: around(ris, 8.0, &[20.0, 55.0, 100.0, 140.0]),
                targets: around(ris, 4.0, &[75.0, 120.0]),
                bs_array_axis: [0.0, 1.0],
                ris_array_axis: [1.0, 0.0],
            },
            seed: 1,
            epsilon_conv: 1e-3,
            max_ao_iters: 30,
            ccp_penalty: CcpPenalty {
                rho0: 10.0,
                rho_growth: 3.0,
                rho_max: 1e5,
            },
            discrete_bits: 3,
            solver: SolverTolerances {
                feas_tol: 1e-8,
                gap_tol: 1e-8,
                max_iter: 200,
            },
        }
    }

    /// Parses a TOML or JSON document (chosen by extension, TOML otherwise)
    /// and merges it over its preset.
    pub fn from_path(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Config(format!("{}: {e}", path.display())))?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let value = if is_json {
            serde_json::from_str::<serde_json::Value>(&text)
                .map_err(|e| ScenarioError::Config(e.to_string()))?
        } else {
            let t: toml::Value =
                toml::from_str(&text).map_err(|e| ScenarioError::Config(e.to_string()))?;
            serde_json::to_value(t).map_err(|e| ScenarioError::Config(e.to_string()))?
        };
        Self::from_value(value)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let t: toml::Value =
            toml::from_str(text).map_err(|e| ScenarioError::Config(e.to_string()))?;
        Self::from_value(serde_json::to_value(t).map_err(|e| ScenarioError::Config(e.to_string()))?)
    }

    /// Merges `overrides` (a JSON object) over the preset it names.
    pub fn from_value(mut overrides: serde_json::Value) -> Result<Self, ScenarioError> {
        let preset = match overrides.as_object_mut().and_then(|o| o.remove("preset")) {
            None => Preset::Desk,
            Some(p) => serde_json::from_value(p)
                .map_err(|e| ScenarioError::Config(format!("preset: {e}")))?,
        };
        let cfg = preset.config().merged(overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Returns a copy with `overrides` merged key-by-key (objects recurse,
    /// everything else replaces).
    pub fn merged(&self, overrides: serde_json::Value) -> Result<Self, ScenarioError> {
        let mut base =
            serde_json::to_value(self).map_err(|e| ScenarioError::Config(e.to_string()))?;
        merge_json(&mut base, overrides);
        serde_json::from_value(base).map_err(|e| ScenarioError::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let err = |m: String| Err(ScenarioError::Config(m));
        if self.m < 1 || self.k < 1 || self.q < 1 {
            return err(format!(
                "need M, K, Q >= 1 (got {}, {}, {})",
                self.m, self.k, self.q
            ));
        }
        let per = |name: &str, v: &[f64], n: usize| -> Result<(), ScenarioError> {
            if v.len() == 1 || v.len() == n {
                if v.iter().all(|x| x.is_finite()) {
                    return Ok(());
                }
                return Err(ScenarioError::Config(format!(
                    "{name} has non-finite entries"
                )));
            }
            Err(ScenarioError::Config(format!(
                "{name} has {} entries, expected 1 or {n}",
                v.len()
            )))
        };
        per("noise_user_dbm", &self.noise_user_dbm, self.k)?;
        per("sinr_threshold_db", &self.sinr_threshold_db, self.k)?;
        per("noise_radar_dbm", &self.noise_radar_dbm, self.l)?;
        per("rcs_var", &self.rcs_var, self.l)?;
        per("snr_threshold_db", &self.snr_threshold_db, self.l)?;
        if self.rcs_var.iter().any(|&x| x <= 0.0) {
            return err("rcs_var must be positive".into());
        }
        if !self.p_max_dbm.is_finite()
            || !self.rician_kappa_db.is_finite()
            || !self.pathloss_ref_db.is_finite()
        {
            return err("p_max_dbm, rician_kappa_db and pathloss_ref_db must be finite".into());
        }
        if self.geometry.users.len() < self.k {
            return err(format!(
                "{} user positions for K = {}",
                self.geometry.users.len(),
                self.k
            ));
        }
        if self.geometry.targets.len() < self.l {
            return err(format!(
                "{} target positions for L = {}",
                self.geometry.targets.len(),
                self.l
            ));
        }
        for axis in [self.geometry.bs_array_axis, self.geometry.ris_array_axis] {
            if (axis[0].hypot(axis[1]) - 1.0).abs() > 1e-9 {
                return err("array axes must be unit vectors".into());
            }
        }
        if !(self.epsilon_conv > 0.0) {
            return err("epsilon_conv must be positive".into());
        }
        if self.discrete_bits < 1 {
            return err("discrete_bits must be >= 1".into());
        }
        let c = &self.ccp_penalty;
        if !(c.rho0 > 0.0 && c.rho_growth >= 1.0 && c.rho_max >= c.rho0) {
            return err("ccp_penalty needs rho0 > 0, rho_growth >= 1, rho_max >= rho0".into());
        }
        Ok(())
    }

    fn pick(v: &[f64], i: usize) -> f64 {
        if v.len() == 1 {
            v[0]
        } else {
            v[i]
        }
    }

    /// σ_k² in watts.
    pub fn noise_user(&self, k: usize) -> f64 {
        dbm_to_watt(Self::pick(&self.noise_user_dbm, k))
    }

    /// ε_l² in watts.
    pub fn noise_radar(&self, l: usize) -> f64 {
        dbm_to_watt(Self::pick(&self.noise_radar_dbm, l))
    }

    /// σ_l² (linear).
    pub fn rcs(&self, l: usize) -> f64 {
        Self::pick(&self.rcs_var, l)
    }

    /// Γ_l (linear).
    pub fn snr_threshold(&self, l: usize) -> f64 {
        db_to_linear(Self::pick(&self.snr_threshold_db, l))
    }

    /// r_th^k (linear).
    pub fn sinr_threshold(&self, k: usize) -> f64 {
        db_to_linear(Self::pick(&self.sinr_threshold_db, k))
    }

    /// P_th in watts.
    pub fn p_max(&self) -> f64 {
        dbm_to_watt(self.p_max_dbm)
    }

    pub fn kappa(&self) -> f64 {
        db_to_linear(self.rician_kappa_db)
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            feas_tol: self.solver.feas_tol,
            gap_tol: self.solver.gap_tol,
            max_iter: self.solver.max_iter,
        }
    }

    /// Applies a user permutation (`perm[new] = old`) to every per-user list
    /// that is not a broadcast scalar, and to the user positions.
    pub fn permute_users(&mut self, perm: &[usize]) {
        let apply = |v: &mut Vec<f64>| {
            if v.len() == perm.len() {
                *v = perm.iter().map(|&i| v[i]).collect();
            }
        };
        apply(&mut self.noise_user_dbm);
        apply(&mut self.sinr_threshold_db);
        let users = &self.geometry.users;
        let mut reordered: Vec<Point> = perm.iter().map(|&i| users[i]).collect();
        reordered.extend_from_slice(&users[perm.len()..]);
        self.geometry.users = reordered;
    }
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::desk()
    }
}

fn merge_json(base: &mut serde_json::Value, over: serde_json::Value) {
    match (base, over) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge_json(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

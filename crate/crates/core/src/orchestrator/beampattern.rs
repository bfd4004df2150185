//! Radiated-energy maps of a design over a Cartesian grid or an angular cut.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::OrchestratorError;
use crate::metrics::report::beampattern;
use crate::metrics::Design;
use crate::scenario::config::Point;
use crate::scenario::{ChannelSet, SystemConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    /// `steps × steps` points spanning the rectangle, endpoints included.
    Cartesian { x_min: f64, x_max: f64, y_min: f64, y_max: f64, steps: usize },
    /// Points on a circle of `radius` around the base station; θ is measured
    /// from the array broadside, in degrees.
    Angular { theta_min_deg: f64, theta_max_deg: f64, steps: usize, radius: f64 },
}

impl GridSpec {
    /// 50×50 grid over the bounding box of users and targets, widened by a
    /// 5 m margin.
    pub fn default_for(cfg: &SystemConfig) -> Self {
        const MARGIN: f64 = 5.0;
        let geo = &cfg.geometry;
        let pts: Vec<Point> = geo.users.iter().chain(&geo.targets).copied().collect();
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in &pts {
            x0 = x0.min(p[0]);
            x1 = x1.max(p[0]);
            y0 = y0.min(p[1]);
            y1 = y1.max(p[1]);
        }
        if pts.is_empty() {
            (x0, x1, y0, y1) = (geo.ris[0], geo.ris[0], geo.ris[1], geo.ris[1]);
        }
        GridSpec::Cartesian { x_min: x0 - MARGIN, x_max: x1 + MARGIN, y_min: y0 - MARGIN, y_max: y1 + MARGIN, steps: 50 }
    }

    pub fn points(&self, cfg: &SystemConfig) -> Vec<Point> {
        match *self {
            GridSpec::Cartesian { x_min, x_max, y_min, y_max, steps } => {
                let xs = linspace(x_min, x_max, steps);
                let ys = linspace(y_min, y_max, steps);
                ys.iter().flat_map(|&y| xs.iter().map(move |&x| [x, y])).collect()
            }
            GridSpec::Angular { theta_min_deg, theta_max_deg, steps, radius } => {
                let geo = &cfg.geometry;
                let axis = geo.bs_array_axis;
                let broadside = [axis[1], -axis[0]];
                linspace(theta_min_deg, theta_max_deg, steps)
                    .into_iter()
                    .map(|t| {
                        let (s, c) = t.to_radians().sin_cos();
                        [
                            geo.bs[0] + radius * (c * broadside[0] + s * axis[0]),
                            geo.bs[1] + radius * (c * broadside[1] + s * axis[1]),
                        ]
                    })
                    .collect()
            }
        }
    }

    pub fn thetas_deg(&self) -> Option<Vec<f64>> {
        match *self {
            GridSpec::Angular { theta_min_deg, theta_max_deg, steps, .. } => Some(linspace(theta_min_deg, theta_max_deg, steps)),
            GridSpec::Cartesian { .. } => None,
        }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (a + b)],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Beampattern samples with their locations.
#[derive(Clone, Debug, PartialEq)]
pub struct BeampatternMap {
    pub points: Vec<Point>,
    /// Angles in degrees for an angular cut.
    pub thetas_deg: Option<Vec<f64>>,
    pub values: Vec<f64>,
}

impl BeampatternMap {
    pub fn median(&self) -> f64 {
        let mut v = self.values.clone();
        v.sort_by(|a, b| a.total_cmp(b));
        match v.len() {
            0 => f64::NAN,
            n if n % 2 == 1 => v[n / 2],
            n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
        }
    }

    /// Writes `x,y,bp` rows, or `theta_deg,bp_db` rows for an angular cut.
    pub fn write_csv(&self, out: impl Write) -> Result<(), OrchestratorError> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| OrchestratorError::Other(format!("csv: {e}"));
        match &self.thetas_deg {
            Some(th) => {
                w.write_record(["theta_deg", "bp_db"]).map_err(csv_err)?;
                for (t, bp) in th.iter().zip(&self.values) {
                    w.write_record([t.to_string(), (10.0 * bp.log10()).to_string()]).map_err(csv_err)?;
                }
            }
            None => {
                w.write_record(["x", "y", "bp"]).map_err(csv_err)?;
                for (p, bp) in self.points.iter().zip(&self.values) {
                    w.write_record([p[0].to_string(), p[1].to_string(), bp.to_string()]).map_err(csv_err)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluates the beampattern of `design` on `grid` and writes it as CSV.
pub fn emit_beampattern(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    design: &Design,
    grid: &GridSpec,
    out: impl Write,
) -> Result<BeampatternMap, OrchestratorError> {
    let points = grid.points(cfg);
    let values = beampattern(cfg, ch, design, &points)?;
    let map = BeampatternMap { points, thetas_deg: grid.thetas_deg(), values };
    map.write_csv(out)?;
    Ok(map)
}

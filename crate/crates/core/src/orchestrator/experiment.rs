//! Seeded sweeps over scenarios, seeds and baselines.
//!
//! An experiment file is a scenario config with an optional `[experiment]`
//! table:
//!
//! ```toml
//! preset = "desk"
//! N = 16
//!
//! [experiment]
//! seeds = [1, 2, 3]
//! baselines = ["proposed", "random_phase"]
//! scenarios = [{ N = 16 }, { N = 32 }]
//! record_wall_time = true
//! ```
//!
//! Every `(scenario, seed)` pair draws its own channels from the seed, so all
//! baselines of a pair see the same channels and initial phases. Pairs run in
//! parallel; rows are written in `(scenario, seed, baseline)` order.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baselines::{run_baselines, BaselineKind, BaselineRun};
use super::{OrchestratorError, Scenario, SolveStatus, SolveTrace, OUTPUT_TOL};
use crate::metrics::radar::radar_snr_lb;
use crate::metrics::{Design, RateReport};
use crate::scenario::config::linear_to_db;
use crate::scenario::{ScenarioError, SystemConfig};

pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    /// One config per scenario.
    pub scenarios: Vec<SystemConfig>,
    pub seeds: Vec<u64>,
    pub baselines: Vec<BaselineKind>,
    /// When false, `wall_ms` is written as 0 so reruns are byte-identical.
    pub record_wall_time: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentTable {
    seeds: Option<Vec<u64>>,
    baselines: Option<Vec<String>>,
    #[serde(default)]
    scenarios: Vec<serde_json::Value>,
    record_wall_time: Option<bool>,
}

impl ExperimentSpec {
    /// One scenario, one seed, one baseline.
    pub fn single(cfg: SystemConfig, seed: u64, baseline: BaselineKind) -> Self {
        Self { scenarios: vec![cfg], seeds: vec![seed], baselines: vec![baseline], record_wall_time: true }
    }

    pub fn from_path(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|e| ScenarioError::Config(format!("{}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let value = if is_json {
            serde_json::from_str(&text).map_err(|e| ScenarioError::Config(e.to_string()))?
        } else {
            let t: toml::Value = toml::from_str(&text).map_err(|e| ScenarioError::Config(e.to_string()))?;
            serde_json::to_value(t).map_err(|e| ScenarioError::Config(e.to_string()))?
        };
        Self::from_value(value)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let t: toml::Value = toml::from_str(text).map_err(|e| ScenarioError::Config(e.to_string()))?;
        Self::from_value(serde_json::to_value(t).map_err(|e| ScenarioError::Config(e.to_string()))?)
    }

    /// Splits off the `experiment` table; the rest is the base scenario.
    /// Seeds default to the config seed, baselines to `proposed`.
    pub fn from_value(mut value: serde_json::Value) -> Result<Self, ScenarioError> {
        let table = match value.as_object_mut().and_then(|o| o.remove("experiment")) {
            Some(t) => serde_json::from_value::<ExperimentTable>(t)
                .map_err(|e| ScenarioError::Config(format!("experiment: {e}")))?,
            None => ExperimentTable::default(),
        };
        let base = SystemConfig::from_value(value)?;
        let scenarios = if table.scenarios.is_empty() {
            vec![base.clone()]
        } else {
            table
                .scenarios
                .into_iter()
                .map(|o| {
                    let cfg = base.merged(o)?;
                    cfg.validate()?;
                    Ok(cfg)
                })
                .collect::<Result<_, ScenarioError>>()?
        };
        let baselines = match table.baselines {
            None => vec![BaselineKind::Proposed],
            Some(names) => names
                .iter()
                .map(|n| n.parse().map_err(ScenarioError::Config))
                .collect::<Result<_, _>>()?,
        };
        Ok(Self {
            scenarios,
            seeds: table.seeds.unwrap_or_else(|| vec![base.seed]),
            baselines,
            record_wall_time: table.record_wall_time.unwrap_or(true),
        })
    }
}

/// One row of `summary.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub seed: u64,
    pub baseline: String,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub p_th_dbm: f64,
    /// bits/s/Hz; NaN when the cell produced no design.
    pub sum_rate: f64,
    /// Smallest `10·log10(SNR_lb / Γ)` over targets; NaN without targets.
    pub min_snr_margin_db: f64,
    pub iterations: usize,
    pub status: String,
    pub wall_ms: f64,
}

const SUMMARY_HEADER: [&str; 11] =
    ["seed", "baseline", "M", "N", "K", "P_th_dbm", "sum_rate", "min_snr_margin_db", "iterations", "status", "wall_ms"];

impl SummaryRow {
    fn record(&self) -> [String; 11] {
        [
            self.seed.to_string(),
            self.baseline.clone(),
            self.m.to_string(),
            self.n.to_string(),
            self.k.to_string(),
            self.p_th_dbm.to_string(),
            self.sum_rate.to_string(),
            self.min_snr_margin_db.to_string(),
            self.iterations.to_string(),
            self.status.clone(),
            self.wall_ms.to_string(),
        ]
    }
}

/// Contents of one trace JSON file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellRecord {
    pub scenario: usize,
    pub seed: u64,
    pub baseline: BaselineKind,
    pub status: String,
    pub error: Option<String>,
    pub trace: Option<SolveTrace>,
    pub report: Option<RateReport>,
    pub design: Option<Design>,
}

/// Rows plus the number of cells skipped as infeasible.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutcome {
    pub rows: Vec<SummaryRow>,
    pub infeasible: usize,
    pub errors: usize,
}

fn min_margin_db(run: &BaselineRun) -> f64 {
    (0..run.ch.l())
        .map(|l| linear_to_db(radar_snr_lb(&run.cfg, &run.ch, &run.design, l) / run.cfg.snr_threshold(l)))
        .fold(f64::NAN, f64::min)
}

fn cell(
    scenario: usize,
    cfg: &SystemConfig,
    seed: u64,
    kind: BaselineKind,
    result: Result<BaselineRun, OrchestratorError>,
    wall_ms: f64,
) -> (SummaryRow, CellRecord) {
    let mut row = SummaryRow {
        seed,
        baseline: kind.to_string(),
        m: cfg.m,
        n: cfg.n,
        k: cfg.k,
        p_th_dbm: cfg.p_max_dbm,
        sum_rate: f64::NAN,
        min_snr_margin_db: f64::NAN,
        iterations: 0,
        status: String::new(),
        wall_ms,
    };
    let mut rec =
        CellRecord { scenario, seed, baseline: kind, status: String::new(), error: None, trace: None, report: None, design: None };
    match result {
        Ok(run) => {
            let report = RateReport::evaluate(kind.problem_kind(), &run.cfg, &run.ch, &run.design, OUTPUT_TOL);
            row.sum_rate = report.sum_rate;
            row.min_snr_margin_db = min_margin_db(&run);
            row.iterations = run.trace.iterations.len();
            row.status = run.trace.status.as_str().into();
            rec.status = row.status.clone();
            rec.error = run.trace.message.clone();
            rec.trace = Some(run.trace);
            rec.report = Some(report);
            rec.design = Some(run.design);
        }
        Err(e) => {
            row.status = match e {
                OrchestratorError::InfeasibleScenario(_) => "infeasible_scenario",
                _ => "error",
            }
            .into();
            rec.status = row.status.clone();
            rec.error = Some(e.to_string());
        }
    }
    (row, rec)
}

/// Runs every cell of `spec` and writes `summary.csv` plus one
/// `trace_s{scenario}_seed{seed}_{baseline}.json` per cell into `out_dir`.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path) -> Result<ExperimentOutcome, OrchestratorError> {
    fs::create_dir_all(out_dir)?;
    let jobs: Vec<(usize, u64)> =
        (0..spec.scenarios.len()).flat_map(|s| spec.seeds.iter().map(move |&seed| (s, seed))).collect();
    let cells: Vec<Vec<(SummaryRow, CellRecord)>> = jobs
        .par_iter()
        .map(|&(s, seed)| {
            let cfg = &spec.scenarios[s];
            let start = Instant::now();
            let results = match Scenario::draw(cfg, seed) {
                Ok(sc) => run_baselines(&spec.baselines, &sc),
                Err(e) => spec.baselines.iter().map(|&k| (k, Err(OrchestratorError::from(e.clone())))).collect(),
            };
            // baselines of one pair share a single timer: the proposed run is
            // reused by comm_only, so per-baseline times would be misleading
            let wall = if spec.record_wall_time { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
            results.into_iter().map(|(k, r)| cell(s, cfg, seed, k, r, wall)).collect()
        })
        .collect();

    let summary = out_dir.join(SUMMARY_FILE);
    let mut w = csv::Writer::from_path(&summary).map_err(|e| csv_error(&summary, e))?;
    w.write_record(SUMMARY_HEADER).map_err(|e| csv_error(&summary, e))?;
    let mut rows = Vec::new();
    let (mut infeasible, mut errors) = (0, 0);
    for (row, rec) in cells.into_iter().flatten() {
        w.write_record(row.record()).map_err(|e| csv_error(&summary, e))?;
        let path = out_dir.join(trace_file_name(rec.scenario, rec.seed, rec.baseline));
        let json = serde_json::to_string_pretty(&rec).map_err(|e| OrchestratorError::Other(e.to_string()))?;
        fs::write(&path, json)?;
        match row.status.as_str() {
            "infeasible_scenario" => infeasible += 1,
            "error" => errors += 1,
            _ => {}
        }
        rows.push(row);
    }
    w.flush()?;
    Ok(ExperimentOutcome { rows, infeasible, errors })
}

pub fn trace_file_name(scenario: usize, seed: u64, kind: BaselineKind) -> String {
    format!("trace_s{scenario}_seed{seed}_{kind}.json")
}

fn csv_error(path: &PathBuf, e: csv::Error) -> OrchestratorError {
    OrchestratorError::Other(format!("{}: {e}", path.display()))
}

impl SolveStatus {
    pub fn is_converged(self) -> bool {
        self == SolveStatus::Converged
    }
}

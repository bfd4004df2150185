use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use risnoma::orchestrator::experiment::ExperimentOutcome;
use risnoma::orchestrator::{
    emit_beampattern, run_baseline, run_experiment, selftest, BaselineKind, ExperimentSpec, GridSpec, OrchestratorError,
    Scenario,
};
use risnoma::scenario::{Preset, SystemConfig};

#[derive(Parser)]
#[command(name = "risnoma", version, about = "RIS-assisted NOMA-ISAC beamforming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Seed (overrides the config and any seed list).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Preset used when no config file is given.
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    /// Baseline: proposed, comm_only, discrete[:bits], random_phase,
    /// without_ris, without_noma.
    #[arg(long)]
    baseline: Option<BaselineKind>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario with one baseline.
    Run {
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run every scenario × seed × baseline cell of an experiment file.
    Sweep {
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Solve one scenario and write its beampattern as CSV.
    Beampattern {
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        /// Cartesian grid `x_min,x_max,y_min,y_max,steps`.
        #[arg(long, conflicts_with = "angular", allow_hyphen_values = true)]
        grid: Option<String>,
        /// Angular cut `theta_min_deg,theta_max_deg,steps,radius`.
        #[arg(long, allow_hyphen_values = true)]
        angular: Option<String>,
    },
    /// Quick numerical self-checks.
    Selftest,
}

fn load_spec(config: Option<&Path>, preset: Preset) -> Result<ExperimentSpec, OrchestratorError> {
    Ok(match config {
        Some(p) => ExperimentSpec::from_path(p)?,
        None => {
            let cfg = preset.config();
            ExperimentSpec::single(cfg.clone(), cfg.seed, BaselineKind::Proposed)
        }
    })
}

fn apply_common(spec: &mut ExperimentSpec, common: &Common) {
    if let Some(s) = common.seed {
        spec.seeds = vec![s];
    }
    if let Some(b) = common.baseline {
        spec.baselines = vec![b];
    }
}

fn parse_floats(s: &str, n: usize) -> Result<Vec<f64>, OrchestratorError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| OrchestratorError::Other(format!("'{s}': {e}")))?;
    if v.len() != n {
        return Err(OrchestratorError::Other(format!("'{s}': expected {n} comma-separated numbers")));
    }
    Ok(v)
}

fn report(outcome: &ExperimentOutcome, out: &Path) -> ExitCode {
    for r in &outcome.rows {
        println!(
            "seed {} {:<22} N={:<3} sum_rate {:>9.4} margin {:>8.3} dB  iters {:>2}  {}",
            r.seed, r.baseline, r.n, r.sum_rate, r.min_snr_margin_db, r.iterations, r.status
        );
    }
    println!("wrote {}", out.display());
    if outcome.errors > 0 {
        ExitCode::from(1)
    } else if outcome.infeasible > 0 {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn exit_for(e: &OrchestratorError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        OrchestratorError::InfeasibleScenario(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn single_config(config: Option<&Path>, preset: Preset) -> Result<SystemConfig, OrchestratorError> {
    Ok(match config {
        Some(p) => SystemConfig::from_path(p)?,
        None => preset.config(),
    })
}

fn run(command: Command) -> Result<ExitCode, OrchestratorError> {
    match command {
        Command::Run { config, common } => {
            let cfg = single_config(config.as_deref(), common.preset)?;
            let seed = common.seed.unwrap_or(cfg.seed);
            let mut spec = ExperimentSpec::single(cfg, seed, common.baseline.unwrap_or(BaselineKind::Proposed));
            apply_common(&mut spec, &common);
            let outcome = run_experiment(&spec, &common.out)?;
            Ok(report(&outcome, &common.out))
        }
        Command::Sweep { config, common } => {
            let mut spec = load_spec(config.as_deref(), common.preset)?;
            apply_common(&mut spec, &common);
            let outcome = run_experiment(&spec, &common.out)?;
            Ok(report(&outcome, &common.out))
        }
        Command::Beampattern { config, common, grid, angular } => {
            let cfg = single_config(config.as_deref(), common.preset)?;
            let seed = common.seed.unwrap_or(cfg.seed);
            let sc = Scenario::draw(&cfg, seed)?;
            let kind = common.baseline.unwrap_or(BaselineKind::Proposed);
            let run = run_baseline(kind, &sc, None)?;
            let spec = if let Some(g) = grid {
                let v = parse_floats(&g, 5)?;
                GridSpec::Cartesian { x_min: v[0], x_max: v[1], y_min: v[2], y_max: v[3], steps: v[4] as usize }
            } else if let Some(a) = angular {
                let v = parse_floats(&a, 4)?;
                GridSpec::Angular { theta_min_deg: v[0], theta_max_deg: v[1], steps: v[2] as usize, radius: v[3] }
            } else {
                GridSpec::default_for(&run.cfg)
            };
            std::fs::create_dir_all(&common.out)?;
            let path = common.out.join("beampattern.csv");
            let file = std::fs::File::create(&path)?;
            let map = emit_beampattern(&run.cfg, &run.ch, &run.design, &spec, file)?;
            println!("{} points, median {:.4e}, wrote {}", map.values.len(), map.median(), path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Selftest => {
            let checks = selftest::run();
            let mut ok = true;
            for c in &checks {
                println!("{} {:<32} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => exit_for(&e),
    }
}

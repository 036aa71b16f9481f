use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use uavnet::beamforming::BeamformerKind;
use uavnet::harness::{
    run_experiment, write_results, ExperimentSpec, HarnessError, RunOptions, TrialInputs,
};
use uavnet::height::{ccp_solve, mmse_at_heights, write_ccp_log};
use uavnet::orchestrator::{
    evaluate_solution, nearest_baseline, solve_bilayer, with_beamformer, BilayerOptions, CsiMode,
    Method, Solution,
};
use uavnet::scenario::{load_params, load_scenario, SystemParams};

const EXIT_CONFIG: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(
    name = "uavnet",
    version,
    about = "UAV association, beamforming and height optimization"
)]
struct Cli {
    /// More log output (-v info, -vv debug, -vvv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one random or given instance and write the solution.
    Solve {
        /// Parameter file (TOML with a `[params]` table). Defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Explicit scenario (TOML) instead of a random draw.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csi: Option<CsiMode>,
        #[arg(long, default_value = "proposed")]
        method: Method,
        #[arg(long, default_value = "optimal")]
        beamformer: BeamformerKind,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a Monte-Carlo sweep described by an experiment file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the experiment's seed base.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        csi: Option<CsiMode>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write one row per trial.
        #[arg(long)]
        raw: bool,
    },
    /// Check an experiment, parameter or scenario file.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

enum Failure {
    Config(String),
    Infeasible(String),
    Io(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(m) => Failure::Config(m),
            other => Failure::Io(other.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Solve {
            config,
            scenario,
            seed,
            csi,
            method,
            beamformer,
            out,
        } => solve(
            config,
            scenario,
            seed,
            csi,
            method,
            beamformer,
            &out,
            cli.verbose > 0,
        ),
        Command::Sweep {
            config,
            seed,
            trials,
            csi,
            workers,
            out,
            raw,
        } => sweep(&config, seed, trials, csi, workers, &out, raw),
        Command::Validate { config } => validate(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("configuration error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Infeasible(m)) => {
            eprintln!("infeasible: {m}");
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(Failure::Io(m)) => {
            eprintln!("I/O error: {m}");
            ExitCode::from(EXIT_IO)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn solve(
    config: Option<PathBuf>,
    scenario: Option<PathBuf>,
    seed: u64,
    csi: Option<CsiMode>,
    method: Method,
    beamformer: BeamformerKind,
    out: &Path,
    verbose: bool,
) -> Result<(), Failure> {
    let params = match &config {
        Some(p) => load_params(&read(p)?).map_err(|e| Failure::Config(e.to_string()))?,
        None => SystemParams::default(),
    };
    let csi = csi.unwrap_or(if params.channel_error_var > 0.0 {
        CsiMode::Imperfect
    } else {
        CsiMode::Perfect
    });
    let mut inputs = TrialInputs::draw(&params, seed, csi)?;
    if let Some(p) = &scenario {
        let scn = load_scenario(&read(p)?).map_err(|e| Failure::Config(e.to_string()))?;
        inputs = TrialInputs::draw(&scn.params, seed, csi)?;
        inputs.scenario = scn;
    }
    let scn = &inputs.scenario;
    let view = inputs.view();
    let clock = Instant::now();
    let sol = match method {
        Method::Proposed => {
            let sol = solve_bilayer(scn, &view, csi, &BilayerOptions::default())
                .map_err(|e| Failure::Infeasible(e.to_string()))?;
            if beamformer == BeamformerKind::Optimal {
                sol
            } else {
                with_beamformer(scn, &view, &sol, beamformer)
                    .map_err(|e| Failure::Infeasible(e.to_string()))?
            }
        }
        Method::Nearest => nearest_baseline(scn, &view, csi, beamformer)
            .map_err(|e| Failure::Infeasible(e.to_string()))?,
    };
    log::info!("solved in {:.2} s", clock.elapsed().as_secs_f64());

    fs::create_dir_all(out).map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
    write(&out.join("solution.toml"), &sol.to_toml())?;
    write(&out.join("scenario.toml"), &scn.to_toml())?;
    if verbose && method == Method::Proposed && sol.is_success() {
        write_final_ccp_log(&inputs, &sol, &out.join("ccp_log.csv"))?;
    }
    let ev = evaluate_solution(scn, &view, &sol).map_err(|e| Failure::Infeasible(e.to_string()))?;
    println!(
        "status = {:?}, min UAV rate = {}, min ground-user rate = {}, violations = {}",
        sol.status,
        fmt_rate(sol.min_uav_rate),
        fmt_rate(sol.min_gue_rate),
        ev.violations.len()
    );
    if !sol.is_success() {
        return Err(Failure::Infeasible(
            sol.diagnostics
                .message
                .clone()
                .unwrap_or_else(|| "no feasible operating point".into()),
        ));
    }
    Ok(())
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or_else(|| "-".into(), |r| format!("{r:.4}"))
}

/// Re-runs the convex-concave height update once at the final association
/// and logs its iterates.
fn write_final_ccp_log(inputs: &TrialInputs, sol: &Solution, path: &Path) -> Result<(), Failure> {
    let scn = &inputs.scenario;
    let view = inputs.view();
    let assoc = sol.association(scn.num_bs());
    let start = vec![scn.params.uav_height_min; scn.num_uav()];
    let Ok((bf, _)) = mmse_at_heights(scn, &view, &assoc, &start) else {
        return Ok(());
    };
    let x: Vec<f64> = start
        .iter()
        .map(|h| (h - scn.params.bs_height).powi(2))
        .collect();
    match ccp_solve(scn, &view, &assoc, &bf, &x, &Default::default()) {
        Ok(ccp) => {
            let mut buf = Vec::new();
            write_ccp_log(&ccp.trace, &mut buf).map_err(|e| Failure::Io(e.to_string()))?;
            write(path, &String::from_utf8_lossy(&buf))
        }
        Err(e) => {
            log::warn!("no CCP log: {e}");
            Ok(())
        }
    }
}

fn sweep(
    config: &Path,
    seed: Option<u64>,
    trials: Option<usize>,
    csi: Option<CsiMode>,
    workers: usize,
    out: &Path,
    raw: bool,
) -> Result<(), Failure> {
    let mut spec = ExperimentSpec::from_toml(&read(config)?)?;
    if let Some(s) = seed {
        spec.seed_base = s;
    }
    if let Some(t) = trials {
        spec.trials = t;
    }
    if csi.is_some() {
        spec.csi = csi;
    }
    spec.validate()?;
    let clock = Instant::now();
    let output = run_experiment(
        &spec,
        &RunOptions {
            workers,
            ..Default::default()
        },
    )?;
    log::info!("sweep finished in {:.1} s", clock.elapsed().as_secs_f64());
    write_results(&output, out, raw)?;
    for r in &output.table.rows {
        println!(
            "{:>10} {:>9} {:>8} {:?}: min UAV rate {:.4} ± {:.4} ({} of {} feasible, {} errors)",
            r.sweep_value,
            r.method.label(),
            r.beamformer.label(),
            r.track,
            r.mean_min_uav_rate,
            r.std_error,
            r.feasible_count,
            r.trial_count,
            r.error_count
        );
    }
    Ok(())
}

fn validate(config: &Path) -> Result<(), Failure> {
    let text = read(config)?;
    let value: toml::Table = toml::from_str(&text).map_err(|e| Failure::Config(e.to_string()))?;
    if value.contains_key("kind") {
        let spec = ExperimentSpec::from_toml(&text)?;
        println!(
            "experiment: {:?}, {} sweep points, {} trials",
            spec.kind,
            spec.sweep.len(),
            spec.trials
        );
    } else if value.contains_key("geometry") || value.contains_key("generate") {
        let scn = load_scenario(&text).map_err(|e| Failure::Config(e.to_string()))?;
        println!(
            "scenario: {} base stations, {} ground users, {} UAVs",
            scn.num_bs(),
            scn.num_gue(),
            scn.num_uav()
        );
    } else {
        let p = load_params(&text).map_err(|e| Failure::Config(e.to_string()))?;
        println!(
            "parameters: N = {}, K = {}, U = {}",
            p.antennas_per_bs, p.gues_per_cell, p.num_uav
        );
    }
    Ok(())
}

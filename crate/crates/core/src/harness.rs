//! Monte-Carlo experiment runner: sweeps, paired trials, aggregation and
//! result files.
//!
//! Every trial draws one scenario and one channel realization from its own
//! seed and runs every requested method on that same draw, so method
//! comparisons are paired.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beamforming::BeamformerKind;
use crate::channel::{
    corrupt_channels, realize_channels, ChannelSet, CsiView, ImperfectChannelSet,
};
use crate::orchestrator::{
    evaluate_solution, nearest_baseline, solve_bilayer, with_beamformer, BilayerOptions, CsiMode,
    Method, OrchestratorError, Solution,
};
use crate::scenario::{generate_scenario, Point2, Scenario, SystemParams};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("could not encode metadata: {0}")]
    Metadata(#[from] toml::ser::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ExperimentKind {
    /// Sweep value: antennas per base station.
    AntennaSweep,
    /// Sweep value: common UAV height in meters, held fixed.
    HeightSweep,
    /// Sweep value: ground users per cell.
    GueCountSweep,
    /// Sweep value: channel estimation error variance.
    ErrorVarSweep,
    /// Sweep value: antenna correlation coefficient.
    CorrelationSweep,
    /// Sweep value: position of UAV 0 along the path, 0 at the start and 1
    /// at the end.
    MobilityLine,
}

impl ExperimentKind {
    pub fn default_csi(self) -> CsiMode {
        match self {
            ExperimentKind::ErrorVarSweep
            | ExperimentKind::CorrelationSweep
            | ExperimentKind::MobilityLine => CsiMode::Imperfect,
            _ => CsiMode::Perfect,
        }
    }
}

/// Straight path flown by UAV 0 in the mobility experiment, at `h_min`.
pub const MOBILITY_START: (f64, f64) = (600.0, -600.0);
pub const MOBILITY_END: (f64, f64) = (-600.0, 600.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub sweep: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_beamformers")]
    pub beamformers: Vec<BeamformerKind>,
    /// Defaults to imperfect for the error, correlation and mobility sweeps
    /// and perfect otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csi: Option<CsiMode>,
    #[serde(default)]
    pub params: SystemParams,
}

fn default_trials() -> usize {
    100
}

fn default_methods() -> Vec<Method> {
    vec![Method::Proposed, Method::Nearest]
}

fn default_beamformers() -> Vec<BeamformerKind> {
    vec![BeamformerKind::Optimal]
}

fn is_count(v: f64) -> bool {
    v.fract() == 0.0 && v >= 1.0 && v < 1e6
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let spec: ExperimentSpec =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn csi_mode(&self) -> CsiMode {
        self.csi.unwrap_or(self.kind.default_csi())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.sweep.is_empty() {
            return bad("sweep values must not be empty".into());
        }
        if self.sweep.iter().any(|v| !v.is_finite()) {
            return bad("sweep values must be finite".into());
        }
        if self.sweep.windows(2).any(|w| w[0] >= w[1]) {
            return bad("sweep values must be strictly increasing".into());
        }
        if self.methods.is_empty() || self.beamformers.is_empty() {
            return bad("methods and beamformers must not be empty".into());
        }
        if self.seed_base > i64::MAX as u64 {
            return bad("seed_base must be below 2^63".into());
        }
        for &v in &self.sweep {
            let ok = match self.kind {
                ExperimentKind::AntennaSweep | ExperimentKind::GueCountSweep => is_count(v),
                ExperimentKind::HeightSweep => {
                    v >= self.params.uav_height_min && v <= self.params.uav_height_max
                }
                ExperimentKind::MobilityLine => (0.0..=1.0).contains(&v),
                ExperimentKind::ErrorVarSweep => v >= 0.0,
                ExperimentKind::CorrelationSweep => (0.0..=1.0).contains(&v),
            };
            if !ok {
                return bad(format!(
                    "sweep value {v} is out of range for {:?}",
                    self.kind
                ));
            }
            self.params_at(v)
                .validate()
                .map_err(|e| HarnessError::Config(format!("sweep value {v}: {e}")))?;
        }
        if self.kind == ExperimentKind::MobilityLine && self.params.num_uav == 0 {
            return bad("the mobility experiment needs at least one UAV".into());
        }
        Ok(())
    }

    /// System parameters for one sweep point.
    pub fn params_at(&self, value: f64) -> SystemParams {
        let mut p = self.params.clone();
        match self.kind {
            ExperimentKind::AntennaSweep => p.antennas_per_bs = value as usize,
            ExperimentKind::GueCountSweep => p.gues_per_cell = value as usize,
            ExperimentKind::ErrorVarSweep => p.channel_error_var = value,
            ExperimentKind::CorrelationSweep => p.correlation_coeff = value,
            ExperimentKind::HeightSweep | ExperimentKind::MobilityLine => {}
        }
        p
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one trial. It depends only on its arguments, so adding trials or
/// sweep points leaves existing trials unchanged. Kept below 2^63 so it fits
/// TOML integers.
pub fn trial_seed(seed_base: u64, sweep_value: f64, trial: usize) -> u64 {
    let h = splitmix64(seed_base);
    let h = splitmix64(h ^ sweep_value.to_bits());
    splitmix64(h ^ trial as u64) >> 1
}

/// Independent stream derived from a trial seed.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream)) >> 1
}

const CHANNEL_STREAM: u64 = 1;
const ERROR_STREAM: u64 = 2;

/// Everything one trial is computed from.
#[derive(Debug, Clone)]
pub struct TrialInputs {
    pub scenario: Scenario,
    pub channels: ChannelSet,
    pub imperfect: ImperfectChannelSet,
    pub csi: CsiMode,
}

impl TrialInputs {
    pub fn draw(params: &SystemParams, seed: u64, csi: CsiMode) -> Result<Self, HarnessError> {
        let scenario =
            generate_scenario(seed, params).map_err(|e| HarnessError::Config(e.to_string()))?;
        let channels = realize_channels(&scenario, sub_seed(seed, CHANNEL_STREAM))
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        let imperfect = corrupt_channels(
            &channels,
            params.channel_error_var,
            params.correlation_coeff,
            sub_seed(seed, ERROR_STREAM),
        );
        Ok(TrialInputs {
            scenario,
            channels,
            imperfect,
            csi,
        })
    }

    pub fn view(&self) -> CsiView<'_> {
        match self.csi {
            CsiMode::Perfect => CsiView::perfect(&self.channels),
            CsiMode::Imperfect => CsiView::estimated(&self.imperfect),
        }
    }
}

/// Inputs of trial `trial` at sweep point `sweep_index`. For the mobility
/// experiment the scenario is the one at the start of the path.
pub fn trial_inputs(
    spec: &ExperimentSpec,
    sweep_index: usize,
    trial: usize,
) -> Result<TrialInputs, HarnessError> {
    let value = spec.sweep[sweep_index];
    let seed = seed_of(spec, value, trial);
    let mut inputs = TrialInputs::draw(&spec.params_at(value), seed, spec.csi_mode())?;
    match spec.kind {
        ExperimentKind::HeightSweep => {
            inputs.scenario.uav_heights = vec![value; inputs.scenario.num_uav()];
        }
        ExperimentKind::MobilityLine => {
            inputs.scenario = mobility_scenario(&inputs.scenario, value);
        }
        _ => {}
    }
    Ok(inputs)
}

fn seed_of(spec: &ExperimentSpec, value: f64, trial: usize) -> u64 {
    // One draw per trial is shared by every point of the path.
    let key = if spec.kind == ExperimentKind::MobilityLine {
        spec.sweep[0]
    } else {
        value
    };
    trial_seed(spec.seed_base, key, trial)
}

/// `base` with UAV 0 moved to fraction `s` of the mobility path and every
/// UAV at `h_min`. Small-scale fading is left to the caller, so reusing one
/// channel draw keeps it fixed along the path.
pub fn mobility_scenario(base: &Scenario, s: f64) -> Scenario {
    let mut scn = base.clone();
    let (x0, y0) = MOBILITY_START;
    let (x1, y1) = MOBILITY_END;
    scn.uav_positions[0] = Point2::new(x0 + s * (x1 - x0), y0 + s * (y1 - y0));
    scn.uav_heights = vec![scn.params.uav_height_min; scn.num_uav()];
    scn
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Track {
    /// Solved for the trial's own inputs.
    Solved,
    /// Mobility only: variables chosen at the first path point, re-evaluated
    /// at later points.
    FixedTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialOutcome {
    /// Every UAV served and every ground user at its target.
    Feasible,
    /// No valid operating point; scored as a zero minimum UAV rate.
    Outage,
    /// The solver failed; excluded from the averages.
    Error,
}

/// One (trial, method, beamformer, track) result. Also the row type of the
/// raw per-trial dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub sweep_index: usize,
    pub sweep_value: f64,
    pub trial: usize,
    pub seed: u64,
    pub method: Method,
    pub beamformer: BeamformerKind,
    pub track: Track,
    pub outcome: TrialOutcome,
    /// Zero on outage.
    pub min_uav_rate: f64,
    /// Minimum UAV rate as evaluated, before outage scoring.
    pub raw_min_uav_rate: Option<f64>,
    pub min_gue_rate: Option<f64>,
    pub mean_height: Option<f64>,
    #[serde(skip)]
    pub solution: Option<Box<Solution>>,
    #[serde(skip)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub method: Method,
    pub beamformer: BeamformerKind,
    pub track: Track,
    /// Mean over non-error trials, outages counted as zero.
    pub mean_min_uav_rate: f64,
    /// Standard error of `mean_min_uav_rate`.
    pub std_error: f64,
    /// The remaining means are over feasible trials only.
    pub mean_min_gue_rate: Option<f64>,
    pub mean_optimal_height: Option<f64>,
    pub mean_min_uav_rate_feasible: Option<f64>,
    /// Non-error trials.
    pub trial_count: usize,
    pub feasible_count: usize,
    pub error_count: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn row(
        &self,
        sweep_value: f64,
        method: Method,
        beamformer: BeamformerKind,
        track: Track,
    ) -> Option<&ResultRow> {
        self.rows.iter().find(|r| {
            r.sweep_value == sweep_value
                && r.method == method
                && r.beamformer == beamformer
                && r.track == track
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub workers: usize,
    /// Attach each solved `Solution` to its record.
    pub keep_solutions: bool,
    pub bilayer: BilayerOptions,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            workers: 1,
            keep_solutions: false,
            bilayer: BilayerOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub spec: ExperimentSpec,
    pub table: ResultTable,
    /// Ordered by sweep point, trial, method, beamformer and track.
    pub records: Vec<TrialRecord>,
}

pub fn run_experiment(
    spec: &ExperimentSpec,
    opts: &RunOptions,
) -> Result<ExperimentOutput, HarnessError> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let jobs: Vec<(usize, usize)> = if spec.kind == ExperimentKind::MobilityLine {
        (0..spec.trials).map(|t| (0, t)).collect()
    } else {
        (0..spec.sweep.len())
            .flat_map(|v| (0..spec.trials).map(move |t| (v, t)))
            .collect()
    };
    let per_job: Vec<Result<Vec<TrialRecord>, HarnessError>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(v, t)| {
                if spec.kind == ExperimentKind::MobilityLine {
                    run_mobility_trial(spec, t, opts)
                } else {
                    run_trial(spec, v, t, opts)
                }
            })
            .collect()
    });
    let mut records = Vec::new();
    for r in per_job {
        records.extend(r?);
    }
    records.sort_by_key(|r| (r.sweep_index, r.trial));
    let table = aggregate(spec, &records);
    Ok(ExperimentOutput {
        spec: spec.clone(),
        table,
        records,
    })
}

struct Attempt {
    method: Method,
    beamformer: BeamformerKind,
    result: Result<Solution, OrchestratorError>,
}

/// Solves every method and beamformer on one draw. The proposed association
/// is computed once and shared by its receiver variants.
fn solve_all(spec: &ExperimentSpec, inputs: &TrialInputs, opts: &RunOptions) -> Vec<Attempt> {
    let scn = &inputs.scenario;
    let view = inputs.view();
    let csi = inputs.csi;
    let mut out = Vec::new();
    for &method in &spec.methods {
        match method {
            Method::Proposed => {
                let mut bilayer = opts.bilayer.clone();
                if matches!(
                    spec.kind,
                    ExperimentKind::HeightSweep | ExperimentKind::MobilityLine
                ) {
                    bilayer.optimize_heights = false;
                }
                let base = solve_bilayer(scn, &view, csi, &bilayer);
                if let Err(e) = &base {
                    log::warn!("proposed solve failed: {e}");
                }
                for &kind in &spec.beamformers {
                    let result = match (&base, kind) {
                        (Ok(sol), BeamformerKind::Optimal) => Ok(sol.clone()),
                        (Ok(sol), _) => with_beamformer(scn, &view, sol, kind),
                        (Err(e), _) => Err(OrchestratorError::Malformed(e.to_string())),
                    };
                    out.push(Attempt {
                        method,
                        beamformer: kind,
                        result,
                    });
                }
            }
            Method::Nearest => {
                for &kind in &spec.beamformers {
                    out.push(Attempt {
                        method,
                        beamformer: kind,
                        result: nearest_baseline(scn, &view, csi, kind),
                    });
                }
            }
        }
    }
    out
}

fn score(
    scn: &Scenario,
    view: &CsiView<'_>,
    sol: &Solution,
    require_clean: bool,
) -> (TrialOutcome, f64, Option<f64>, Option<f64>, Option<f64>) {
    match evaluate_solution(scn, view, sol) {
        Ok(ev) => {
            let feasible = sol.is_success() && (!require_clean || ev.is_clean());
            let raw = ev.min_uav_rate;
            if feasible {
                (
                    TrialOutcome::Feasible,
                    raw.unwrap_or(0.0),
                    raw,
                    ev.min_gue_rate,
                    sol.mean_height(),
                )
            } else {
                (
                    TrialOutcome::Outage,
                    0.0,
                    raw,
                    ev.min_gue_rate,
                    sol.mean_height(),
                )
            }
        }
        Err(_) => (TrialOutcome::Error, 0.0, None, None, None),
    }
}

#[allow(clippy::too_many_arguments)]
fn record(
    sweep_index: usize,
    sweep_value: f64,
    trial: usize,
    seed: u64,
    attempt: &Attempt,
    track: Track,
    scored: Option<(TrialOutcome, f64, Option<f64>, Option<f64>, Option<f64>)>,
    keep: bool,
) -> TrialRecord {
    let (outcome, min_uav_rate, raw_min_uav_rate, min_gue_rate, mean_height) =
        scored.unwrap_or((TrialOutcome::Error, 0.0, None, None, None));
    TrialRecord {
        sweep_index,
        sweep_value,
        trial,
        seed,
        method: attempt.method,
        beamformer: attempt.beamformer,
        track,
        outcome,
        min_uav_rate,
        raw_min_uav_rate,
        min_gue_rate,
        mean_height,
        solution: if keep {
            attempt.result.as_ref().ok().map(|s| Box::new(s.clone()))
        } else {
            None
        },
        error: attempt.result.as_ref().err().map(|e| e.to_string()),
    }
}

fn run_trial(
    spec: &ExperimentSpec,
    sweep_index: usize,
    trial: usize,
    opts: &RunOptions,
) -> Result<Vec<TrialRecord>, HarnessError> {
    let value = spec.sweep[sweep_index];
    let seed = seed_of(spec, value, trial);
    let inputs = trial_inputs(spec, sweep_index, trial)?;
    let view = inputs.view();
    let attempts = solve_all(spec, &inputs, opts);
    let records = attempts
        .iter()
        .map(|a| {
            let scored = a
                .result
                .as_ref()
                .ok()
                .map(|sol| score(&inputs.scenario, &view, sol, true));
            if let Err(e) = &a.result {
                log::warn!("trial {trial} at {value}: {} failed: {e}", a.method.label());
            }
            record(
                sweep_index,
                value,
                trial,
                seed,
                a,
                Track::Solved,
                scored,
                opts.keep_solutions,
            )
        })
        .collect();
    Ok(records)
}

/// Solves at every path point, and additionally re-evaluates the solutions
/// from the first point at every later point. The fixed-time track is scored
/// on its evaluated rate whenever the first-point solve was feasible, since
/// stale variables are expected to miss constraints along the way.
fn run_mobility_trial(
    spec: &ExperimentSpec,
    trial: usize,
    opts: &RunOptions,
) -> Result<Vec<TrialRecord>, HarnessError> {
    let start = trial_inputs(spec, 0, trial)?;
    let seed = seed_of(spec, spec.sweep[0], trial);
    let mut records = Vec::new();
    let mut first: Vec<Attempt> = Vec::new();
    for (vi, &value) in spec.sweep.iter().enumerate() {
        let inputs = TrialInputs {
            scenario: mobility_scenario(&start.scenario, value),
            ..start.clone()
        };
        let view = inputs.view();
        let attempts = solve_all(spec, &inputs, opts);
        for a in &attempts {
            let scored = a
                .result
                .as_ref()
                .ok()
                .map(|sol| score(&inputs.scenario, &view, sol, true));
            records.push(record(
                vi,
                value,
                trial,
                seed,
                a,
                Track::Solved,
                scored,
                opts.keep_solutions,
            ));
        }
        if vi == 0 {
            first = attempts;
        }
        for a in &first {
            let scored = a.result.as_ref().ok().map(|sol| {
                let mut s = score(&inputs.scenario, &view, sol, false);
                if s.0 == TrialOutcome::Feasible {
                    s.1 = s.2.unwrap_or(0.0);
                }
                s
            });
            records.push(record(
                vi,
                value,
                trial,
                seed,
                a,
                Track::FixedTime,
                scored,
                false,
            ));
        }
    }
    Ok(records)
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Groups records into one row per (sweep point, method, beamformer, track).
/// Depends only on the records, so a raw dump reproduces the table.
pub fn aggregate(spec: &ExperimentSpec, records: &[TrialRecord]) -> ResultTable {
    let tracks: &[Track] = if spec.kind == ExperimentKind::MobilityLine {
        &[Track::Solved, Track::FixedTime]
    } else {
        &[Track::Solved]
    };
    let mut rows = Vec::new();
    for (vi, &value) in spec.sweep.iter().enumerate() {
        for &method in &spec.methods {
            for &beamformer in &spec.beamformers {
                for &track in tracks {
                    let group: Vec<&TrialRecord> = records
                        .iter()
                        .filter(|r| {
                            r.sweep_index == vi
                                && r.method == method
                                && r.beamformer == beamformer
                                && r.track == track
                        })
                        .collect();
                    let scored: Vec<f64> = group
                        .iter()
                        .filter(|r| r.outcome != TrialOutcome::Error)
                        .map(|r| r.min_uav_rate)
                        .collect();
                    let feasible: Vec<&&TrialRecord> = group
                        .iter()
                        .filter(|r| r.outcome == TrialOutcome::Feasible)
                        .collect();
                    let n = scored.len();
                    let m = mean(&scored).unwrap_or(0.0);
                    let std_error = if n > 1 {
                        let var =
                            scored.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
                        (var / n as f64).sqrt()
                    } else {
                        0.0
                    };
                    let over_feasible = |f: &dyn Fn(&TrialRecord) -> Option<f64>| {
                        mean(&feasible.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
                    };
                    rows.push(ResultRow {
                        sweep_value: value,
                        method,
                        beamformer,
                        track,
                        mean_min_uav_rate: m,
                        std_error,
                        mean_min_gue_rate: over_feasible(&|r| r.min_gue_rate),
                        mean_optimal_height: over_feasible(&|r| r.mean_height),
                        mean_min_uav_rate_feasible: over_feasible(&|r| Some(r.min_uav_rate)),
                        trial_count: n,
                        feasible_count: feasible.len(),
                        error_count: group.len() - n,
                    });
                }
            }
        }
    }
    ResultTable { rows }
}

pub const RESULTS_FILE: &str = "results.csv";
pub const METADATA_FILE: &str = "metadata.toml";
pub const TRIALS_FILE: &str = "trials.csv";

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    artifact: &'static str,
    version: &'static str,
    csi: CsiMode,
    seed_scheme: &'static str,
    spec: &'a ExperimentSpec,
    seeds: Vec<SeedEntry>,
}

#[derive(Debug, Serialize)]
struct SeedEntry {
    sweep_value: f64,
    trials: Vec<u64>,
}

/// Writes the aggregate CSV and the metadata file into `dir`, plus the
/// per-trial dump when `raw` is set.
pub fn write_results(out: &ExperimentOutput, dir: &Path, raw: bool) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    write_table(&out.table, &dir.join(RESULTS_FILE))?;
    let spec = &out.spec;
    let seeds = spec
        .sweep
        .iter()
        .map(|&v| SeedEntry {
            sweep_value: v,
            trials: (0..spec.trials).map(|t| seed_of(spec, v, t)).collect(),
        })
        .collect();
    let meta = Metadata {
        artifact: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        csi: spec.csi_mode(),
        seed_scheme:
            "splitmix64 chain over (seed_base, sweep value bits, trial index), top bit cleared; \
                      channel and estimation-error streams derived from the trial seed",
        spec,
        seeds,
    };
    fs::write(dir.join(METADATA_FILE), toml::to_string(&meta)?)?;
    if raw {
        let mut w = csv::Writer::from_path(dir.join(TRIALS_FILE))?;
        for r in &out.records {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn write_table(table: &ResultTable, path: &Path) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in &table.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table(path: &Path) -> Result<ResultTable, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<Result<Vec<ResultRow>, _>>()?;
    Ok(ResultTable { rows })
}

pub fn read_trials(path: &Path) -> Result<Vec<TrialRecord>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<TrialRecord>, _>>()?)
}

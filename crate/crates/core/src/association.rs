//! Outer layer: UAV association and beamforming at fixed heights.
//!
//! For a target UAV SINR `t`, [`solve_feasibility`] alternates
//! beamformer updates with projected-gradient steps on a relaxed association,
//! then rounds with an exhaustive binary search. [`bisection_maximin`] drives
//! `t` by the resulting feasible / infeasible verdicts.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beamforming::{
    bf_gue, bf_uav_big_m, matched_filter, mmse_direction, mmse_set, uav_covariance,
    BeamformingError,
};
use crate::channel::CsiView;
use crate::linkmetrics::{sinr_with_budget, Association, BeamformerSet, LinkBudget};
use crate::numerics::{
    enumerate_binary_assignments, project_onto_polytope, LinearConstraintSet, NumericsError,
    QpOptions,
};
use crate::scenario::Scenario;
use crate::types::CVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssociationError {
    #[error(transparent)]
    Beamforming(#[from] BeamformingError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(
        "not every UAV can be served even at t = {t_low:.3e} ({activated} of {num_uav} activated)"
    )]
    InfeasibleAtLowerBound {
        t_low: f64,
        activated: usize,
        num_uav: usize,
    },
    #[error("invalid bisection bounds [{low}, {high}]")]
    Bounds { low: f64, high: f64 },
}

/// Receive vectors used while the association is still relaxed: one per UAV
/// at every base station, one per ground user at its own cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateBeams {
    /// `[bs][u]`.
    pub uav: Vec<Vec<CVector>>,
    pub gue: Vec<CVector>,
}

impl CandidateBeams {
    pub fn matched(scn: &Scenario, view: &CsiView<'_>) -> Result<Self, BeamformingError> {
        let uav = (0..scn.num_bs())
            .map(|i| {
                (0..scn.num_uav())
                    .map(|u| matched_filter(view.uav(i, u)))
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        let gue = (0..scn.num_gue())
            .map(|k| matched_filter(view.gue(scn.gues[k].serving, k)))
            .collect::<Result<_, _>>()?;
        Ok(CandidateBeams { uav, gue })
    }

    /// Largest `sin∠(z, z')` over all vectors.
    fn max_angle_change(&self, other: &CandidateBeams) -> f64 {
        let pairs = self.uav.iter().flatten().zip(other.uav.iter().flatten());
        pairs
            .chain(self.gue.iter().zip(&other.gue))
            .map(|(a, b)| (1.0 - a.dotc(b).norm_sqr().min(1.0)).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Interference-plus-noise of UAV `u` at `bs` excluding other UAVs:
/// ground users plus the unit noise term.
fn uav_base_load(
    scn: &Scenario,
    view: &CsiView<'_>,
    budget: &LinkBudget,
    z: &CVector,
    bs: usize,
) -> f64 {
    1.0 + (0..scn.num_gue())
        .map(|k| budget.gue(bs, k) * view.second_moment(z, view.gue(bs, k)))
        .sum::<f64>()
}

/// Interference UAV `v` would cause to `z` at `bs` if served by `g`.
fn uav_cross(
    view: &CsiView<'_>,
    budget: &LinkBudget,
    z: &CVector,
    g: usize,
    bs: usize,
    v: usize,
) -> f64 {
    budget.uav(g, bs, v) * view.second_moment(z, view.uav(bs, v))
}

/// Smallest `M` that keeps the big-M UAV constraint vacuous at `a(i, u) = 0`
/// for every association: `t` times the worst-case denominator over all
/// `(i, u)`, where every other UAV takes its most harmful base station.
pub fn big_m_value(
    t: f64,
    scn: &Scenario,
    view: &CsiView<'_>,
    budget: &LinkBudget,
    beams: &CandidateBeams,
) -> f64 {
    let (g_n, u_n) = (scn.num_bs(), scn.num_uav());
    let mut worst: f64 = 0.0;
    for i in 0..g_n {
        for u in 0..u_n {
            let z = &beams.uav[i][u];
            let mut load = uav_base_load(scn, view, budget, z, i);
            for v in (0..u_n).filter(|&v| v != u) {
                load += (0..g_n)
                    .map(|g| uav_cross(view, budget, z, g, i, v))
                    .fold(0.0, f64::max);
            }
            worst = worst.max(load);
        }
    }
    t * worst
}

/// Linear rows of the relaxed feasible set for fixed beamformers, over the
/// vector `a` laid out as [`Association::as_slice`] (entry `u·G + i`).
///
/// Rows: the big-M UAV constraints, the ground-user SINR constraints, base
/// station capacities and one-station-per-UAV. Box bounds are added by the
/// caller where needed.
pub fn relaxed_rows(
    t: f64,
    big_m: f64,
    scn: &Scenario,
    view: &CsiView<'_>,
    budget: &LinkBudget,
    beams: &CandidateBeams,
) -> LinearConstraintSet {
    let (g_n, u_n) = (scn.num_bs(), scn.num_uav());
    let idx = |i: usize, u: usize| u * g_n + i;
    let dim = g_n * u_n;
    let mut set = LinearConstraintSet::new(dim);
    for i in 0..g_n {
        for u in 0..u_n {
            let z = &beams.uav[i][u];
            let own = budget.uav(i, i, u);
            let mut row = vec![0.0; dim];
            row[idx(i, u)] =
                big_m - own * z.dotc(view.uav(i, u)).norm_sqr() + t * own * view.error_power(z);
            for v in (0..u_n).filter(|&v| v != u) {
                for g in 0..g_n {
                    row[idx(g, v)] = t * uav_cross(view, budget, z, g, i, v);
                }
            }
            set.push_le(row, big_m - t * uav_base_load(scn, view, budget, z, i));
        }
    }
    let gamma = scn.params.gue_target_sinr;
    for k in 0..scn.num_gue() {
        let i = scn.gues[k].serving;
        let z = &beams.gue[k];
        let own = budget.gue(i, k);
        let mut load = 1.0 + own * view.error_power(z);
        for k2 in (0..scn.num_gue()).filter(|&k2| k2 != k) {
            load += budget.gue(i, k2) * view.second_moment(z, view.gue(i, k2));
        }
        let mut row = vec![0.0; dim];
        for u in 0..u_n {
            for g in 0..g_n {
                row[idx(g, u)] = gamma * uav_cross(view, budget, z, g, i, u);
            }
        }
        set.push_le(row, own * z.dotc(view.gue(i, k)).norm_sqr() - gamma * load);
    }
    let capacity = scn.params.uav_capacity() as f64;
    for i in 0..g_n {
        let row = (0..dim)
            .map(|j| if j % g_n == i { 1.0 } else { 0.0 })
            .collect();
        set.push_le(row, capacity);
    }
    for u in 0..u_n {
        let row = (0..dim)
            .map(|j| if j / g_n == u { 1.0 } else { 0.0 })
            .collect();
        set.push_le(row, 1.0);
    }
    set
}

/// Per-row slack tolerance used when checking binary points.
fn row_ok(coeffs: &[f64], bound: f64, lhs: f64) -> bool {
    let scale = bound.abs() + coeffs.iter().map(|c| c.abs()).sum::<f64>();
    lhs <= bound + 1e-9 * scale.max(1e-300)
}

#[derive(Debug, Clone)]
pub struct FeasibilityOptions {
    /// Projected-gradient step `δ`.
    pub step: f64,
    pub max_alternations: usize,
    /// Stop once both the association and the beamformers move less than this.
    pub tol: f64,
    pub qp: QpOptions,
}

impl Default for FeasibilityOptions {
    fn default() -> Self {
        FeasibilityOptions {
            step: 0.1,
            max_alternations: 50,
            tol: 1e-4,
            qp: QpOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityIteration {
    pub iteration: usize,
    pub big_m: f64,
    /// `Σ a` of the relaxed iterate after projection.
    pub relaxed_sum: f64,
    pub step_norm: f64,
    pub beam_change: f64,
    pub association: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityResult {
    pub association: Association,
    pub beamformers: BeamformerSet,
    pub activated_count: usize,
    pub feasible: bool,
    pub trace: Vec<FeasibilityIteration>,
}

fn update_beams(
    scn: &Scenario,
    view: &CsiView<'_>,
    budget: &LinkBudget,
    assoc: &Association,
    big_m: f64,
) -> Result<CandidateBeams, BeamformingError> {
    let uav = (0..scn.num_bs())
        .map(|i| {
            (0..scn.num_uav())
                .map(|u| bf_uav_big_m(scn, view, budget, assoc, big_m, i, u))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let gue = (0..scn.num_gue())
        .map(|k| bf_gue(scn, view, budget, assoc, k))
        .collect::<Result<_, _>>()?;
    Ok(CandidateBeams { uav, gue })
}

fn initial_beams(
    scn: &Scenario,
    view: &CsiView<'_>,
    budget: &LinkBudget,
    assoc: &Association,
) -> Result<CandidateBeams, BeamformingError> {
    let uav = (0..scn.num_bs())
        .map(|i| {
            (0..scn.num_uav())
                .map(|u| {
                    mmse_direction(
                        &uav_covariance(scn, view, budget, assoc, i, u),
                        view.uav(i, u),
                    )
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let gue = (0..scn.num_gue())
        .map(|k| bf_gue(scn, view, budget, assoc, k))
        .collect::<Result<_, _>>()?;
    Ok(CandidateBeams { uav, gue })
}

/// Decides whether every UAV can reach SINR `t` while ground users keep
/// their target, at the heights baked into `budget`.
pub fn solve_feasibility(
    t: f64,
    scn: &Scenario,
    view: &CsiView<'_>,
    budget: &LinkBudget,
    opts: &FeasibilityOptions,
) -> Result<FeasibilityResult, AssociationError> {
    let (g_n, u_n) = (scn.num_bs(), scn.num_uav());
    let dim = g_n * u_n;
    let mut a = DVector::zeros(dim);
    // At a = 0 the big-M quotient says nothing about a UAV's own channel, so
    // the first candidates are the a → 1 limit: MMSE against the load at a.
    let mut beams = initial_beams(
        scn,
        view,
        budget,
        &Association::relaxed(g_n, u_n, vec![0.0; dim]),
    )?;
    let mut big_m = big_m_value(t, scn, view, budget, &beams);
    let mut trace = Vec::new();

    for iteration in 0..opts.max_alternations {
        let mut set = relaxed_rows(t, big_m, scn, view, budget, &beams);
        set.push_box(0.0, 1.0);
        let target = a.add_scalar(opts.step);
        // Without a usable projection the rounding below still decides
        // exactly which maps the current beamformers support.
        let projected = match project_onto_polytope(&target, &set, &opts.qp) {
            Ok(p) => p.point,
            Err(NumericsError::Infeasible { .. }) => break,
            Err(NumericsError::NotConverged { residual, .. }) => {
                log::debug!(
                    "association projection stalled at t = {t:.4e} (residual {residual:.2e})"
                );
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let step_norm = (&projected - &a).norm();
        a = projected.map(|v| v.clamp(0.0, 1.0));

        let relaxed = Association::relaxed(g_n, u_n, a.as_slice().to_vec());
        let next = update_beams(scn, view, budget, &relaxed, big_m)?;
        let beam_change = next.max_angle_change(&beams);
        beams = next;
        big_m = big_m_value(t, scn, view, budget, &beams);
        trace.push(FeasibilityIteration {
            iteration,
            big_m,
            relaxed_sum: a.sum(),
            step_norm,
            beam_change,
            association: a.as_slice().to_vec(),
        });
        if step_norm < opts.tol && beam_change < opts.tol {
            break;
        }
    }

    // Round with the beamformers of the last update fixed.
    let rows = relaxed_rows(t, big_m, scn, view, budget, &beams);
    let relaxed = a.clone();
    let best = enumerate_binary_assignments(
        g_n,
        u_n,
        |choice| {
            rows.inequalities.iter().all(|(coeffs, bound)| {
                let lhs: f64 = choice
                    .iter()
                    .enumerate()
                    .filter_map(|(u, c)| c.map(|i| coeffs[u * g_n + i]))
                    .sum();
                row_ok(coeffs, *bound, lhs)
            })
        },
        |choice| {
            // Count first; agreement with the relaxed iterate breaks ties.
            let count = choice.iter().flatten().count() as f64;
            let agree: f64 = choice
                .iter()
                .enumerate()
                .filter_map(|(u, c)| c.map(|i| relaxed[u * g_n + i]))
                .sum();
            count + agree / (2.0 * (u_n as f64 + 1.0))
        },
        None,
    )?;
    let association = Association::from_choice(g_n, &best.choice);
    let activated_count = best.choice.iter().flatten().count();
    let beamformers = mmse_set(scn, view, budget, &association)?;
    let mut feasible = activated_count == u_n;
    if feasible {
        let rep = sinr_with_budget(scn, view, budget, &association, &beamformers);
        let gamma = scn.params.gue_target_sinr;
        let ok = rep.uav.iter().all(|&s| s >= t * (1.0 - 1e-9))
            && rep.gue.iter().all(|&s| s >= gamma * (1.0 - 1e-9));
        if !ok {
            log::warn!("rounded association failed direct SINR verification at t = {t:.4e}");
            feasible = false;
        }
    }
    Ok(FeasibilityResult {
        association,
        beamformers,
        activated_count,
        feasible,
        trace,
    })
}

/// Bisection bracket on the UAV target SINR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectionState {
    pub t_low: f64,
    pub t_high: f64,
    pub t_current: f64,
    pub iterations: usize,
    pub eps: f64,
}

impl BisectionState {
    pub fn new(t_low: f64, t_high: f64, eps: f64) -> Self {
        BisectionState {
            t_low,
            t_high,
            t_current: 0.5 * (t_low + t_high),
            iterations: 0,
            eps,
        }
    }

    /// Feasible: raise the floor to the current target and move halfway up.
    /// Infeasible: lower the ceiling and move halfway down.
    pub fn update(&mut self, feasible: bool) {
        let t = self.t_current;
        if feasible {
            self.t_low = t;
            self.t_current = 0.5 * (t + self.t_high);
        } else {
            self.t_high = t;
            self.t_current = 0.5 * (t + self.t_low);
        }
        self.iterations += 1;
    }

    pub fn done(&self) -> bool {
        self.t_high - self.t_low <= self.eps
    }
}

#[derive(Debug, Clone)]
pub struct BisectionOptions {
    pub eps: f64,
    pub t_low: f64,
    pub max_steps: usize,
    pub feasibility: FeasibilityOptions,
}

impl Default for BisectionOptions {
    fn default() -> Self {
        BisectionOptions {
            eps: 1e-2,
            t_low: 1e-6,
            max_steps: 200,
            feasibility: FeasibilityOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub t: f64,
    pub feasible: bool,
    pub activated: usize,
    pub alternations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BisectionOutcome {
    /// Largest target verified feasible.
    pub t_star: f64,
    pub association: Association,
    pub beamformers: BeamformerSet,
    pub state: BisectionState,
    pub steps: Vec<BisectionStep>,
}

/// Upper bound on the smallest UAV SINR: each UAV's best interference-free
/// SNR over all base stations, minimized over UAVs.
pub fn sinr_upper_bound(scn: &Scenario, view: &CsiView<'_>, budget: &LinkBudget) -> f64 {
    (0..scn.num_uav())
        .map(|u| {
            (0..scn.num_bs())
                .map(|i| budget.uav(i, i, u) * view.uav(i, u).norm_squared())
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Largest UAV target SINR the association search certifies, found by
/// bisection on `[t_low, t_high]`.
pub fn bisection_maximin(
    scn: &Scenario,
    view: &CsiView<'_>,
    budget: &LinkBudget,
    t_high: f64,
    opts: &BisectionOptions,
) -> Result<BisectionOutcome, AssociationError> {
    let t_low = opts.t_low;
    if !(t_low > 0.0 && t_high > t_low) {
        return Err(AssociationError::Bounds {
            low: t_low,
            high: t_high,
        });
    }
    let base = solve_feasibility(t_low, scn, view, budget, &opts.feasibility)?;
    let mut steps = vec![BisectionStep {
        t: t_low,
        feasible: base.feasible,
        activated: base.activated_count,
        alternations: base.trace.len(),
    }];
    if !base.feasible {
        return Err(AssociationError::InfeasibleAtLowerBound {
            t_low,
            activated: base.activated_count,
            num_uav: scn.num_uav(),
        });
    }
    let mut best = base;
    let mut state = BisectionState::new(t_low, t_high, opts.eps);
    while !state.done() && state.iterations < opts.max_steps {
        let t = state.t_current;
        let res = solve_feasibility(t, scn, view, budget, &opts.feasibility)?;
        log::debug!(
            "bisection t = {t:.5e}: {} of {} UAVs",
            res.activated_count,
            scn.num_uav()
        );
        steps.push(BisectionStep {
            t,
            feasible: res.feasible,
            activated: res.activated_count,
            alternations: res.trace.len(),
        });
        state.update(res.feasible);
        if res.feasible {
            best = res;
        }
    }
    Ok(BisectionOutcome {
        t_star: state.t_low,
        association: best.association,
        beamformers: best.beamformers,
        state,
        steps,
    })
}

//! The bi-layer solve (association outside, heights inside), the nearest
//! base station baseline, and independent evaluation of solutions.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::association::{bisection_maximin, sinr_upper_bound, AssociationError, BisectionOptions};
use crate::beamforming::{design_beamformers, mmse_set, BeamformerKind, BeamformingError};
use crate::channel::{ChannelError, CsiView};
use crate::height::{alternate_heights, mmse_at_heights, HeightError, HeightOptions};
use crate::linkmetrics::{
    rates, sinr_with_budget, Association, BeamformerSet, LinkBudget, SinrReport,
};
use crate::scenario::Scenario;
use crate::types::{CVector, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrchestratorError {
    #[error(transparent)]
    Association(#[from] AssociationError),
    #[error(transparent)]
    Height(#[from] HeightError),
    #[error(transparent)]
    Beamforming(#[from] BeamformingError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("UAV {uav} fits under no base station's capacity of {capacity}")]
    CapacityOverflow { uav: usize, capacity: usize },
    #[error("malformed solution: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsiMode {
    Perfect,
    Imperfect,
}

impl std::str::FromStr for CsiMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "perfect" => Ok(CsiMode::Perfect),
            "imperfect" => Ok(CsiMode::Imperfect),
            other => Err(format!("unknown CSI mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Proposed,
    Nearest,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Nearest => "nearest",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "proposed" => Ok(Method::Proposed),
            "nearest" => Ok(Method::Nearest),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Success,
    /// Some UAV is unserved or some ground user misses its target.
    Infeasible,
}

/// Beamformers as `[re, im]` pairs; an unserved UAV has an empty vector.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BeamformerRecord {
    pub gue: Vec<Vec<[f64; 2]>>,
    pub uav: Vec<Vec<[f64; 2]>>,
}

fn to_pairs(z: &CVector) -> Vec<[f64; 2]> {
    z.iter().map(|c| [c.re, c.im]).collect()
}

fn from_pairs(v: &[[f64; 2]]) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|p| C64::new(p[0], p[1])))
}

impl BeamformerRecord {
    pub fn from_set(set: &BeamformerSet) -> Self {
        BeamformerRecord {
            gue: set.gue.iter().map(to_pairs).collect(),
            uav: set
                .uav
                .iter()
                .map(|z| z.as_ref().map(to_pairs).unwrap_or_default())
                .collect(),
        }
    }

    pub fn to_set(&self) -> BeamformerSet {
        BeamformerSet {
            gue: self.gue.iter().map(|v| from_pairs(v)).collect(),
            uav: self
                .uav
                .iter()
                .map(|v| (!v.is_empty()).then(|| from_pairs(v)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterIteration {
    pub iteration: usize,
    /// Target certified by the association search at the current heights.
    pub bisection_t: f64,
    /// Whether the association search beat the incumbent association.
    pub new_association: bool,
    /// Minimum UAV SINR after the height update.
    pub t: f64,
    pub bisection_steps: usize,
    pub height_alternations: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub outer_iterations: usize,
    pub bisection_steps: usize,
    pub height_alternations: usize,
    pub ccp_iterations: usize,
    pub pzf_fallbacks: usize,
    pub wall_time_s: f64,
    pub trace: Vec<OuterIteration>,
    /// `y_t` per iteration of every convex-concave run, start point first.
    #[serde(default)]
    pub ccp_y_t: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub method: Method,
    pub beamformer: BeamformerKind,
    pub csi: CsiMode,
    pub status: SolveStatus,
    /// Serving base station per UAV; `-1` when unserved.
    pub association: Vec<i64>,
    pub heights: Vec<f64>,
    /// Minimum UAV SINR (linear); absent without UAVs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_star: Option<f64>,
    pub uav_sinr: Vec<f64>,
    pub gue_sinr: Vec<f64>,
    pub uav_rates: Vec<f64>,
    pub gue_rates: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_uav_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_gue_rate: Option<f64>,
    pub beamformers: BeamformerRecord,
    pub diagnostics: Diagnostics,
}

fn min_of(v: &[f64]) -> Option<f64> {
    v.iter().cloned().reduce(f64::min)
}

impl Solution {
    fn assemble(
        method: Method,
        beamformer: BeamformerKind,
        csi: CsiMode,
        scn: &Scenario,
        assoc: &Association,
        heights: &[f64],
        bf: &BeamformerSet,
        rep: &SinrReport,
        diagnostics: Diagnostics,
    ) -> Self {
        let uav_rates = rates(&rep.uav);
        let gue_rates = rates(&rep.gue);
        let served = (0..scn.num_uav()).all(|u| assoc.serving(u).is_some());
        let gamma = scn.params.gue_target_sinr;
        let gue_ok = rep.gue.iter().all(|&s| s >= gamma * (1.0 - 1e-9));
        Solution {
            method,
            beamformer,
            csi,
            status: if served && gue_ok {
                SolveStatus::Success
            } else {
                SolveStatus::Infeasible
            },
            association: assoc
                .choice()
                .iter()
                .map(|c| c.map_or(-1, |i| i as i64))
                .collect(),
            heights: heights.to_vec(),
            t_star: min_of(&rep.uav),
            min_uav_rate: min_of(&uav_rates),
            min_gue_rate: min_of(&gue_rates),
            uav_sinr: rep.uav.clone(),
            gue_sinr: rep.gue.clone(),
            uav_rates,
            gue_rates,
            beamformers: BeamformerRecord::from_set(bf),
            diagnostics,
        }
    }

    pub fn is_success(&self) -> bool {
        self.status == SolveStatus::Success
    }

    pub fn association(&self, num_bs: usize) -> Association {
        let choice: Vec<Option<usize>> = self
            .association
            .iter()
            .map(|&c| (c >= 0).then_some(c as usize))
            .collect();
        Association::from_choice(num_bs, &choice)
    }

    pub fn mean_height(&self) -> Option<f64> {
        (!self.heights.is_empty())
            .then(|| self.heights.iter().sum::<f64>() / self.heights.len() as f64)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("solutions serialize to TOML")
    }

    pub fn from_toml(text: &str) -> Result<Self, OrchestratorError> {
        toml::from_str(text).map_err(|e| OrchestratorError::Malformed(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct BilayerOptions {
    pub max_outer: usize,
    /// Stop once the minimum UAV SINR improves by less than this, relatively.
    pub rel_tol: f64,
    /// Start each bisection at the incumbent target instead of `t_low`.
    pub warm_start: bool,
    /// When false the scenario's heights are kept and only the association
    /// and receivers are optimized.
    pub optimize_heights: bool,
    pub bisection: BisectionOptions,
    pub height: HeightOptions,
}

impl Default for BilayerOptions {
    fn default() -> Self {
        BilayerOptions {
            max_outer: 10,
            rel_tol: 1e-3,
            warm_start: false,
            optimize_heights: true,
            bisection: BisectionOptions::default(),
            height: HeightOptions::default(),
        }
    }
}

struct Incumbent {
    assoc: Association,
    heights: Vec<f64>,
    bf: BeamformerSet,
    rep: SinrReport,
}

/// Alternates the association search at fixed heights with the height
/// update at fixed association, keeping the best verified point.
///
/// If not every UAV can be served at a vanishing target, the returned
/// solution is marked infeasible and carries the reason.
pub fn solve_bilayer(
    scn: &Scenario,
    view: &CsiView<'_>,
    csi: CsiMode,
    opts: &BilayerOptions,
) -> Result<Solution, OrchestratorError> {
    let clock = Instant::now();
    let p = &scn.params;
    let gamma = p.gue_target_sinr;
    let mut heights = scn.uav_heights.clone();
    let mut diag = Diagnostics::default();
    let finish = |inc: &Incumbent, mut diag: Diagnostics| {
        diag.wall_time_s = clock.elapsed().as_secs_f64();
        Solution::assemble(
            Method::Proposed,
            BeamformerKind::Optimal,
            csi,
            scn,
            &inc.assoc,
            &inc.heights,
            &inc.bf,
            &inc.rep,
            diag,
        )
    };

    if scn.num_uav() == 0 {
        let assoc = Association::empty(scn.num_bs(), 0);
        let (bf, rep) = mmse_at_heights(scn, view, &assoc, &heights)?;
        return Ok(finish(
            &Incumbent {
                assoc,
                heights,
                bf,
                rep,
            },
            diag,
        ));
    }

    let mut best: Option<Incumbent> = None;
    let mut prev_t = 0.0;
    for iteration in 1..=opts.max_outer {
        let budget = LinkBudget::new(scn, &heights)?;
        let t_high = sinr_upper_bound(scn, view, &budget);
        let mut bis_opts = opts.bisection.clone();
        if let (true, Some(inc)) = (opts.warm_start, &best) {
            bis_opts.t_low = inc.rep.min_uav().max(bis_opts.t_low);
        }
        let outcome = match bisection_maximin(scn, view, &budget, t_high, &bis_opts) {
            Ok(o) => Some(o),
            Err(AssociationError::InfeasibleAtLowerBound {
                activated, num_uav, ..
            }) => {
                if best.is_none() {
                    diag.message = Some(format!(
                        "only {activated} of {num_uav} UAVs can be served with every ground user at its target"
                    ));
                }
                None
            }
            Err(AssociationError::Bounds { .. }) => None,
            Err(e) => return Err(e.into()),
        };

        let mut bisection_t = 0.0;
        let mut bisection_steps = 0;
        let mut candidate: Option<Association> = None;
        if let Some(o) = outcome {
            bisection_t = o.t_star;
            bisection_steps = o.steps.len();
            diag.bisection_steps += bisection_steps;
            candidate = Some(o.association);
        }
        // The incumbent, re-beamformed at the current heights, competes with
        // the fresh association so the height layer never restarts lower.
        let incumbent_t = match &best {
            Some(inc) => Some((
                inc.assoc.clone(),
                mmse_at_heights(scn, view, &inc.assoc, &heights)?.1,
            )),
            None => None,
        };
        let cand_eval = match &candidate {
            Some(a) => Some((a.clone(), mmse_at_heights(scn, view, a, &heights)?.1)),
            None => None,
        };
        let (assoc, new_association) = match (cand_eval, incumbent_t) {
            (Some((a, ra)), Some((b, rb))) => {
                if ra.min_gue() >= gamma * (1.0 - 1e-9) && ra.min_uav() > rb.min_uav() {
                    (a, true)
                } else {
                    (b, false)
                }
            }
            (Some((a, _)), None) => (a, true),
            (None, Some((b, _))) => (b, false),
            (None, None) => break,
        };

        if !opts.optimize_heights {
            let (bf, rep) = mmse_at_heights(scn, view, &assoc, &heights)?;
            diag.outer_iterations = iteration;
            diag.trace.push(OuterIteration {
                iteration,
                bisection_t,
                new_association,
                t: rep.min_uav(),
                bisection_steps,
                height_alternations: 0,
            });
            if rep.min_gue() >= gamma * (1.0 - 1e-9) {
                best = Some(Incumbent {
                    assoc,
                    heights: heights.clone(),
                    bf,
                    rep,
                });
            }
            break;
        }

        let alt = alternate_heights(scn, view, &assoc, &heights, &opts.height)?;
        diag.ccp_y_t.extend(
            alt.ccp_traces
                .iter()
                .map(|t| t.iter().map(|c| c.y_t).collect::<Vec<_>>()),
        );
        diag.height_alternations += alt.trace.len();
        diag.ccp_iterations += alt
            .ccp_traces
            .iter()
            .map(|t| t.len().saturating_sub(1))
            .sum::<usize>();
        diag.outer_iterations = iteration;
        let t = alt.t;
        diag.trace.push(OuterIteration {
            iteration,
            bisection_t,
            new_association,
            t,
            bisection_steps,
            height_alternations: alt.trace.len(),
        });
        log::debug!(
            "outer {iteration}: bisection t = {bisection_t:.4e}, after heights t = {t:.4e}"
        );

        heights = alt.heights.clone();
        let better = best.as_ref().map_or(true, |b| t > b.rep.min_uav());
        if better && alt.sinr.min_gue() >= gamma * (1.0 - 1e-9) {
            best = Some(Incumbent {
                assoc,
                heights: alt.heights,
                bf: alt.beamformers,
                rep: alt.sinr,
            });
        }
        if iteration > 1 && (t - prev_t) <= opts.rel_tol * prev_t {
            break;
        }
        prev_t = t;
    }

    match best {
        Some(inc) => Ok(finish(&inc, diag)),
        None => {
            let assoc = Association::empty(scn.num_bs(), scn.num_uav());
            let heights = scn.uav_heights.clone();
            let (bf, rep) = mmse_at_heights(scn, view, &assoc, &heights)?;
            Ok(finish(
                &Incumbent {
                    assoc,
                    heights,
                    bf,
                    rep,
                },
                diag,
            ))
        }
    }
}

/// Each UAV joins the closest base station with room left, closest pairs
/// first. Distances are 3D at the given heights; ties go to lower indices.
pub fn nearest_association(
    scn: &Scenario,
    heights: &[f64],
) -> Result<Association, OrchestratorError> {
    let p = &scn.params;
    let capacity = p.uav_capacity();
    let mut pairs = Vec::new();
    for u in 0..scn.num_uav() {
        let dz = heights[u] - p.bs_height;
        for i in 0..scn.num_bs() {
            pairs.push((scn.horizontal_uav(i, u).hypot(dz), u, i));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut load = vec![0; scn.num_bs()];
    let mut choice = vec![None; scn.num_uav()];
    for (_, u, i) in pairs {
        if choice[u].is_none() && load[i] < capacity {
            choice[u] = Some(i);
            load[i] += 1;
        }
    }
    if let Some(u) = choice.iter().position(Option::is_none) {
        return Err(OrchestratorError::CapacityOverflow { uav: u, capacity });
    }
    Ok(Association::from_choice(scn.num_bs(), &choice))
}

/// Nearest-base-station association at the scenario's heights (`h_min` for
/// generated scenarios) with the chosen receiver.
pub fn nearest_baseline(
    scn: &Scenario,
    view: &CsiView<'_>,
    csi: CsiMode,
    kind: BeamformerKind,
) -> Result<Solution, OrchestratorError> {
    let clock = Instant::now();
    let heights = scn.uav_heights.clone();
    let assoc = nearest_association(scn, &heights)?;
    let budget = LinkBudget::new(scn, &heights)?;
    let designed = design_beamformers(kind, scn, view, &budget, &assoc)?;
    let rep = sinr_with_budget(scn, view, &budget, &assoc, &designed.set);
    let diag = Diagnostics {
        pzf_fallbacks: designed.degenerate,
        wall_time_s: clock.elapsed().as_secs_f64(),
        ..Default::default()
    };
    Ok(Solution::assemble(
        Method::Nearest,
        kind,
        csi,
        scn,
        &assoc,
        &heights,
        &designed.set,
        &rep,
        diag,
    ))
}

/// Keeps the association and heights of `sol` but swaps in another receiver
/// design.
pub fn with_beamformer(
    scn: &Scenario,
    view: &CsiView<'_>,
    sol: &Solution,
    kind: BeamformerKind,
) -> Result<Solution, OrchestratorError> {
    let assoc = sol.association(scn.num_bs());
    let budget = LinkBudget::new(scn, &sol.heights)?;
    let designed = if kind == BeamformerKind::Optimal {
        let set = mmse_set(scn, view, &budget, &assoc)?;
        crate::beamforming::DesignedBeamformers { set, degenerate: 0 }
    } else {
        design_beamformers(kind, scn, view, &budget, &assoc)?
    };
    let rep = sinr_with_budget(scn, view, &budget, &assoc, &designed.set);
    let mut diag = sol.diagnostics.clone();
    diag.pzf_fallbacks = designed.degenerate;
    let mut out = Solution::assemble(
        sol.method,
        kind,
        sol.csi,
        scn,
        &assoc,
        &sol.heights,
        &designed.set,
        &rep,
        diag,
    );
    if !sol.is_success() && sol.association.iter().any(|&c| c < 0) {
        out.status = SolveStatus::Infeasible;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    GueTarget {
        gue: usize,
        sinr: f64,
        target: f64,
    },
    Unserved {
        uav: usize,
    },
    Capacity {
        bs: usize,
        load: usize,
        capacity: usize,
    },
    Height {
        uav: usize,
        height: f64,
    },
    BeamformerNorm {
        user: String,
        norm: f64,
    },
    StoredRateMismatch {
        user: String,
        stored: f64,
        evaluated: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub sinr: SinrReport,
    pub uav_rates: Vec<f64>,
    pub gue_rates: Vec<f64>,
    pub min_uav_rate: Option<f64>,
    pub min_gue_rate: Option<f64>,
    pub violations: Vec<Violation>,
}

impl Evaluation {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Recomputes every SINR and rate of `sol` from the scenario and channels and
/// lists each constraint it breaks.
pub fn evaluate_solution(
    scn: &Scenario,
    view: &CsiView<'_>,
    sol: &Solution,
) -> Result<Evaluation, OrchestratorError> {
    let p = &scn.params;
    if sol.association.len() != scn.num_uav() || sol.heights.len() != scn.num_uav() {
        return Err(OrchestratorError::Malformed(
            "solution size does not match the scenario".into(),
        ));
    }
    if sol.association.iter().any(|&c| c >= scn.num_bs() as i64) {
        return Err(OrchestratorError::Malformed(
            "association names a missing base station".into(),
        ));
    }
    let bf = sol.beamformers.to_set();
    if bf.gue.len() != scn.num_gue() || bf.uav.len() != scn.num_uav() {
        return Err(OrchestratorError::Malformed(
            "beamformer count does not match the scenario".into(),
        ));
    }
    let assoc = sol.association(scn.num_bs());
    let mut violations = Vec::new();

    for (u, &h) in sol.heights.iter().enumerate() {
        if !(h >= p.uav_height_min - 1e-9 && h <= p.uav_height_max + 1e-9) {
            violations.push(Violation::Height { uav: u, height: h });
        }
    }
    let heights: Vec<f64> = sol
        .heights
        .iter()
        .map(|h| h.clamp(p.uav_height_min, p.uav_height_max))
        .collect();
    let capacity = p.uav_capacity();
    for i in 0..scn.num_bs() {
        let load = assoc.row_sum(i) as usize;
        if load > capacity {
            violations.push(Violation::Capacity {
                bs: i,
                load,
                capacity,
            });
        }
    }
    for u in 0..scn.num_uav() {
        if assoc.serving(u).is_none() || bf.uav[u].is_none() {
            violations.push(Violation::Unserved { uav: u });
        }
    }
    for (k, z) in bf.gue.iter().enumerate() {
        if (z.norm() - 1.0).abs() > 1e-9 {
            violations.push(Violation::BeamformerNorm {
                user: format!("gue {k}"),
                norm: z.norm(),
            });
        }
    }
    for (u, z) in bf.uav.iter().enumerate() {
        if let Some(z) = z {
            if (z.norm() - 1.0).abs() > 1e-9 {
                violations.push(Violation::BeamformerNorm {
                    user: format!("uav {u}"),
                    norm: z.norm(),
                });
            }
        }
    }

    let budget = LinkBudget::new(scn, &heights)?;
    let sinr = sinr_with_budget(scn, view, &budget, &assoc, &bf);
    for (k, &s) in sinr.gue.iter().enumerate() {
        if s < p.gue_target_sinr * (1.0 - 1e-9) {
            violations.push(Violation::GueTarget {
                gue: k,
                sinr: s,
                target: p.gue_target_sinr,
            });
        }
    }
    let uav_rates = rates(&sinr.uav);
    let gue_rates = rates(&sinr.gue);
    let mismatch = |user: String, stored: f64, evaluated: f64| {
        ((stored - evaluated).abs() > 1e-9 * evaluated.abs().max(1.0)).then_some(
            Violation::StoredRateMismatch {
                user,
                stored,
                evaluated,
            },
        )
    };
    if sol.uav_rates.len() == uav_rates.len() && sol.gue_rates.len() == gue_rates.len() {
        for (u, (&s, &e)) in sol.uav_rates.iter().zip(&uav_rates).enumerate() {
            violations.extend(mismatch(format!("uav {u}"), s, e));
        }
        for (k, (&s, &e)) in sol.gue_rates.iter().zip(&gue_rates).enumerate() {
            violations.extend(mismatch(format!("gue {k}"), s, e));
        }
    }
    Ok(Evaluation {
        min_uav_rate: min_of(&uav_rates),
        min_gue_rate: min_of(&gue_rates),
        sinr,
        uav_rates,
        gue_rates,
        violations,
    })
}

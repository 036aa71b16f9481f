//! UAV height optimization at a fixed association.
//!
//! With channel-inversion power control a UAV is heard at its serving base
//! station with a constant power, so its height only matters through the
//! inter-cell terms `((r²_serving + x) / (r²_other + x))^(α/2)`, where
//! `x = (h − h_G)²`. Each such ratio gets an auxiliary log-variable, the SINR
//! rows become log-sum-exp constraints, and the concave half of the ratio
//! bound is linearized around the previous heights (convex-concave
//! procedure). MMSE beamformer updates alternate with the height solve.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::beamforming::{mmse_set, BeamformingError};
use crate::channel::{ChannelError, CsiView};
use crate::linkmetrics::{sinr_with_budget, Association, BeamformerSet, LinkBudget, SinrReport};
use crate::numerics::{
    solve_convex_barrier, BarrierOptions, ConvexConstraint, NumericsError, SmoothConvexProgram,
};
use crate::scenario::Scenario;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeightError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Beamforming(#[from] BeamformingError),
    #[error("height subproblem failed at convex-concave iteration {iteration}: {source}")]
    Numerics {
        iteration: usize,
        source: NumericsError,
    },
    #[error("UAV {0} has no serving base station")]
    Unassociated(usize),
    #[error(
        "UAV {uav}: no height keeps its power below the cap (x range [{lower:.1}, {upper:.1}] m²)"
    )]
    EmptyInterval { uav: usize, lower: f64, upper: f64 },
    #[error("nonpositive desired-signal coefficient for {0}")]
    NonPositiveCoefficient(String),
    #[error("ground user {0} misses its SINR target whatever the UAV heights")]
    GueUnreachable(usize),
}

/// Range of `x = (h − h_G)²` over which UAV `u` can stay uncapped toward its
/// serving base station and inside the height limits.
pub fn height_feasible_interval(
    scn: &Scenario,
    assoc: &Association,
    u: usize,
) -> Result<(f64, f64), HeightError> {
    let p = &scn.params;
    let i = assoc.serving(u).ok_or(HeightError::Unassociated(u))?;
    let lower = (p.uav_height_min - p.bs_height).powi(2);
    let r = scn.horizontal_uav(i, u);
    let reach = (p.max_power_uav / p.power_scale_los).powf(2.0 / p.path_loss_exp_los);
    let upper = (reach - r * r).min((p.uav_height_max - p.bs_height).powi(2));
    if upper < lower {
        return Err(HeightError::EmptyInterval {
            uav: u,
            lower,
            upper,
        });
    }
    Ok((lower, upper))
}

pub fn height_from_x(scn: &Scenario, x: f64) -> f64 {
    let p = &scn.params;
    (p.bs_height + x.max(0.0).sqrt()).clamp(p.uav_height_min, p.uav_height_max)
}

pub fn x_from_height(scn: &Scenario, h: f64) -> f64 {
    (h - scn.params.bs_height).powi(2)
}

/// `ln Σ_j exp(b_j + a_jᵀv) ≤ 0`, i.e. a posynomial in `exp(v)` bounded by 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LogSumExp {
    /// `(ln c_j, sparse exponent a_j)`.
    pub terms: Vec<(f64, Vec<(usize, f64)>)>,
}

impl LogSumExp {
    fn exponents(&self, v: &DVector<f64>) -> Vec<f64> {
        self.terms
            .iter()
            .map(|(b, a)| b + a.iter().map(|&(j, c)| c * v[j]).sum::<f64>())
            .collect()
    }

    /// The posynomial itself, `Σ_j c_j exp(a_jᵀv)`.
    pub fn posynomial(&self, v: &DVector<f64>) -> f64 {
        self.exponents(v).iter().map(|e| e.exp()).sum()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|(_, a)| a.is_empty())
    }

    fn softmax(&self, v: &DVector<f64>) -> Vec<f64> {
        let e = self.exponents(v);
        let top = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = e.iter().map(|x| (x - top).exp()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    }
}

impl ConvexConstraint for LogSumExp {
    fn value(&self, v: &DVector<f64>) -> f64 {
        let e = self.exponents(v);
        let top = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        top + e.iter().map(|x| (x - top).exp()).sum::<f64>().ln()
    }

    fn gradient(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(v.len());
        for (p, (_, a)) in self.softmax(v).into_iter().zip(&self.terms) {
            for &(j, c) in a {
                g[j] += p * c;
            }
        }
        g
    }

    fn hessian(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let n = v.len();
        let mut h = DMatrix::zeros(n, n);
        let mut g = DVector::zeros(n);
        for (p, (_, a)) in self.softmax(v).into_iter().zip(&self.terms) {
            for &(j, cj) in a {
                g[j] += p * cj;
                for &(k, ck) in a {
                    h[(j, k)] += p * cj * ck;
                }
            }
        }
        h.ger(-1.0, &g, &g, 1.0);
        h
    }
}

/// Conservative form of `ln(r²_s + x) − ln(r²_o + x) ≤ (2/α) y` with the
/// concave first logarithm replaced by its tangent at `x̄`. The height
/// variable is stored scaled, `x = scale · s`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioCut {
    pub uav: usize,
    /// Base station the UAV is powered for.
    pub serving: usize,
    /// Base station hearing the UAV.
    pub heard_at: usize,
    pub x_col: usize,
    pub y_col: usize,
    pub scale: f64,
    pub r2_serving: f64,
    pub r2_heard: f64,
    pub x_bar: f64,
    pub two_over_alpha: f64,
}

impl RatioCut {
    /// Left side minus right side at a given `x` and log-ratio `y`.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let a = self.r2_serving + self.x_bar;
        a.ln() + (x - self.x_bar) / a - (self.r2_heard + x).ln() - self.two_over_alpha * y
    }
}

impl ConvexConstraint for RatioCut {
    fn value(&self, v: &DVector<f64>) -> f64 {
        self.eval(self.scale * v[self.x_col], v[self.y_col])
    }

    fn gradient(&self, v: &DVector<f64>) -> DVector<f64> {
        let x = self.scale * v[self.x_col];
        let mut g = DVector::zeros(v.len());
        g[self.x_col] =
            self.scale * (1.0 / (self.r2_serving + self.x_bar) - 1.0 / (self.r2_heard + x));
        g[self.y_col] = -self.two_over_alpha;
        g
    }

    fn hessian(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let x = self.scale * v[self.x_col];
        let mut h = DMatrix::zeros(v.len(), v.len());
        h[(self.x_col, self.x_col)] = (self.scale / (self.r2_heard + x)).powi(2);
        h
    }
}

/// Column layout of the convexified height subproblem.
///
/// Column 0 is `y_t = ln t`. Each UAV whose height is free owns one scaled
/// `x` column and one log-ratio column per base station other than its
/// serving one.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightLayout {
    pub dim: usize,
    pub x_scale: f64,
    /// UAV → `x` column, `None` when frozen.
    pub x_col: Vec<Option<usize>>,
    /// `[u][i]` → log-ratio column for UAV `u` heard at `i`.
    pub y_col: Vec<Vec<Option<usize>>>,
    /// Per-UAV `x` interval; frozen UAVs have a single point.
    pub bounds: Vec<(f64, f64)>,
}

/// Point of the convexified subproblem, unpacked.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeightVariables {
    pub y_t: f64,
    /// `(h − h_G)²` per UAV.
    pub x: Vec<f64>,
    /// `[u][i]` → `ln` of the interference ratio bound, where present.
    pub log_ratio: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone)]
pub struct ConvexSubproblem {
    pub layout: HeightLayout,
    /// `(UAV, row)`; the row includes `y_t`.
    pub uav_rows: Vec<(usize, LogSumExp)>,
    /// `(ground user, row)` for rows that depend on some height.
    pub gue_rows: Vec<(usize, LogSumExp)>,
    pub ratio_cuts: Vec<RatioCut>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl ConvexSubproblem {
    pub fn program(&self) -> SmoothConvexProgram<'static> {
        let mut objective = DVector::zeros(self.layout.dim);
        objective[0] = 1.0;
        let mut prog = SmoothConvexProgram::new(objective);
        for (_, r) in self.uav_rows.iter().chain(&self.gue_rows) {
            prog.push(r.clone());
        }
        for c in &self.ratio_cuts {
            prog.push(c.clone());
        }
        prog.lower = self.lower.clone();
        prog.upper = self.upper.clone();
        prog
    }

    /// Point at `x̄` with every log-ratio tight plus `margin` and the largest
    /// `y_t` the UAV rows then allow, minus `margin`.
    pub fn start_at(&self, x_bar: &[f64], margin: f64) -> DVector<f64> {
        let l = &self.layout;
        let mut v = DVector::zeros(l.dim);
        for (u, col) in l.x_col.iter().enumerate() {
            if let Some(c) = col {
                v[*c] = x_bar[u] / l.x_scale;
            }
        }
        for c in &self.ratio_cuts {
            v[c.y_col] = (c.eval(x_bar[c.uav], 0.0)) / c.two_over_alpha + margin;
        }
        v[0] = self.y_t_limit(&v) - margin;
        v
    }

    /// Largest `y_t` the UAV rows allow with the other columns of `v` fixed.
    pub fn y_t_limit(&self, v: &DVector<f64>) -> f64 {
        let mut w = v.clone();
        w[0] = 0.0;
        self.uav_rows
            .iter()
            .map(|(_, r)| -r.value(&w))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn unpack(&self, v: &DVector<f64>) -> HeightVariables {
        let l = &self.layout;
        let x = (0..l.x_col.len())
            .map(|u| match l.x_col[u] {
                Some(c) => (l.x_scale * v[c]).clamp(l.bounds[u].0, l.bounds[u].1),
                None => l.bounds[u].0,
            })
            .collect();
        let log_ratio = l
            .y_col
            .iter()
            .map(|row| row.iter().map(|c| c.map(|c| v[c])).collect())
            .collect();
        HeightVariables {
            y_t: v[0],
            x,
            log_ratio,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HeightOptions {
    /// `x` columns are stored divided by this.
    pub x_scale: f64,
    pub ccp_tol: f64,
    pub ccp_max_iterations: usize,
    /// Alternation stops once no height moves more than this (m).
    pub move_tol: f64,
    pub max_alternations: usize,
    /// Relative inset of expansion points inside their `x` interval.
    pub inset: f64,
    pub barrier: BarrierOptions,
}

impl Default for HeightOptions {
    fn default() -> Self {
        HeightOptions {
            x_scale: 1e4,
            ccp_tol: 1e-3,
            ccp_max_iterations: 30,
            move_tol: 0.1,
            max_alternations: 20,
            inset: 1e-6,
            barrier: BarrierOptions::default(),
        }
    }
}

/// UAVs with an empty power-feasible interval are pinned at `h_min`.
pub fn x_intervals(
    scn: &Scenario,
    assoc: &Association,
) -> Result<Vec<((f64, f64), bool)>, HeightError> {
    (0..scn.num_uav())
        .map(|u| match height_feasible_interval(scn, assoc, u) {
            Ok((lo, hi)) if hi - lo > 1e-9 * lo.max(1.0) => Ok(((lo, hi), false)),
            Ok((lo, _)) => Ok(((lo, lo), true)),
            Err(HeightError::EmptyInterval { lower, .. }) => Ok(((lower, lower), true)),
            Err(e) => Err(e),
        })
        .collect()
}

/// Builds the convexified subproblem with beamformers fixed and the ratio
/// bounds linearized at `x_bar`.
///
/// Ground-user rows that no height can influence are checked here and left
/// out of the program.
pub fn build_convex_subproblem(
    scn: &Scenario,
    view: &CsiView<'_>,
    assoc: &Association,
    bf: &BeamformerSet,
    x_bar: &[f64],
    opts: &HeightOptions,
) -> Result<ConvexSubproblem, HeightError> {
    let p = &scn.params;
    let (g_n, u_n) = (scn.num_bs(), scn.num_uav());
    let serving: Vec<usize> = (0..u_n)
        .map(|u| assoc.serving(u).ok_or(HeightError::Unassociated(u)))
        .collect::<Result<_, _>>()?;
    let intervals = x_intervals(scn, assoc)?;
    let frozen_heights: Vec<f64> = (0..u_n)
        .map(|u| height_from_x(scn, intervals[u].0 .0))
        .collect();
    // Only frozen UAVs read from this budget; free ones are uncapped.
    let frozen_budget = LinkBudget::new(scn, &frozen_heights)?;
    let heard_at_serving = p.power_scale_los * p.path_loss_ref_los / p.noise_power();

    let mut dim = 1;
    let mut x_col = vec![None; u_n];
    let mut y_col = vec![vec![None; g_n]; u_n];
    for u in 0..u_n {
        if intervals[u].1 {
            continue;
        }
        x_col[u] = Some(dim);
        dim += 1;
        for i in (0..g_n).filter(|&i| i != serving[u]) {
            y_col[u][i] = Some(dim);
            dim += 1;
        }
    }
    let layout = HeightLayout {
        dim,
        x_scale: opts.x_scale,
        x_col,
        y_col,
        bounds: intervals.iter().map(|(b, _)| *b).collect(),
    };

    // Interference from UAV `v` at base station `i` through `z`: either a
    // constant or a coefficient on exp(y[v][i]).
    let uav_term = |z, i: usize, v: usize| -> (f64, Option<usize>) {
        let sm = view.second_moment(z, view.uav(i, v));
        match (layout.x_col[v], layout.y_col[v][i]) {
            (Some(_), Some(c)) => (heard_at_serving * sm, Some(c)),
            (Some(_), None) => (heard_at_serving * sm, None),
            _ => (frozen_budget.uav(serving[v], i, v) * sm, None),
        }
    };
    let own_weight = |u: usize| match layout.x_col[u] {
        Some(_) => heard_at_serving,
        None => frozen_budget.uav(serving[u], serving[u], u),
    };

    let mut uav_rows = Vec::new();
    for u in 0..u_n {
        let i = serving[u];
        let z = bf.uav[u].as_ref().ok_or(HeightError::Unassociated(u))?;
        let w = own_weight(u);
        let signal = w * z.dotc(view.uav(i, u)).norm_sqr();
        if !(signal > 0.0) {
            return Err(HeightError::NonPositiveCoefficient(format!("UAV {u}")));
        }
        let mut constant = 1.0 + w * view.error_power(z);
        constant += (0..scn.num_gue())
            .map(|k| frozen_budget.gue(i, k) * view.second_moment(z, view.gue(i, k)))
            .sum::<f64>();
        let mut terms = Vec::new();
        for v in (0..u_n).filter(|&v| v != u) {
            match uav_term(z, i, v) {
                (c, None) => constant += c,
                (c, Some(col)) if c > 0.0 => {
                    terms.push(((c / signal).ln(), vec![(0, 1.0), (col, 1.0)]))
                }
                _ => {}
            }
        }
        terms.insert(0, ((constant / signal).ln(), vec![(0, 1.0)]));
        uav_rows.push((u, LogSumExp { terms }));
    }

    let gamma = p.gue_target_sinr;
    let mut gue_rows = Vec::new();
    for k in 0..scn.num_gue() {
        let i = scn.gues[k].serving;
        let z = &bf.gue[k];
        let own = frozen_budget.gue(i, k);
        let signal = own * z.dotc(view.gue(i, k)).norm_sqr();
        if !(signal > 0.0) {
            return Err(HeightError::NonPositiveCoefficient(format!(
                "ground user {k}"
            )));
        }
        let mut constant = 1.0 + own * view.error_power(z);
        constant += (0..scn.num_gue())
            .filter(|&k2| k2 != k)
            .map(|k2| frozen_budget.gue(i, k2) * view.second_moment(z, view.gue(i, k2)))
            .sum::<f64>();
        let mut terms = Vec::new();
        for v in 0..u_n {
            match uav_term(z, i, v) {
                (c, None) => constant += c,
                (c, Some(col)) if c > 0.0 => {
                    terms.push(((gamma * c / signal).ln(), vec![(col, 1.0)]))
                }
                _ => {}
            }
        }
        let base = gamma * constant / signal;
        if terms.is_empty() {
            if base > 1.0 + 1e-9 {
                return Err(HeightError::GueUnreachable(k));
            }
            continue;
        }
        terms.insert(0, (base.ln(), Vec::new()));
        gue_rows.push((k, LogSumExp { terms }));
    }

    let mut ratio_cuts = Vec::new();
    let mut lower = DVector::from_element(dim, f64::NEG_INFINITY);
    let mut upper = DVector::from_element(dim, f64::INFINITY);
    let two_over_alpha = 2.0 / p.path_loss_exp_los;
    for u in 0..u_n {
        let Some(xc) = layout.x_col[u] else { continue };
        let (lo, hi) = layout.bounds[u];
        lower[xc] = lo / opts.x_scale;
        upper[xc] = hi / opts.x_scale;
        let xb = x_bar[u].clamp(lo, hi);
        let g = serving[u];
        let r2s = scn.horizontal_uav(g, u).powi(2);
        for i in (0..g_n).filter(|&i| i != g) {
            let yc = layout.y_col[u][i].expect("log-ratio column for every other base station");
            let r2h = scn.horizontal_uav(i, u).powi(2);
            // The log-ratio never needs to exceed its largest exact value on
            // the interval; the cap keeps unused columns bounded.
            let top = [lo, hi]
                .iter()
                .map(|x| ((r2s + x) / (r2h + x)).ln())
                .fold(f64::NEG_INFINITY, f64::max);
            upper[yc] = top / two_over_alpha + 1.0;
            ratio_cuts.push(RatioCut {
                uav: u,
                serving: g,
                heard_at: i,
                x_col: xc,
                y_col: yc,
                scale: opts.x_scale,
                r2_serving: r2s,
                r2_heard: r2h,
                x_bar: xb,
                two_over_alpha,
            });
        }
    }

    Ok(ConvexSubproblem {
        layout,
        uav_rows,
        gue_rows,
        ratio_cuts,
        lower,
        upper,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CcpIteration {
    pub iteration: usize,
    pub y_t: f64,
    pub heights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CcpOutcome {
    pub heights: Vec<f64>,
    /// `exp(y_t)` of the last accepted subproblem, a lower bound on the
    /// minimum UAV SINR at `heights` with the given beamformers.
    pub t: f64,
    pub iterations: usize,
    /// Entry 0 is the expansion point itself.
    pub trace: Vec<CcpIteration>,
}

/// Pulls `x` a relative `inset` inside its interval.
fn inset_point(x: f64, (lo, hi): (f64, f64), inset: f64) -> f64 {
    let pad = inset * (hi - lo);
    x.clamp(lo + pad, hi - pad)
}

/// Convex-concave procedure for the heights with beamformers fixed.
pub fn ccp_solve(
    scn: &Scenario,
    view: &CsiView<'_>,
    assoc: &Association,
    bf: &BeamformerSet,
    x_start: &[f64],
    opts: &HeightOptions,
) -> Result<CcpOutcome, HeightError> {
    let intervals = x_intervals(scn, assoc)?;
    let mut x_bar: Vec<f64> = x_start
        .iter()
        .zip(&intervals)
        .map(|(&x, &(b, frozen))| {
            if frozen {
                b.0
            } else {
                inset_point(x, b, opts.inset)
            }
        })
        .collect();

    let first = build_convex_subproblem(scn, view, assoc, bf, &x_bar, opts)?;
    let mut y_prev = first.y_t_limit(&first.start_at(&x_bar, 0.0));
    let heights = |x: &[f64]| x.iter().map(|&x| height_from_x(scn, x)).collect::<Vec<_>>();
    let mut trace = vec![CcpIteration {
        iteration: 0,
        y_t: y_prev,
        heights: heights(&x_bar),
    }];
    let mut best_x = x_bar.clone();
    let mut sub = first;
    let mut iterations = 0;

    for iteration in 1..=opts.ccp_max_iterations {
        iterations = iteration;
        let start = sub.start_at(&x_bar, 1e-6);
        let sol = solve_convex_barrier(&sub.program(), Some(&start), &opts.barrier)
            .map_err(|source| HeightError::Numerics { iteration, source })?;
        let vars = sub.unpack(&sol.x);
        trace.push(CcpIteration {
            iteration,
            y_t: vars.y_t,
            heights: heights(&vars.x),
        });
        log::trace!("ccp {iteration}: y_t = {:.6}", vars.y_t);
        let improvement = vars.y_t - y_prev;
        if improvement > 0.0 {
            best_x = vars.x.clone();
            y_prev = vars.y_t;
        }
        if improvement.abs() < opts.ccp_tol || improvement <= 0.0 {
            break;
        }
        x_bar = vars
            .x
            .iter()
            .zip(&intervals)
            .map(|(&x, &(b, frozen))| {
                if frozen {
                    b.0
                } else {
                    inset_point(x, b, opts.inset)
                }
            })
            .collect();
        sub = build_convex_subproblem(scn, view, assoc, bf, &x_bar, opts)?;
    }

    Ok(CcpOutcome {
        heights: heights(&best_x),
        t: y_prev.exp(),
        iterations,
        trace,
    })
}

pub fn write_ccp_log<W: Write>(trace: &[CcpIteration], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = trace.first().map_or(0, |t| t.heights.len());
    let mut header = vec!["iteration".to_string(), "y_t".to_string()];
    header.extend((0..n).map(|u| format!("h{u}")));
    w.write_record(&header)?;
    for it in trace {
        let mut row = vec![it.iteration.to_string(), format!("{:.9}", it.y_t)];
        row.extend(it.heights.iter().map(|h| format!("{h:.6}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlternationStep {
    pub iteration: usize,
    /// Minimum UAV SINR after this alternation, evaluated directly.
    pub t: f64,
    pub max_move: f64,
    pub ccp_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct HeightAlternation {
    pub heights: Vec<f64>,
    pub beamformers: BeamformerSet,
    /// Minimum UAV SINR at `heights` with `beamformers`.
    pub t: f64,
    pub sinr: SinrReport,
    pub trace: Vec<AlternationStep>,
    pub ccp_traces: Vec<Vec<CcpIteration>>,
}

/// Evaluates MMSE beamformers and their SINRs at the given heights.
pub fn mmse_at_heights(
    scn: &Scenario,
    view: &CsiView<'_>,
    assoc: &Association,
    heights: &[f64],
) -> Result<(BeamformerSet, SinrReport), HeightError> {
    let budget = LinkBudget::new(scn, heights)?;
    let bf = mmse_set(scn, view, &budget, assoc)?;
    let rep = sinr_with_budget(scn, view, &budget, assoc, &bf);
    Ok((bf, rep))
}

fn gue_ok(rep: &SinrReport, gamma: f64) -> bool {
    rep.gue.iter().all(|&s| s >= gamma * (1.0 - 1e-9))
}

/// Alternates MMSE beamformers and convex-concave height updates from
/// `initial` heights, keeping the best verified point.
pub fn alternate_heights(
    scn: &Scenario,
    view: &CsiView<'_>,
    assoc: &Association,
    initial: &[f64],
    opts: &HeightOptions,
) -> Result<HeightAlternation, HeightError> {
    let gamma = scn.params.gue_target_sinr;
    let mut heights = initial.to_vec();
    let (mut bf, mut rep) = mmse_at_heights(scn, view, assoc, &heights)?;
    let mut best = (heights.clone(), bf.clone(), rep.clone());
    let mut trace = Vec::new();
    let mut ccp_traces = Vec::new();

    for iteration in 1..=opts.max_alternations {
        let x: Vec<f64> = heights.iter().map(|&h| x_from_height(scn, h)).collect();
        let ccp = match ccp_solve(scn, view, assoc, &bf, &x, opts) {
            Ok(c) => c,
            Err(HeightError::Numerics {
                source: NumericsError::Infeasible { .. },
                ..
            })
            | Err(HeightError::GueUnreachable(_)) => {
                log::debug!(
                    "height subproblem infeasible at alternation {iteration}; keeping heights"
                );
                break;
            }
            Err(HeightError::Numerics {
                source:
                    e @ (NumericsError::NewtonFailure { .. } | NumericsError::NotConverged { .. }),
                ..
            }) => {
                log::debug!("height subproblem stalled at alternation {iteration}: {e}; keeping best heights");
                break;
            }
            Err(e) => return Err(e),
        };
        let max_move = ccp
            .heights
            .iter()
            .zip(&heights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        heights = ccp.heights.clone();
        ccp_traces.push(ccp.trace);
        (bf, rep) = mmse_at_heights(scn, view, assoc, &heights)?;
        let t = rep.min_uav();
        trace.push(AlternationStep {
            iteration,
            t,
            max_move,
            ccp_iterations: ccp.iterations,
        });
        if gue_ok(&rep, gamma) && (t > best.2.min_uav() || !gue_ok(&best.2, gamma)) {
            best = (heights.clone(), bf.clone(), rep.clone());
        }
        if max_move < opts.move_tol {
            break;
        }
    }

    let (heights, beamformers, sinr) = best;
    Ok(HeightAlternation {
        t: sinr.min_uav(),
        heights,
        beamformers,
        sinr,
        trace,
        ccp_traces,
    })
}

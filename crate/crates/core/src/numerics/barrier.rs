use nalgebra::{Cholesky, DMatrix, DVector};

use super::NumericsError;

/// A smooth convex function `g` used as the constraint `g(x) ≤ 0`.
pub trait ConvexConstraint: Send + Sync {
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

/// `coeffs · x ≤ bound`.
#[derive(Debug, Clone)]
pub struct LinearConstraint {
    pub coeffs: DVector<f64>,
    pub bound: f64,
}

impl ConvexConstraint for LinearConstraint {
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.coeffs.dot(x) - self.bound
    }
    fn gradient(&self, _x: &DVector<f64>) -> DVector<f64> {
        self.coeffs.clone()
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(x.len(), x.len())
    }
}

/// Maximize `objective · x` subject to convex constraints and a box.
///
/// Infinite box entries mean the side is unbounded.
pub struct SmoothConvexProgram<'a> {
    pub dim: usize,
    pub objective: DVector<f64>,
    pub constraints: Vec<Box<dyn ConvexConstraint + 'a>>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl<'a> SmoothConvexProgram<'a> {
    pub fn new(objective: DVector<f64>) -> Self {
        let dim = objective.len();
        SmoothConvexProgram {
            dim,
            objective,
            constraints: Vec::new(),
            lower: DVector::from_element(dim, f64::NEG_INFINITY),
            upper: DVector::from_element(dim, f64::INFINITY),
        }
    }

    pub fn push(&mut self, c: impl ConvexConstraint + 'a) {
        self.constraints.push(Box::new(c));
    }

    /// Largest constraint or box violation at `x` (negative when strictly feasible).
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for c in &self.constraints {
            worst = worst.max(c.value(x));
        }
        for k in 0..self.dim {
            worst = worst.max(self.lower[k] - x[k]).max(x[k] - self.upper[k]);
        }
        worst
    }

    fn barrier_terms(&self) -> usize {
        let boxes = (0..self.dim)
            .map(|k| self.lower[k].is_finite() as usize + self.upper[k].is_finite() as usize)
            .sum::<usize>();
        self.constraints.len() + boxes
    }

    fn strictly_inside(&self, x: &DVector<f64>) -> bool {
        (0..self.dim).all(|k| x[k] > self.lower[k] && x[k] < self.upper[k])
            && self.constraints.iter().all(|c| c.value(x) < 0.0)
    }

    fn barrier_value(&self, x: &DVector<f64>) -> f64 {
        let mut phi = 0.0;
        for c in &self.constraints {
            let g = c.value(x);
            if !(g < 0.0) {
                return f64::INFINITY;
            }
            phi -= (-g).ln();
        }
        for k in 0..self.dim {
            if self.lower[k].is_finite() {
                phi -= (x[k] - self.lower[k]).ln();
            }
            if self.upper[k].is_finite() {
                phi -= (self.upper[k] - x[k]).ln();
            }
        }
        phi
    }

    fn barrier_derivatives(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.dim;
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        for c in &self.constraints {
            let g = c.value(x);
            let dg = c.gradient(x);
            let inv = -1.0 / g;
            grad.axpy(inv, &dg, 1.0);
            hess.ger(inv * inv, &dg, &dg, 1.0);
            hess += c.hessian(x).scale(inv);
        }
        for k in 0..n {
            if self.lower[k].is_finite() {
                let d = x[k] - self.lower[k];
                grad[k] -= 1.0 / d;
                hess[(k, k)] += 1.0 / (d * d);
            }
            if self.upper[k].is_finite() {
                let d = self.upper[k] - x[k];
                grad[k] += 1.0 / d;
                hess[(k, k)] += 1.0 / (d * d);
            }
        }
        (grad, hess)
    }
}

#[derive(Debug, Clone)]
pub struct BarrierOptions {
    /// Stop once the duality measure (barrier terms / τ) is at most this.
    pub gap_tol: f64,
    /// Barrier parameter growth per outer stage.
    pub mu: f64,
    /// Centering stops when half the squared Newton decrement is below this.
    pub newton_tol: f64,
    pub max_newton_per_stage: usize,
    pub max_stages: usize,
    /// Return as soon as the objective reaches this value.
    pub early_stop: Option<f64>,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        BarrierOptions {
            gap_tol: 1e-6,
            mu: 10.0,
            newton_tol: 1e-10,
            max_newton_per_stage: 100,
            max_stages: 60,
            early_stop: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BarrierSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub newton_steps: usize,
    pub stages: usize,
    pub tau: f64,
}

/// Log-barrier path following for [`SmoothConvexProgram`].
///
/// If `start` is missing or not strictly feasible, a phase-one problem is
/// solved first.
pub fn solve_convex_barrier(
    program: &SmoothConvexProgram<'_>,
    start: Option<&DVector<f64>>,
    opts: &BarrierOptions,
) -> Result<BarrierSolution, NumericsError> {
    check_dims(program)?;
    let x0 = match start {
        Some(s) if s.len() == program.dim && program.strictly_inside(s) => s.clone(),
        Some(s) if s.len() != program.dim => {
            return Err(NumericsError::Dimension(format!(
                "start has length {}, program has {}",
                s.len(),
                program.dim
            )))
        }
        other => phase_one(program, other)?,
    };
    path_follow(program, x0, opts)
}

/// Finds a strictly feasible point by minimizing a shared slack.
pub fn phase_one(
    program: &SmoothConvexProgram<'_>,
    hint: Option<&DVector<f64>>,
) -> Result<DVector<f64>, NumericsError> {
    check_dims(program)?;
    let n = program.dim;
    let mut x0 = match hint {
        Some(h) if h.len() == n => h.clone(),
        _ => DVector::zeros(n),
    };
    for k in 0..n {
        x0[k] = interior_coordinate(x0[k], program.lower[k], program.upper[k]);
    }
    if program.strictly_inside(&x0) {
        return Ok(x0);
    }

    let worst = program
        .constraints
        .iter()
        .map(|c| c.value(&x0))
        .fold(f64::NEG_INFINITY, f64::max);
    let scale = worst.abs().max(1.0);
    let shifted: Vec<Shifted<'_>> = program
        .constraints
        .iter()
        .map(|c| Shifted {
            inner: c.as_ref(),
            n,
        })
        .collect();
    let mut objective = DVector::zeros(n + 1);
    objective[n] = -1.0;
    let mut aux = SmoothConvexProgram::new(objective);
    for s in shifted {
        aux.push(s);
    }
    for k in 0..n {
        aux.lower[k] = program.lower[k];
        aux.upper[k] = program.upper[k];
    }
    aux.lower[n] = -scale;
    let mut start = x0.clone().resize_vertically(n + 1, 0.0);
    start[n] = worst + scale;

    let margin = 1e-6 * scale;
    let opts = BarrierOptions {
        gap_tol: 1e-10 * scale,
        early_stop: Some(margin),
        ..BarrierOptions::default()
    };
    let sol = path_follow(&aux, start, &opts)?;
    let x = sol.x.rows(0, n).into_owned();
    if program.strictly_inside(&x) {
        Ok(x)
    } else {
        Err(NumericsError::Infeasible {
            residual: sol.x[n].max(0.0),
        })
    }
}

fn interior_coordinate(v: f64, lo: f64, hi: f64) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => {
            let pad = 1e-3 * (hi - lo);
            v.clamp(lo + pad, hi - pad)
        }
        (true, false) => v.max(lo + 1e-3 * lo.abs().max(1.0)),
        (false, true) => v.min(hi - 1e-3 * hi.abs().max(1.0)),
        (false, false) => v,
    }
}

fn check_dims(p: &SmoothConvexProgram<'_>) -> Result<(), NumericsError> {
    if p.objective.len() != p.dim || p.lower.len() != p.dim || p.upper.len() != p.dim {
        return Err(NumericsError::Dimension(
            "program vectors disagree with dim".into(),
        ));
    }
    if (0..p.dim).any(|k| !(p.lower[k] < p.upper[k])) {
        return Err(NumericsError::Infeasible {
            residual: f64::INFINITY,
        });
    }
    Ok(())
}

struct Shifted<'b> {
    inner: &'b dyn ConvexConstraint,
    n: usize,
}

impl ConvexConstraint for Shifted<'_> {
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.inner.value(&x.rows(0, self.n).into_owned()) - x[self.n]
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = self
            .inner
            .gradient(&x.rows(0, self.n).into_owned())
            .resize_vertically(self.n + 1, 0.0);
        g[self.n] = -1.0;
        g
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.inner
            .hessian(&x.rows(0, self.n).into_owned())
            .resize(self.n + 1, self.n + 1, 0.0)
    }
}

fn path_follow(
    program: &SmoothConvexProgram<'_>,
    mut x: DVector<f64>,
    opts: &BarrierOptions,
) -> Result<BarrierSolution, NumericsError> {
    let m = program.barrier_terms() as f64;
    let c = &program.objective;
    let tau_final = if m > 0.0 { m / opts.gap_tol } else { 1.0 };
    let mut tau = initial_tau(program, &x, tau_final);
    let mut newton_steps = 0;
    let mut trace = Vec::new();

    for stage in 0..opts.max_stages {
        for step in 0..opts.max_newton_per_stage {
            let (g_phi, h_phi) = program.barrier_derivatives(&x);
            let grad = &g_phi - c.scale(tau);
            let dx = match newton_direction(&h_phi, &grad) {
                Some(d) => d,
                None => {
                    return Err(NumericsError::NewtonFailure {
                        stage,
                        step,
                        reason: "barrier hessian is not positive definite".into(),
                        trace,
                    })
                }
            };
            let slope = grad.dot(&dx);
            let decrement = -slope;
            trace.push(decrement);
            if decrement / 2.0 <= opts.newton_tol {
                break;
            }
            let f0 = program.barrier_value(&x) - tau * c.dot(&x);
            let mut s = 1.0;
            loop {
                let trial = &x + dx.scale(s);
                let f = program.barrier_value(&trial);
                if f.is_finite() && f - tau * c.dot(&trial) <= f0 + 0.25 * s * slope {
                    x = trial;
                    break;
                }
                s *= 0.5;
                if s < 1e-20 {
                    // Numerically centered; further progress is below round-off.
                    if decrement < 1e-6 {
                        break;
                    }
                    return Err(NumericsError::NewtonFailure {
                        stage,
                        step,
                        reason: "line search found no descent".into(),
                        trace,
                    });
                }
            }
            newton_steps += 1;
            if let Some(target) = opts.early_stop {
                if c.dot(&x) >= target {
                    return Ok(BarrierSolution {
                        objective: c.dot(&x),
                        x,
                        newton_steps,
                        stages: stage + 1,
                        tau,
                    });
                }
            }
            if step + 1 == opts.max_newton_per_stage {
                if decrement < 1e-6 {
                    break;
                }
                return Err(NumericsError::NewtonFailure {
                    stage,
                    step,
                    reason: "centering did not converge".into(),
                    trace,
                });
            }
        }
        if tau >= tau_final * (1.0 - 1e-12) || m == 0.0 {
            return Ok(BarrierSolution {
                objective: c.dot(&x),
                x,
                newton_steps,
                stages: stage + 1,
                tau,
            });
        }
        tau = (tau * opts.mu).min(tau_final);
    }
    Err(NumericsError::NotConverged {
        iterations: newton_steps,
        residual: m / tau,
    })
}

fn newton_direction(h: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let n = h.nrows();
    let scale = (0..n)
        .map(|k| h[(k, k)].abs())
        .fold(0.0, f64::max)
        .max(1e-300);
    let mut ridge = 0.0;
    for _ in 0..8 {
        let mut reg = h.clone();
        for k in 0..n {
            reg[(k, k)] += ridge;
        }
        if let Some(ch) = Cholesky::new(reg) {
            let d = -ch.solve(grad);
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        ridge = if ridge == 0.0 {
            1e-14 * scale
        } else {
            ridge * 100.0
        };
    }
    None
}

/// Barrier weight whose central point best explains the current iterate.
fn initial_tau(program: &SmoothConvexProgram<'_>, x: &DVector<f64>, tau_final: f64) -> f64 {
    let c = &program.objective;
    let floor = (tau_final * 1e-9).max(1e-3).min(tau_final);
    if c.norm() == 0.0 {
        return tau_final;
    }
    let (g, h) = program.barrier_derivatives(x);
    let Some(ch) = Cholesky::new(h) else {
        return floor;
    };
    let hc = ch.solve(c);
    let denom = c.dot(&hc);
    if !(denom > 0.0) {
        return floor;
    }
    let tau = hc.dot(&g) / denom;
    if tau.is_finite() {
        tau.clamp(floor, tau_final)
    } else {
        floor
    }
}

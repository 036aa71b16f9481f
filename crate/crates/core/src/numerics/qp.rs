use nalgebra::{DMatrix, DVector};

use super::barrier::{phase_one, LinearConstraint, SmoothConvexProgram};
use super::NumericsError;

/// Linear inequalities `a·x ≤ b` and equalities `a·x = b` over `dim` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraintSet {
    pub dim: usize,
    pub inequalities: Vec<(Vec<f64>, f64)>,
    pub equalities: Vec<(Vec<f64>, f64)>,
}

impl LinearConstraintSet {
    pub fn new(dim: usize) -> Self {
        LinearConstraintSet {
            dim,
            inequalities: Vec::new(),
            equalities: Vec::new(),
        }
    }

    pub fn push_le(&mut self, coeffs: Vec<f64>, bound: f64) {
        assert_eq!(coeffs.len(), self.dim, "constraint row has wrong length");
        self.inequalities.push((coeffs, bound));
    }

    pub fn push_eq(&mut self, coeffs: Vec<f64>, bound: f64) {
        assert_eq!(coeffs.len(), self.dim, "constraint row has wrong length");
        self.equalities.push((coeffs, bound));
    }

    /// Adds `lo ≤ x_k ≤ hi` for every coordinate.
    pub fn push_box(&mut self, lo: f64, hi: f64) {
        for k in 0..self.dim {
            let mut row = vec![0.0; self.dim];
            row[k] = 1.0;
            self.push_le(row.clone(), hi);
            row[k] = -1.0;
            self.push_le(row, -lo);
        }
    }

    /// Largest violation at `x` over all rows; equalities count in both directions.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let dot = |a: &[f64]| a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
        let ineq = self.inequalities.iter().map(|(a, b)| dot(a) - b);
        let eq = self.equalities.iter().map(|(a, b)| (dot(a) - b).abs());
        ineq.chain(eq).fold(0.0, f64::max)
    }

    fn validate(&self) -> Result<(), NumericsError> {
        let rows = self.inequalities.iter().chain(&self.equalities);
        for (a, b) in rows {
            if a.len() != self.dim {
                return Err(NumericsError::Dimension(format!(
                    "row of length {} in a {}-dimensional set",
                    a.len(),
                    self.dim
                )));
            }
            if !b.is_finite() || a.iter().any(|v| !v.is_finite()) {
                return Err(NumericsError::Dimension(
                    "non-finite constraint data".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct QpOptions {
    pub kkt_tol: f64,
    pub max_iterations: usize,
    /// Feasibility tolerance on row-normalized constraints.
    pub feas_tol: f64,
}

impl Default for QpOptions {
    fn default() -> Self {
        QpOptions {
            kkt_tol: 1e-8,
            max_iterations: 200,
            feas_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub point: DVector<f64>,
    pub iterations: usize,
    pub kkt_residual: f64,
}

/// Euclidean projection of `point` onto a nonempty polytope.
pub fn project_onto_polytope(
    point: &DVector<f64>,
    set: &LinearConstraintSet,
    opts: &QpOptions,
) -> Result<Projection, NumericsError> {
    set.validate()?;
    if point.len() != set.dim {
        return Err(NumericsError::Dimension(format!(
            "point has length {}, set has {}",
            point.len(),
            set.dim
        )));
    }
    let norm = Normalized::new(set)?;
    if norm.max_violation(point) <= opts.feas_tol {
        return Ok(Projection {
            point: point.clone(),
            iterations: 0,
            kkt_residual: 0.0,
        });
    }
    norm.ensure_nonempty(point, opts)?;
    norm.solve(point, opts)
}

/// Constraint data with every row scaled to unit max-coefficient.
struct Normalized {
    dim: usize,
    c: DMatrix<f64>,
    d: DVector<f64>,
    e: DMatrix<f64>,
    f: DVector<f64>,
}

impl Normalized {
    fn new(set: &LinearConstraintSet) -> Result<Self, NumericsError> {
        let n = set.dim;
        let mut ineq = Vec::new();
        for (a, b) in &set.inequalities {
            let s = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if s == 0.0 {
                if *b < 0.0 {
                    return Err(NumericsError::Infeasible { residual: -b });
                }
                continue;
            }
            ineq.push((a.iter().map(|v| v / s).collect::<Vec<_>>(), b / s));
        }
        let mut eq = Vec::new();
        for (a, b) in &set.equalities {
            let s = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if s == 0.0 {
                if *b != 0.0 {
                    return Err(NumericsError::Infeasible { residual: b.abs() });
                }
                continue;
            }
            eq.push((a.iter().map(|v| v / s).collect::<Vec<_>>(), b / s));
        }
        let c = DMatrix::from_fn(ineq.len(), n, |r, k| ineq[r].0[k]);
        let d = DVector::from_iterator(ineq.len(), ineq.iter().map(|r| r.1));
        let e = DMatrix::from_fn(eq.len(), n, |r, k| eq[r].0[k]);
        let f = DVector::from_iterator(eq.len(), eq.iter().map(|r| r.1));
        Ok(Normalized { dim: n, c, d, e, f })
    }

    fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let ineq = (&self.c * x - &self.d)
            .iter()
            .fold(0.0f64, |m, v| m.max(*v));
        let eq = (&self.e * x - &self.f)
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        ineq.max(eq)
    }

    /// Phase-one check: minimize a shared slack over the rows inside a large box.
    fn ensure_nonempty(&self, hint: &DVector<f64>, opts: &QpOptions) -> Result<(), NumericsError> {
        if self.max_violation(&DVector::zeros(self.dim)) <= opts.feas_tol {
            return Ok(());
        }
        let n = self.dim;
        let radius = 1e6 * (1.0 + hint.amax());
        let mut program = SmoothConvexProgram::new(DVector::zeros(n));
        for r in 0..self.c.nrows() {
            program.push(LinearConstraint {
                coeffs: self.c.row(r).transpose(),
                bound: self.d[r],
            });
        }
        for r in 0..self.e.nrows() {
            let row = self.e.row(r).transpose();
            program.push(LinearConstraint {
                coeffs: row.clone(),
                bound: self.f[r],
            });
            program.push(LinearConstraint {
                coeffs: -row,
                bound: -self.f[r],
            });
        }
        program.lower.fill(-radius);
        program.upper.fill(radius);
        match phase_one(&program, Some(hint)) {
            Ok(_) => Ok(()),
            Err(NumericsError::Infeasible { residual }) if residual <= opts.feas_tol.max(1e-9) => {
                Ok(())
            }
            Err(e) => Err(e),
        }
    }

    /// Mehrotra predictor-corrector on min ½‖x − p‖² s.t. Cx + s = d, Ex = f, s ≥ 0.
    fn solve(&self, p: &DVector<f64>, opts: &QpOptions) -> Result<Projection, NumericsError> {
        let n = self.dim;
        let m = self.c.nrows();
        let q = self.e.nrows();
        let ct = self.c.transpose();
        let et = self.e.transpose();

        let mut x = p.clone();
        let mut s = (&self.d - &self.c * &x).map(|v| v.max(1.0));
        let mut lam = DVector::from_element(m, 1.0);
        let mut nu = DVector::zeros(q);

        let mut residual = f64::INFINITY;
        for iter in 0..opts.max_iterations {
            let r_d = &x - p + &ct * &lam + &et * &nu;
            let r_p = &self.c * &x + &s - &self.d;
            let r_e = &self.e * &x - &self.f;
            let mu = if m > 0 { s.dot(&lam) / m as f64 } else { 0.0 };
            residual = r_d.amax().max(r_p.amax()).max(r_e.amax()).max(mu);
            if residual <= opts.kkt_tol * 1e-2 {
                let point = self.polish(p, &x, &s, &lam, opts).unwrap_or(x);
                return Ok(Projection {
                    point,
                    iterations: iter,
                    kkt_residual: residual,
                });
            }

            // Clamped so that I + CᵀDC stays numerically positive definite.
            let dvec = DVector::from_fn(m, |k, _| (lam[k] / s[k]).clamp(1e-14, 1e14));
            let mut h = DMatrix::identity(n, n);
            for k in 0..m {
                let row = self.c.row(k);
                h.ger(dvec[k], &row.transpose(), &row.transpose(), 1.0);
            }
            let kkt = match KktSystem::new(&h, &self.e) {
                Ok(k) => k,
                Err(_) if residual <= opts.kkt_tol => {
                    let point = self.polish(p, &x, &s, &lam, opts).unwrap_or(x);
                    return Ok(Projection {
                        point,
                        iterations: iter,
                        kkt_residual: residual,
                    });
                }
                Err(e) => return Err(e),
            };

            let solve_dir = |r_c: &DVector<f64>| -> Result<_, NumericsError> {
                // dλ = S⁻¹(Λ r_p − r_c) + S⁻¹Λ C dx
                let t = DVector::from_fn(m, |k, _| (lam[k] * r_p[k] - r_c[k]) / s[k]);
                let rhs_x = -&r_d - &ct * &t;
                let (dx, dnu) = kkt.solve(&rhs_x, &(-&r_e))?;
                let cdx = &self.c * &dx;
                let dlam = DVector::from_fn(m, |k, _| t[k] + dvec[k] * cdx[k]);
                let ds = -&r_p - cdx;
                Ok((dx, ds, dlam, dnu))
            };

            let rc_aff = s.component_mul(&lam);
            let bail = |e: NumericsError| -> Result<Projection, NumericsError> {
                if residual <= opts.kkt_tol {
                    let point = self
                        .polish(p, &x, &s, &lam, opts)
                        .unwrap_or_else(|| x.clone());
                    Ok(Projection {
                        point,
                        iterations: iter,
                        kkt_residual: residual,
                    })
                } else {
                    Err(e)
                }
            };
            let (_, ds_a, dl_a, _) = match solve_dir(&rc_aff) {
                Ok(d) => d,
                Err(e) => return bail(e),
            };
            let a_p = max_step(&s, &ds_a);
            let a_d = max_step(&lam, &dl_a);
            let mu_aff = if m > 0 {
                (&s + ds_a.scale(a_p)).dot(&(&lam + dl_a.scale(a_d))) / m as f64
            } else {
                0.0
            };
            let sigma = if mu > 0.0 {
                (mu_aff / mu).powi(3).min(1.0)
            } else {
                0.0
            };
            let rc = DVector::from_fn(m, |k, _| s[k] * lam[k] + ds_a[k] * dl_a[k] - sigma * mu);
            let (dx, ds, dlam, dnu) = match solve_dir(&rc) {
                Ok(d) => d,
                Err(e) => return bail(e),
            };
            let a_p = (0.99 * max_step(&s, &ds)).min(1.0);
            let a_d = (0.99 * max_step(&lam, &dlam)).min(1.0);
            x += dx.scale(a_p);
            s += ds.scale(a_p);
            lam += dlam.scale(a_d);
            nu += dnu.scale(a_d);
        }
        if residual <= opts.kkt_tol {
            return Ok(Projection {
                point: x,
                iterations: opts.max_iterations,
                kkt_residual: residual,
            });
        }
        Err(NumericsError::NotConverged {
            iterations: opts.max_iterations,
            residual,
        })
    }

    /// Exact projection onto the active face guessed from the interior
    /// iterate. The interior point leaves an O(μ/slack) error on nearly
    /// active rows; returns `None` when the guess does not verify.
    fn polish(
        &self,
        p: &DVector<f64>,
        x: &DVector<f64>,
        s: &DVector<f64>,
        lam: &DVector<f64>,
        opts: &QpOptions,
    ) -> Option<DVector<f64>> {
        let n = self.dim;
        let active: Vec<usize> = (0..s.len()).filter(|&k| lam[k] > s[k]).collect();
        let rows = active.len() + self.e.nrows();
        if rows == 0 {
            return None;
        }
        let mut g = DMatrix::zeros(rows, n);
        let mut b = DVector::zeros(rows);
        for (r, &k) in active.iter().enumerate() {
            g.row_mut(r).copy_from(&self.c.row(k));
            b[r] = self.d[k];
        }
        for r in 0..self.e.nrows() {
            g.row_mut(active.len() + r).copy_from(&self.e.row(r));
            b[active.len() + r] = self.f[r];
        }
        let gram = &g * g.transpose();
        let mult = gram.svd(true, true).solve(&(&g * p - &b), 1e-12).ok()?;
        let cand = p - g.transpose() * &mult;
        if self.max_violation(&cand) > opts.feas_tol {
            return None;
        }
        if (0..active.len()).any(|r| mult[r] < -1e-9) {
            return None;
        }
        if (&cand - p).norm() > (x - p).norm() + 1e-9 {
            return None;
        }
        Some(cand)
    }
}

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(f64::INFINITY, f64::min)
}

enum KktSystem {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Full(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, usize),
}

impl KktSystem {
    fn new(h: &DMatrix<f64>, e: &DMatrix<f64>) -> Result<Self, NumericsError> {
        let n = h.nrows();
        let q = e.nrows();
        if q == 0 {
            if let Some(ch) = nalgebra::Cholesky::new(h.clone()) {
                return Ok(KktSystem::Cholesky(ch));
            }
        }
        let mut k = DMatrix::zeros(n + q, n + q);
        k.view_mut((0, 0), (n, n)).copy_from(h);
        k.view_mut((n, 0), (q, n)).copy_from(e);
        k.view_mut((0, n), (n, q)).copy_from(&e.transpose());
        Ok(KktSystem::Full(k.lu(), n))
    }

    fn solve(
        &self,
        rx: &DVector<f64>,
        re: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>), NumericsError> {
        match self {
            KktSystem::Cholesky(ch) => Ok((ch.solve(rx), DVector::zeros(0))),
            KktSystem::Full(lu, n) => {
                let rhs = DVector::from_iterator(n + re.len(), rx.iter().chain(re.iter()).copied());
                let sol = lu.solve(&rhs).ok_or(NumericsError::SingularMatrix)?;
                Ok((
                    sol.rows(0, *n).into_owned(),
                    sol.rows(*n, re.len()).into_owned(),
                ))
            }
        }
    }
}

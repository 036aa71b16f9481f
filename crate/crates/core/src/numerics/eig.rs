use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use super::NumericsError;
use crate::types::{CMatrix, CVector};

const PD_RATIO: f64 = 1e-12;

/// Leading eigenpair of the Hermitian-definite pencil `(a, b)`.
///
/// The returned vector maximizes `zᴴ a z / zᴴ b z`, has unit norm, and has its
/// first significant entry rotated onto the positive real axis.
pub fn leading_gen_eigpair(a: &CMatrix, b: &CMatrix) -> Result<(f64, CVector), NumericsError> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(NumericsError::Dimension(format!(
            "pencil shapes {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if n == 0 {
        return Err(NumericsError::Dimension("empty pencil".into()));
    }
    let chol = Cholesky::new(hermitian_part(b)).ok_or(NumericsError::SingularMatrix)?;
    let l = chol.l();
    let pivots: Vec<f64> = (0..n).map(|k| l[(k, k)].re.powi(2)).collect();
    let max_pivot = pivots.iter().cloned().fold(0.0, f64::max);
    let min_pivot = pivots.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max_pivot > 0.0) || min_pivot < PD_RATIO * max_pivot {
        return Err(NumericsError::SingularMatrix);
    }

    // Reduce to a standard Hermitian problem: L⁻¹ A L⁻ᴴ.
    let x = l
        .solve_lower_triangular(&hermitian_part(a))
        .ok_or(NumericsError::SingularMatrix)?;
    let reduced = l
        .solve_lower_triangular(&x.adjoint())
        .ok_or(NumericsError::SingularMatrix)?;
    let eig = SymmetricEigen::new(hermitian_part(&reduced));
    let (best, value) =
        eig.eigenvalues
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc },
            );
    let w = eig.eigenvectors.column(best).into_owned();
    let z = l
        .adjoint()
        .solve_upper_triangular(&w)
        .ok_or(NumericsError::SingularMatrix)?;
    let norm = z.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(NumericsError::SingularMatrix);
    }
    Ok((value, canonical_phase(z.unscale(norm))))
}

/// `zᴴ a z / zᴴ b z`.
pub fn rayleigh_quotient(a: &CMatrix, b: &CMatrix, z: &CVector) -> f64 {
    quad_form(a, z) / quad_form(b, z)
}

/// `Re(zᴴ m z)`.
pub fn quad_form(m: &CMatrix, z: &CVector) -> f64 {
    z.dotc(&(m * z)).re
}

/// Rotates `v` so that its first entry of non-negligible magnitude is real
/// and positive.
pub fn canonical_phase(mut v: CVector) -> CVector {
    let max = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return v;
    }
    if let Some(c) = v.iter().find(|c| c.norm() > 1e-9 * max).copied() {
        let rot = c.conj() / c.norm();
        v.iter_mut().for_each(|e| *e *= rot);
    }
    v
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Principal square root of a real symmetric positive semidefinite matrix.
pub fn psd_sqrt_real(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new((m + m.transpose()).scale(0.5));
    let roots = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()),
    );
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

//! Small dense linear-algebra helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}

/// Raise every eigenvalue of symmetric `a` to at least `rel · λ_max`.
/// Returns the conditioned matrix and whether any eigenvalue moved.
pub fn floor_eigenvalues(a: &DMatrix<f64>, rel: f64) -> Result<(DMatrix<f64>, bool)> {
    let eig = a.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.max();
    if !(lmax > 0.0) || !lmax.is_finite() {
        return Err(Error::Numeric(format!(
            "matrix has no positive eigenvalue (largest {lmax:e})"
        )));
    }
    let floor = rel * lmax;
    let mut moved = false;
    let vals = eig.eigenvalues.map(|l| {
        if l < floor {
            moved = true;
            floor
        } else {
            l
        }
    });
    if !moved {
        return Ok((a.clone(), false));
    }
    let v = &eig.eigenvectors;
    let mut out = v * DMatrix::from_diagonal(&vals) * v.transpose();
    symmetrize(&mut out);
    Ok((out, true))
}

/// Solve `a x = b` for symmetric positive definite `a` via Cholesky, falling
/// back to an eigenvalue-floored pseudo-solve (with a warning) if the
/// factorization fails.
pub fn spd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    log::warn!("Cholesky factorization failed; using eigenvalue-floored solve");
    let eig = a.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.max();
    if !(lmax > 0.0) {
        return Err(Error::Singular("matrix is not positive definite".into()));
    }
    let floor = 1e-8 * lmax;
    let inv = eig.eigenvalues.map(|l| 1.0 / l.max(floor));
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&inv) * (v.transpose() * b))
}

pub fn spd_solve_vec(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let m = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
    Ok(DVector::from_column_slice(spd_solve(a, &m)?.as_slice()))
}

/// Reciprocal condition estimate `λ_min / λ_max` of a symmetric matrix.
pub fn sym_rcond(a: &DMatrix<f64>) -> f64 {
    let eig = a.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    if lmax == 0.0 {
        return 0.0;
    }
    eig.eigenvalues.min() / lmax
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spd_solve_matches_direct() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let x = spd_solve(&a, &b).unwrap();
        let r = &a * &x - &b;
        assert!(r.amax() < 1e-14);
    }

    #[test]
    fn floor_moves_only_small_eigenvalues() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let (f, moved) = floor_eigenvalues(&a, 1e-8).unwrap();
        assert!(moved);
        assert!((f[(1, 1)] - 1e-8).abs() < 1e-15);
        let pd = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        assert_eq!(floor_eigenvalues(&pd, 1e-8).unwrap(), (pd, false));
    }

    #[test]
    fn fallback_handles_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let x = spd_solve(&a, &b).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rcond_and_norms() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        assert!((sym_rcond(&a) - 0.25).abs() < 1e-14);
        assert_eq!(sup_norm(&[1.0, -3.0, 2.0]), 3.0);
    }
}

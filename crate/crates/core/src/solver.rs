//! Conjugate gradients for symmetric positive semi-definite systems.
//!
//! Started from the zero vector, every iterate stays in the Krylov space of
//! the right-hand side, which lies in the range of the matrix for a
//! consistent system. The limit is therefore the minimal-norm solution even
//! when the matrix is singular.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SparseMatrix;
use crate::linalg::{axpy, dot, matvec, matvec_into, norm};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgOptions {
    /// Stop when `||b - A x|| <= tol * ||b||`.
    pub tol: f64,
    /// Iteration cap as a multiple of the system size.
    pub max_iter_factor: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            tol: 1e-10,
            max_iter_factor: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CgReport {
    pub iterations: usize,
    /// True residual norm of the returned iterate.
    pub residual: f64,
    pub rhs_norm: f64,
}

impl CgReport {
    pub fn relative_residual(&self) -> f64 {
        if self.rhs_norm == 0.0 {
            0.0
        } else {
            self.residual / self.rhs_norm
        }
    }
}

pub fn conjugate_gradient(a: &SparseMatrix, b: &[f64], opts: &CgOptions) -> Result<(Vec<f64>, CgReport)> {
    conjugate_gradient_with_floor(a, b, opts, 0.0)
}

/// Like [`conjugate_gradient`] but stops once `||b - A x|| <= max(tol * ||b||, floor)`.
/// Use the floor when `b` may be pure cancellation error, where a relative
/// target is out of reach.
pub fn conjugate_gradient_with_floor(
    a: &SparseMatrix,
    b: &[f64],
    opts: &CgOptions,
    floor: f64,
) -> Result<(Vec<f64>, CgReport)> {
    let n = b.len();
    assert_eq!(a.rows(), n);
    assert_eq!(a.cols(), n);
    let rhs_norm = norm(b);
    if !rhs_norm.is_finite() {
        return Err(Error::InvalidInput("right-hand side has non-finite entries".into()));
    }
    let mut x = vec![0.0; n];
    if rhs_norm == 0.0 {
        return Ok((x, CgReport::default()));
    }
    let target = (opts.tol * rhs_norm).max(floor);
    let max_iter = opts.max_iter_factor.saturating_mul(n).max(1);

    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let mut iterations = 0;
    while iterations < max_iter {
        if rr.sqrt() <= target {
            break;
        }
        matvec_into(a, &p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            // p lies in the kernel; only happens once the residual is at round-off level
            break;
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
        iterations += 1;
    }

    let ax = matvec(a, &x);
    let residual = norm(&b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect::<Vec<_>>());
    let report = CgReport {
        iterations,
        residual,
        rhs_norm,
    };
    // the recurrence residual can drift below the true one; allow a small margin
    if residual.is_nan() || residual > 10.0 * target {
        return Err(Error::SolverDidNotConverge {
            iterations,
            residual,
            rhs_norm,
        });
    }
    Ok((x, report))
}

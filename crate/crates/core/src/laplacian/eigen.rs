//! Lowest eigenpairs of sparse symmetric positive semi-definite matrices.
//!
//! Small operators are diagonalized densely. Larger ones use block inverse
//! (subspace) iteration on `L + sigma I` with a sparse `LDL^T` factorization,
//! followed by Rayleigh-Ritz on `L`. With `sigma` a tiny fraction of
//! `lambda_max`, kernel vectors are amplified by `1/sigma` per sweep and
//! converge within a few iterations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sprs::{FillInReduction, SymmetryCheck};
use sprs_ldl::Ldl;

use super::{LaplacianOperator, Variant};
use crate::error::{Error, Result};
use crate::grid::{diagonal, SparseMatrix};
use crate::linalg::{matvec, matvec_into, norm, to_dense};
use crate::manifold::BoundaryCondition;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    /// Eigenvalues below `threshold_factor * lambda_max` count as zero.
    pub threshold_factor: f64,
    /// Power iterations used to estimate `lambda_max`.
    pub power_iterations: usize,
    /// Operators of at most this size are diagonalized densely.
    pub dense_cutoff: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Shift `sigma = shift_factor * lambda_max` used for the factorization.
    pub shift_factor: f64,
    /// Residual target `||L x - theta x|| <= residual_factor * lambda_max` for reported spectra.
    pub residual_factor: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            threshold_factor: 1e-8,
            power_iterations: 100,
            dense_cutoff: 200,
            seed: 0x4d54_444c,
            max_iterations: 1000,
            shift_factor: 1e-6,
            residual_factor: 1e-9,
        }
    }
}

/// Orthonormal basis of the numerical kernel of a Laplacian.
#[derive(Clone, Debug)]
pub struct HarmonicBasis {
    pub degree: usize,
    pub condition: BoundaryCondition,
    pub variant: Variant,
    /// Absolute eigenvalue threshold used.
    pub threshold: f64,
    pub lambda_max: f64,
    /// Eigenvalues of the basis vectors, ascending.
    pub eigenvalues: Vec<f64>,
    /// Basis vectors as columns.
    pub vectors: DMatrix<f64>,
}

impl HarmonicBasis {
    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i).iter().copied().collect()
    }
}

/// Power-iteration estimate of the largest eigenvalue.
pub fn largest_eigenvalue(a: &SparseMatrix, iterations: usize, seed: u64) -> f64 {
    let n = a.rows();
    if n == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut ax = vec![0.0; n];
    let mut estimate = 0.0;
    for _ in 0..iterations.max(1) {
        matvec_into(a, &x, &mut ax);
        let nax = norm(&ax);
        if nax == 0.0 {
            return 0.0;
        }
        estimate = crate::linalg::dot(&x, &ax);
        for (xi, ai) in x.iter_mut().zip(&ax) {
            *xi = ai / nax;
        }
    }
    // Rayleigh quotient of the final iterate
    matvec_into(a, &x, &mut ax);
    estimate.max(crate::linalg::dot(&x, &ax))
}

/// All eigenpairs with eigenvalue below `threshold_factor * lambda_max`.
///
/// `num_requested` is the expected kernel dimension and only sizes the
/// initial block of the iterative path.
pub fn harmonic_space(op: &LaplacianOperator, num_requested: usize, opts: &EigenOptions) -> Result<HarmonicBasis> {
    let n = op.size();
    let lambda_max = largest_eigenvalue(&op.matrix, opts.power_iterations, opts.seed);
    let threshold = opts.threshold_factor * lambda_max;
    let make = |eigenvalues: Vec<f64>, vectors: DMatrix<f64>| HarmonicBasis {
        degree: op.degree,
        condition: op.condition,
        variant: op.variant,
        threshold,
        lambda_max,
        eigenvalues,
        vectors,
    };
    if n == 0 {
        return Ok(make(Vec::new(), DMatrix::zeros(0, 0)));
    }
    if lambda_max == 0.0 {
        // zero operator: everything is harmonic
        return Ok(make(vec![0.0; n], DMatrix::identity(n, n)));
    }
    let is_zero = |lambda: f64| lambda < threshold;
    if n <= opts.dense_cutoff.max(1) {
        let (vals, vecs) = dense_eigen(&op.matrix);
        let c = vals.iter().take_while(|&&l| is_zero(l)).count();
        return Ok(make(vals[..c].to_vec(), vecs.columns(0, c).into_owned()));
    }

    let solver = ShiftInvert::new(&op.matrix, opts.shift_factor * lambda_max)?;
    let mut block = (num_requested + 4).max(8).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = random_block(n, block, &mut rng);
    let mut iterations = 0;
    let mut worst = f64::INFINITY;
    while iterations < opts.max_iterations {
        iterations += 1;
        let ritz = solver.sweep(&op.matrix, &x)?;
        let c = ritz.values.iter().take_while(|&&l| is_zero(l)).count();
        if c == block {
            if block == n {
                return Ok(make(ritz.values, ritz.vectors));
            }
            let grown = (2 * block).min(n);
            let extra = random_block(n, grown - block, &mut rng);
            x = concat_columns(&ritz.vectors, &extra);
            block = grown;
            continue;
        }
        x = ritz.vectors.clone();
        let kernel_ok = ritz.residuals[..c].iter().all(|&r| r <= threshold);
        let guard_gap = ritz.values[c] - threshold;
        let guard_ok = ritz.residuals[c] <= 0.5 * guard_gap;
        worst = ritz.residuals[..=c].iter().copied().fold(0.0, f64::max);
        if iterations >= 2 && kernel_ok && guard_ok {
            return Ok(make(ritz.values[..c].to_vec(), ritz.vectors.columns(0, c).into_owned()));
        }
    }
    Err(Error::EigenDidNotConverge {
        iterations,
        block,
        residual: worst,
    })
}

/// The `count` smallest eigenvalues, ascending.
pub fn spectrum(op: &LaplacianOperator, count: usize, opts: &EigenOptions) -> Result<Vec<f64>> {
    let n = op.size();
    if count > n {
        return Err(Error::Parameter(format!(
            "requested {count} eigenvalues of a {n}x{n} operator"
        )));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    if n <= opts.dense_cutoff.max(1) {
        let (vals, _) = dense_eigen(&op.matrix);
        return Ok(vals[..count].to_vec());
    }
    let lambda_max = largest_eigenvalue(&op.matrix, opts.power_iterations, opts.seed);
    if lambda_max == 0.0 {
        return Ok(vec![0.0; count]);
    }
    let tol = opts.residual_factor * lambda_max;
    let solver = ShiftInvert::new(&op.matrix, opts.shift_factor * lambda_max)?;
    let block = (count + count / 2 + 5).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = random_block(n, block, &mut rng);
    let mut worst = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        let ritz = solver.sweep(&op.matrix, &x)?;
        worst = ritz.residuals[..count].iter().copied().fold(0.0, f64::max);
        if it >= 2 && worst <= tol {
            return Ok(ritz.values[..count].to_vec());
        }
        x = ritz.vectors;
    }
    Err(Error::EigenDidNotConverge {
        iterations: opts.max_iterations,
        block,
        residual: worst,
    })
}

/// Dense symmetric eigendecomposition, eigenvalues ascending.
fn dense_eigen(a: &SparseMatrix) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(to_dense(a));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(a.rows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

fn random_block(n: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, cols, |_, _| rng.random::<f64>() - 0.5)
}

fn concat_columns(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

struct Ritz {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
    residuals: Vec<f64>,
}

struct ShiftInvert {
    factor: sprs_ldl::LdlNumeric<f64, usize>,
}

impl ShiftInvert {
    fn new(a: &SparseMatrix, sigma: f64) -> Result<Self> {
        let shifted = a + &diagonal(&vec![sigma; a.rows()]);
        let factor = Ldl::new()
            .check_symmetry(SymmetryCheck::DontCheckSymmetry)
            .fill_in_reduction(FillInReduction::ReverseCuthillMcKee)
            .numeric(shifted.view())
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(ShiftInvert { factor })
    }

    /// One inverse-iteration sweep followed by Rayleigh-Ritz on `a`.
    fn sweep(&self, a: &SparseMatrix, x: &DMatrix<f64>) -> Result<Ritz> {
        let (n, b) = x.shape();
        let mut y = DMatrix::zeros(n, b);
        for j in 0..b {
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            let mut sol: Vec<f64> = self.factor.solve(&col);
            let s = norm(&sol);
            if s > 0.0 && s.is_finite() {
                sol.iter_mut().for_each(|v| *v /= s);
            }
            y.set_column(j, &DVector::from_vec(sol));
        }
        let q = y.qr().q();
        let mut aq = DMatrix::zeros(n, q.ncols());
        for j in 0..q.ncols() {
            let col: Vec<f64> = q.column(j).iter().copied().collect();
            aq.set_column(j, &DVector::from_vec(matvec(a, &col)));
        }
        let h = q.transpose() * &aq;
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let v = DMatrix::from_fn(order.len(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = &q * &v;
        let avec = &aq * &v;
        let residuals = (0..values.len())
            .map(|j| (avec.column(j) - vectors.column(j) * values[j]).norm())
            .collect();
        Ok(Ritz {
            values,
            vectors,
            residuals,
        })
    }
}

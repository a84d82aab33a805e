//! Hodge and BIG Laplacians on a boundary-condition support.
//!
//! ```text
//! hodge: L_k = D_k^T S_{k+1} D_k + S_k D_{k-1} S_{k-1}^{-1} D_{k-1}^T S_k
//! big:   L_k = D_k^T D_k + D_{k-1} D_{k-1}^T
//! ```
//!
//! with all operators restricted to the support. The kernel of the
//! tangential Laplacian at degree `k` has dimension `beta_k`, and the kernel
//! of the normal Laplacian at degree `k` has dimension `beta_{m-k}`.

mod eigen;

pub use eigen::{harmonic_space, largest_eigenvalue, spectrum, EigenOptions, HarmonicBasis};

use serde::{Deserialize, Serialize};
use sprs::{FillInReduction, SymmetryCheck};
use sprs_ldl::Ldl;

use crate::error::{Error, Result};
use crate::grid::{diagonal, GridComplex, SparseMatrix};
use crate::linalg::{asymmetry, scale_cols, scale_rows, transpose};
use crate::manifold::{
    build_support, restricted_derivative, restricted_star_diagonal, BoundaryCondition, SupportSet, VertexMask,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Hodge star replaced by the identity.
    #[default]
    Big,
    Hodge,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "big" => Ok(Variant::Big),
            "hodge" => Ok(Variant::Hodge),
            other => Err(Error::Parameter(format!("unknown laplacian variant `{other}`"))),
        }
    }
}

/// A symmetric positive semi-definite Laplacian on one support and degree.
#[derive(Clone, Debug)]
pub struct LaplacianOperator {
    pub degree: usize,
    pub condition: BoundaryCondition,
    pub variant: Variant,
    pub matrix: SparseMatrix,
}

impl LaplacianOperator {
    /// Wraps an already assembled matrix. The matrix must be square and exactly symmetric.
    pub fn new(degree: usize, condition: BoundaryCondition, variant: Variant, matrix: SparseMatrix) -> Result<Self> {
        if matrix.rows() != matrix.cols() {
            return Err(Error::InvalidInput(format!(
                "laplacian must be square, got {:?}",
                matrix.shape()
            )));
        }
        if matrix.rows() > 0 && asymmetry(&matrix) != 0.0 {
            return Err(Error::InvalidInput("laplacian must be symmetric".into()));
        }
        Ok(LaplacianOperator {
            degree,
            condition,
            variant,
            matrix: matrix.to_csr(),
        })
    }

    pub fn size(&self) -> usize {
        self.matrix.rows()
    }

    /// Checks `lambda_min >= -rel_tol * lambda_max` through the inertia of
    /// `L + rel_tol * lambda_max * I`: an `LDL^T` factorization of that shifted
    /// matrix has a negative pivot exactly when `L` has an eigenvalue below
    /// the negative shift.
    pub fn is_psd(&self, rel_tol: f64, opts: &EigenOptions) -> Result<bool> {
        let n = self.size();
        if n == 0 {
            return Ok(true);
        }
        let lambda_max = largest_eigenvalue(&self.matrix, opts.power_iterations, opts.seed);
        if lambda_max == 0.0 {
            return Ok(self.matrix.data().iter().all(|&v| v == 0.0));
        }
        if n == 1 {
            // the fill-reducing ordering needs at least two unknowns
            return Ok(lambda_max >= 0.0);
        }
        let shift = rel_tol * lambda_max;
        let shifted = &self.matrix + &diagonal(&vec![shift; n]);
        let ldl = Ldl::new()
            .check_symmetry(SymmetryCheck::DontCheckSymmetry)
            .fill_in_reduction(FillInReduction::ReverseCuthillMcKee)
            .numeric(shifted.view());
        match ldl {
            Ok(f) => Ok(f.d().iter().all(|&p| p > 0.0)),
            // an exactly zero pivot means a zero eigenvalue of the shifted matrix
            Err(_) => Ok(false),
        }
    }
}

/// Assembles the degree-`k` Laplacian on `support`.
pub fn assemble(grid: &GridComplex, support: &SupportSet, k: usize, variant: Variant) -> Result<LaplacianOperator> {
    let m = grid.dim();
    grid.check_degree(k)?;
    if support.max_degree() != m {
        return Err(Error::MissingSupport(support.max_degree() + 1));
    }
    for d in 0..=m {
        if support.mask(d).len() != grid.cell_count(d) {
            return Err(Error::MissingSupport(d));
        }
    }
    let n = support.len(k);
    let mut matrix = SparseMatrix::zero((n, n));
    if n == 0 {
        return LaplacianOperator::new(k, support.condition(), variant, matrix);
    }

    if k < m {
        let d = restricted_derivative(grid, support, k)?;
        let up = match variant {
            Variant::Big => &transpose(&d) * &d,
            Variant::Hodge => {
                let star_up = restricted_star_diagonal(grid, support, k + 1)?;
                &transpose(&d) * &scale_rows(&d, &star_up)
            }
        };
        matrix = &matrix + &up;
    }
    if k > 0 {
        let d = restricted_derivative(grid, support, k - 1)?;
        let down = match variant {
            Variant::Big => &d * &transpose(&d),
            Variant::Hodge => {
                let star = restricted_star_diagonal(grid, support, k)?;
                let inv_lower: Vec<f64> = restricted_star_diagonal(grid, support, k - 1)?
                    .iter()
                    .map(|s| 1.0 / s)
                    .collect();
                let b = scale_rows(&d, &star);
                &scale_cols(&b, &inv_lower) * &transpose(&b)
            }
        };
        matrix = &matrix + &down;
    }
    LaplacianOperator::new(k, support.condition(), variant, matrix)
}

/// Betti number `beta_k` of the masked domain read off the kernel of the
/// Laplacian under `condition`: degree `k` for tangential, `m - k` for normal.
pub fn betti(
    grid: &GridComplex,
    mask: &VertexMask,
    k: usize,
    condition: BoundaryCondition,
    variant: Variant,
    opts: &EigenOptions,
) -> Result<usize> {
    grid.check_degree(k)?;
    let degree = match condition {
        BoundaryCondition::Tangential => k,
        BoundaryCondition::Normal => grid.dim() - k,
    };
    let support = build_support(grid, mask, condition)?;
    let op = assemble(grid, &support, degree, variant)?;
    Ok(harmonic_space(&op, 1, opts)?.dim())
}

/// All Betti numbers `beta_0..beta_{m-1}` under one condition.
pub fn betti_numbers(
    grid: &GridComplex,
    mask: &VertexMask,
    condition: BoundaryCondition,
    variant: Variant,
    opts: &EigenOptions,
) -> Result<Vec<usize>> {
    let support = build_support(grid, mask, condition)?;
    (0..grid.dim())
        .map(|k| {
            let degree = match condition {
                BoundaryCondition::Tangential => k,
                BoundaryCondition::Normal => grid.dim() - k,
            };
            let op = assemble(grid, &support, degree, variant)?;
            Ok(harmonic_space(&op, 1, opts)?.dim())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::linalg::to_dense;
    use crate::manifold::segment;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn degree_zero_is_graph_laplacian() {
        let g = build_grid(&[4, 4], 1.0).unwrap();
        let s = build_support(&g, &VertexMask::all_inside(&g), BoundaryCondition::Normal).unwrap();
        let l = assemble(&g, &s, 0, Variant::Big).unwrap();
        let dense = to_dense(&l.matrix);
        // degree minus adjacency of the 4x4 grid graph
        for i in 0..16usize {
            let (r, c) = (i / 4, i % 4);
            let mut deg = 0.0;
            for j in 0..16 {
                let (r2, c2) = (j / 4, j % 4);
                let adjacent = (r.abs_diff(r2) + c.abs_diff(c2)) == 1;
                if adjacent {
                    deg += 1.0;
                    assert_eq!(dense[(i, j)], -1.0);
                } else if i != j {
                    assert_eq!(dense[(i, j)], 0.0);
                }
            }
            assert_eq!(dense[(i, i)], deg);
        }
    }

    #[test]
    fn unit_spacing_hodge_equals_big() {
        let g = build_grid(&[5, 4, 4], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let vals: Vec<f64> = (0..g.vertex_count()).map(|_| rng.random()).collect();
        let mask = segment(&g, &vals, 0.4).unwrap();
        for bc in BoundaryCondition::ALL {
            let s = build_support(&g, &mask, bc).unwrap();
            for k in 0..=3 {
                let a = assemble(&g, &s, k, Variant::Big).unwrap();
                let b = assemble(&g, &s, k, Variant::Hodge).unwrap();
                assert_eq!(to_dense(&a.matrix), to_dense(&b.matrix));
            }
        }
    }

    #[test]
    fn empty_support_gives_empty_operator() {
        let g = build_grid(&[4, 4], 1.0).unwrap();
        let mask = segment(&g, &[0.0; 16], 1.0).unwrap();
        let s = build_support(&g, &mask, BoundaryCondition::Tangential).unwrap();
        let l = assemble(&g, &s, 1, Variant::Big).unwrap();
        assert_eq!(l.matrix.shape(), (0, 0));
        assert!(l.is_psd(1e-10, &EigenOptions::default()).unwrap());
    }

    #[test]
    fn symmetric_and_psd_with_spacing() {
        let g = build_grid(&[5, 6], 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let vals: Vec<f64> = (0..g.vertex_count()).map(|_| rng.random()).collect();
        let mask = segment(&g, &vals, 0.3).unwrap();
        for bc in BoundaryCondition::ALL {
            let s = build_support(&g, &mask, bc).unwrap();
            for k in 0..=2 {
                for variant in [Variant::Big, Variant::Hodge] {
                    let l = assemble(&g, &s, k, variant).unwrap();
                    assert_eq!(asymmetry(&l.matrix), 0.0);
                    assert!(l.is_psd(1e-10, &EigenOptions::default()).unwrap());
                    let eig = to_dense(&l.matrix).symmetric_eigenvalues();
                    let lmax = eig.max();
                    assert!(eig.min() >= -1e-10 * lmax);
                }
            }
        }
    }

    #[test]
    fn psd_check_detects_negative_eigenvalue() {
        let m = diagonal(&[1.0, -0.5, 2.0]);
        let op = LaplacianOperator::new(0, BoundaryCondition::Normal, Variant::Big, m).unwrap();
        assert!(!op.is_psd(1e-10, &EigenOptions::default()).unwrap());
    }

    #[test]
    fn rejects_out_of_range_degree() {
        let g = build_grid(&[3, 3], 1.0).unwrap();
        let s = build_support(&g, &VertexMask::all_inside(&g), BoundaryCondition::Normal).unwrap();
        assert!(matches!(assemble(&g, &s, 3, Variant::Big), Err(Error::Degree { .. })));
        let g3 = build_grid(&[3, 3, 3], 1.0).unwrap();
        assert!(matches!(
            assemble(&g3, &s, 1, Variant::Big),
            Err(Error::MissingSupport(_))
        ));
    }

    #[test]
    fn full_rectangle_has_one_component() {
        let g = build_grid(&[6, 7], 1.0).unwrap();
        let mask = VertexMask::all_inside(&g);
        let b = betti(
            &g,
            &mask,
            0,
            BoundaryCondition::Tangential,
            Variant::Big,
            &EigenOptions::default(),
        )
        .unwrap();
        assert_eq!(b, 1);
    }

    fn disk_values(dims: &[usize], centers: &[([f64; 2], f64)]) -> Vec<f64> {
        let mut v = Vec::new();
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                let best = centers
                    .iter()
                    .map(|(c, r)| r - ((i as f64 - c[0]).powi(2) + (j as f64 - c[1]).powi(2)).sqrt())
                    .fold(f64::NEG_INFINITY, f64::max);
                v.push(best);
            }
        }
        v
    }

    #[test]
    fn two_blobs_two_components() {
        let dims = [16, 16];
        let g = build_grid(&dims, 1.0).unwrap();
        let vals = disk_values(&dims, &[([4.0, 4.0], 2.6), ([10.5, 10.5], 3.1)]);
        let mask = segment(&g, &vals, 0.0).unwrap();
        let opts = EigenOptions::default();
        for variant in [Variant::Big, Variant::Hodge] {
            for bc in BoundaryCondition::ALL {
                assert_eq!(betti(&g, &mask, 0, bc, variant, &opts).unwrap(), 2, "{bc:?}");
                assert_eq!(betti(&g, &mask, 1, bc, variant, &opts).unwrap(), 0, "{bc:?}");
            }
        }
    }
}

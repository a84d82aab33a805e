#![allow(dead_code)]

use mtdl_core::linalg::{matvec, to_dense};
use mtdl_core::manifold::restricted_derivative;
use mtdl_core::{assemble, GridComplex, Supports, Variant, VertexMask};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
}

/// Mask from a uniform random image thresholded at `1 - fill`.
pub fn random_mask(grid: &GridComplex, rng: &mut ChaCha8Rng, fill: f64) -> VertexMask {
    let values: Vec<f64> = (0..grid.vertex_count()).map(|_| rng.random::<f64>()).collect();
    mtdl_core::segment(grid, &values, 1.0 - fill).unwrap()
}

/// All grids with extents in `lo..=hi` along each of `m` axes.
pub fn all_dims(m: usize, lo: usize, hi: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..m {
        out = out
            .into_iter()
            .flat_map(|p| {
                (lo..=hi).map(move |d| {
                    let mut q = p.clone();
                    q.push(d);
                    q
                })
            })
            .collect();
    }
    out
}

pub fn rel_diff(a: &[f64], b: &[f64], scale: f64) -> f64 {
    let d = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    if scale == 0.0 {
        d
    } else {
        d / scale
    }
}

/// Dense pseudoinverse solution of the two potential systems of a BIG
/// decomposition of a 1-cochain; returns the three components.
pub fn dense_decomposition(grid: &GridComplex, sup: &Supports, v: &[f64]) -> [Vec<f64>; 3] {
    let pinv_solve = |op: &mtdl_core::LaplacianOperator, rhs: Vec<f64>| -> Vec<f64> {
        if rhs.is_empty() {
            return rhs;
        }
        // nalgebra's SVD loses digits on some of these operators; the
        // symmetric eigensolver does not
        let eig = to_dense(&op.matrix).symmetric_eigen();
        let cut = 1e-9 * eig.eigenvalues.amax().max(1.0);
        let inv = eig.eigenvalues.map(|l| if l > cut { 1.0 / l } else { 0.0 });
        let p = &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose();
        (p * DVector::from_vec(rhs)).iter().copied().collect()
    };
    let n = &sup.normal;
    let dn = restricted_derivative(grid, n, 0).unwrap();
    let ln = assemble(grid, n, 0, Variant::Big).unwrap();
    let rhs_n = to_dense(&dn).transpose() * DVector::from_vec(n.restrict(1, v));
    let wn = pinv_solve(&ln, rhs_n.iter().copied().collect());
    let omega1 = n.extend(1, &matvec(&dn, &wn));

    let t = &sup.tangential;
    let dt = restricted_derivative(grid, t, 1).unwrap();
    let lt = assemble(grid, t, 2, Variant::Big).unwrap();
    let rhs_t = matvec(&dt, &t.restrict(1, v));
    let wt = pinv_solve(&lt, rhs_t);
    let local = to_dense(&dt).transpose() * DVector::from_vec(wt);
    let omega2 = t.extend(1, local.as_slice());

    let omega3 = v
        .iter()
        .zip(&omega1)
        .zip(&omega2)
        .map(|((x, a), b)| x - a - b)
        .collect();
    [omega1, omega2, omega3]
}

//! Small dense-vector and CSR helpers shared by the operators and solvers.

use sprs::CsMat;

use crate::grid::SparseMatrix;

/// `y = A x` for a CSR matrix, accumulated in column order within each row.
pub fn matvec(a: &SparseMatrix, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.rows()];
    matvec_into(a, x, &mut y);
    y
}

pub fn matvec_into(a: &SparseMatrix, x: &[f64], y: &mut [f64]) {
    assert_eq!(a.cols(), x.len(), "matvec dimension mismatch");
    assert_eq!(a.rows(), y.len(), "matvec output mismatch");
    if a.is_csr() {
        let indptr = a.indptr();
        let indptr = indptr.raw_storage();
        let indices = a.indices();
        let data = a.data();
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in indptr[r]..indptr[r + 1] {
                acc += data[p] * x[indices[p]];
            }
            *out = acc;
        }
    } else {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (v, (r, c)) in a.iter() {
            y[r] += v * x[c];
        }
    }
}

/// `y = A^T x` without materializing the transpose.
pub fn matvec_transpose(a: &SparseMatrix, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.rows(), x.len(), "transpose matvec dimension mismatch");
    let mut y = vec![0.0; a.cols()];
    for (v, (r, c)) in a.iter() {
        y[c] += v * x[r];
    }
    y
}

pub fn transpose(a: &SparseMatrix) -> SparseMatrix {
    a.transpose_view().to_csr()
}

pub fn scale_rows(a: &SparseMatrix, d: &[f64]) -> SparseMatrix {
    let a = a.to_csr();
    assert_eq!(a.rows(), d.len());
    let (rows, cols) = a.shape();
    let (indptr, indices, mut data) = a.into_raw_storage();
    for r in 0..rows {
        for v in &mut data[indptr[r]..indptr[r + 1]] {
            *v *= d[r];
        }
    }
    CsMat::new((rows, cols), indptr, indices, data)
}

pub fn scale_cols(a: &SparseMatrix, d: &[f64]) -> SparseMatrix {
    let a = a.to_csr();
    assert_eq!(a.cols(), d.len());
    let shape = a.shape();
    let (indptr, indices, mut data) = a.into_raw_storage();
    for (v, &c) in data.iter_mut().zip(&indices) {
        *v *= d[c];
    }
    CsMat::new(shape, indptr, indices, data)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Largest absolute entry of `A - A^T`; zero for an exactly symmetric matrix.
pub fn asymmetry(a: &SparseMatrix) -> f64 {
    let t = transpose(a);
    let diff = &a.to_csr() - &t;
    diff.data().iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn to_dense(a: &SparseMatrix) -> nalgebra::DMatrix<f64> {
    let mut m = nalgebra::DMatrix::zeros(a.rows(), a.cols());
    for (v, (r, c)) in a.iter() {
        m[(r, c)] += *v;
    }
    m
}

/// Cosine of the angle between two vectors, zero if either vanishes.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

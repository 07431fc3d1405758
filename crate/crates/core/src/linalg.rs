//! Small dense linear-algebra helpers: the real-symmetric eigensolver behind
//! the exact propagator, matrix-vector products mixing real matrices with
//! complex vectors, and Hermitian diagnostics for averaged density matrices.

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64;

/// Eigendecomposition of a real symmetric matrix, eigenvalues ascending and
/// eigenvectors orthonormal (stored as columns).
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Column `i` is the eigenvector of `values[i]`; row-major `n x n`.
    pub vectors: Array2<f64>,
}

/// Diagonalize a real symmetric matrix. Symmetry is the caller's contract.
pub fn eigh(matrix: &Array2<f64>) -> SymmetricEigen {
    let n = matrix.nrows();
    assert_eq!(n, matrix.ncols(), "eigh requires a square matrix");
    let m = DMatrix::from_fn(n, n, |r, c| matrix[[r, c]]);
    let decomp = m.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| decomp.eigenvalues[a].total_cmp(&decomp.eigenvalues[b]));

    let values: Vec<f64> = order.iter().map(|&i| decomp.eigenvalues[i]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (col, &i) in order.iter().enumerate() {
        for row in 0..n {
            vectors[[row, col]] = decomp.eigenvectors[(row, i)];
        }
    }
    SymmetricEigen { values, vectors }
}

/// `y = M x` for real `M` and complex `x`.
pub fn real_mat_cvec(m: &Array2<f64>, x: &[Complex64], y: &mut [Complex64]) {
    let n = m.nrows();
    debug_assert_eq!(x.len(), m.ncols());
    debug_assert_eq!(y.len(), n);
    let data = m.as_slice().expect("matrix must be contiguous row-major");
    for (i, yi) in y.iter_mut().enumerate() {
        let row = &data[i * m.ncols()..(i + 1) * m.ncols()];
        let mut re = 0.0;
        let mut im = 0.0;
        for (v, xv) in row.iter().zip(x) {
            re += v * xv.re;
            im += v * xv.im;
        }
        *yi = Complex64::new(re, im);
    }
}

/// `y = M^T x` for real `M` and complex `x`.
pub fn real_mat_t_cvec(m: &Array2<f64>, x: &[Complex64], y: &mut [Complex64]) {
    let n = m.ncols();
    debug_assert_eq!(x.len(), m.nrows());
    debug_assert_eq!(y.len(), n);
    let data = m.as_slice().expect("matrix must be contiguous row-major");
    for yi in y.iter_mut() {
        *yi = Complex64::new(0.0, 0.0);
    }
    for (j, xj) in x.iter().enumerate() {
        let row = &data[j * n..(j + 1) * n];
        for (yi, v) in y.iter_mut().zip(row) {
            yi.re += v * xj.re;
            yi.im += v * xj.im;
        }
    }
}

pub fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Trace of a complex matrix.
pub fn trace(rho: &Array2<Complex64>) -> Complex64 {
    (0..rho.nrows()).map(|i| rho[[i, i]]).sum()
}

/// Largest entry-wise deviation from Hermiticity, `max |rho - rho^dagger|`.
pub fn hermiticity_error(rho: &Array2<Complex64>) -> f64 {
    let n = rho.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((rho[[i, j]] - rho[[j, i]].conj()).norm());
        }
    }
    worst
}

/// Smallest eigenvalue of a Hermitian matrix, via the real-symmetric
/// embedding `[[A, -B], [B, A]]` of `H = A + iB` (its spectrum is that of
/// `H`, doubled).
pub fn hermitian_min_eigenvalue(rho: &Array2<Complex64>) -> f64 {
    let n = rho.nrows();
    let mut embed = Array2::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            let a = 0.5 * (rho[[i, j]].re + rho[[j, i]].re);
            let b = 0.5 * (rho[[i, j]].im - rho[[j, i]].im);
            embed[[i, j]] = a;
            embed[[n + i, n + j]] = a;
            embed[[i, n + j]] = -b;
            embed[[n + i, j]] = b;
        }
    }
    eigh(&embed).values[0]
}

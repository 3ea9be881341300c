//! Dense, banded and Krylov linear algebra for the symmetric eigenproblems
//! assembled by the spectral module.
//!
//! Everything here works on standard symmetric problems; the generalized
//! (mass-weighted) problem is reduced to standard form by the caller via a
//! diagonal congruence before these routines are invoked.

mod banded;
mod dense;
mod lanczos;
mod tridiag;

pub use banded::{BandCholesky, SymDiags};
pub use dense::{jacobi_eigen, row_rank, solve_spd, DenseTridiagonalization};
pub use lanczos::{lowest_eigenpairs, LanczosParams};
pub use tridiag::{ql_eigenvalues, tridiag_eigenvectors};

/// Euclidean norm.
pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Dot product.
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// y += alpha * x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

//! Dense linear-algebra kernels used by the decompositions.
//!
//! Everything here works on small to moderate matrices (the Krylov
//! dimension of a decomposition, or the number of seeds of a quotient
//! analysis) and favours determinism over raw speed.

mod eigen;
mod qr;
mod roots;
mod svd;
mod symeig;
mod vandermonde;

pub use eigen::{complex_eigen, ComplexEigen};
pub use qr::{least_squares_min_norm, LeastSquares};
pub use roots::polynomial_roots;
pub use svd::{thin_svd, Svd};
pub use symeig::{symmetric_eigen, SymmetricEigen};
pub use vandermonde::solve_vandermonde;

#[cfg(test)]
pub(crate) fn c64(re: f64, im: f64) -> num_complex::Complex64 {
    num_complex::Complex64::new(re, im)
}

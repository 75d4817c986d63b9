//! Dense real-matrix kernels: matrix exponential, Lyapunov and Riccati solvers,
//! the sampled-noise Gramian, and the small helpers the rest of the crate shares.
//!
//! Matrices are `nalgebra::DMatrix<f64>`. Norms are Frobenius unless stated.

mod expm;
mod gramian;
mod lyapunov;
mod riccati;

pub use expm::expm;
pub use gramian::vanloan_gramian;
pub use lyapunov::{solve_lyapunov_ct, solve_lyapunov_dt, solve_lyapunov_ct_schur};
pub use riccati::{kalman_gain, riccati_map, riccati_residual, solve_dare, solve_dare_with, DareOptions};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense real matrix used for every model quantity.
pub type RealMatrix = DMatrix<f64>;
/// Dense complex matrix (transfer functions and spectral densities).
pub type ComplexMatrix = DMatrix<Complex64>;

/// Relative tolerance under which negative eigenvalues of a nominally PSD
/// matrix are treated as rounding noise and clamped to zero.
pub const PSD_TOLERANCE: f64 = 1e-10;

pub(crate) fn ensure_square(m: &RealMatrix, name: &str) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "{name} must be square and non-empty, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn ensure_finite(m: &RealMatrix, name: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(name))
    }
}

/// `(X + X')/2`.
pub fn symmetrize(x: &RealMatrix) -> RealMatrix {
    (x + x.transpose()) * 0.5
}

/// Complex Schur form `(Q, T)` with `M = Q T Q*`. The QR iteration is retried with
/// progressively looser deflation thresholds, since the tightest one can stall on
/// matrices with repeated eigenvalues.
pub fn complex_schur(m: &ComplexMatrix) -> Option<(ComplexMatrix, ComplexMatrix)> {
    let max_iter = 1000 * m.nrows().max(10);
    [f64::EPSILON, 1e-15, 1e-14, 1e-12, 1e-10]
        .into_iter()
        .find_map(|eps| m.clone().try_schur(eps, max_iter))
        .map(|s| s.unpack())
}

/// Eigenvalues of a real square matrix (NaN entries if the Schur iteration fails).
pub fn eigenvalues(m: &RealMatrix) -> Vec<Complex64> {
    match complex_schur(&to_complex(m)) {
        Some((_, t)) => t.diagonal().iter().copied().collect(),
        None => vec![Complex64::new(f64::NAN, f64::NAN); m.nrows()],
    }
}

pub fn spectral_radius(m: &RealMatrix) -> f64 {
    eigenvalues(m)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, |acc: f64, x| if x.is_nan() { f64::NAN } else { acc.max(x) })
}

/// Numerical rank: singular values at or below `rel_tol * sigma_max` count as zero.
pub fn numerical_rank(m: &RealMatrix, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Column-stacking vectorization.
pub fn vec(m: &RealMatrix) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Lower-triangular column-wise stacking of a symmetric matrix.
pub fn vech(m: &RealMatrix) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in j..n {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Inverse of [`vech`]; fails when the length is not triangular.
pub fn unvech(v: &[f64]) -> Result<RealMatrix> {
    let mut n = 0;
    while n * (n + 1) / 2 < v.len() {
        n += 1;
    }
    if n * (n + 1) / 2 != v.len() || n == 0 {
        return Err(Error::Dimension(format!(
            "vech vector of length {} is not triangular",
            v.len()
        )));
    }
    let mut m = RealMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in j..n {
            m[(i, j)] = v[k];
            m[(j, i)] = v[k];
            k += 1;
        }
    }
    Ok(m)
}

pub fn is_positive_definite(m: &RealMatrix) -> bool {
    m.nrows() == m.ncols() && m.clone().cholesky().is_some()
}

/// Symmetrizes `x` and verifies it is PSD up to [`PSD_TOLERANCE`]; slightly
/// negative eigenvalues are clamped to zero.
pub fn psd_clamp(x: &RealMatrix, name: &'static str) -> Result<RealMatrix> {
    let sym = symmetrize(x);
    let eig = sym.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min >= 0.0 {
        return Ok(sym);
    }
    let scale = sym.norm();
    if min < -PSD_TOLERANCE * scale {
        return Err(Error::NotPsd(name));
    }
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    let v = &eig.eigenvectors;
    Ok(symmetrize(&(v * RealMatrix::from_diagonal(&clamped) * v.transpose())))
}

/// Checks a matrix is symmetric PSD (without modifying it).
pub fn ensure_psd(x: &RealMatrix, name: &'static str) -> Result<()> {
    ensure_square(x, name)?;
    let asym = (x - x.transpose()).norm();
    if asym > 1e-8 * (1.0 + x.norm()) {
        return Err(Error::NotPsd(name));
    }
    psd_clamp(x, name).map(|_| ())
}

pub(crate) fn to_complex(m: &RealMatrix) -> ComplexMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

use super::{ensure_finite, ensure_square, expm, psd_clamp, RealMatrix};
use crate::error::{Error, Result};

/// Largest `‖A‖₁ δ` handled by a single block exponential.
pub const GRAMIAN_STEP_NORM: f64 = 4.0;

/// `∫_0^h e^{Au} B Σ B' e^{A'u} du` from one block matrix exponential (Van Loan):
///
/// ```text
/// exp( [ -A   BΣB' ] h )  =  [ *   G12 ]      Gramian = G22' G12
///      [  0   A'   ]         [ 0   G22 ]
/// ```
///
/// Long intervals are split into `2^k` pieces of norm-scaled length at most
/// [`GRAMIAN_STEP_NORM`] and joined by `G(2δ) = G(δ) + e^{Aδ} G(δ) e^{A'δ}`, which keeps
/// `e^{-Ah}` from overflowing.
pub fn vanloan_gramian(a: &RealMatrix, b: &RealMatrix, sigma: &RealMatrix, h: f64) -> Result<RealMatrix> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("sampling interval h must be positive, got {h}")));
    }
    ensure_square(a, "A")?;
    ensure_square(sigma, "Sigma")?;
    ensure_finite(a, "A")?;
    ensure_finite(b, "B")?;
    ensure_finite(sigma, "Sigma")?;
    let n = a.nrows();
    if b.nrows() != n || b.ncols() != sigma.nrows() {
        return Err(Error::Dimension(format!(
            "B is {}x{}, expected {}x{}",
            b.nrows(),
            b.ncols(),
            n,
            sigma.nrows()
        )));
    }
    let w = b * sigma * b.transpose();
    let scale = a.column_iter().map(|c| c.lp_norm(1)).fold(0.0, f64::max) * h;
    let halvings = if scale > GRAMIAN_STEP_NORM { (scale / GRAMIAN_STEP_NORM).log2().ceil() as i32 } else { 0 };
    let h = h / 2f64.powi(halvings);
    let mut block = RealMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&(-a * h));
    block.view_mut((0, n), (n, n)).copy_from(&(w * h));
    block.view_mut((n, n), (n, n)).copy_from(&(a.transpose() * h));
    let e = expm(&block)?;
    let g12 = e.view((0, n), (n, n));
    let mut step = e.view((n, n), (n, n)).transpose();
    let mut g = &step * g12;
    for _ in 0..halvings {
        g = &g + &step * &g * step.transpose();
        step = &step * &step;
    }
    psd_clamp(&g, "noise Gramian")
}

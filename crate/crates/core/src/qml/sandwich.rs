use super::likelihood::{check_data, objective};
use super::score::{ensure_interior, fd_hessian, hessian_step, score_sequence};
use crate::error::{Error, Result};
use crate::family::SsmFamily;
use crate::linalg::{symmetrize, RealMatrix};

/// Negative eigenvalues of `Ξ̂` below `−NEGATIVE_EIGENVALUE_REPORT` are reported before clamping.
pub const NEGATIVE_EIGENVALUE_REPORT: f64 = 1e-8;

/// Sandwich estimate `Ξ̂ = L^{-1} Ĵ^{-1} Î Ĵ^{-1}` of the asymptotic covariance.
#[derive(Debug, Clone)]
pub struct SandwichCovariance {
    pub j_hat: RealMatrix,
    pub i_hat: RealMatrix,
    pub xi_hat: RealMatrix,
    pub ar_order: usize,
    pub stderr: Vec<f64>,
    /// Eigenvalues of the raw `Ξ̂` below `−1e-8`, set to zero in `xi_hat`.
    pub clamped_eigenvalues: Vec<f64>,
}

/// `⌊(L / ln L)^{1/3}⌋`.
pub fn default_ar_order(l: usize) -> usize {
    if l < 3 {
        return 0;
    }
    let l = l as f64;
    (l / l.ln()).cbrt().floor() as usize
}

/// Long-run covariance of the (centred) score rows from an order-`s` vector
/// autoregression `ℓ_n + Σ Φ_i ℓ_{n−i} = U_n`: `Î = Φ(1)^{-1} Σ_U Φ(1)^{-T}`.
pub fn long_run_covariance(scores: &RealMatrix, s: usize) -> Result<RealMatrix> {
    let (l, r) = scores.shape();
    if l <= s * r + r {
        return Err(Error::InvalidArgument(format!(
            "{l} score rows are too few for an order {s} autoregression in {r} dimensions"
        )));
    }
    let mean = scores.row_mean();
    let mut centred = scores.clone();
    for mut row in centred.row_iter_mut() {
        row -= &mean;
    }
    let rows = l - s;
    let target = centred.rows(s, rows).into_owned();
    let (residuals, phi_one) = if s == 0 {
        (target, RealMatrix::identity(r, r))
    } else {
        let mut design = RealMatrix::zeros(rows, s * r);
        for i in 1..=s {
            design
                .view_mut((0, (i - 1) * r), (rows, r))
                .copy_from(&centred.rows(s - i, rows));
        }
        let gram = design.transpose() * &design;
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::Solver("score autoregression design is rank deficient".into()))?;
        let coef = chol.solve(&(design.transpose() * &target));
        let residuals = &target - &design * &coef;
        let mut phi_one = RealMatrix::identity(r, r);
        for i in 0..s {
            phi_one -= coef.view((i * r, 0), (r, r)).transpose();
        }
        (residuals, phi_one)
    };
    let sigma_u = residuals.transpose() * &residuals / rows as f64;
    let inv = phi_one.try_inverse().ok_or(Error::SingularArPolynomial)?;
    Ok(symmetrize(&(&inv * sigma_u * inv.transpose())))
}

/// Assembles `Ξ̂` from `Ĵ` and `Î`.
pub fn sandwich_from_parts(j_hat: RealMatrix, i_hat: RealMatrix, l: usize, ar_order: usize) -> Result<SandwichCovariance> {
    let j_inv = j_hat.clone().try_inverse().ok_or(Error::SingularHessian)?;
    if j_inv.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularHessian);
    }
    let raw = symmetrize(&(&j_inv * &i_hat * &j_inv / l as f64));
    let eig = raw.clone().symmetric_eigen();
    let clamped_eigenvalues: Vec<f64> = eig
        .eigenvalues
        .iter()
        .copied()
        .filter(|&v| v < -NEGATIVE_EIGENVALUE_REPORT)
        .collect();
    let xi_hat = if eig.eigenvalues.iter().any(|&v| v < 0.0) {
        let clamped = eig.eigenvalues.map(|v| v.max(0.0));
        symmetrize(&(&eig.eigenvectors * RealMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose()))
    } else {
        raw
    };
    let stderr = xi_hat.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect();
    Ok(SandwichCovariance { j_hat, i_hat, xi_hat, ar_order, stderr, clamped_eigenvalues })
}

/// `Ĵ = ∇²ℒ̂/L` by finite differences, `Î` from the score autoregression of order `s`
/// (default `⌊(L/ln L)^{1/3}⌋`), and `Ξ̂ = L^{-1}Ĵ^{-1}ÎĴ^{-1}`.
pub fn sandwich_covariance<F: SsmFamily + ?Sized>(
    family: &F,
    theta_hat: &[f64],
    data: &RealMatrix,
    h: f64,
    s: Option<usize>,
) -> Result<SandwichCovariance> {
    check_data(data)?;
    let l = data.nrows();
    let r = family.param_count();
    let s = s.unwrap_or_else(|| default_ar_order(l));
    if l <= s * r + r {
        return Err(Error::InvalidArgument(format!("L = {l} must exceed (s + 1) r = {}", (s + 1) * r)));
    }
    let steps: Vec<f64> = theta_hat.iter().map(|&t| hessian_step(t)).collect();
    ensure_interior(family.bounds(), theta_hat, &steps)?;
    let f = |t: &[f64]| objective(family, t, data, h) / l as f64;
    let j_hat = fd_hessian(&f, theta_hat)?;
    let scores = score_sequence(family, theta_hat, data, h)?;
    let i_hat = long_run_covariance(&scores, s)?;
    sandwich_from_parts(j_hat, i_hat, l, s)
}

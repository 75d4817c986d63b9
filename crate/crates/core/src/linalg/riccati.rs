//! Discrete-time algebraic Riccati equation in filtering form
//!
//! ```text
//! Ω = F Ω F' + Q − (F Ω H' + R)(H Ω H' + S)^{-1}(F Ω H' + R)'
//! ```
//!
//! When `S` is positive definite the cross term is removed and the equation is
//! solved by the structure-preserving doubling algorithm. Sampled continuous-time
//! models have `S = 0`, where doubling is not available; those are solved by
//! Newton (Hewer) iteration starting from the zero gain, which is stabilizing
//! because `F` is. A plain fixed-point iteration backs up both routes.

use super::{ensure_finite, ensure_psd, ensure_square, is_positive_definite, psd_clamp, solve_lyapunov_dt, spectral_radius, symmetrize, RealMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct DareOptions {
    /// Convergence tolerance on the norm of successive iterates, relative to `1 + ‖Ω‖`.
    pub tol: f64,
    /// Iteration cap for the fixed-point fallback.
    pub max_iter: usize,
}

impl Default for DareOptions {
    fn default() -> Self {
        Self { tol: 1e-13, max_iter: 10_000 }
    }
}

/// One application of the Riccati map `Ω ↦ FΩF' + Q − (FΩH'+R)(HΩH'+S)^{-1}(FΩH'+R)'`.
pub fn riccati_map(
    f: &RealMatrix,
    h: &RealMatrix,
    q: &RealMatrix,
    s: &RealMatrix,
    r: &RealMatrix,
    omega: &RealMatrix,
) -> Result<RealMatrix> {
    let v = symmetrize(&(h * omega * h.transpose() + s));
    let g = f * omega * h.transpose() + r;
    let chol = v.cholesky().ok_or(Error::SingularInnovationCovariance)?;
    let gain_t = chol.solve(&g.transpose());
    Ok(symmetrize(&(f * omega * f.transpose() + q - g * gain_t)))
}

/// Frobenius norm of `riccati_map(Ω) − Ω`.
pub fn riccati_residual(
    f: &RealMatrix,
    h: &RealMatrix,
    q: &RealMatrix,
    s: &RealMatrix,
    r: &RealMatrix,
    omega: &RealMatrix,
) -> Result<f64> {
    Ok((riccati_map(f, h, q, s, r, omega)? - omega).norm())
}

fn check_dims(f: &RealMatrix, h: &RealMatrix, q: &RealMatrix, s: &RealMatrix, r: &RealMatrix) -> Result<()> {
    ensure_square(f, "F")?;
    let n = f.nrows();
    let d = h.nrows();
    let ok = h.ncols() == n
        && q.shape() == (n, n)
        && s.shape() == (d, d)
        && r.shape() == (n, d);
    if !ok {
        return Err(Error::Dimension(format!(
            "inconsistent DARE inputs: F {:?}, H {:?}, Q {:?}, S {:?}, R {:?}",
            f.shape(),
            h.shape(),
            q.shape(),
            s.shape(),
            r.shape()
        )));
    }
    for (m, name) in [(f, "F"), (h, "H"), (q, "Q"), (s, "S"), (r, "R")] {
        ensure_finite(m, name)?;
    }
    Ok(())
}

/// Stabilizing PSD solution of the filtering DARE with default options.
pub fn solve_dare(f: &RealMatrix, h: &RealMatrix, q: &RealMatrix, s: &RealMatrix, r: &RealMatrix) -> Result<RealMatrix> {
    solve_dare_with(f, h, q, s, r, &DareOptions::default())
}

pub fn solve_dare_with(
    f: &RealMatrix,
    h: &RealMatrix,
    q: &RealMatrix,
    s: &RealMatrix,
    r: &RealMatrix,
    opts: &DareOptions,
) -> Result<RealMatrix> {
    check_dims(f, h, q, s, r)?;
    let radius = spectral_radius(f);
    if !(radius < 1.0) {
        return Err(Error::NotSchurStable { radius });
    }
    ensure_psd(q, "Q")?;
    ensure_psd(s, "S")?;
    let n = f.nrows();
    let d = h.nrows();
    let mut block = RealMatrix::zeros(n + d, n + d);
    block.view_mut((0, 0), (n, n)).copy_from(q);
    block.view_mut((0, n), (n, d)).copy_from(r);
    block.view_mut((n, 0), (d, n)).copy_from(&r.transpose());
    block.view_mut((n, n), (d, d)).copy_from(s);
    ensure_psd(&block, "noise covariance [[Q,R],[R',S]]")?;
    let s_pd = is_positive_definite(s);
    if !s_pd && !is_positive_definite(q) {
        return Err(Error::NotPd("Q or S"));
    }

    let primary = if s_pd {
        doubling(f, h, q, s, r, opts)
    } else {
        newton_hewer(f, h, q, s, r, opts)
    };
    let omega = match primary {
        Ok(x) => x,
        Err(_) => fixed_point(f, h, q, s, r, opts)?,
    };
    let omega = psd_clamp(&omega, "Riccati solution")?;
    let (k, _) = kalman_gain(f, h, &omega, s, r)?;
    let closed = spectral_radius(&(f - &k * h));
    if !(closed < 1.0) {
        return Err(Error::Solver(format!(
            "Riccati solution is not stabilizing (spectral radius of F-KH = {closed})"
        )));
    }
    Ok(omega)
}

fn doubling(
    f: &RealMatrix,
    h: &RealMatrix,
    q: &RealMatrix,
    s: &RealMatrix,
    r: &RealMatrix,
    opts: &DareOptions,
) -> Result<RealMatrix> {
    let n = f.nrows();
    let s_chol = s.clone().cholesky().ok_or(Error::NotPd("S"))?;
    // remove the cross covariance: F~ = F - R S^{-1} H, Q~ = Q - R S^{-1} R'
    let s_inv_h = s_chol.solve(h);
    let s_inv_rt = s_chol.solve(&r.transpose());
    let f_t = f - r * &s_inv_h;
    let q_t = symmetrize(&(q - r * &s_inv_rt));
    // control-form data: A = F~', G = H' S^{-1} H, P = Q~
    let mut a = f_t.transpose();
    let mut g = symmetrize(&(h.transpose() * &s_inv_h));
    let mut p = q_t;
    let id = RealMatrix::identity(n, n);
    for _ in 0..100 {
        let w = &id + &g * &p;
        let lu = w.lu();
        let w_inv_a = lu.solve(&a).ok_or_else(|| Error::Solver("singular doubling step".into()))?;
        let w_inv_g = lu.solve(&g).ok_or_else(|| Error::Solver("singular doubling step".into()))?;
        let p_next = symmetrize(&(&p + a.transpose() * &p * &w_inv_a));
        let g_next = symmetrize(&(&g + &a * &w_inv_g * a.transpose()));
        let a_next = &a * &w_inv_a;
        let delta = (&p_next - &p).norm();
        p = p_next;
        g = g_next;
        a = a_next;
        if !p.iter().all(|x| x.is_finite()) {
            break;
        }
        if delta <= opts.tol * (1.0 + p.norm()) {
            return Ok(p);
        }
    }
    Err(Error::RiccatiNoConvergence { iterations: 100 })
}

fn newton_hewer(
    f: &RealMatrix,
    h: &RealMatrix,
    q: &RealMatrix,
    s: &RealMatrix,
    r: &RealMatrix,
    opts: &DareOptions,
) -> Result<RealMatrix> {
    let n = f.nrows();
    let d = h.nrows();
    let mut k = RealMatrix::zeros(n, d);
    let mut omega: Option<RealMatrix> = None;
    for _ in 0..100 {
        let fk = f - &k * h;
        let wk = symmetrize(&(q - &k * r.transpose() - r * k.transpose() + &k * s * k.transpose()));
        let next = solve_lyapunov_dt(&fk, &wk)?;
        if let Some(prev) = &omega {
            if (&next - prev).norm() <= opts.tol * (1.0 + next.norm()) {
                return Ok(next);
            }
        }
        k = kalman_gain(f, h, &next, s, r)?.0;
        omega = Some(next);
    }
    Err(Error::RiccatiNoConvergence { iterations: 100 })
}

fn fixed_point(
    f: &RealMatrix,
    h: &RealMatrix,
    q: &RealMatrix,
    s: &RealMatrix,
    r: &RealMatrix,
    opts: &DareOptions,
) -> Result<RealMatrix> {
    let mut omega = q.clone();
    for _ in 0..opts.max_iter {
        let next = riccati_map(f, h, q, s, r, &omega)?;
        let delta = (&next - &omega).norm();
        omega = next;
        if delta <= opts.tol * (1.0 + omega.norm()) {
            return Ok(omega);
        }
    }
    Err(Error::RiccatiNoConvergence { iterations: opts.max_iter })
}

/// Steady-state gain `K = (FΩH' + R)V^{-1}` and innovation covariance `V = HΩH' + S`.
pub fn kalman_gain(
    f: &RealMatrix,
    h: &RealMatrix,
    omega: &RealMatrix,
    s: &RealMatrix,
    r: &RealMatrix,
) -> Result<(RealMatrix, RealMatrix)> {
    let v = symmetrize(&(h * omega * h.transpose() + s));
    let chol = v.clone().cholesky().ok_or(Error::SingularInnovationCovariance)?;
    let g = f * omega * h.transpose() + r;
    let k = chol.solve(&g.transpose()).transpose();
    Ok((k, v))
}

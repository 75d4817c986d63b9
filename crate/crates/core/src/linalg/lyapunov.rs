use nalgebra::DVector;
use num_complex::Complex64;

use super::{eigenvalues, ensure_finite, ensure_square, psd_clamp, symmetrize, to_complex, ComplexMatrix, RealMatrix};
use crate::error::{Error, Result};

/// Above this state dimension the Kronecker system (N^2 unknowns) is replaced
/// by a Schur-based back substitution.
const KRONECKER_MAX_DIM: usize = 30;

pub(crate) fn ensure_hurwitz(a: &RealMatrix) -> Result<()> {
    let worst = eigenvalues(a)
        .into_iter()
        .max_by(|x, y| x.re.total_cmp(&y.re))
        .expect("non-empty matrix");
    if worst.re < 0.0 && worst.re.is_finite() {
        Ok(())
    } else {
        Err(Error::Unstable { eigenvalue: worst })
    }
}

/// Solves `A X + X A' + W = 0` for stable `A` and symmetric PSD `W`.
pub fn solve_lyapunov_ct(a: &RealMatrix, w: &RealMatrix) -> Result<RealMatrix> {
    check_inputs(a, w)?;
    ensure_hurwitz(a)?;
    let x = if a.nrows() <= KRONECKER_MAX_DIM {
        kronecker_solve(a, w)?
    } else {
        schur_solve(a, w).or_else(|_| kronecker_solve(a, w))?
    };
    psd_clamp(&x, "Lyapunov solution")
}

/// Schur-route solver, exposed so both routes can be cross-checked on small systems.
pub fn solve_lyapunov_ct_schur(a: &RealMatrix, w: &RealMatrix) -> Result<RealMatrix> {
    check_inputs(a, w)?;
    ensure_hurwitz(a)?;
    psd_clamp(&schur_solve(a, w)?, "Lyapunov solution")
}

fn check_inputs(a: &RealMatrix, w: &RealMatrix) -> Result<()> {
    ensure_square(a, "A")?;
    ensure_square(w, "W")?;
    ensure_finite(a, "A")?;
    ensure_finite(w, "W")?;
    if a.nrows() != w.nrows() {
        return Err(Error::Dimension(format!(
            "A is {}x{} but W is {}x{}",
            a.nrows(),
            a.ncols(),
            w.nrows(),
            w.ncols()
        )));
    }
    Ok(())
}

fn kronecker_solve(a: &RealMatrix, w: &RealMatrix) -> Result<RealMatrix> {
    let n = a.nrows();
    let id = RealMatrix::identity(n, n);
    let op = id.kronecker(a) + a.kronecker(&id);
    let rhs = -DVector::from_column_slice(w.as_slice());
    let lu = op.lu();
    let mut sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Solver("singular Lyapunov operator".into()))?;
    // one step of iterative refinement
    let resid = &rhs - (id.kronecker(a) + a.kronecker(&id)) * &sol;
    if let Some(corr) = lu.solve(&resid) {
        sol += corr;
    }
    Ok(symmetrize(&RealMatrix::from_column_slice(n, n, sol.as_slice())))
}

fn schur_solve(a: &RealMatrix, w: &RealMatrix) -> Result<RealMatrix> {
    let n = a.nrows();
    let (q, t) = super::complex_schur(&to_complex(a))
        .ok_or_else(|| Error::Solver("Schur decomposition did not converge".into()))?;
    let c: ComplexMatrix = -(q.adjoint() * to_complex(w) * &q);
    let mut y = ComplexMatrix::zeros(n, n);
    for j in (0..n).rev() {
        let mut rhs = c.column(j).into_owned();
        for k in (j + 1)..n {
            let coef = t[(j, k)].conj();
            rhs -= y.column(k) * coef;
        }
        let shift = t[(j, j)].conj();
        // back substitution with (T + shift I), upper triangular
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            for l in (i + 1)..n {
                acc -= t[(i, l)] * y[(l, j)];
            }
            let diag = t[(i, i)] + shift;
            if diag.norm() == 0.0 {
                return Err(Error::Solver("singular Sylvester diagonal".into()));
            }
            y[(i, j)] = acc / diag;
        }
    }
    let x = &q * y * q.adjoint();
    Ok(symmetrize(&x.map(|z: Complex64| z.re)))
}

/// Solves the Stein equation `X = A X A' + W` for Schur-stable `A` by Smith doubling.
pub fn solve_lyapunov_dt(a: &RealMatrix, w: &RealMatrix) -> Result<RealMatrix> {
    check_inputs(a, w)?;
    let radius = super::spectral_radius(a);
    if !(radius < 1.0) {
        return Err(Error::NotSchurStable { radius });
    }
    let mut x = w.clone();
    let mut p = a.clone();
    for _ in 0..64 {
        let incr = &p * &x * p.transpose();
        x += &incr;
        p = &p * &p;
        if incr.norm() <= 1e-17 * (1.0 + x.norm()) || p.norm() < 1e-300 {
            return Ok(symmetrize(&x));
        }
        if !p.iter().all(|v| v.is_finite()) {
            break;
        }
    }
    Err(Error::Solver("Smith doubling did not converge".into()))
}

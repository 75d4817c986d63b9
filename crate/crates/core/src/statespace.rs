//! Continuous- and discrete-time linear state space models, the exact sampling
//! map between them, second-order quantities and structural diagnostics.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    eigenvalues, ensure_finite, ensure_psd, ensure_square, expm, is_positive_definite, numerical_rank,
    solve_lyapunov_ct, spectral_radius, to_complex, vanloan_gramian, ComplexMatrix, RealMatrix,
};

/// Singular values below this fraction of the largest count as zero in rank tests.
pub const RANK_TOLERANCE: f64 = 1e-9;
/// Distance below which two eigenvalue differences are considered aliased.
pub const KALMAN_BERTRAM_TOLERANCE: f64 = 1e-9;
/// Distance from an eigenvalue under which the resolvent is treated as singular.
pub const POLE_TOLERANCE: f64 = 1e-12;

/// Algebraic realization `(A, B, C)` of the rational transfer function `C(zI − A)^{-1}B`.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub a: RealMatrix,
    pub b: RealMatrix,
    pub c: RealMatrix,
}

impl Realization {
    pub fn new(a: RealMatrix, b: RealMatrix, c: RealMatrix) -> Result<Self> {
        ensure_square(&a, "A")?;
        let n = a.nrows();
        if b.nrows() != n || c.ncols() != n || b.ncols() == 0 || c.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "A {:?}, B {:?}, C {:?} are not conformable",
                a.shape(),
                b.shape(),
                c.shape()
            )));
        }
        ensure_finite(&a, "A")?;
        ensure_finite(&b, "B")?;
        ensure_finite(&c, "C")?;
        Ok(Self { a, b, c })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn with_levy_covariance(self, sigma_l: RealMatrix) -> Result<ContinuousSsm> {
        ContinuousSsm::new(self.a, self.b, self.c, sigma_l)
    }
}

/// Lévy-driven continuous-time model `dX = AX dt + B dL`, `Y = CX`, with `Cov L(1) = Σᴸ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousSsm {
    pub a: RealMatrix,
    pub b: RealMatrix,
    pub c: RealMatrix,
    pub sigma_l: RealMatrix,
}

impl ContinuousSsm {
    pub fn new(a: RealMatrix, b: RealMatrix, c: RealMatrix, sigma_l: RealMatrix) -> Result<Self> {
        let r = Realization::new(a, b, c)?;
        if sigma_l.shape() != (r.input_dim(), r.input_dim()) {
            return Err(Error::Dimension(format!(
                "Levy covariance is {:?}, expected {}x{}",
                sigma_l.shape(),
                r.input_dim(),
                r.input_dim()
            )));
        }
        ensure_finite(&sigma_l, "Levy covariance")?;
        if (&sigma_l - sigma_l.transpose()).norm() > 1e-12 * (1.0 + sigma_l.norm())
            || !is_positive_definite(&sigma_l)
        {
            return Err(Error::NotPd("Levy covariance"));
        }
        Ok(Self { a: r.a, b: r.b, c: r.c, sigma_l })
    }

    pub fn realization(&self) -> Realization {
        Realization { a: self.a.clone(), b: self.b.clone(), c: self.c.clone() }
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        eigenvalues(&self.a)
    }

    pub fn is_stable(&self) -> bool {
        self.eigenvalues().iter().all(|l| l.re < 0.0)
    }

    /// Stationary state covariance `Γ₀`, the solution of `AΓ₀ + Γ₀A' = −BΣᴸB'`.
    pub fn stationary_covariance(&self) -> Result<RealMatrix> {
        let w = &self.b * &self.sigma_l * self.b.transpose();
        solve_lyapunov_ct(&self.a, &w)
    }

    fn ensure_stable(&self) -> Result<()> {
        match self.eigenvalues().into_iter().find(|l| !(l.re < 0.0)) {
            Some(eigenvalue) => Err(Error::Unstable { eigenvalue }),
            None => Ok(()),
        }
    }
}

/// Discrete-time model `X_n = F X_{n−1} + Z_{n−1}`, `Y_n = H X_n + W_n` with
/// `Cov(Z, W) = [[Q, R], [R', S]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSsm {
    pub f: RealMatrix,
    pub h: RealMatrix,
    pub q: RealMatrix,
    pub s: RealMatrix,
    pub r: RealMatrix,
}

impl DiscreteSsm {
    pub fn new(f: RealMatrix, h: RealMatrix, q: RealMatrix, s: RealMatrix, r: RealMatrix) -> Result<Self> {
        ensure_square(&f, "F")?;
        let n = f.nrows();
        let d = h.nrows();
        if h.ncols() != n || q.shape() != (n, n) || s.shape() != (d, d) || r.shape() != (n, d) {
            return Err(Error::Dimension(format!(
                "F {:?}, H {:?}, Q {:?}, S {:?}, R {:?} are not conformable",
                f.shape(),
                h.shape(),
                q.shape(),
                s.shape(),
                r.shape()
            )));
        }
        for (m, name) in [(&f, "F"), (&h, "H"), (&q, "Q"), (&s, "S"), (&r, "R")] {
            ensure_finite(m, name)?;
        }
        let mut block = RealMatrix::zeros(n + d, n + d);
        block.view_mut((0, 0), (n, n)).copy_from(&q);
        block.view_mut((0, n), (n, d)).copy_from(&r);
        block.view_mut((n, 0), (d, n)).copy_from(&r.transpose());
        block.view_mut((n, n), (d, d)).copy_from(&s);
        ensure_psd(&block, "noise covariance [[Q,R],[R',S]]")?;
        Ok(Self { f, h, q, s, r })
    }

    /// Model without observation noise or cross covariance.
    pub fn without_measurement_noise(f: RealMatrix, h: RealMatrix, q: RealMatrix) -> Result<Self> {
        let n = f.nrows();
        let d = h.nrows();
        Self::new(f, h, q, RealMatrix::zeros(d, d), RealMatrix::zeros(n, d))
    }

    pub fn state_dim(&self) -> usize {
        self.f.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.h.nrows()
    }
}

/// Exact sampling at spacing `h`: `F = e^{Ah}`, `H = C`, `Q = ∫₀ʰ e^{Au}BΣᴸB'e^{A'u}du`, `S = R = 0`.
pub fn sample_ct_model(m: &ContinuousSsm, h: f64) -> Result<DiscreteSsm> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("sampling interval h must be positive, got {h}")));
    }
    m.ensure_stable()?;
    let f = expm(&(&m.a * h))?;
    let q = vanloan_gramian(&m.a, &m.b, &m.sigma_l, h)?;
    let n = m.state_dim();
    let d = m.output_dim();
    Ok(DiscreteSsm {
        f,
        h: m.c.clone(),
        q,
        s: RealMatrix::zeros(d, d),
        r: RealMatrix::zeros(n, d),
    })
}

/// `C(zI − A)^{-1}B`.
pub fn transfer_function(m: &Realization, z: Complex64) -> Result<ComplexMatrix> {
    if eigenvalues(&m.a).iter().any(|l| (l - z).norm() < POLE_TOLERANCE) {
        return Err(Error::Singularity { z });
    }
    let n = m.state_dim();
    let resolvent = ComplexMatrix::identity(n, n) * z - to_complex(&m.a);
    let x = resolvent
        .lu()
        .solve(&to_complex(&m.b))
        .ok_or(Error::Singularity { z })?;
    Ok(to_complex(&m.c) * x)
}

/// `f_Y(ω) = (2π)^{-1} H(iω) Σᴸ H(−iω)'`.
pub fn spectral_density_ct(m: &ContinuousSsm, omega: f64) -> Result<ComplexMatrix> {
    m.ensure_stable()?;
    let tf = transfer_function(&m.realization(), Complex64::new(0.0, omega))?;
    let f = &tf * to_complex(&m.sigma_l) * tf.adjoint() / Complex64::new(2.0 * PI, 0.0);
    Ok(hermitize(&f))
}

/// Spectral density of the output of a discrete model, without a `1/(2π)` factor:
/// `Ψ(ω) [[Q,R],[R',S]] Ψ(ω)*` with `Ψ(ω) = [H(e^{iω}I − F)^{-1}, I]`. For sampled
/// models (`S = R = 0`) this is `C(e^{iω}I − e^{Ah})^{-1} Q (e^{−iω}I − e^{A'h})^{-1} C'`.
pub fn spectral_density_dt(m: &DiscreteSsm, omega: f64) -> Result<ComplexMatrix> {
    let radius = spectral_radius(&m.f);
    if !(radius < 1.0) {
        return Err(Error::NotSchurStable { radius });
    }
    let n = m.state_dim();
    let z = Complex64::from_polar(1.0, omega);
    let resolvent = ComplexMatrix::identity(n, n) * z - to_complex(&m.f);
    let ht = to_complex(&m.h.transpose());
    // G = H (zI − F)^{-1}, computed as ((zI − F)' \ H')'
    let g = resolvent
        .transpose()
        .lu()
        .solve(&ht)
        .ok_or(Error::Singularity { z })?
        .transpose();
    let q = to_complex(&m.q);
    let r = to_complex(&m.r);
    let s = to_complex(&m.s);
    let f = &g * &q * g.adjoint() + &g * &r + r.adjoint() * g.adjoint() + s;
    Ok(hermitize(&f))
}

fn hermitize(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// `γ_Y(lag) = C e^{A·lag} Γ₀ C'` for `lag ≥ 0`.
pub fn autocovariance_ct(m: &ContinuousSsm, lag: f64) -> Result<RealMatrix> {
    if !(lag >= 0.0) || !lag.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lag must be nonnegative, got {lag}; use autocovariance_ct_signed for negative lags"
        )));
    }
    let gamma0 = m.stationary_covariance()?;
    Ok(&m.c * expm(&(&m.a * lag))? * gamma0 * m.c.transpose())
}

/// Autocovariance at any real lag via `γ(−h) = γ(h)'`.
pub fn autocovariance_ct_signed(m: &ContinuousSsm, lag: f64) -> Result<RealMatrix> {
    if lag < 0.0 {
        Ok(autocovariance_ct(m, -lag)?.transpose())
    } else {
        autocovariance_ct(m, lag)
    }
}

/// Structural diagnostics of a realization sampled at spacing `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralReport {
    pub controllable: bool,
    pub observable: bool,
    pub minimal: bool,
    pub stable: bool,
    /// `false` flags an aliasing risk: two eigenvalues differ by `2πik/h`, `k ≠ 0`.
    pub kalman_bertram_ok: bool,
    pub spectrum_in_strip: bool,
    /// Numerical rank of the Hankel product of the observability and controllability matrices.
    pub mcmillan_degree_bound: usize,
    pub eigenvalues_of_a: Vec<Complex64>,
}

pub fn controllability_matrix(a: &RealMatrix, b: &RealMatrix) -> RealMatrix {
    let n = a.nrows();
    let m = b.ncols();
    let mut out = RealMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        out.view_mut((0, k * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    out
}

pub fn observability_matrix(a: &RealMatrix, c: &RealMatrix) -> RealMatrix {
    controllability_matrix(&a.transpose(), &c.transpose()).transpose()
}

/// No two eigenvalues differ by a nonzero integer multiple of `2πi/h`.
pub fn kalman_bertram_ok(eigs: &[Complex64], h: f64) -> bool {
    for (i, li) in eigs.iter().enumerate() {
        for lj in eigs.iter().skip(i + 1) {
            let diff = li - lj;
            let kmax = (h * diff.im.abs() / (2.0 * PI)).ceil() as i64 + 1;
            for k in -kmax..=kmax {
                if k == 0 {
                    continue;
                }
                let alias = Complex64::new(0.0, 2.0 * PI * k as f64 / h);
                if (diff - alias).norm() < KALMAN_BERTRAM_TOLERANCE {
                    return false;
                }
            }
        }
    }
    true
}

/// All eigenvalues satisfy `|Im λ| < π/h`.
pub fn spectrum_in_strip(eigs: &[Complex64], h: f64) -> bool {
    eigs.iter().all(|l| l.im.abs() < PI / h)
}

pub fn structural_report(m: &Realization, h: f64) -> StructuralReport {
    let n = m.state_dim();
    let ctrl = controllability_matrix(&m.a, &m.b);
    let obs = observability_matrix(&m.a, &m.c);
    let controllable = numerical_rank(&ctrl, RANK_TOLERANCE) == n;
    let observable = numerical_rank(&obs, RANK_TOLERANCE) == n;
    let eigs = eigenvalues(&m.a);
    StructuralReport {
        controllable,
        observable,
        minimal: controllable && observable,
        stable: eigs.iter().all(|l| l.re < 0.0),
        kalman_bertram_ok: kalman_bertram_ok(&eigs, h),
        spectrum_in_strip: spectrum_in_strip(&eigs, h),
        mcmillan_degree_bound: numerical_rank(&(&obs * &ctrl), RANK_TOLERANCE),
        eigenvalues_of_a: eigs,
    }
}

/// Exact one-step state transition of a sampled Gaussian model, used as a test oracle
/// for Euler paths: returns `(e^{Ah}, Cholesky factor of the Gramian)`.
pub fn exact_transition(m: &ContinuousSsm, h: f64) -> Result<(RealMatrix, RealMatrix)> {
    let dt = sample_ct_model(m, h)?;
    let chol = dt
        .q
        .clone()
        .cholesky()
        .ok_or(Error::NotPd("noise Gramian"))?
        .l();
    Ok((dt.f, chol))
}

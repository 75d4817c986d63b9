//! Increments of Brownian and normal-inverse Gaussian Lévy processes.
//!
//! Random numbers come from ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded with
//! `seed_from_u64`, so a seed fixes a path on every platform.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, InverseGaussian, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, ensure_psd, is_positive_definite, RealMatrix};

/// Seeded generator used for every simulation.
pub type SimRng = ChaCha20Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Parameters of the `m`-variate NIG law of `L(1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NigParams {
    pub mu: DVector<f64>,
    pub alpha: f64,
    pub beta: DVector<f64>,
    pub delta: f64,
    /// Dependence matrix `Δ` (symmetric PD, `det Δ = 1`).
    pub delta_matrix: RealMatrix,
}

impl NigParams {
    pub fn new(mu: DVector<f64>, alpha: f64, beta: DVector<f64>, delta: f64, delta_matrix: RealMatrix) -> Result<Self> {
        let m = mu.len();
        if m == 0 || beta.len() != m || delta_matrix.shape() != (m, m) {
            return Err(Error::Dimension("NIG parameter dimensions disagree".into()));
        }
        ensure_finite(&delta_matrix, "NIG dependence matrix")?;
        if !(alpha >= 0.0) || !(delta > 0.0) || !alpha.is_finite() || !delta.is_finite() {
            return Err(Error::Driver(format!("NIG needs alpha >= 0 and delta > 0, got {alpha}, {delta}")));
        }
        if (&delta_matrix - delta_matrix.transpose()).norm() > 1e-12 || !is_positive_definite(&delta_matrix) {
            return Err(Error::Driver("NIG dependence matrix must be symmetric positive definite".into()));
        }
        if (delta_matrix.determinant() - 1.0).abs() > 1e-8 {
            return Err(Error::Driver("NIG dependence matrix must have determinant 1".into()));
        }
        let p = Self { mu, alpha, beta, delta, delta_matrix };
        let k2 = p.kappa_squared();
        if !(k2 > 0.0) {
            return Err(Error::Driver(format!("NIG requires kappa^2 = alpha^2 - beta'Delta beta > 0, got {k2}")));
        }
        Ok(p)
    }

    /// Zero-mean bivariate law with `δ = 1`, `α = 3`, `β = (1, 1)`,
    /// `Δ = [[5/4, −1/2], [−1/2, 1]]` and `μ = −(3, 2)/(2√31)`.
    pub fn bivariate_skewed() -> Self {
        let s = 2.0 * 31f64.sqrt();
        Self::new(
            DVector::from_vec(vec![-3.0 / s, -2.0 / s]),
            3.0,
            DVector::from_vec(vec![1.0, 1.0]),
            1.0,
            RealMatrix::from_row_slice(2, 2, &[1.25, -0.5, -0.5, 1.0]),
        )
        .expect("static parameters")
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn kappa_squared(&self) -> f64 {
        self.alpha * self.alpha - self.beta.dot(&(&self.delta_matrix * &self.beta))
    }

    pub fn kappa(&self) -> f64 {
        self.kappa_squared().sqrt()
    }

    /// `E L(1) = μ + δΔβ/κ`.
    pub fn mean(&self) -> DVector<f64> {
        &self.mu + &self.delta_matrix * &self.beta * (self.delta / self.kappa())
    }

    /// `Cov L(1) = (δ/κ)Δ + (δ/κ³)Δββ'Δ`.
    pub fn covariance(&self) -> RealMatrix {
        let k = self.kappa();
        let db = &self.delta_matrix * &self.beta;
        &self.delta_matrix * (self.delta / k) + &db * db.transpose() * (self.delta / k.powi(3))
    }
}

/// Law of the driving Lévy process.
#[derive(Debug, Clone, PartialEq)]
pub enum Driver {
    /// Brownian motion with `Cov L(1) = Σ` (PSD; `Σ = 0` gives a deterministic system).
    Brownian { sigma: RealMatrix },
    Nig(NigParams),
}

impl Driver {
    pub fn dim(&self) -> usize {
        match self {
            Driver::Brownian { sigma } => sigma.nrows(),
            Driver::Nig(p) => p.dim(),
        }
    }

    pub fn mean(&self) -> DVector<f64> {
        match self {
            Driver::Brownian { sigma } => DVector::zeros(sigma.nrows()),
            Driver::Nig(p) => p.mean(),
        }
    }

    pub fn covariance(&self) -> RealMatrix {
        match self {
            Driver::Brownian { sigma } => sigma.clone(),
            Driver::Nig(p) => p.covariance(),
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, Driver::Brownian { .. })
    }
}

/// Draws successive i.i.d. increments `L(t + dt) − L(t)`.
pub struct IncrementSampler {
    kind: SamplerKind,
    dt: f64,
    normal: DVector<f64>,
}

enum SamplerKind {
    Brownian { factor: RealMatrix },
    Nig { drift: DVector<f64>, skew: DVector<f64>, chol: RealMatrix, mixing: InverseGaussian<f64> },
}

/// Symmetric square-root factor `F` with `FF' = Σ` for a PSD `Σ`.
fn psd_factor(sigma: &RealMatrix) -> Result<RealMatrix> {
    ensure_psd(sigma, "Brownian covariance").map_err(|_| Error::Driver("Brownian covariance must be symmetric PSD".into()))?;
    let eig = sigma.clone().symmetric_eigen();
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * RealMatrix::from_diagonal(&root))
}

impl IncrementSampler {
    pub fn new(driver: &Driver, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let kind = match driver {
            Driver::Brownian { sigma } => SamplerKind::Brownian { factor: psd_factor(sigma)? * dt.sqrt() },
            Driver::Nig(p) => {
                let k = p.kappa();
                let scaled = p.delta * dt;
                let mixing = InverseGaussian::new(scaled / k, scaled * scaled)
                    .map_err(|e| Error::Driver(format!("inverse Gaussian mixing law: {e}")))?;
                let chol = p
                    .delta_matrix
                    .clone()
                    .cholesky()
                    .ok_or_else(|| Error::Driver("NIG dependence matrix is not PD".into()))?
                    .l();
                SamplerKind::Nig { drift: &p.mu * dt, skew: &p.delta_matrix * &p.beta, chol, mixing }
            }
        };
        Ok(Self { kind, dt, normal: DVector::zeros(driver.dim()) })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Writes the next increment into `out`.
    pub fn sample_into(&mut self, rng: &mut SimRng, out: &mut DVector<f64>) {
        for z in self.normal.iter_mut() {
            *z = StandardNormal.sample(rng);
        }
        match &self.kind {
            SamplerKind::Brownian { factor } => out.gemv(1.0, factor, &self.normal, 0.0),
            SamplerKind::Nig { drift, skew, chol, mixing } => {
                let w = mixing.sample(rng);
                out.copy_from(drift);
                out.axpy(w, skew, 1.0);
                out.gemv(w.sqrt(), chol, &self.normal, 1.0);
            }
        }
    }
}

/// `n × m` array of i.i.d. increments over steps of length `dt`.
pub fn levy_increments(driver: &Driver, dt: f64, n: usize, seed: u64) -> Result<RealMatrix> {
    let mut sampler = IncrementSampler::new(driver, dt)?;
    let mut rng = rng_from_seed(seed);
    let m = driver.dim();
    let mut out = RealMatrix::zeros(n, m);
    let mut inc = DVector::zeros(m);
    for k in 0..n {
        sampler.sample_into(&mut rng, &mut inc);
        out.row_mut(k).copy_from(&inc.transpose());
    }
    Ok(out)
}

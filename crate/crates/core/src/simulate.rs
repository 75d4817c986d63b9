//! Euler paths of the continuous-time state equation and equidistant sampling.

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::levy::{rng_from_seed, Driver, IncrementSampler};
use crate::linalg::RealMatrix;
use crate::statespace::{exact_transition, ContinuousSsm};

/// Relative tolerance for grid alignment checks.
pub const GRID_TOLERANCE: f64 = 1e-9;

/// Euler path on the grid `0, dt, …, ⌊T/dt⌋dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPath {
    pub dt: f64,
    /// Row `k` is `X(k·dt)`.
    pub states: RealMatrix,
    /// Row `k` is `Y(k·dt) = C X(k·dt)`.
    pub observations_full: RealMatrix,
    pub seed: u64,
}

impl SimulatedPath {
    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.nrows() == 0
    }

    pub fn horizon(&self) -> f64 {
        (self.len() - 1) as f64 * self.dt
    }
}

/// Number of grid points `⌊T/dt⌋ + 1`, robust to `T/dt` landing just below an integer.
pub fn grid_len(t_end: f64, dt: f64) -> usize {
    (t_end / dt + GRID_TOLERANCE).floor() as usize + 1
}

/// `X_{k+1} = X_k + A X_k dt + B ΔL_k`, `X₀ = x0`, driven by `driver`.
pub fn euler_simulate(
    m: &ContinuousSsm,
    driver: &Driver,
    t_end: f64,
    dt: f64,
    x0: &DVector<f64>,
    seed: u64,
) -> Result<SimulatedPath> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("Euler step must be positive, got {dt}")));
    }
    if !(t_end >= dt) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon {t_end} must be at least one step {dt}")));
    }
    let n = m.state_dim();
    if x0.len() != n {
        return Err(Error::Dimension(format!("x0 has length {}, state dimension is {n}", x0.len())));
    }
    if driver.dim() != m.input_dim() {
        return Err(Error::Dimension(format!(
            "driver has dimension {}, model expects {}",
            driver.dim(),
            m.input_dim()
        )));
    }
    let rows = grid_len(t_end, dt);
    let mut sampler = IncrementSampler::new(driver, dt)?;
    let mut rng = rng_from_seed(seed);
    let step = RealMatrix::identity(n, n) + &m.a * dt;
    let mut states = RealMatrix::zeros(rows, n);
    let mut x = x0.clone();
    let mut next = DVector::zeros(n);
    let mut inc = DVector::zeros(m.input_dim());
    states.row_mut(0).copy_from(&x.transpose());
    for k in 1..rows {
        sampler.sample_into(&mut rng, &mut inc);
        next.gemv(1.0, &step, &x, 0.0);
        next.gemv(1.0, &m.b, &inc, 1.0);
        std::mem::swap(&mut x, &mut next);
        states.row_mut(k).copy_from(&x.transpose());
    }
    let observations_full = &states * m.c.transpose();
    Ok(SimulatedPath { dt, states, observations_full, seed })
}

/// Stationary Gaussian start `X₀ ~ N(0, Γ₀)`; only defined for Brownian drivers.
pub fn stationary_initial_state(m: &ContinuousSsm, driver: &Driver, seed: u64) -> Result<DVector<f64>> {
    let Driver::Brownian { sigma } = driver else {
        return Err(Error::Driver("a stationary start is only available for Brownian drivers".into()));
    };
    let with_driver = ContinuousSsm { sigma_l: sigma.clone(), ..m.clone() };
    let w = &with_driver.b * sigma * with_driver.b.transpose();
    let gamma0 = crate::linalg::solve_lyapunov_ct(&with_driver.a, &w)?;
    let eig = gamma0.symmetric_eigen();
    let root = &eig.eigenvectors * RealMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    let mut rng = rng_from_seed(seed);
    let z = DVector::from_fn(m.state_dim(), |_, _| StandardNormal.sample(&mut rng));
    Ok(root * z)
}

/// Observations at `h, 2h, …, Lh` with `L = ⌊T/h⌋`, as an `L × d` array.
pub fn sample_path(path: &SimulatedPath, h: f64) -> Result<RealMatrix> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("sampling interval must be positive, got {h}")));
    }
    let ratio = h / path.dt;
    let stride = ratio.round();
    if stride < 1.0 || (ratio - stride).abs() > GRID_TOLERANCE * ratio.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "h = {h} is not an integer multiple of the Euler step {}",
            path.dt
        )));
    }
    let stride = stride as usize;
    let l = (path.len() - 1) / stride;
    if l == 0 {
        return Err(Error::InvalidArgument(format!("h = {h} exceeds the simulated horizon")));
    }
    let d = path.observations_full.ncols();
    Ok(RealMatrix::from_fn(l, d, |i, j| path.observations_full[((i + 1) * stride, j)]))
}

/// Gaussian observations at spacing `h` from the exact transition `X_{n+1} = e^{Ah}X_n + N(0, Q)`,
/// started in the stationary law. Returns an `L × d` array.
pub fn exact_gaussian_sample(m: &ContinuousSsm, h: f64, l: usize, seed: u64) -> Result<RealMatrix> {
    let (f, chol) = exact_transition(m, h)?;
    let n = m.state_dim();
    let gamma0 = m.stationary_covariance()?;
    let eig = gamma0.symmetric_eigen();
    let root = &eig.eigenvectors * RealMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    let mut rng = rng_from_seed(seed);
    let mut draw = |k: usize| DVector::from_fn(k, |_, _| StandardNormal.sample(&mut rng));
    let mut x = root * draw(n);
    let mut out = RealMatrix::zeros(l, m.output_dim());
    for i in 0..l {
        x = &f * x + &chol * draw(n);
        out.row_mut(i).copy_from(&(&m.c * &x).transpose());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ou() -> ContinuousSsm {
        let s = |x| RealMatrix::from_element(1, 1, x);
        ContinuousSsm::new(s(-1.0), s(1.0), s(1.0), s(1.0)).unwrap()
    }

    fn bm() -> Driver {
        Driver::Brownian { sigma: RealMatrix::identity(1, 1) }
    }

    #[test]
    fn grid_shapes() {
        let p = euler_simulate(&ou(), &bm(), 20.0, 0.01, &DVector::zeros(1), 1).unwrap();
        assert_eq!(p.len(), 2001);
        assert_eq!(sample_path(&p, 1.0).unwrap().nrows(), 20);
        let all = sample_path(&p, 0.01).unwrap();
        assert_eq!(all.nrows(), 2000);
        assert_eq!(all[(0, 0)], p.observations_full[(1, 0)]);
        assert!(sample_path(&p, 0.015).is_err());
    }

    #[test]
    fn deterministic_seed() {
        let a = euler_simulate(&ou(), &bm(), 5.0, 0.01, &DVector::zeros(1), 9).unwrap();
        let b = euler_simulate(&ou(), &bm(), 5.0, 0.01, &DVector::zeros(1), 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stationary_start_needs_gaussian_driver() {
        let nig = Driver::Nig(crate::levy::NigParams::bivariate_skewed());
        assert!(stationary_initial_state(&ou(), &nig, 0).is_err());
        assert!(stationary_initial_state(&ou(), &bm(), 0).is_ok());
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(euler_simulate(&ou(), &bm(), 0.001, 0.01, &DVector::zeros(1), 0).is_err());
        assert!(euler_simulate(&ou(), &bm(), 1.0, -0.01, &DVector::zeros(1), 0).is_err());
        assert!(euler_simulate(&ou(), &bm(), 1.0, 0.01, &DVector::zeros(2), 0).is_err());
    }
}

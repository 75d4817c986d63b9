use nalgebra::DVector;

use super::filter::{steady_state_filter, QmlEvaluation, SteadyStateFilter};
use crate::error::{Error, Result};
use crate::family::SsmFamily;
use crate::linalg::RealMatrix;

/// Choice of the predictor's starting value `X̂₁`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialState {
    #[default]
    Zero,
    Vector(DVector<f64>),
}

impl InitialState {
    fn resolve(&self, n: usize) -> Result<DVector<f64>> {
        match self {
            InitialState::Zero => Ok(DVector::zeros(n)),
            InitialState::Vector(v) if v.len() == n => Ok(v.clone()),
            InitialState::Vector(v) => Err(Error::Dimension(format!(
                "initial state has length {}, model state dimension is {n}",
                v.len()
            ))),
        }
    }
}

/// Rejects data with fewer than two rows or any non-finite entry.
pub fn check_data(data: &RealMatrix) -> Result<()> {
    if data.nrows() < 2 || data.ncols() == 0 {
        return Err(Error::InvalidArgument(format!(
            "need at least two observations, got a {}x{} array",
            data.nrows(),
            data.ncols()
        )));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::BadData);
    }
    Ok(())
}

pub fn filter_at<F: SsmFamily + ?Sized>(family: &F, theta: &[f64], h: f64) -> Result<SteadyStateFilter> {
    steady_state_filter(&family.discrete_model(theta, h)?)
}

/// Quasi log-likelihood `ℒ̂(θ)` (on the `−2 log` scale) with innovations and per-term values.
pub fn quasi_loglik<F: SsmFamily + ?Sized>(
    family: &F,
    theta: &[f64],
    data: &RealMatrix,
    h: f64,
    init: &InitialState,
) -> Result<QmlEvaluation> {
    check_data(data)?;
    let filter = filter_at(family, theta, h)?;
    let x0 = init.resolve(filter.state_dim())?;
    filter.run(data, &x0)
}

/// `ℒ̂(θ)` from a zero start, or `+∞` when `θ` is outside the box or yields an invalid model.
pub fn objective<F: SsmFamily + ?Sized>(family: &F, theta: &[f64], data: &RealMatrix, h: f64) -> f64 {
    if !family.bounds().contains(theta) {
        return f64::INFINITY;
    }
    filter_at(family, theta, h)
        .and_then(|f| f.minus2_loglik(data, &DVector::zeros(f.state_dim())))
        .unwrap_or(f64::INFINITY)
}

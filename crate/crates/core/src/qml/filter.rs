use std::f64::consts::PI;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{kalman_gain, solve_dare, spectral_radius, RealMatrix};
use crate::statespace::DiscreteSsm;

/// Steady-state Kalman filter quantities of a discrete model.
#[derive(Debug, Clone)]
pub struct SteadyStateFilter {
    pub omega: RealMatrix,
    pub gain: RealMatrix,
    pub innov_cov: RealMatrix,
    pub innov_cov_inverse: RealMatrix,
    pub log_det_innov_cov: f64,
    /// `F − KH`.
    pub predictor: RealMatrix,
    pub observation: RealMatrix,
}

/// Output of one pass of the pseudo-innovation recursion.
#[derive(Debug, Clone)]
pub struct QmlEvaluation {
    /// `ℒ̂ = Σ_n l̂_n`.
    pub minus2_loglik: f64,
    /// `L × d`, row `n` is `ε̂_n`.
    pub innovations: RealMatrix,
    /// `l̂_n = d log 2π + log det V + ε̂_n' V^{-1} ε̂_n`.
    pub per_term: Vec<f64>,
}

pub fn steady_state_filter(m: &DiscreteSsm) -> Result<SteadyStateFilter> {
    let omega = solve_dare(&m.f, &m.h, &m.q, &m.s, &m.r)?;
    let (gain, innov_cov) = kalman_gain(&m.f, &m.h, &omega, &m.s, &m.r)?;
    let chol = innov_cov.clone().cholesky().ok_or(Error::SingularInnovationCovariance)?;
    let log_det_innov_cov = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let innov_cov_inverse = chol.inverse();
    let predictor = &m.f - &gain * &m.h;
    let radius = spectral_radius(&predictor);
    if !(radius < 1.0) {
        return Err(Error::NotSchurStable { radius });
    }
    Ok(SteadyStateFilter {
        omega,
        gain,
        innov_cov,
        innov_cov_inverse,
        log_det_innov_cov,
        predictor,
        observation: m.h.clone(),
    })
}

impl SteadyStateFilter {
    pub fn state_dim(&self) -> usize {
        self.predictor.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.observation.nrows()
    }

    /// Runs `X̂_n = (F−KH)X̂_{n−1} + K Y_{n−1}`, `ε̂_n = Y_n − H X̂_n` from `X̂₁ = init`.
    /// `data` is `L × d`.
    pub fn run(&self, data: &RealMatrix, init: &DVector<f64>) -> Result<QmlEvaluation> {
        let l = data.nrows();
        let d = self.output_dim();
        let mut innovations = RealMatrix::zeros(l, d);
        let mut per_term = Vec::with_capacity(l);
        let total = self.recurse(data, init, |n, eps, term| {
            for (k, e) in eps.iter().enumerate() {
                innovations[(n, k)] = *e;
            }
            per_term.push(term);
        })?;
        Ok(QmlEvaluation { minus2_loglik: total, innovations, per_term })
    }

    /// `ℒ̂` only, without storing innovations.
    pub fn minus2_loglik(&self, data: &RealMatrix, init: &DVector<f64>) -> Result<f64> {
        self.recurse(data, init, |_, _, _| {})
    }

    fn recurse(
        &self,
        data: &RealMatrix,
        init: &DVector<f64>,
        mut visit: impl FnMut(usize, &DVector<f64>, f64),
    ) -> Result<f64> {
        let n = self.state_dim();
        let d = self.output_dim();
        if data.ncols() != d {
            return Err(Error::Dimension(format!("data has {} columns, model has {d} outputs", data.ncols())));
        }
        if init.len() != n {
            return Err(Error::Dimension(format!("initial state has length {}, expected {n}", init.len())));
        }
        let constant = d as f64 * (2.0 * PI).ln() + self.log_det_innov_cov;
        let yt = data.transpose();
        let mut x = init.clone();
        let mut x_next = DVector::zeros(n);
        let mut eps = DVector::zeros(d);
        let mut weighted = DVector::zeros(d);
        let mut total = 0.0;
        for (idx, y) in yt.column_iter().enumerate() {
            eps.copy_from(&y);
            eps.gemv(-1.0, &self.observation, &x, 1.0);
            weighted.gemv(1.0, &self.innov_cov_inverse, &eps, 0.0);
            let term = constant + eps.dot(&weighted);
            total += term;
            visit(idx, &eps, term);
            x_next.gemv(1.0, &self.predictor, &x, 0.0);
            x_next.gemv(1.0, &self.gain, &y, 1.0);
            std::mem::swap(&mut x, &mut x_next);
        }
        if !total.is_finite() {
            return Err(Error::NonFinite("quasi log-likelihood"));
        }
        Ok(total)
    }
}

use nalgebra::DVector;
use rayon::prelude::*;

use super::likelihood::{check_data, filter_at};
use crate::error::{Error, Result};
use crate::family::{ParamBox, SsmFamily};
use crate::linalg::{symmetrize, RealMatrix};

/// Central-difference step for gradients: `ε^{1/3} max(1, |θ_i|)`.
pub fn gradient_step(theta_i: f64) -> f64 {
    f64::EPSILON.cbrt() * theta_i.abs().max(1.0)
}

/// Central-difference step for Hessians: `ε^{1/4} max(1, |θ_i|)`.
pub fn hessian_step(theta_i: f64) -> f64 {
    f64::EPSILON.powf(0.25) * theta_i.abs().max(1.0)
}

/// Checks `θ ± steps` stays inside the box in every coordinate.
pub fn ensure_interior(bounds: &ParamBox, theta: &[f64], steps: &[f64]) -> Result<()> {
    bounds.check(theta)?;
    for (index, (&t, &s)) in theta.iter().zip(steps).enumerate() {
        if t - s < bounds.lower[index] || t + s > bounds.upper[index] {
            return Err(Error::NearBoundary { index });
        }
    }
    Ok(())
}

fn shifted(theta: &[f64], i: usize, delta: f64) -> Vec<f64> {
    let mut t = theta.to_vec();
    t[i] += delta;
    t
}

/// Central finite-difference gradient of `f`.
pub fn fd_gradient(f: &(dyn Fn(&[f64]) -> f64 + Sync), theta: &[f64]) -> Vec<f64> {
    (0..theta.len())
        .into_par_iter()
        .map(|i| {
            let s = gradient_step(theta[i]);
            (f(&shifted(theta, i, s)) - f(&shifted(theta, i, -s))) / (2.0 * s)
        })
        .collect()
}

/// Symmetrized central finite-difference Hessian of `f`.
pub fn fd_hessian(f: &(dyn Fn(&[f64]) -> f64 + Sync), theta: &[f64]) -> Result<RealMatrix> {
    let r = theta.len();
    let steps: Vec<f64> = theta.iter().map(|&t| hessian_step(t)).collect();
    let f0 = f(theta);
    let pairs: Vec<(usize, usize)> = (0..r).flat_map(|i| (i..r).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (si, sj) = (steps[i], steps[j]);
            if i == j {
                let fp = f(&shifted(theta, i, si));
                let fm = f(&shifted(theta, i, -si));
                (fp - 2.0 * f0 + fm) / (si * si)
            } else {
                let at = |a: f64, b: f64| {
                    let mut t = theta.to_vec();
                    t[i] += a;
                    t[j] += b;
                    f(&t)
                };
                (at(si, sj) - at(si, -sj) - at(-si, sj) + at(-si, -sj)) / (4.0 * si * sj)
            }
        })
        .collect();
    let mut hess = RealMatrix::zeros(r, r);
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        hess[(i, j)] = v;
        hess[(j, i)] = v;
    }
    if !f0.is_finite() || hess.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularHessian);
    }
    Ok(symmetrize(&hess))
}

fn per_term_at<F: SsmFamily + ?Sized>(family: &F, theta: &[f64], data: &RealMatrix, h: f64) -> Result<Vec<f64>> {
    let filter = filter_at(family, theta, h)?;
    Ok(filter.run(data, &DVector::zeros(filter.state_dim()))?.per_term)
}

/// `L × r` array whose row `n` is the central finite-difference gradient of `l̂_n` at `θ`.
pub fn score_sequence<F: SsmFamily + ?Sized>(family: &F, theta: &[f64], data: &RealMatrix, h: f64) -> Result<RealMatrix> {
    check_data(data)?;
    let r = family.param_count();
    let steps: Vec<f64> = theta.iter().map(|&t| gradient_step(t)).collect();
    ensure_interior(family.bounds(), theta, &steps)?;
    let columns: Vec<Result<Vec<f64>>> = (0..r)
        .into_par_iter()
        .map(|i| {
            let plus = per_term_at(family, &shifted(theta, i, steps[i]), data, h)?;
            let minus = per_term_at(family, &shifted(theta, i, -steps[i]), data, h)?;
            Ok(plus
                .iter()
                .zip(&minus)
                .map(|(p, m)| (p - m) / (2.0 * steps[i]))
                .collect())
        })
        .collect();
    let mut scores = RealMatrix::zeros(data.nrows(), r);
    for (i, col) in columns.into_iter().enumerate() {
        for (n, v) in col?.into_iter().enumerate() {
            scores[(n, i)] = v;
        }
    }
    Ok(scores)
}

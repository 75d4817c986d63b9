//! Two-stage QML fitting (global differential evolution, then Nelder–Mead),
//! standard errors, confidence intervals and identifiability pre-checks.

mod de;
mod nelder_mead;

pub use de::{differential_evolution, DeOptions, DeResult};
pub use nelder_mead::{nelder_mead, NelderMeadOptions, NelderMeadResult};

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::family::{ModelFamily, SsmFamily};
use crate::linalg::RealMatrix;
use crate::qml::{
    check_data, fisher_rank_check, objective, quasi_loglik, sandwich_covariance, FisherRankReport, InitialState,
    SandwichCovariance,
};
use crate::statespace::{structural_report, StructuralReport};

/// Coordinates within this fraction of the box width from an edge flag a boundary estimate.
pub const BOUNDARY_FRACTION: f64 = 1e-6;
/// Number of innovation autocorrelation lags in the whiteness diagnostic.
pub const WHITENESS_LAGS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub seed: u64,
    pub de_population: Option<usize>,
    pub de_generations: usize,
    pub de_restarts: usize,
    pub local_tol: f64,
    pub local_max_iter: usize,
    /// AR order of the score regression; `None` uses `⌊(L/ln L)^{1/3}⌋`.
    pub s_override: Option<usize>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            de_population: None,
            de_generations: 200,
            de_restarts: 1,
            local_tol: 1e-7,
            local_max_iter: 20_000,
            s_override: None,
        }
    }
}

/// Sample autocorrelations of each innovation component against `±3/√L`.
#[derive(Debug, Clone, PartialEq)]
pub struct WhitenessReport {
    /// `autocorrelations[k][lag − 1]` for component `k`.
    pub autocorrelations: Vec<Vec<f64>>,
    pub band: f64,
    pub fraction_within_band: f64,
}

pub fn whiteness(innovations: &RealMatrix, lags: usize) -> WhitenessReport {
    let l = innovations.nrows();
    let band = 3.0 / (l as f64).sqrt();
    let mut autocorrelations = Vec::with_capacity(innovations.ncols());
    let mut inside = 0;
    let mut total = 0;
    for col in innovations.column_iter() {
        let mean = col.mean();
        let centred: Vec<f64> = col.iter().map(|x| x - mean).collect();
        let c0: f64 = centred.iter().map(|x| x * x).sum();
        let acf: Vec<f64> = (1..=lags.min(l.saturating_sub(1)))
            .map(|lag| {
                let c: f64 = centred[lag..].iter().zip(&centred).map(|(a, b)| a * b).sum();
                if c0 > 0.0 {
                    c / c0
                } else {
                    0.0
                }
            })
            .collect();
        inside += acf.iter().filter(|r| r.abs() <= band).count();
        total += acf.len();
        autocorrelations.push(acf);
    }
    let fraction_within_band = if total == 0 { 1.0 } else { inside as f64 / total as f64 };
    WhitenessReport { autocorrelations, band, fraction_within_band }
}

#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub theta_hat: Vec<f64>,
    pub minus2_loglik: f64,
    /// Best objective after the global stage.
    pub stage1_value: f64,
    pub covariance: Option<SandwichCovariance>,
    pub covariance_error: Option<String>,
    pub de_generations: usize,
    pub local_iterations: usize,
    pub evaluations: usize,
    /// Local stage met the tolerance and `θ̂` is not on the box boundary.
    pub converged: bool,
    pub local_converged: bool,
    pub at_boundary: bool,
    /// Fewer than `10 r` observations.
    pub short_sample: bool,
    pub structural: Option<StructuralReport>,
    pub whiteness: WhitenessReport,
}

impl EstimationResult {
    pub fn stderr(&self) -> Option<&[f64]> {
        self.covariance.as_ref().map(|c| c.stderr.as_slice())
    }
}

/// Families whose `θ` also yields a continuous-time realization for structural diagnostics.
pub trait StructuralFamily {
    fn realization_at(&self, theta: &[f64]) -> Option<crate::statespace::Realization>;
}

impl StructuralFamily for ModelFamily {
    fn realization_at(&self, theta: &[f64]) -> Option<crate::statespace::Realization> {
        self.theta_to_model(theta).ok().map(|m| m.realization())
    }
}

/// Fits `θ` by minimizing `ℒ̂` over the family's box.
pub fn fit_qml<F: SsmFamily + ?Sized>(family: &F, data: &RealMatrix, h: f64, options: &FitOptions) -> Result<EstimationResult> {
    fit_qml_with(family, data, h, options, |_| None)
}

/// [`fit_qml`] for [`ModelFamily`], adding the structural report at `θ̂`.
pub fn fit_model_family(family: &ModelFamily, data: &RealMatrix, h: f64, options: &FitOptions) -> Result<EstimationResult> {
    fit_qml_with(family, data, h, options, |t| {
        family.realization_at(t).map(|r| structural_report(&r, h))
    })
}

fn fit_qml_with<F: SsmFamily + ?Sized>(
    family: &F,
    data: &RealMatrix,
    h: f64,
    options: &FitOptions,
    structural: impl Fn(&[f64]) -> Option<StructuralReport>,
) -> Result<EstimationResult> {
    check_data(data)?;
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("sampling interval must be positive, got {h}")));
    }
    let r = family.param_count();
    let bounds = family.bounds();
    let f = |t: &[f64]| objective(family, t, data, h);

    let mut best: Option<DeResult> = None;
    let mut evaluations = 0;
    for k in 0..options.de_restarts.max(1) {
        let de_opts = DeOptions {
            population: options.de_population,
            generations: options.de_generations,
            seed: options.seed.wrapping_add(k as u64),
            ..DeOptions::default()
        };
        let res = differential_evolution(&f, bounds, &de_opts)?;
        evaluations += res.evaluations;
        if best.as_ref().is_none_or(|b| res.best_value < b.best_value) {
            best = Some(res);
        }
    }
    let stage1 = best.expect("at least one restart");
    if !stage1.best_value.is_finite() {
        return Err(Error::NoFeasiblePoint);
    }

    let nm_opts = NelderMeadOptions { tol: options.local_tol, max_iter: options.local_max_iter, ..Default::default() };
    let first = nelder_mead(&f, &stage1.best, bounds, &nm_opts);
    let restart = nelder_mead(&f, &first.x, bounds, &nm_opts);
    evaluations += first.evaluations + restart.evaluations;
    let local = if restart.value <= first.value { &restart } else { &first };
    let (theta_hat, value) = if local.value <= stage1.best_value {
        (local.x.clone(), local.value)
    } else {
        (stage1.best.clone(), stage1.best_value)
    };
    let local_converged = first.converged && restart.converged;
    let at_boundary = (0..r).any(|i| {
        let tol = BOUNDARY_FRACTION * bounds.width(i);
        theta_hat[i] - bounds.lower[i] <= tol || bounds.upper[i] - theta_hat[i] <= tol
    });

    let evaluation = quasi_loglik(family, &theta_hat, data, h, &InitialState::Zero)?;
    let (covariance, covariance_error) = match sandwich_covariance(family, &theta_hat, data, h, options.s_override) {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(EstimationResult {
        minus2_loglik: evaluation.minus2_loglik,
        stage1_value: stage1.best_value,
        covariance,
        covariance_error,
        de_generations: stage1.generations,
        local_iterations: first.iterations + restart.iterations,
        evaluations,
        converged: local_converged && !at_boundary,
        local_converged,
        at_boundary,
        short_sample: data.nrows() < 10 * r,
        structural: structural(&theta_hat),
        whiteness: whiteness(&evaluation.innovations, WHITENESS_LAGS),
        theta_hat: {
            debug_assert!((value - evaluation.minus2_loglik).abs() <= 1e-9 * (1.0 + value.abs()));
            theta_hat
        },
    })
}

/// `θ̂_i ± z_{(1+level)/2} · stderr_i`.
pub fn confidence_intervals(result: &EstimationResult, level: f64) -> Result<Vec<(f64, f64)>> {
    let stderr = result
        .stderr()
        .ok_or_else(|| Error::InvalidArgument("estimation result has no covariance".into()))?;
    intervals(&result.theta_hat, stderr, level)
}

pub fn intervals(theta: &[f64], stderr: &[f64], level: f64) -> Result<Vec<(f64, f64)>> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::InvalidArgument(format!("confidence level must lie in [0, 1), got {level}")));
    }
    if stderr.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("standard errors"));
    }
    let z = Normal::standard().inverse_cdf(0.5 * (1.0 + level));
    Ok(theta.iter().zip(stderr).map(|(t, s)| (t - z * s, t + z * s)).collect())
}

/// Aggregated structural and Fisher-rank diagnostics at a probe `θ`.
#[derive(Debug, Clone)]
pub struct IdentifiabilityReport {
    pub pass: bool,
    pub reasons: Vec<String>,
    pub structural: Option<StructuralReport>,
    pub fisher: Option<FisherRankReport>,
}

pub fn precheck_identifiability(family: &ModelFamily, theta_probe: &[f64], h: f64, j0: usize) -> IdentifiabilityReport {
    let mut reasons = Vec::new();
    let structural = match family.theta_to_model(theta_probe) {
        Ok(m) => {
            let rep = structural_report(&m.realization(), h);
            if !rep.minimal {
                reasons.push("realization is not minimal".to_string());
            }
            if !rep.spectrum_in_strip {
                reasons.push("spectrum outside strip |Im λ| < π/h".to_string());
            }
            if !rep.kalman_bertram_ok {
                reasons.push("Kalman-Bertram criterion violated (aliased eigenvalues)".to_string());
            }
            Some(rep)
        }
        Err(e) => {
            reasons.push(format!("inadmissible probe: {e}"));
            None
        }
    };
    let fisher = match fisher_rank_check(family, theta_probe, h, j0) {
        Ok(rep) => {
            if !rep.pass {
                reasons.push(format!("Fisher rank deficient: rank {} < {}", rep.rank, rep.required));
            }
            Some(rep)
        }
        Err(e) => {
            reasons.push(format!("Fisher rank check failed: {e}"));
            None
        }
    };
    IdentifiabilityReport { pass: reasons.is_empty(), reasons, structural, fisher }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ninety_five_percent_interval() {
        let ci = intervals(&[1.0], &[0.1], 0.95).unwrap();
        assert!((ci[0].0 - 0.804).abs() < 5e-4 && (ci[0].1 - 1.196).abs() < 5e-4);
        let degenerate = intervals(&[1.0], &[0.1], 0.0).unwrap();
        assert!((degenerate[0].0 - 1.0).abs() < 1e-12 && (degenerate[0].1 - 1.0).abs() < 1e-12);
        assert!(intervals(&[1.0], &[f64::NAN], 0.9).is_err());
        assert!(intervals(&[1.0], &[0.1], 1.0).is_err());
    }

    #[test]
    fn white_noise_is_white() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
        let data = RealMatrix::from_fn(4000, 2, |_, _| StandardNormal.sample(&mut rng));
        let w = whiteness(&data, 20);
        assert!(w.fraction_within_band >= 0.9);
        assert_eq!(w.autocorrelations.len(), 2);
    }
}

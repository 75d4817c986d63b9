use std::path::{Path, PathBuf};

use carma_qml::family::{nu12_family, nu12_theta0, ModelFamily, ParamBox, SigmaSpec};
use carma_qml::levy::{Driver, NigParams};
use carma_qml::linalg::RealMatrix;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Estimate,
    Spectrum,
    Check,
}

/// A complete run description. Every field has a default; the defaults describe
/// the bivariate `ν = (1, 2)` NIG simulation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub family: FamilyConfig,
    /// True or probe parameter; used by `simulate`, `spectrum`, `check` and for biases.
    pub theta: Option<Vec<f64>>,
    /// Sampling interval; inferred from the data times by `estimate` when absent.
    pub h: Option<f64>,
    pub simulation: SimulationConfig,
    pub estimation: EstimationConfig,
    pub spectrum: SpectrumConfig,
    pub check: CheckConfig,
    pub data: Vec<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            family: FamilyConfig::default(),
            theta: None,
            h: None,
            simulation: SimulationConfig::default(),
            estimation: EstimationConfig::default(),
            spectrum: SpectrumConfig::default(),
            check: CheckConfig::default(),
            data: Vec::new(),
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilyConfig {
    pub nu: Vec<usize>,
    pub normalized: bool,
    pub sigma: SigmaConfig,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self { nu: vec![1, 2], normalized: true, sigma: SigmaConfig::Estimated, lower: None, upper: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaConfig {
    Estimated,
    Fixed(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub t_end: f64,
    pub dt: f64,
    pub driver: DriverConfig,
    pub seed: u64,
    pub replicates: usize,
    pub x0: Option<Vec<f64>>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { t_end: 2000.0, dt: 0.01, driver: DriverConfig::default(), seed: 0, replicates: 1, x0: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DriverConfig {
    Nig {
        #[serde(default = "nig_delta")]
        delta: f64,
        #[serde(default = "nig_alpha")]
        alpha: f64,
        #[serde(default = "nig_beta")]
        beta: Vec<f64>,
        #[serde(default = "nig_delta_matrix")]
        delta_matrix: Vec<Vec<f64>>,
        /// Location; `None` centres the law at zero mean.
        #[serde(default)]
        mu: Option<Vec<f64>>,
    },
    Brownian {
        sigma: Vec<Vec<f64>>,
    },
}

fn nig_delta() -> f64 {
    1.0
}

fn nig_alpha() -> f64 {
    3.0
}

fn nig_beta() -> Vec<f64> {
    vec![1.0, 1.0]
}

fn nig_delta_matrix() -> Vec<Vec<f64>> {
    vec![vec![1.25, -0.5], vec![-0.5, 1.0]]
}

impl Default for DriverConfig {
    fn default() -> Self {
        DriverConfig::Nig { delta: nig_delta(), alpha: nig_alpha(), beta: nig_beta(), delta_matrix: nig_delta_matrix(), mu: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationConfig {
    pub seed: u64,
    pub de_population: Option<usize>,
    pub de_generations: usize,
    pub de_restarts: usize,
    pub local_tol: f64,
    pub local_max_iter: usize,
    pub s_override: Option<usize>,
    pub confidence_level: f64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        let o = carma_qml::estimation::FitOptions::default();
        Self {
            seed: o.seed,
            de_population: o.de_population,
            de_generations: o.de_generations,
            de_restarts: o.de_restarts,
            local_tol: o.local_tol,
            local_max_iter: o.local_max_iter,
            s_override: o.s_override,
            confidence_level: 0.95,
        }
    }
}

impl EstimationConfig {
    pub fn fit_options(&self, seed: u64) -> carma_qml::estimation::FitOptions {
        carma_qml::estimation::FitOptions {
            seed,
            de_population: self.de_population,
            de_generations: self.de_generations,
            de_restarts: self.de_restarts,
            local_tol: self.local_tol,
            local_max_iter: self.local_max_iter,
            s_override: self.s_override,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { omega_min: 0.0, omega_max: std::f64::consts::PI, points: 257 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    pub j0: usize,
    /// Probe for the check; falls back to `theta`.
    pub theta_probe: Option<Vec<f64>>,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self { j0: 2, theta_probe: None }
    }
}

pub fn load(path: Option<&Path>) -> CliResult<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))
}

fn matrix(rows: &[Vec<f64>], what: &str) -> CliResult<RealMatrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(CliError::config(format!("{what} must be a non-empty rectangular array")));
    }
    Ok(RealMatrix::from_fn(n, rows[0].len(), |i, j| rows[i][j]))
}

impl RunConfig {
    fn is_default_family(&self) -> bool {
        self.family.nu == [1, 2] && self.family.normalized && self.family.sigma == SigmaConfig::Estimated
    }

    /// Fills the box and `θ` defaults and validates the family, driver and grid.
    pub fn resolve(mut self) -> CliResult<Resolved> {
        let family = self.build_family()?;
        let r = family.param_count();
        if self.theta.is_none() && self.is_default_family() {
            self.theta = Some(nu12_theta0());
        }
        if let Some(theta) = &self.theta {
            if theta.len() != r {
                return Err(CliError::config(format!("theta has {} entries, the family has {r} parameters", theta.len())));
            }
        }
        if let Some(probe) = &self.check.theta_probe {
            if probe.len() != r {
                return Err(CliError::config(format!("check.theta_probe has {} entries, expected {r}", probe.len())));
            }
        }
        if let Some(h) = self.h {
            if !(h > 0.0 && h.is_finite()) {
                return Err(CliError::config(format!("h must be positive, got {h}")));
            }
        }
        if !(0.0..1.0).contains(&self.estimation.confidence_level) {
            return Err(CliError::config("estimation.confidence_level must lie in [0, 1)"));
        }
        if self.spectrum.points == 0 || !(self.spectrum.omega_max >= self.spectrum.omega_min) {
            return Err(CliError::config("spectrum grid needs points > 0 and omega_max >= omega_min"));
        }
        let driver = self.build_driver()?;
        let b = family.theta_box.clone();
        self.family.lower = Some(b.lower.clone());
        self.family.upper = Some(b.upper.clone());
        Ok(Resolved { config: self, family, driver })
    }

    fn build_family(&self) -> CliResult<ModelFamily> {
        let f = &self.family;
        if self.is_default_family() && f.lower.is_none() && f.upper.is_none() {
            return Ok(nu12_family());
        }
        let (Some(lower), Some(upper)) = (&f.lower, &f.upper) else {
            return Err(CliError::config("family.lower and family.upper are required for a non-default family"));
        };
        let theta_box = ParamBox::new(lower.clone(), upper.clone()).map_err(|e| CliError::config(e.to_string()))?;
        let sigma = match &f.sigma {
            SigmaConfig::Estimated => SigmaSpec::Estimated,
            SigmaConfig::Fixed(rows) => SigmaSpec::Fixed(matrix(rows, "family.sigma.fixed")?),
        };
        ModelFamily::echelon(f.nu.clone(), f.normalized, sigma, theta_box).map_err(|e| CliError::config(e.to_string()))
    }

    fn build_driver(&self) -> CliResult<Driver> {
        match &self.simulation.driver {
            DriverConfig::Brownian { sigma } => Ok(Driver::Brownian { sigma: matrix(sigma, "driver sigma")? }),
            DriverConfig::Nig { delta, alpha, beta, delta_matrix, mu } => {
                let dm = matrix(delta_matrix, "driver delta_matrix")?;
                let beta = DVector::from_vec(beta.clone());
                let mu = match mu {
                    Some(m) => DVector::from_vec(m.clone()),
                    None => {
                        if dm.nrows() != beta.len() {
                            return Err(CliError::config("driver beta and delta_matrix dimensions disagree"));
                        }
                        let k2 = alpha * alpha - beta.dot(&(&dm * &beta));
                        if !(k2 > 0.0) {
                            return Err(CliError::config("NIG driver needs alpha^2 > beta' Delta beta"));
                        }
                        -(&dm * &beta) * (delta / k2.sqrt())
                    }
                };
                NigParams::new(mu, *alpha, beta, *delta, dm)
                    .map(Driver::Nig)
                    .map_err(|e| CliError::config(e.to_string()))
            }
        }
    }
}

/// A validated configuration with its family and driver.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub family: ModelFamily,
    pub driver: Driver,
}

impl Resolved {
    pub fn theta(&self) -> CliResult<&[f64]> {
        self.config
            .theta
            .as_deref()
            .ok_or_else(|| CliError::config("this command needs theta for a non-default family"))
    }
}

//! Parametrized model families `θ ↦ (A_θ, B_θ, C_θ, Σᴸ_θ)` over a box `Θ`.

use crate::error::{Error, Result};
use crate::linalg::{is_positive_definite, RealMatrix};
use crate::mcarma::{echelon_ssm, EchelonAlpha, KroneckerStructure, Normalization};
use crate::statespace::{sample_ct_model, ContinuousSsm, DiscreteSsm};

/// Closed per-coordinate bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ParamBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Dimension(format!(
                "box bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() || l > u {
                return Err(Error::InvalidArgument(format!("box coordinate {i} has bounds [{l}, {u}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// `center ± half_width` in every coordinate.
    pub fn around(center: &[f64], half_width: &[f64]) -> Result<Self> {
        if center.len() != half_width.len() {
            return Err(Error::Dimension("center and half-width lengths differ".into()));
        }
        Self::new(
            center.iter().zip(half_width).map(|(c, w)| c - w).collect(),
            center.iter().zip(half_width).map(|(c, w)| c + w).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .enumerate()
                .all(|(i, &t)| t >= self.lower[i] && t <= self.upper[i])
    }

    pub fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "theta has length {}, family expects {}",
                theta.len(),
                self.dim()
            )));
        }
        for (index, &value) in theta.iter().enumerate() {
            let (lower, upper) = (self.lower[index], self.upper[index]);
            if !(value >= lower && value <= upper) {
                return Err(Error::OutOfBox { index, value, lower, upper });
            }
        }
        Ok(())
    }

    pub fn clamp(&self, theta: &mut [f64]) {
        for (i, t) in theta.iter_mut().enumerate() {
            *t = t.clamp(self.lower[i], self.upper[i]);
        }
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }
}

/// Anything that maps `θ` to a sampled discrete-time model at spacing `h`.
pub trait SsmFamily: Sync {
    fn param_count(&self) -> usize;
    fn bounds(&self) -> &ParamBox;
    fn discrete_model(&self, theta: &[f64], h: f64) -> Result<DiscreteSsm>;
}

/// Model entry filled by a θ coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// `α_{ij,k}` with zero-based `i, j` and one-based `k`.
    Alpha { i: usize, j: usize, k: usize },
    /// Entry of `B`, or of `K = TB` for normalized families.
    Input { row: usize, col: usize },
    /// Position in `vech(Σᴸ)`.
    SigmaVech(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SigmaSpec {
    Estimated,
    Fixed(RealMatrix),
}

/// Echelon family with a wiring of θ coordinates to model slots.
///
/// Each coordinate fills one or more slots and a slot's value is the sum of the
/// coordinates wired to it; unwired slots are zero (apart from the entries the
/// normalization overwrites).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFamily {
    pub structure: KroneckerStructure,
    pub input_dim: usize,
    pub normalization: Normalization,
    pub wiring: Vec<Vec<Slot>>,
    pub sigma: SigmaSpec,
    pub theta_box: ParamBox,
}

impl ModelFamily {
    pub fn new(
        structure: KroneckerStructure,
        input_dim: usize,
        normalization: Normalization,
        wiring: Vec<Vec<Slot>>,
        sigma: SigmaSpec,
        theta_box: ParamBox,
    ) -> Result<Self> {
        let d = structure.d();
        let n = structure.state_dim();
        if input_dim == 0 {
            return Err(Error::InvalidArgument("input dimension must be positive".into()));
        }
        if let Normalization::H0(h0) = &normalization {
            if h0.shape() != (d, input_dim) {
                return Err(Error::Dimension(format!("H0 is {:?}, expected {d}x{input_dim}", h0.shape())));
            }
        }
        if wiring.len() != theta_box.dim() {
            return Err(Error::Dimension(format!(
                "{} wired coordinates but the box has {}",
                wiring.len(),
                theta_box.dim()
            )));
        }
        let vech_len = input_dim * (input_dim + 1) / 2;
        for (idx, slots) in wiring.iter().enumerate() {
            if slots.is_empty() {
                return Err(Error::InvalidArgument(format!("theta coordinate {idx} fills no slot")));
            }
            for slot in slots {
                let ok = match *slot {
                    Slot::Alpha { i, j, k } => i < d && j < d && k >= 1 && k <= structure.nu_ij[(i, j)],
                    Slot::Input { row, col } => {
                        row < n
                            && col < input_dim
                            && !(matches!(normalization, Normalization::H0(_)) && structure.is_block_first_row(row))
                    }
                    Slot::SigmaVech(p) => p < vech_len && sigma == SigmaSpec::Estimated,
                };
                if !ok {
                    return Err(Error::InvalidArgument(format!("theta coordinate {idx} has invalid slot {slot:?}")));
                }
            }
        }
        if let SigmaSpec::Fixed(s) = &sigma {
            if s.shape() != (input_dim, input_dim) || !is_positive_definite(s) {
                return Err(Error::NotPd("fixed Levy covariance"));
            }
        }
        Ok(Self { structure, input_dim, normalization, wiring, sigma, theta_box })
    }

    /// Default coordinate order: every `α_{ij,k}` (by `i`, then `j`, then `k`), the free
    /// input entries row by row, then `vech(Σᴸ)` when estimated.
    pub fn default_slots(
        structure: &KroneckerStructure,
        input_dim: usize,
        normalized: bool,
        sigma_estimated: bool,
    ) -> Vec<Slot> {
        let d = structure.d();
        let mut slots = Vec::new();
        for i in 0..d {
            for j in 0..d {
                for k in 1..=structure.nu_ij[(i, j)] {
                    slots.push(Slot::Alpha { i, j, k });
                }
            }
        }
        for row in 0..structure.state_dim() {
            if normalized && structure.is_block_first_row(row) {
                continue;
            }
            for col in 0..input_dim {
                slots.push(Slot::Input { row, col });
            }
        }
        if sigma_estimated {
            for p in 0..input_dim * (input_dim + 1) / 2 {
                slots.push(Slot::SigmaVech(p));
            }
        }
        slots
    }

    /// Echelon family for Kronecker indices `nu`, normalized to `H(0) = −I` when
    /// `normalized`, with one coordinate per slot in the default order.
    pub fn echelon(nu: Vec<usize>, normalized: bool, sigma: SigmaSpec, theta_box: ParamBox) -> Result<Self> {
        let structure = KroneckerStructure::new(nu)?;
        let m = structure.d();
        let slots = Self::default_slots(&structure, m, normalized, sigma == SigmaSpec::Estimated);
        let normalization = if normalized {
            Normalization::minus_identity(m)
        } else {
            Normalization::None
        };
        Self::new(structure, m, normalization, slots.into_iter().map(|s| vec![s]).collect(), sigma, theta_box)
    }

    pub fn param_count(&self) -> usize {
        self.wiring.len()
    }

    pub fn output_dim(&self) -> usize {
        self.structure.d()
    }

    pub fn state_dim(&self) -> usize {
        self.structure.state_dim()
    }

    /// Model at `θ` without the box, stability or definiteness checks.
    pub fn assemble(&self, theta: &[f64]) -> Result<(crate::statespace::Realization, RealMatrix)> {
        if theta.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "theta has length {}, family expects {}",
                theta.len(),
                self.param_count()
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("theta"));
        }
        let m = self.input_dim;
        let mut alpha: EchelonAlpha = self.structure.zero_alpha();
        let mut input = RealMatrix::zeros(self.state_dim(), m);
        let mut vech = vec![0.0; m * (m + 1) / 2];
        for (slots, &t) in self.wiring.iter().zip(theta) {
            for slot in slots {
                match *slot {
                    Slot::Alpha { i, j, k } => alpha.coeffs[i][j][k - 1] += t,
                    Slot::Input { row, col } => input[(row, col)] += t,
                    Slot::SigmaVech(p) => vech[p] += t,
                }
            }
        }
        let realization = echelon_ssm(&self.structure, &alpha, &input, &self.normalization)?;
        let sigma = match &self.sigma {
            SigmaSpec::Estimated => crate::linalg::unvech(&vech)?,
            SigmaSpec::Fixed(s) => s.clone(),
        };
        Ok((realization, sigma))
    }

    /// `θ ↦ (A_θ, B_θ, C_θ, Σᴸ_θ)`, rejecting out-of-box `θ`, non-PD `Σᴸ` and any
    /// eigenvalue of `A_θ` with nonnegative real part.
    pub fn theta_to_model(&self, theta: &[f64]) -> Result<ContinuousSsm> {
        self.theta_box.check(theta)?;
        let (r, sigma) = self.assemble(theta)?;
        if !is_positive_definite(&sigma) {
            return Err(Error::NotPd("Levy covariance"));
        }
        let m = r.with_levy_covariance(sigma)?;
        if let Some(eigenvalue) = m.eigenvalues().into_iter().find(|l| !(l.re < 0.0)) {
            return Err(Error::Unstable { eigenvalue });
        }
        Ok(m)
    }
}

impl SsmFamily for ModelFamily {
    fn param_count(&self) -> usize {
        self.wiring.len()
    }

    fn bounds(&self) -> &ParamBox {
        &self.theta_box
    }

    fn discrete_model(&self, theta: &[f64], h: f64) -> Result<DiscreteSsm> {
        sample_ct_model(&self.theta_to_model(theta)?, h)
    }
}

/// Structural and input parameters of the bivariate `ν = (1, 2)` simulation model.
pub const NU12_THETA0: [f64; 7] = [-1.0, -2.0, 1.0, -2.0, -3.0, 1.0, 2.0];
/// `vech(Σᴸ)` of the NIG driver used with [`NU12_THETA0`].
pub const NU12_SIGMA_VECH: [f64; 3] = [0.4751, -0.1622, 0.3708];

/// Full ten-coordinate truth of the `ν = (1, 2)` simulation model.
pub fn nu12_theta0() -> Vec<f64> {
    NU12_THETA0.iter().chain(NU12_SIGMA_VECH.iter()).copied().collect()
}

/// Normalized `ν = (1, 2)` family with estimated `Σᴸ` and the default search box:
/// `±2` around the truth for the seven structural coordinates, `[0.05, 2]` for the
/// variances and `[−1, 1]` for the covariance.
pub fn nu12_family() -> ModelFamily {
    let mut lower: Vec<f64> = NU12_THETA0.iter().map(|t| t - 2.0).collect();
    let mut upper: Vec<f64> = NU12_THETA0.iter().map(|t| t + 2.0).collect();
    lower.extend([0.05, -1.0, 0.05]);
    upper.extend([2.0, 1.0, 2.0]);
    ModelFamily::echelon(
        vec![1, 2],
        true,
        SigmaSpec::Estimated,
        ParamBox::new(lower, upper).expect("static bounds"),
    )
    .expect("static family")
}

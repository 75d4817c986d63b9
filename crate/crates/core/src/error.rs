use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the numerical kernels, model constructors and estimators.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix contains non-finite entries ({0})")]
    NonFinite(&'static str),

    #[error("state matrix is not stable: eigenvalue {eigenvalue} has real part >= 0")]
    Unstable { eigenvalue: Complex64 },

    #[error("transition matrix spectral radius {radius} is not below one")]
    NotSchurStable { radius: f64 },

    #[error("matrix {0} is not positive semidefinite")]
    NotPsd(&'static str),

    #[error("matrix {0} is not positive definite")]
    NotPd(&'static str),

    #[error("innovation covariance H*Omega*H' + S is singular")]
    SingularInnovationCovariance,

    #[error("Riccati iteration did not converge within {iterations} iterations")]
    RiccatiNoConvergence { iterations: usize },

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("evaluation point {z} lies on a pole of the resolvent")]
    Singularity { z: Complex64 },

    #[error("parameter {index} = {value} lies outside the box [{lower}, {upper}]")]
    OutOfBox {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("parameter {index} is closer than the finite-difference step to the box boundary")]
    NearBoundary { index: usize },

    #[error("parameter vector cannot be normalized: {0}")]
    NonNormalizable(String),

    #[error("Levy driver parameters invalid: {0}")]
    Driver(String),

    #[error("observations contain NaN or infinite values")]
    BadData,

    #[error("no admissible parameter vector was found in the box")]
    NoFeasiblePoint,

    #[error("Hessian of the quasi log-likelihood is singular")]
    SingularHessian,

    #[error("autoregressive polynomial of the score sequence is singular at one")]
    SingularArPolynomial,
}

pub type Result<T> = std::result::Result<T, Error>;

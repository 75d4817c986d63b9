//! Lévy-driven multivariate CARMA models: state space and Echelon forms,
//! exact sampling, steady-state Kalman filtering, quasi maximum likelihood
//! estimation with sandwich standard errors, and Euler simulation with Brownian
//! or normal-inverse Gaussian drivers.

pub mod error;
pub mod estimation;
pub mod family;
pub mod levy;
pub mod linalg;
pub mod mcarma;
pub mod qml;
pub mod simulate;
pub mod statespace;

pub use error::{Error, Result};

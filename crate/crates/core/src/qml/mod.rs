//! Steady-state Kalman filtering, the quasi log-likelihood, scores and the
//! sandwich covariance of the QML estimator.

mod filter;
mod identifiability;
mod likelihood;
mod sandwich;
mod score;

pub use filter::{steady_state_filter, QmlEvaluation, SteadyStateFilter};
pub use identifiability::{fisher_rank_check, psi_vector, FisherRankReport, FISHER_RANK_TOLERANCE};
pub use likelihood::{check_data, filter_at, objective, quasi_loglik, InitialState};
pub use sandwich::{
    default_ar_order, long_run_covariance, sandwich_covariance, sandwich_from_parts, SandwichCovariance,
    NEGATIVE_EIGENVALUE_REPORT,
};
pub use score::{ensure_interior, fd_gradient, fd_hessian, gradient_step, hessian_step, score_sequence};

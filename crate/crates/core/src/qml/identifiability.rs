use rayon::prelude::*;

use super::filter::steady_state_filter;
use super::score::{ensure_interior, gradient_step};
use crate::error::{Error, Result};
use crate::family::SsmFamily;
use crate::linalg::{vec, RealMatrix};
use crate::statespace::DiscreteSsm;

/// Singular values at or below this fraction of the largest count as zero.
pub const FISHER_RANK_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct FisherRankReport {
    pub rank: usize,
    pub required: usize,
    pub pass: bool,
    pub singular_values: Vec<f64>,
}

/// `ψ_j = [vec(HK); vec(HFK); …; vec(HF^jK); vec V]` of the steady-state filter.
pub fn psi_vector(m: &DiscreteSsm, j: usize) -> Result<Vec<f64>> {
    let filter = steady_state_filter(m)?;
    let mut out = Vec::with_capacity((j + 2) * m.output_dim().pow(2));
    let mut fk = filter.gain.clone();
    for _ in 0..=j {
        out.extend(vec(&(&m.h * &fk)).iter());
        fk = &m.f * fk;
    }
    out.extend(vec(&filter.innov_cov).iter());
    Ok(out)
}

/// Numerical rank of the finite-difference Jacobian `∂ψ_{θ,j₀}/∂θ`; passes when it equals `r`.
pub fn fisher_rank_check<F: SsmFamily + ?Sized>(family: &F, theta0: &[f64], h: f64, j0: usize) -> Result<FisherRankReport> {
    if j0 < 1 {
        return Err(Error::InvalidArgument("j0 must be at least 1".into()));
    }
    let r = family.param_count();
    let steps: Vec<f64> = theta0.iter().map(|&t| gradient_step(t)).collect();
    ensure_interior(family.bounds(), theta0, &steps)?;
    let columns: Vec<Result<Vec<f64>>> = (0..r)
        .into_par_iter()
        .map(|i| {
            let mut plus = theta0.to_vec();
            let mut minus = theta0.to_vec();
            plus[i] += steps[i];
            minus[i] -= steps[i];
            let p = psi_vector(&family.discrete_model(&plus, h)?, j0)?;
            let m = psi_vector(&family.discrete_model(&minus, h)?, j0)?;
            Ok(p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * steps[i])).collect())
        })
        .collect();
    let columns = columns.into_iter().collect::<Result<Vec<_>>>()?;
    let rows = columns[0].len();
    let jac = RealMatrix::from_fn(rows, r, |a, b| columns[b][a]);
    let sv = jac.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let rank = if smax == 0.0 {
        0
    } else {
        sv.iter().filter(|&&s| s > FISHER_RANK_TOLERANCE * smax).count()
    };
    let mut singular_values: Vec<f64> = sv.iter().copied().collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    Ok(FisherRankReport { rank, required: r, pass: rank == r, singular_values })
}

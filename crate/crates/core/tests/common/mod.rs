#![allow(dead_code)]

use carma_qml::family::{ModelFamily, ParamBox, SigmaSpec};
use carma_qml::linalg::RealMatrix;
use carma_qml::statespace::ContinuousSsm;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> RealMatrix {
    RealMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn scalar(x: f64) -> RealMatrix {
    RealMatrix::from_element(1, 1, x)
}

/// Random matrix shifted so that every eigenvalue has real part at most `-margin`.
pub fn random_stable(rng: &mut impl Rng, n: usize, margin: f64) -> RealMatrix {
    let mut a = gaussian_matrix(rng, n, n) / (n as f64).sqrt();
    let worst = carma_qml::linalg::eigenvalues(&a).iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    let shift = worst + margin + rng.random::<f64>();
    for i in 0..n {
        a[(i, i)] -= shift;
    }
    a
}

pub fn random_pd(rng: &mut impl Rng, n: usize) -> RealMatrix {
    let g = gaussian_matrix(rng, n, n);
    &g * g.transpose() / n as f64 + RealMatrix::identity(n, n) * 0.2
}

pub fn random_model(rng: &mut impl Rng, n: usize, m: usize, d: usize) -> ContinuousSsm {
    let a = random_stable(rng, n, 0.2);
    let b = gaussian_matrix(rng, n, m);
    let c = gaussian_matrix(rng, d, n);
    let sigma = random_pd(rng, m);
    ContinuousSsm::new(a, b, c, sigma).unwrap()
}

/// `e^M` from a plain Taylor series of `M / 2^s` followed by `s` squarings.
pub fn taylor_exp(m: &RealMatrix) -> RealMatrix {
    let n = m.nrows();
    let norm = m.norm();
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = m / 2f64.powi(s);
    let mut term = RealMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Composite Simpson rule for `∫₀ᵀ e^{Au} W e^{A'u} du` with `panels` panels.
pub fn simpson_gramian(a: &RealMatrix, w: &RealMatrix, t: f64, panels: usize) -> RealMatrix {
    let n = a.nrows();
    let du = t / panels as f64;
    let half = taylor_exp(&(a * (0.5 * du)));
    let mut e = RealMatrix::identity(n, n);
    let mut acc = RealMatrix::zeros(n, n);
    for k in 0..=2 * panels {
        let weight = if k == 0 || k == 2 * panels {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += (&e * w * e.transpose()) * weight;
        e = &half * e;
    }
    acc * (du / 6.0)
}

pub fn rel_err(a: &RealMatrix, b: &RealMatrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Scalar normalized family `A = θ₁`, `B = θ₁`, `C = 1`, `Σᴸ = θ₂`.
pub fn car1_family(lower: [f64; 2], upper: [f64; 2]) -> ModelFamily {
    ModelFamily::echelon(
        vec![1],
        true,
        SigmaSpec::Estimated,
        ParamBox::new(lower.to_vec(), upper.to_vec()).unwrap(),
    )
    .unwrap()
}

/// Ornstein–Uhlenbeck `dY = −aY dt + σ dW`.
pub fn ou(a: f64, sigma: f64) -> ContinuousSsm {
    ContinuousSsm::new(scalar(-a), scalar(1.0), scalar(1.0), scalar(sigma * sigma)).unwrap()
}

/// Normalized Echelon family for `nu` with `Σᴸ` fixed to the identity and a `[-6, 6]` box.
pub fn bivariate_family(nu: &[usize]) -> ModelFamily {
    let s = carma_qml::mcarma::KroneckerStructure::new(nu.to_vec()).unwrap();
    let r = ModelFamily::default_slots(&s, nu.len(), true, false).len();
    ModelFamily::echelon(
        nu.to_vec(),
        true,
        SigmaSpec::Fixed(RealMatrix::identity(nu.len(), nu.len())),
        ParamBox::new(vec![-6.0; r], vec![6.0; r]).unwrap(),
    )
    .unwrap()
}

/// Uniform draw from `[-3, 3]^r` accepted once the family yields a stable model.
pub fn random_admissible(rng: &mut impl Rng, family: &ModelFamily) -> Vec<f64> {
    loop {
        let theta: Vec<f64> = (0..family.param_count()).map(|_| rng.random_range(-3.0..3.0)).collect();
        if family.theta_to_model(&theta).is_ok() {
            return theta;
        }
    }
}

/// `dY = −θ₁ Y dt + dW` observed at spacing `h`.
pub struct OuRate {
    pub bounds: ParamBox,
}

impl carma_qml::family::SsmFamily for OuRate {
    fn param_count(&self) -> usize {
        1
    }

    fn bounds(&self) -> &ParamBox {
        &self.bounds
    }

    fn discrete_model(&self, theta: &[f64], h: f64) -> carma_qml::Result<carma_qml::statespace::DiscreteSsm> {
        if !(theta[0] > 0.0) {
            return Err(carma_qml::Error::InvalidArgument("rate must be positive".into()));
        }
        carma_qml::statespace::sample_ct_model(&ou(theta[0], 1.0), h)
    }
}

/// Discrete AR(1) `X_n = φ X_{n−1} + Z`, `Var Z = 1 − φ²`, observed without noise.
pub struct UnitVarianceAr1 {
    pub bounds: ParamBox,
}

impl carma_qml::family::SsmFamily for UnitVarianceAr1 {
    fn param_count(&self) -> usize {
        1
    }

    fn bounds(&self) -> &ParamBox {
        &self.bounds
    }

    fn discrete_model(&self, theta: &[f64], _h: f64) -> carma_qml::Result<carma_qml::statespace::DiscreteSsm> {
        let phi = theta[0];
        carma_qml::statespace::DiscreteSsm::without_measurement_noise(scalar(phi), scalar(1.0), scalar(1.0 - phi * phi))
    }
}

/// `−2 log` of the exact Gaussian density of an equidistantly sampled OU path.
pub fn ou_exact_terms(y: &[f64], a: f64, sigma2: f64, h: f64) -> Vec<f64> {
    let phi = (-a * h).exp();
    let stationary = sigma2 / (2.0 * a);
    let v = stationary * (1.0 - phi * phi);
    let l2pi = (2.0 * std::f64::consts::PI).ln();
    let mut out = vec![l2pi + stationary.ln() + y[0] * y[0] / stationary];
    for n in 1..y.len() {
        let e = y[n] - phi * y[n - 1];
        out.push(l2pi + v.ln() + e * e / v);
    }
    out
}

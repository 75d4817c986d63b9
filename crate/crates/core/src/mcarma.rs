//! MCARMA polynomial pairs, the companion state space form, and Echelon
//! canonical parametrizations for prescribed Kronecker indices.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, to_complex, ComplexMatrix, RealMatrix};
use crate::statespace::Realization;

/// Polynomial pair `(P, Q)` with `H(z) = P(z)^{-1} Q(z)`.
///
/// Coefficients are stored in ascending powers: `P(z) = Σ_k P_k z^k`,
/// `Q(z) = Σ_k Q_k z^k`. The leading coefficient of `P` need not be the identity
/// (Echelon forms are generally not monic); [`McarmaPolynomials::from_monic`]
/// builds the usual `P(z) = Iz^p + A₁z^{p−1} + … + A_p`, `Q(z) = B₀z^q + … + B_q`.
#[derive(Debug, Clone, PartialEq)]
pub struct McarmaPolynomials {
    pub p_coeffs: Vec<RealMatrix>,
    pub q_coeffs: Vec<RealMatrix>,
}

impl McarmaPolynomials {
    pub fn new(p_coeffs: Vec<RealMatrix>, q_coeffs: Vec<RealMatrix>) -> Result<Self> {
        if p_coeffs.len() < 2 || q_coeffs.is_empty() {
            return Err(Error::InvalidArgument("P needs degree at least 1 and Q at least one coefficient".into()));
        }
        let d = p_coeffs[0].nrows();
        let m = q_coeffs[0].ncols();
        if d == 0 || m == 0 {
            return Err(Error::Dimension("empty polynomial coefficients".into()));
        }
        if p_coeffs.iter().any(|c| c.shape() != (d, d)) || q_coeffs.iter().any(|c| c.shape() != (d, m)) {
            return Err(Error::Dimension("polynomial coefficients have inconsistent shapes".into()));
        }
        for c in p_coeffs.iter().chain(q_coeffs.iter()) {
            ensure_finite(c, "polynomial coefficient")?;
        }
        if q_coeffs.len() >= p_coeffs.len() {
            return Err(Error::InvalidArgument(format!(
                "MA order q = {} must be below AR order p = {}",
                q_coeffs.len() - 1,
                p_coeffs.len() - 1
            )));
        }
        Ok(Self { p_coeffs, q_coeffs })
    }

    /// `ar = [A₁, …, A_p]`, `ma = [B₀, …, B_q]` in the descending convention.
    pub fn from_monic(ar: Vec<RealMatrix>, ma: Vec<RealMatrix>) -> Result<Self> {
        if ar.is_empty() || ma.is_empty() {
            return Err(Error::InvalidArgument("need p ≥ 1 and at least B₀".into()));
        }
        let d = ar[0].nrows();
        let mut p_coeffs: Vec<RealMatrix> = ar.into_iter().rev().collect();
        p_coeffs.push(RealMatrix::identity(d, d));
        let q_coeffs: Vec<RealMatrix> = ma.into_iter().rev().collect();
        Self::new(p_coeffs, q_coeffs)
    }

    pub fn p(&self) -> usize {
        self.p_coeffs.len() - 1
    }

    pub fn q(&self) -> usize {
        self.q_coeffs.len() - 1
    }

    pub fn output_dim(&self) -> usize {
        self.p_coeffs[0].nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.q_coeffs[0].ncols()
    }

    pub fn is_monic(&self) -> bool {
        let d = self.output_dim();
        self.p_coeffs[self.p()] == RealMatrix::identity(d, d)
    }

    /// `A₁, …, A_p` of a monic `P`.
    pub fn ar_coeffs(&self) -> Result<Vec<RealMatrix>> {
        if !self.is_monic() {
            return Err(Error::InvalidArgument("P is not monic".into()));
        }
        Ok(self.p_coeffs[..self.p()].iter().rev().cloned().collect())
    }

    /// `B₀, …, B_q` in the descending convention.
    pub fn ma_coeffs(&self) -> Vec<RealMatrix> {
        self.q_coeffs.iter().rev().cloned().collect()
    }

    pub fn eval_p(&self, z: Complex64) -> ComplexMatrix {
        horner(&self.p_coeffs, z)
    }

    pub fn eval_q(&self, z: Complex64) -> ComplexMatrix {
        horner(&self.q_coeffs, z)
    }

    /// `P(z)^{-1} Q(z)`.
    pub fn transfer_function(&self, z: Complex64) -> Result<ComplexMatrix> {
        self.eval_p(z)
            .lu()
            .solve(&self.eval_q(z))
            .ok_or(Error::Singularity { z })
    }
}

fn horner(coeffs: &[RealMatrix], z: Complex64) -> ComplexMatrix {
    let mut acc = to_complex(coeffs.last().expect("non-empty"));
    for c in coeffs.iter().rev().skip(1) {
        acc = acc * z + to_complex(c);
    }
    acc
}

/// Companion state space form `(𝒜, ℬ, 𝒞)` of a monic MCARMA(p, q) pair.
pub fn mcarma_to_ssm(polys: &McarmaPolynomials) -> Result<Realization> {
    let p = polys.p();
    let q = polys.q();
    if q >= p {
        return Err(Error::InvalidArgument(format!("MA order q = {q} must be below AR order p = {p}")));
    }
    let ar = polys.ar_coeffs()?;
    let ma = polys.ma_coeffs();
    let d = polys.output_dim();
    let m = polys.input_dim();
    let n = p * d;
    let mut a = RealMatrix::zeros(n, n);
    for k in 0..p - 1 {
        a.view_mut((k * d, (k + 1) * d), (d, d)).copy_from(&RealMatrix::identity(d, d));
    }
    for (i, ai) in ar.iter().enumerate() {
        // bottom block row: (−A_p, …, −A₁)
        a.view_mut(((p - 1) * d, (p - 1 - i) * d), (d, d)).copy_from(&(-ai));
    }
    let mut beta: Vec<RealMatrix> = Vec::with_capacity(p);
    for k in 1..=p {
        let mut bk = RealMatrix::zeros(d, m);
        if p - k <= q {
            bk += &ma[q - (p - k)];
            for i in 1..k {
                bk -= &ar[i - 1] * &beta[k - i - 1];
            }
        }
        beta.push(bk);
    }
    let mut b = RealMatrix::zeros(n, m);
    for (k, bk) in beta.iter().enumerate() {
        b.view_mut((k * d, 0), (d, m)).copy_from(bk);
    }
    let mut c = RealMatrix::zeros(d, n);
    c.view_mut((0, 0), (d, d)).copy_from(&RealMatrix::identity(d, d));
    Realization::new(a, b, c)
}

/// Kronecker indices `ν₁..ν_d` (all positive) with `ν_ij = min(ν_i + 1{i>j}, ν_j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KroneckerStructure {
    pub nu: Vec<usize>,
    pub nu_ij: DMatrix<usize>,
}

impl KroneckerStructure {
    pub fn new(nu: Vec<usize>) -> Result<Self> {
        if nu.is_empty() {
            return Err(Error::InvalidArgument("at least one Kronecker index is required".into()));
        }
        if nu.iter().any(|&v| v == 0) {
            return Err(Error::InvalidArgument(
                "zero Kronecker indices (free rows of C) are not supported".into(),
            ));
        }
        let d = nu.len();
        let nu_ij = DMatrix::from_fn(d, d, |i, j| (nu[i] + usize::from(i > j)).min(nu[j]));
        Ok(Self { nu, nu_ij })
    }

    pub fn d(&self) -> usize {
        self.nu.len()
    }

    /// McMillan degree `N = Σ ν_i`.
    pub fn state_dim(&self) -> usize {
        self.nu.iter().sum()
    }

    /// Index of the first state belonging to output block `i`.
    pub fn offset(&self, i: usize) -> usize {
        self.nu[..i].iter().sum()
    }

    pub fn p(&self) -> usize {
        *self.nu.iter().max().expect("non-empty")
    }

    pub fn alpha_count(&self) -> usize {
        self.nu_ij.iter().sum()
    }

    pub fn is_block_first_row(&self, row: usize) -> bool {
        (0..self.d()).any(|i| self.offset(i) == row)
    }

    /// An all-zero coefficient set of the right shape.
    pub fn zero_alpha(&self) -> EchelonAlpha {
        let d = self.d();
        EchelonAlpha {
            coeffs: (0..d)
                .map(|i| (0..d).map(|j| vec![0.0; self.nu_ij[(i, j)]]).collect())
                .collect(),
        }
    }
}

/// Coefficients `α_{ij,k}`, stored as `coeffs[i][j][k−1]` with `k = 1..ν_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct EchelonAlpha {
    pub coeffs: Vec<Vec<Vec<f64>>>,
}

impl EchelonAlpha {
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.coeffs[i][j][k - 1]
    }

    fn check(&self, s: &KroneckerStructure) -> Result<()> {
        let d = s.d();
        let ok = self.coeffs.len() == d
            && self.coeffs.iter().enumerate().all(|(i, row)| {
                row.len() == d && row.iter().enumerate().all(|(j, c)| c.len() == s.nu_ij[(i, j)])
            });
        if !ok {
            return Err(Error::Dimension("alpha coefficient counts do not match the Kronecker structure".into()));
        }
        if self.coeffs.iter().flatten().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("alpha"));
        }
        Ok(())
    }

    /// The `d×d` matrix `(α_{ij,1})`.
    pub fn leading(&self) -> RealMatrix {
        let d = self.coeffs.len();
        RealMatrix::from_fn(d, d, |i, j| self.coeffs[i][j][0])
    }
}

/// Multi-companion `A` and selector `C` of the Echelon realization.
pub fn echelon_a_c(s: &KroneckerStructure, alpha: &EchelonAlpha) -> Result<(RealMatrix, RealMatrix)> {
    alpha.check(s)?;
    let d = s.d();
    let n = s.state_dim();
    let mut a = RealMatrix::zeros(n, n);
    let mut c = RealMatrix::zeros(d, n);
    for i in 0..d {
        let oi = s.offset(i);
        for r in 0..s.nu[i] - 1 {
            a[(oi + r, oi + r + 1)] = 1.0;
        }
        let last = oi + s.nu[i] - 1;
        for j in 0..d {
            let oj = s.offset(j);
            for (k, &v) in alpha.coeffs[i][j].iter().enumerate() {
                a[(last, oj + k)] = v;
            }
        }
        c[(i, oi)] = 1.0;
    }
    Ok((a, c))
}

/// Block matrix `T` with `K = TB`.
pub fn echelon_t(s: &KroneckerStructure, alpha: &EchelonAlpha) -> Result<RealMatrix> {
    alpha.check(s)?;
    let d = s.d();
    let n = s.state_dim();
    let mut t = RealMatrix::zeros(n, n);
    for i in 0..d {
        let oi = s.offset(i);
        for j in 0..d {
            let oj = s.offset(j);
            let nij = s.nu_ij[(i, j)];
            for r in 0..s.nu[i] {
                for col in 0..s.nu[j] {
                    let k = r + col + 2;
                    if k <= nij {
                        t[(oi + r, oj + col)] -= alpha.get(i, j, k);
                    }
                    if i == j && r + col + 1 == s.nu[i] {
                        t[(oi + r, oj + col)] += 1.0;
                    }
                }
            }
        }
    }
    Ok(t)
}

/// Normalization `H(0) = H₀` imposed through `B`.
#[derive(Debug, Clone, PartialEq)]
pub enum Normalization {
    None,
    H0(RealMatrix),
}

impl Normalization {
    pub fn minus_identity(d: usize) -> Self {
        Normalization::H0(-RealMatrix::identity(d, d))
    }
}

/// Echelon realization `(A, B, C)`.
///
/// Without normalization `input` is `B` itself. With `H(0) = H₀`, `input` holds
/// `K = TB`; its block-first rows are overwritten by `−(α_{kl,1})H₀` and
/// `B = T^{-1}K`.
pub fn echelon_ssm(
    s: &KroneckerStructure,
    alpha: &EchelonAlpha,
    input: &RealMatrix,
    normalization: &Normalization,
) -> Result<Realization> {
    let (a, c) = echelon_a_c(s, alpha)?;
    let b = match normalization {
        Normalization::None => {
            check_input(s, input)?;
            input.clone()
        }
        Normalization::H0(_) => {
            let k = normalized_k(s, alpha, input, normalization)?;
            let t = echelon_t(s, alpha)?;
            t.lu()
                .solve(&k)
                .ok_or_else(|| Error::NonNormalizable("T is singular".into()))?
        }
    };
    Realization::new(a, b, c)
}

fn check_input(s: &KroneckerStructure, input: &RealMatrix) -> Result<()> {
    if input.nrows() != s.state_dim() || input.ncols() == 0 {
        return Err(Error::Dimension(format!(
            "input matrix is {:?}, expected {} rows",
            input.shape(),
            s.state_dim()
        )));
    }
    ensure_finite(input, "B")
}

fn normalized_k(
    s: &KroneckerStructure,
    alpha: &EchelonAlpha,
    input: &RealMatrix,
    normalization: &Normalization,
) -> Result<RealMatrix> {
    check_input(s, input)?;
    let Normalization::H0(h0) = normalization else {
        return Ok(input.clone());
    };
    let d = s.d();
    let m = input.ncols();
    if h0.shape() != (d, m) {
        return Err(Error::Dimension(format!("H0 is {:?}, expected {d}x{m}", h0.shape())));
    }
    let lead = alpha.leading();
    if lead.clone().lu().determinant() == 0.0 {
        return Err(Error::NonNormalizable("(alpha_ij,1) is singular, so A is singular and H(0) is undefined".into()));
    }
    let fixed = -&lead * h0;
    let mut k = input.clone();
    for i in 0..d {
        k.row_mut(s.offset(i)).copy_from(&fixed.row(i));
    }
    Ok(k)
}

/// Left matrix fraction description `P^{-1}Q` of the Echelon realization.
pub fn echelon_mfd(
    s: &KroneckerStructure,
    alpha: &EchelonAlpha,
    input: &RealMatrix,
    normalization: &Normalization,
) -> Result<McarmaPolynomials> {
    alpha.check(s)?;
    let k = match normalization {
        Normalization::None => {
            check_input(s, input)?;
            echelon_t(s, alpha)? * input
        }
        Normalization::H0(_) => normalized_k(s, alpha, input, normalization)?,
    };
    let d = s.d();
    let m = k.ncols();
    let p = s.p();
    let mut pc = vec![RealMatrix::zeros(d, d); p + 1];
    let mut qc = vec![RealMatrix::zeros(d, m); p];
    for i in 0..d {
        pc[s.nu[i]][(i, i)] += 1.0;
        for j in 0..d {
            for (kk, &v) in alpha.coeffs[i][j].iter().enumerate() {
                pc[kk][(i, j)] -= v;
            }
        }
        let oi = s.offset(i);
        for kk in 0..s.nu[i] {
            for j in 0..m {
                qc[kk][(i, j)] = k[(oi + kk, j)];
            }
        }
    }
    while qc.len() > 1 && qc.last().is_some_and(|c| c.iter().all(|&x| x == 0.0)) {
        qc.pop();
    }
    McarmaPolynomials::new(pc, qc)
}

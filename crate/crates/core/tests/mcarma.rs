mod common;

use carma_qml::linalg::RealMatrix;
use carma_qml::mcarma::{echelon_mfd, echelon_ssm, echelon_t, KroneckerStructure, Normalization};
use carma_qml::family::{ModelFamily, Slot};
use carma_qml::statespace::{structural_report, transfer_function};
use common::*;
use num_complex::Complex64;
use rand::Rng;

const INDICES: [&[usize]; 4] = [&[1, 1], &[1, 2], &[2, 1], &[2, 2]];

fn m(rows: usize, cols: usize, v: &[f64]) -> RealMatrix {
    RealMatrix::from_row_slice(rows, cols, v)
}

#[test]
fn nu11_realization() {
    let t = [-1.3, 0.4, -0.2, -2.1];
    let r = bivariate_family(&[1, 1]).theta_to_model(&t).unwrap();
    let a = m(2, 2, &t);
    assert!((&r.a - &a).norm() < 1e-14);
    assert!((&r.b - &a).norm() < 1e-12);
    assert_eq!(r.c, RealMatrix::identity(2, 2));
}

#[test]
fn nu12_realization() {
    let t = [-1.0, -2.0, 1.0, -2.0, -3.0, 1.0, 2.0];
    let r = bivariate_family(&[1, 2]).theta_to_model(&t).unwrap();
    assert!((&r.a - m(3, 3, &[t[0], t[1], 0.0, 0.0, 0.0, 1.0, t[2], t[3], t[4]])).norm() < 1e-14);
    let b = m(3, 2, &[t[0], t[1], t[5], t[6], t[2] + t[4] * t[5], t[3] + t[4] * t[6]]);
    assert!((&r.b - b).norm() < 1e-12);
    assert_eq!(r.c, m(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]));
}

#[test]
fn nu21_realization() {
    let t = [-2.0, -3.0, 0.5, 0.3, 0.2, -1.5, 0.7, -0.4];
    let r = bivariate_family(&[2, 1]).theta_to_model(&t).unwrap();
    assert!((&r.a - m(3, 3, &[0.0, 1.0, 0.0, t[0], t[1], t[2], t[3], t[4], t[5]])).norm() < 1e-14);
    let b = m(
        3,
        2,
        &[t[6], t[7], t[0] + t[1] * t[6], t[2] + t[1] * t[7], t[3] + t[4] * t[6], t[5] + t[4] * t[7]],
    );
    assert!((&r.b - b).norm() < 1e-12);
    assert_eq!(r.c, m(2, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]));
}

#[test]
fn nu22_realization() {
    let t = [-2.0, -3.0, 0.5, 0.1, 0.3, -0.2, -1.0, -2.5, 0.7, -0.4, 0.9, 1.1];
    let r = bivariate_family(&[2, 2]).theta_to_model(&t).unwrap();
    let a = m(
        4,
        4,
        &[0.0, 1.0, 0.0, 0.0, t[0], t[1], t[2], t[3], 0.0, 0.0, 0.0, 1.0, t[4], t[5], t[6], t[7]],
    );
    assert!((&r.a - a).norm() < 1e-14);
    let b = m(
        4,
        2,
        &[
            t[8],
            t[9],
            t[0] + t[3] * t[10] + t[1] * t[8],
            t[2] + t[1] * t[9] + t[3] * t[11],
            t[10],
            t[11],
            t[4] + t[7] * t[10] + t[5] * t[8],
            t[6] + t[5] * t[9] + t[7] * t[11],
        ],
    );
    assert!((&r.b - &b).norm() < 1e-12, "{} vs {b}", r.b);
    assert_eq!(r.c, m(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]));
}

fn polys_of(nu: &[usize], theta: &[f64]) -> carma_qml::mcarma::McarmaPolynomials {
    let fam = bivariate_family(nu);
    let s = &fam.structure;
    let mut alpha = s.zero_alpha();
    let mut input = RealMatrix::zeros(s.state_dim(), 2);
    for (slots, t) in fam.wiring.iter().zip(theta) {
        match slots[0] {
            Slot::Alpha { i, j, k } => alpha.coeffs[i][j][k - 1] = *t,
            Slot::Input { row, col } => input[(row, col)] = *t,
            Slot::SigmaVech(_) => unreachable!(),
        }
    }
    echelon_mfd(s, &alpha, &input, &fam.normalization).unwrap()
}

fn eval(p: &carma_qml::mcarma::McarmaPolynomials, z: f64) -> (RealMatrix, RealMatrix) {
    let z = Complex64::new(z, 0.0);
    (p.eval_p(z).map(|c| c.re), p.eval_q(z).map(|c| c.re))
}

#[test]
fn nu11_polynomials() {
    let t = [-1.3, 0.4, -0.2, -2.1];
    let p = polys_of(&[1, 1], &t);
    assert_eq!((p.p(), p.q()), (1, 0));
    for z in [0.0, 1.5, -0.7] {
        let (pz, qz) = eval(&p, z);
        assert!((pz - m(2, 2, &[z - t[0], -t[1], -t[2], z - t[3]])).norm() < 1e-12);
        assert!((qz - m(2, 2, &t)).norm() < 1e-12);
    }
}

#[test]
fn polynomials_with_reversed_coefficient_labels() {
    let t = [-1.0, -2.0, 1.0, -2.0, -3.0, 1.0, 2.0];
    let ours = [t[0], t[1], t[2], t[4], t[3], t[5], t[6]];
    let p = polys_of(&[1, 2], &ours);
    assert_eq!((p.p(), p.q()), (2, 1));
    for z in [0.0, 1.5, -0.7, 2.2] {
        let (pz, qz) = eval(&p, z);
        assert!((pz - m(2, 2, &[z - t[0], -t[1], -t[2], z * z - t[3] * z - t[4]])).norm() < 1e-12);
        assert!((qz - m(2, 2, &[t[0], t[1], t[5] * z + t[2], t[6] * z + t[4]])).norm() < 1e-12);
    }

    let t = [-2.0, -3.0, 0.5, 0.3, 0.2, -1.5, 0.7, -0.4];
    let ours = [t[1], t[0], t[2], t[4], t[3], t[5], t[6], t[7]];
    let p = polys_of(&[2, 1], &ours);
    assert_eq!((p.p(), p.q()), (2, 1));
    for z in [0.0, 1.5, -0.7, 2.2] {
        let (pz, qz) = eval(&p, z);
        assert!((pz - m(2, 2, &[z * z - t[0] * z - t[1], -t[2], -t[3] * z - t[4], z - t[5]])).norm() < 1e-12);
        assert!((qz - m(2, 2, &[t[6] * z + t[1], t[7] * z + t[2], t[4], t[5]])).norm() < 1e-12);
    }
}

#[test]
fn families_are_minimal_at_random_theta() {
    let mut r = rng(17);
    for nu in INDICES {
        let fam = bivariate_family(nu);
        for _ in 0..50 {
            let theta = random_admissible(&mut r, &fam);
            let model = fam.theta_to_model(&theta).unwrap();
            assert!(structural_report(&model.realization(), 1.0).minimal, "nu {nu:?} theta {theta:?}");
        }
    }
}

#[test]
fn normalized_families_have_minus_identity_at_zero() {
    let mut r = rng(19);
    for nu in INDICES {
        let fam = bivariate_family(nu);
        for _ in 0..50 {
            let theta = random_admissible(&mut r, &fam);
            let model = fam.theta_to_model(&theta).unwrap();
            let h0 = transfer_function(&model.realization(), Complex64::new(0.0, 0.0)).unwrap();
            let gap = h0.iter().enumerate().map(|(k, z)| (z - if k % 3 == 0 { -1.0 } else { 0.0 }).norm()).fold(0.0, f64::max);
            assert!(gap <= 1e-10, "nu {nu:?}: {gap}");
        }
    }
}

#[test]
fn fraction_and_realization_agree() {
    let mut r = rng(23);
    for nu in INDICES {
        for normalized in [true, false] {
            let s = KroneckerStructure::new(nu.to_vec()).unwrap();
            let mut alpha = s.zero_alpha();
            for c in alpha.coeffs.iter_mut().flatten().flatten() {
                *c = r.random_range(-2.0..2.0);
            }
            let input = gaussian_matrix(&mut r, s.state_dim(), 2);
            let norm = if normalized { Normalization::minus_identity(2) } else { Normalization::None };
            let real = echelon_ssm(&s, &alpha, &input, &norm).unwrap();
            let mfd = echelon_mfd(&s, &alpha, &input, &norm).unwrap();
            for _ in 0..20 {
                let z = Complex64::new(r.random_range(-3.0..3.0), r.random_range(-3.0..3.0));
                let a = transfer_function(&real, z).unwrap();
                let b = mfd.transfer_function(z).unwrap();
                assert!((&a - &b).norm() <= 1e-8 * a.norm(), "nu {nu:?} z {z}");
            }
        }
    }
}

#[test]
fn t_matrix_is_unimodular() {
    let mut r = rng(29);
    for nu in INDICES {
        let s = KroneckerStructure::new(nu.to_vec()).unwrap();
        for _ in 0..20 {
            let mut alpha = s.zero_alpha();
            for c in alpha.coeffs.iter_mut().flatten().flatten() {
                *c = r.random_range(-3.0..3.0);
            }
            let det = echelon_t(&s, &alpha).unwrap().determinant();
            assert!((det.abs() - 1.0).abs() < 1e-12, "nu {nu:?}: {det}");
        }
    }
}

#[test]
fn state_dimension_is_index_sum() {
    for nu in [vec![1], vec![3, 1], vec![2, 2, 1]] {
        let s = KroneckerStructure::new(nu.clone()).unwrap();
        let fam = ModelFamily::default_slots(&s, nu.len(), true, true);
        assert_eq!(s.state_dim(), nu.iter().sum::<usize>());
        let d = nu.len();
        assert_eq!(fam.len(), s.alpha_count() + (s.state_dim() - d) * d + d * (d + 1) / 2);
    }
    assert!(KroneckerStructure::new(vec![1, 0]).is_err());
}

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use carma_qml::estimation::{fit_model_family, FitOptions};
use carma_qml::family::{nu12_family, nu12_theta0, ModelFamily, ParamBox, SigmaSpec, Slot};
use carma_qml::levy::{levy_increments, Driver, NigParams};
use carma_qml::linalg::{riccati_map, solve_dare, solve_lyapunov_ct, vanloan_gramian, ComplexMatrix, RealMatrix};
use carma_qml::mcarma::{echelon_mfd, echelon_ssm, KroneckerStructure, Normalization};
use carma_qml::qml::{fisher_rank_check, objective, quasi_loglik, InitialState};
use carma_qml::simulate::{euler_simulate, exact_gaussian_sample, sample_path};
use carma_qml::statespace::{
    sample_ct_model, spectral_density_ct, spectral_density_dt, structural_report, transfer_function, ContinuousSsm,
    Realization,
};
use common::*;
use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

const INDICES: [&[usize]; 4] = [&[1, 1], &[1, 2], &[2, 1], &[2, 2]];
const REPLICATES: usize = 25;
const SAMPLE_SD: [f64; 10] = [0.0354, 0.0479, 0.1276, 0.1009, 0.1587, 0.1285, 0.0987, 0.0457, 0.0306, 0.0286];
const NAMES: [&str; 10] = ["θ1", "θ2", "θ3", "θ4", "θ5", "θ6", "θ7", "σ11", "σ12", "σ22"];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn solver_residuals() -> Outcome {
    let mut r = rng(3);
    let (mut dare, mut lyap, mut quad, mut semi) = (0f64, 0f64, 0f64, 0f64);
    for k in 0..100 {
        let n = 1 + k % 8;
        let d = 1 + r.random_range(0..n.min(3));
        let model = random_model(&mut r, n, n, d);
        let w = &model.b * &model.sigma_l * model.b.transpose();

        let g = solve_lyapunov_ct(&model.a, &w).unwrap();
        lyap = lyap.max((&model.a * &g + &g * model.a.transpose() + &w).norm());

        let h = r.random_range(0.2..1.5);
        let gram = vanloan_gramian(&model.a, &model.b, &model.sigma_l, h).unwrap();
        quad = quad.max(rel_err(&gram, &simpson_gramian(&model.a, &w, h, 10_000)));
        let (h1, h2) = (0.4 * h, 0.6 * h);
        let g1 = vanloan_gramian(&model.a, &model.b, &model.sigma_l, h1).unwrap();
        let g2 = vanloan_gramian(&model.a, &model.b, &model.sigma_l, h2).unwrap();
        let e1 = carma_qml::linalg::expm(&(&model.a * h1)).unwrap();
        semi = semi.max((&gram - (&g1 + &e1 * g2 * e1.transpose())).norm());

        let dm = sample_ct_model(&model, h).unwrap();
        let om = solve_dare(&dm.f, &dm.h, &dm.q, &dm.s, &dm.r).unwrap();
        dare = dare.max((riccati_map(&dm.f, &dm.h, &dm.q, &dm.s, &dm.r, &om).unwrap() - &om).norm());
    }
    outcome(
        dare <= 1e-10 && lyap <= 1e-12 && quad <= 1e-8 && semi <= 1e-10,
        format!("max DARE {dare:.2e}, Lyapunov {lyap:.2e}, Gramian vs quadrature {quad:.2e}, semigroup {semi:.2e}"),
    )
}

fn exact_likelihood_oracle() -> Outcome {
    let y = exact_gaussian_sample(&ou(1.0, 1.0), 1.0, 2000, 4).unwrap();
    let yv: Vec<f64> = y.column(0).iter().copied().collect();
    let fam = car1_family([-5.0, 0.01], [-0.01, 5.0]);
    let mut worst = 0f64;
    for (a, s2) in [(1.0, 1.0), (0.6, 1.7), (2.3, 0.4)] {
        let eval = quasi_loglik(&fam, &[-a, s2], &y, 1.0, &InitialState::Zero).unwrap();
        let oracle = ou_exact_terms(&yv, a, s2 * a * a, 1.0);
        for n in 1..y.nrows() {
            worst = worst.max((eval.per_term[n] - oracle[n]).abs());
        }
    }
    let rate = OuRate { bounds: ParamBox::new(vec![0.01], vec![10.0]).unwrap() };
    let grid: Vec<f64> = (0..101).map(|k| 0.5 + k as f64 * 0.01).collect();
    let argmin = |f: &dyn Fn(f64) -> f64| grid.iter().copied().min_by(|a, b| f(*a).total_cmp(&f(*b))).unwrap();
    let qml = argmin(&|a| objective(&rate, &[a], &y, 1.0));
    let exact = argmin(&|a| ou_exact_terms(&yv, a, 1.0, 1.0).iter().sum());
    outcome(
        worst <= 1e-10 && qml == exact,
        format!("max per-term gap {worst:.2e}, grid argmin qml {qml:.2} exact {exact:.2}"),
    )
}

fn nig_moments() -> Outcome {
    let inc = levy_increments(&Driver::Nig(NigParams::bivariate_skewed()), 1.0, 1_000_000, 2).unwrap();
    let n = inc.nrows() as f64;
    let mean = inc.row_mean();
    let mut c = inc.clone();
    for mut row in c.row_iter_mut() {
        row -= &mean;
    }
    let cov = c.transpose() * &c / (n - 1.0);
    let target = RealMatrix::from_row_slice(2, 2, &[0.4751, -0.1622, -0.1622, 0.3708]);
    let rel = rel_err(&cov, &target);
    let mx = mean.amax();
    outcome(rel <= 0.02 && mx <= 0.005, format!("covariance rel. error {rel:.4}, max |mean| {mx:.4}"))
}

fn folding_gap(m: &ContinuousSsm, h: f64, omega: f64) -> f64 {
    let dm = sample_ct_model(m, h).unwrap();
    let lhs = spectral_density_dt(&dm, omega).unwrap() / Complex64::new(2.0 * PI, 0.0);
    let d = m.output_dim();
    let mut sum = ComplexMatrix::zeros(d, d);
    for k in -10_000i64..=10_000 {
        sum += spectral_density_ct(m, (omega + 2.0 * PI * k as f64) / h).unwrap();
    }
    (lhs - sum / Complex64::new(h, 0.0)).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn aliasing_identity() -> Outcome {
    let bivariate = ContinuousSsm::new(
        RealMatrix::from_row_slice(2, 2, &[-1.0, 0.5, -0.3, -2.0]),
        RealMatrix::identity(2, 2) * 0.5,
        RealMatrix::identity(2, 2),
        RealMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.8]),
    )
    .unwrap();
    let omegas: Vec<f64> = (0..20).map(|i| -PI + 2.0 * PI * (i as f64 + 0.5) / 20.0).collect();
    let worst = |m: &ContinuousSsm| omegas.par_iter().map(|&w| folding_gap(m, 1.0, w)).reduce(|| 0.0, f64::max);
    let (a, b) = (worst(&ou(1.0, 1.0)), worst(&bivariate));
    outcome(a <= 1e-6 && b <= 1e-6, format!("max gap OU {a:.2e}, bivariate {b:.2e}"))
}

fn duplicated_family() -> ModelFamily {
    let s = KroneckerStructure::new(vec![1, 1]).unwrap();
    let mut wiring: Vec<Vec<Slot>> = ModelFamily::default_slots(&s, 2, true, true).into_iter().map(|x| vec![x]).collect();
    wiring.push(vec![Slot::Alpha { i: 0, j: 0, k: 1 }]);
    ModelFamily::new(
        s,
        2,
        Normalization::minus_identity(2),
        wiring,
        SigmaSpec::Estimated,
        ParamBox::new(vec![-5.0; 8], vec![5.0; 8]).unwrap(),
    )
    .unwrap()
}

fn structural_diagnostics() -> Outcome {
    let mut r = rng(17);
    let mut non_minimal = 0;
    for nu in INDICES {
        let fam = bivariate_family(nu);
        for _ in 0..50 {
            let theta = random_admissible(&mut r, &fam);
            if !structural_report(&fam.theta_to_model(&theta).unwrap().realization(), 1.0).minimal {
                non_minimal += 1;
            }
        }
    }
    let dup = fisher_rank_check(&duplicated_family(), &[-0.7, 0.4, -0.3, -2.1, 0.8, 0.1, 0.6, -0.5], 1.0, 2).unwrap();
    let a = RealMatrix::from_row_slice(2, 2, &[-1.0, PI, -PI, -1.0]);
    let pair = Realization::new(a, RealMatrix::from_column_slice(2, 1, &[1.0, 0.0]), RealMatrix::from_row_slice(1, 2, &[1.0, 0.0]))
        .unwrap();
    let kb = structural_report(&pair, 1.0).kalman_bertram_ok;
    outcome(
        non_minimal == 0 && !dup.pass && !kb,
        format!(
            "{non_minimal} of 200 Echelon models non-minimal, duplicated family rank {} of {}, ±iπ Kalman-Bertram ok = {kb}",
            dup.rank, dup.required
        ),
    )
}

fn echelon_consistency() -> Outcome {
    let mut r = rng(23);
    let mut worst_mfd = 0f64;
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
                worst_mfd = worst_mfd.max((&a - mfd.transfer_function(z).unwrap()).norm() / a.norm());
            }
        }
    }
    let minus_i = ComplexMatrix::identity(2, 2) * Complex64::new(-1.0, 0.0);
    let mut worst_h0 = 0f64;
    for nu in INDICES {
        let fam = bivariate_family(nu);
        for _ in 0..50 {
            let m = fam.theta_to_model(&random_admissible(&mut r, &fam)).unwrap();
            let h0 = transfer_function(&m.realization(), Complex64::new(0.0, 0.0)).unwrap();
            worst_h0 = worst_h0.max((h0 - &minus_i).norm());
        }
    }
    outcome(
        worst_mfd <= 1e-8 && worst_h0 <= 1e-10,
        format!("max rel. gap P⁻¹Q vs C(zI−A)⁻¹B {worst_mfd:.2e}, max ‖H(0)+I‖ {worst_h0:.2e}"),
    )
}

fn simulated_replicate(seed: u64) -> RealMatrix {
    let m = nu12_family().theta_to_model(&nu12_theta0()).unwrap();
    let path = euler_simulate(&m, &Driver::Nig(NigParams::bivariate_skewed()), 2000.0, 0.01, &DVector::zeros(3), seed).unwrap();
    sample_path(&path, 1.0).unwrap()
}

fn init_independence() -> Outcome {
    let fam = nu12_family();
    let theta = nu12_theta0();
    let y = simulated_replicate(9);
    let mut r = rng(6);
    let x0 = DVector::from_fn(3, |_, _| r.sample::<f64, _>(rand_distr::StandardNormal)).normalize();
    let a = quasi_loglik(&fam, &theta, &y, 1.0, &InitialState::Zero).unwrap();
    let b = quasi_loglik(&fam, &theta, &y, 1.0, &InitialState::Vector(x0)).unwrap();
    let gap = (a.minus2_loglik - b.minus2_loglik).abs();
    let tail: f64 = a.per_term[100..].iter().zip(&b.per_term[100..]).map(|(x, y)| x - y).sum();
    outcome(gap <= 1e-6, format!("total difference {gap:.3e} (terms n > 100 contribute {:.1e})", tail.abs()))
}

struct Study {
    estimates: Vec<Vec<f64>>,
    stderr: Vec<Vec<f64>>,
    covariance_errors: Vec<String>,
}

fn run_study() -> Study {
    let fam = nu12_family();
    let fits: Vec<_> = (0..REPLICATES as u64)
        .into_par_iter()
        .map(|k| {
            let y = simulated_replicate(1000 + k);
            fit_model_family(&fam, &y, 1.0, &FitOptions { seed: k, ..FitOptions::default() }).unwrap()
        })
        .collect();
    let mut study = Study { estimates: Vec::new(), stderr: Vec::new(), covariance_errors: Vec::new() };
    for (k, fit) in fits.into_iter().enumerate() {
        match fit.stderr() {
            Some(se) => study.stderr.push(se.to_vec()),
            None => study.covariance_errors.push(format!("replicate {k}: {}", fit.covariance_error.unwrap_or_default())),
        }
        study.estimates.push(fit.theta_hat);
    }
    study
}

fn column_stats(rows: &[Vec<f64>], i: usize) -> (f64, f64) {
    let n = rows.len() as f64;
    let mean = rows.iter().map(|r| r[i]).sum::<f64>() / n;
    let var = rows.iter().map(|r| (r[i] - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn study_estimates(study: &Study) -> Outcome {
    let theta0 = nu12_theta0();
    let mut pass = true;
    let mut parts = Vec::new();
    for i in 0..10 {
        let (mean, sd) = column_stats(&study.estimates, i);
        let bias_ok = (mean - theta0[i]).abs() <= 3.0 * SAMPLE_SD[i] / (REPLICATES as f64).sqrt();
        let ratio = sd / SAMPLE_SD[i];
        let sd_ok = (0.5..=2.0).contains(&ratio);
        pass &= bias_ok && sd_ok;
        if !(bias_ok && sd_ok) {
            parts.push(format!("{} mean {mean:.4} sd ratio {ratio:.2}", NAMES[i]));
        }
    }
    let detail = if parts.is_empty() { "all 10 parameters within tolerance".to_string() } else { parts.join("; ") };
    outcome(pass, detail)
}

fn standard_errors(study: &Study) -> Outcome {
    let mut pass = true;
    let mut ratios = Vec::new();
    for i in 0..10 {
        let (_, sd) = column_stats(&study.estimates, i);
        let (mean_se, _) = column_stats(&study.stderr, i);
        let ratio = mean_se / sd;
        pass &= ratio > 0.6 && ratio < 2.5;
        ratios.push(format!("{} {ratio:.2}", NAMES[i]));
    }
    let failed = study.covariance_errors.len();
    pass &= study.stderr.len() >= 2;
    outcome(
        pass,
        format!("mean stderr / sample sd: {} ({failed} replicates without stderr)", ratios.join(", ")),
    )
}

fn report(index: usize, name: &str, started: Instant, o: Outcome) -> bool {
    println!(
        "criterion {index} {:<4} {name}: {} [{:.1}s]",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        started.elapsed().as_secs_f64()
    );
    o.pass
}

fn main() -> ExitCode {
    let mut all = true;
    let t = Instant::now();
    let study = run_study();
    println!("simulation study: {REPLICATES} replicates fitted in {:.1}s", t.elapsed().as_secs_f64());
    for e in &study.covariance_errors {
        println!("  no sandwich covariance for {e}");
    }
    for i in 0..10 {
        let (mean, sd) = column_stats(&study.estimates, i);
        let (se, _) = column_stats(&study.stderr, i);
        println!(
            "  {:<4} true {:>8.4} mean {:>8.4} bias {:>8.4} sd {:.4} (reference {:.4}) mean est. sd {:.4}",
            NAMES[i],
            nu12_theta0()[i],
            mean,
            mean - nu12_theta0()[i],
            sd,
            SAMPLE_SD[i],
            se
        );
    }
    all &= report(1, "simulation study estimates", t, study_estimates(&study));
    all &= report(2, "estimated vs sample standard errors", t, standard_errors(&study));
    let checks: [(&str, fn() -> Outcome); 7] = [
        ("solver residuals", solver_residuals),
        ("exact likelihood oracle", exact_likelihood_oracle),
        ("NIG moments", nig_moments),
        ("aliasing identity", aliasing_identity),
        ("structural diagnostics", structural_diagnostics),
        ("Echelon consistency", echelon_consistency),
        ("init independence", init_independence),
    ];
    for (k, (name, check)) in checks.into_iter().enumerate() {
        let t = Instant::now();
        all &= report(k + 3, name, t, check());
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

use std::path::Path;

use carma_qml::estimation::{fit_model_family, intervals, precheck_identifiability, EstimationResult};
use carma_qml::linalg::{ComplexMatrix, RealMatrix};
use carma_qml::simulate::{euler_simulate, grid_len, sample_path};
use carma_qml::statespace::{sample_ct_model, spectral_density_ct, spectral_density_dt, StructuralReport};
use nalgebra::DVector;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::Resolved;
use crate::data::{expand_data_paths, read_csv, write_csv, Observations};
use crate::error::{CliError, CliResult};

fn compute(e: carma_qml::Error) -> CliError {
    CliError::estimation(e.to_string())
}

fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("json values serialize");
    std::fs::write(path, text + "\n").map_err(|e| CliError::estimation(format!("cannot write {}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))
}

fn rows(m: &RealMatrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn structural_json(r: &StructuralReport) -> Value {
    json!({
        "controllable": r.controllable,
        "observable": r.observable,
        "minimal": r.minimal,
        "stable": r.stable,
        "kalman_bertram_ok": r.kalman_bertram_ok,
        "spectrum_in_strip": r.spectrum_in_strip,
        "mcmillan_degree_bound": r.mcmillan_degree_bound,
        "eigenvalues_of_a": r.eigenvalues_of_a.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
    })
}

fn sampling_interval(res: &Resolved) -> f64 {
    res.config.h.unwrap_or(1.0)
}

pub fn simulate(res: &Resolved) -> CliResult<Value> {
    let cfg = &res.config;
    let sim = &cfg.simulation;
    let h = sampling_interval(res);
    let steps = h / sim.dt;
    if !(sim.dt > 0.0) || (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) || steps.round() < 1.0 {
        return Err(CliError::config(format!("h = {h} must be a positive multiple of dt = {}", sim.dt)));
    }
    if !(sim.t_end >= h) {
        return Err(CliError::config(format!("t_end = {} is shorter than h = {h}", sim.t_end)));
    }
    if sim.replicates == 0 {
        return Err(CliError::config("simulation.replicates must be positive"));
    }
    if res.driver.dim() != res.family.input_dim {
        return Err(CliError::config(format!(
            "driver has dimension {}, the family needs {}",
            res.driver.dim(),
            res.family.input_dim
        )));
    }
    let model = res.family.theta_to_model(res.theta()?).map_err(|e| CliError::config(format!("theta: {e}")))?;
    let x0 = match &sim.x0 {
        Some(v) if v.len() != model.state_dim() => {
            return Err(CliError::config(format!("x0 has {} entries, the state has {}", v.len(), model.state_dim())));
        }
        Some(v) => DVector::from_vec(v.clone()),
        None => DVector::zeros(model.state_dim()),
    };
    ensure_dir(&cfg.output_dir)?;
    let files: Vec<Value> = (0..sim.replicates)
        .into_par_iter()
        .map(|k| {
            let seed = sim.seed.wrapping_add(k as u64);
            let path = euler_simulate(&model, &res.driver, sim.t_end, sim.dt, &x0, seed).map_err(compute)?;
            let y = sample_path(&path, h).map_err(compute)?;
            let name = format!("replicate_{k:04}.csv");
            write_csv(&cfg.output_dir.join(&name), h, &y)?;
            Ok(json!({ "path": name, "seed": seed, "rows": y.nrows(), "fine_rows": path.len() }))
        })
        .collect::<CliResult<_>>()?;
    let manifest = json!({
        "config": cfg,
        "h": h,
        "fine_grid_points": grid_len(sim.t_end, sim.dt),
        "files": files,
    });
    write_json(&cfg.output_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

fn load_data(res: &Resolved) -> CliResult<Vec<Observations>> {
    let paths = expand_data_paths(&res.config.data)?;
    if paths.is_empty() {
        return Err(CliError::data("no data files given (use --data or the config's data list)"));
    }
    let d = res.family.output_dim();
    paths
        .par_iter()
        .map(|p| {
            let obs = read_csv(p)?;
            if obs.values.ncols() != d {
                return Err(CliError::data(format!("{}: {} series, the family has {d}", p.display(), obs.values.ncols())));
            }
            Ok(obs)
        })
        .collect()
}

fn estimate_json(res: &Resolved, obs: &Observations, h: f64, seed: u64, fit: &EstimationResult) -> Value {
    let level = res.config.estimation.confidence_level;
    let ci = fit.stderr().and_then(|se| intervals(&fit.theta_hat, se, level).ok());
    json!({
        "config": res.config,
        "seed": seed,
        "data_file": obs.path,
        "h": h,
        "observations": obs.values.nrows(),
        "theta_hat": fit.theta_hat,
        "stderr": fit.stderr(),
        "covariance": fit.covariance.as_ref().map(|c| rows(&c.xi_hat)),
        "covariance_error": fit.covariance_error,
        "ar_order": fit.covariance.as_ref().map(|c| c.ar_order),
        "confidence_intervals": ci.map(|v| json!({ "level": level, "intervals": v })),
        "minus2_loglik": fit.minus2_loglik,
        "stage1_value": fit.stage1_value,
        "converged": fit.converged,
        "local_converged": fit.local_converged,
        "at_boundary": fit.at_boundary,
        "short_sample": fit.short_sample,
        "iterations": { "de_generations": fit.de_generations, "local": fit.local_iterations },
        "evaluations": fit.evaluations,
        "structural": fit.structural.as_ref().map(structural_json),
        "whiteness": {
            "band": fit.whiteness.band,
            "fraction_within_band": fit.whiteness.fraction_within_band,
            "autocorrelations": fit.whiteness.autocorrelations,
        },
    })
}

fn mean_sd(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.len() > 1).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (mean, sd)
}

/// Table of sample mean, bias, sample standard deviation and mean estimated standard deviation.
fn summary(res: &Resolved, fits: &[EstimationResult]) -> Value {
    let truth = res.config.theta.as_deref();
    let with_se: Vec<&[f64]> = fits.iter().filter_map(|f| f.stderr()).collect();
    let parameters: Vec<Value> = (0..res.family.param_count())
        .map(|i| {
            let est: Vec<f64> = fits.iter().map(|f| f.theta_hat[i]).collect();
            let (mean, sd) = mean_sd(&est);
            let mean_se = (!with_se.is_empty()).then(|| with_se.iter().map(|s| s[i]).sum::<f64>() / with_se.len() as f64);
            json!({
                "index": i + 1,
                "true_value": truth.map(|t| t[i]),
                "sample_mean": mean,
                "bias": truth.map(|t| mean - t[i]),
                "sample_std_dev": sd,
                "mean_est_std_dev": mean_se,
            })
        })
        .collect();
    json!({
        "config": res.config,
        "replicates": fits.len(),
        "replicates_with_stderr": with_se.len(),
        "converged": fits.iter().filter(|f| f.converged).count(),
        "parameters": parameters,
    })
}

pub fn estimate(res: &Resolved) -> CliResult<Value> {
    let cfg = &res.config;
    let data = load_data(res)?;
    let hs: Vec<f64> = data
        .iter()
        .map(|obs| match (cfg.h, obs.spacing()?) {
            (Some(h), _) | (None, Some(h)) => Ok(h),
            (None, None) => Err(CliError::data(format!("{}: cannot infer h from a single row", obs.path.display()))),
        })
        .collect::<CliResult<_>>()?;
    ensure_dir(&cfg.output_dir)?;
    let fits: Vec<EstimationResult> = data
        .par_iter()
        .zip(&hs)
        .enumerate()
        .map(|(k, (obs, &h))| {
            let seed = cfg.estimation.seed.wrapping_add(k as u64);
            let fit = fit_model_family(&res.family, &obs.values, h, &cfg.estimation.fit_options(seed))
                .map_err(|e| CliError::estimation(format!("{}: {e}", obs.path.display())))?;
            let stem = obs.path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| format!("{k}"));
            write_json(&cfg.output_dir.join(format!("estimate_{stem}.json")), &estimate_json(res, obs, h, seed, &fit))?;
            Ok(fit)
        })
        .collect::<CliResult<_>>()?;
    let s = summary(res, &fits);
    write_json(&cfg.output_dir.join("summary.json"), &s)?;
    Ok(s)
}

fn push_entries(record: &mut Vec<String>, f: &ComplexMatrix) {
    for i in 0..f.nrows() {
        for j in 0..f.ncols() {
            record.push(f[(i, j)].re.to_string());
            record.push(f[(i, j)].im.to_string());
        }
    }
}

pub fn spectrum(res: &Resolved) -> CliResult<Value> {
    let cfg = &res.config;
    let sp = &cfg.spectrum;
    let h = sampling_interval(res);
    let model = res.family.theta_to_model(res.theta()?).map_err(|e| CliError::config(format!("theta: {e}")))?;
    let sampled = sample_ct_model(&model, h).map_err(compute)?;
    let d = model.output_dim();
    let mut header = vec!["omega".to_string()];
    for kind in ["ct", "dt"] {
        for i in 1..=d {
            for j in 1..=d {
                header.push(format!("f_{kind}_{i}{j}_re"));
                header.push(format!("f_{kind}_{i}{j}_im"));
            }
        }
    }
    ensure_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("spectrum.csv");
    let err = |e: String| CliError::estimation(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(&path).map_err(|e| err(e.to_string()))?;
    w.write_record(&header).map_err(|e| err(e.to_string()))?;
    for k in 0..sp.points {
        let omega = if sp.points == 1 {
            sp.omega_min
        } else {
            sp.omega_min + (sp.omega_max - sp.omega_min) * k as f64 / (sp.points - 1) as f64
        };
        let mut record = vec![omega.to_string()];
        push_entries(&mut record, &spectral_density_ct(&model, omega).map_err(compute)?);
        push_entries(&mut record, &spectral_density_dt(&sampled, omega).map_err(compute)?);
        w.write_record(&record).map_err(|e| err(e.to_string()))?;
    }
    w.flush().map_err(|e| err(e.to_string()))?;
    let meta = json!({ "config": cfg, "h": h, "file": "spectrum.csv", "columns": header });
    write_json(&cfg.output_dir.join("spectrum.json"), &meta)?;
    Ok(meta)
}

pub fn check(res: &Resolved) -> CliResult<Value> {
    let cfg = &res.config;
    let probe = match &cfg.check.theta_probe {
        Some(p) => p.as_slice(),
        None => res.theta()?,
    };
    let h = sampling_interval(res);
    let rep = precheck_identifiability(&res.family, probe, h, cfg.check.j0);
    Ok(json!({
        "config": cfg,
        "h": h,
        "theta_probe": probe,
        "pass": rep.pass,
        "reasons": rep.reasons,
        "structural": rep.structural.as_ref().map(structural_json),
        "fisher": rep.fisher.as_ref().map(|f| json!({
            "rank": f.rank,
            "required": f.required,
            "pass": f.pass,
            "singular_values": f.singular_values,
        })),
    }))
}

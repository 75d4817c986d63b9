use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::family::ParamBox;
use crate::levy::rng_from_seed;

/// Settings for `rand/1/bin` differential evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct DeOptions {
    /// Population size; `None` means `15 r`.
    pub population: Option<usize>,
    pub generations: usize,
    pub weight: f64,
    pub crossover: f64,
    pub seed: u64,
    /// Redraws allowed for an initial member whose objective is not finite.
    pub max_redraws: usize,
}

impl Default for DeOptions {
    fn default() -> Self {
        Self { population: None, generations: 200, weight: 0.8, crossover: 0.9, seed: 0, max_redraws: 50 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeResult {
    pub best: Vec<f64>,
    pub best_value: f64,
    pub generations: usize,
    pub evaluations: usize,
}

fn pick(rng: &mut impl Rng, np: usize, exclude: &[usize]) -> usize {
    loop {
        let k = rng.random_range(0..np);
        if !exclude.contains(&k) {
            return k;
        }
    }
}

fn uniform_point(rng: &mut impl Rng, bounds: &ParamBox) -> Vec<f64> {
    (0..bounds.dim())
        .map(|i| bounds.lower[i] + rng.random::<f64>() * bounds.width(i))
        .collect()
}

/// Minimizes `f` over the box. Trial vectors are drawn sequentially from the seeded
/// generator and evaluated in parallel, so results do not depend on the thread count.
pub fn differential_evolution(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    bounds: &ParamBox,
    opts: &DeOptions,
) -> Result<DeResult> {
    let r = bounds.dim();
    let np = opts.population.unwrap_or(15 * r).max(4);
    let mut rng = rng_from_seed(opts.seed);
    let mut evaluations = 0;

    let mut pop: Vec<Vec<f64>> = (0..np).map(|_| uniform_point(&mut rng, bounds)).collect();
    let mut values: Vec<f64> = pop.par_iter().map(|x| f(x)).collect();
    evaluations += np;
    for _ in 0..opts.max_redraws {
        let bad: Vec<usize> = (0..np).filter(|&i| !values[i].is_finite()).collect();
        if bad.is_empty() {
            break;
        }
        for &i in &bad {
            pop[i] = uniform_point(&mut rng, bounds);
        }
        let redrawn: Vec<f64> = bad.par_iter().map(|&i| f(&pop[i])).collect();
        evaluations += bad.len();
        for (&i, v) in bad.iter().zip(redrawn) {
            values[i] = v;
        }
    }
    if values.iter().all(|v| !v.is_finite()) {
        return Err(Error::NoFeasiblePoint);
    }

    for _ in 0..opts.generations {
        let trials: Vec<Vec<f64>> = (0..np)
            .map(|i| {
                let a = pick(&mut rng, np, &[i]);
                let b = pick(&mut rng, np, &[i, a]);
                let c = pick(&mut rng, np, &[i, a, b]);
                let forced = rng.random_range(0..r);
                (0..r)
                    .map(|j| {
                        if j == forced || rng.random::<f64>() < opts.crossover {
                            let v = pop[a][j] + opts.weight * (pop[b][j] - pop[c][j]);
                            if v < bounds.lower[j] {
                                0.5 * (bounds.lower[j] + pop[i][j])
                            } else if v > bounds.upper[j] {
                                0.5 * (bounds.upper[j] + pop[i][j])
                            } else {
                                v
                            }
                        } else {
                            pop[i][j]
                        }
                    })
                    .collect()
            })
            .collect();
        let trial_values: Vec<f64> = trials.par_iter().map(|x| f(x)).collect();
        evaluations += np;
        for (i, (t, v)) in trials.into_iter().zip(trial_values).enumerate() {
            if v <= values[i] {
                pop[i] = t;
                values[i] = v;
            }
        }
    }
    let (best_idx, &best_value) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty population");
    Ok(DeResult { best: pop[best_idx].clone(), best_value, generations: opts.generations, evaluations })
}

//! Nelder-Mead simplex minimisation with deterministic multi-start.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadConfig {
    pub max_iterations: usize,
    /// Converged once `max f - min f` over the simplex falls below this.
    pub tolerance: f64,
    /// Extra starts from jittered copies of the initial point.
    pub restarts: usize,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
    /// Half-width of the uniform jitter applied to restart points.
    pub jitter: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            tolerance: 1e-10,
            restarts: 5,
            initial_step: 0.1,
            jitter: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Single Nelder-Mead run (reflection 1, expansion 2, contraction 0.5,
/// shrink 0.5). Non-finite objective values are treated as `+inf`.
pub fn nelder_mead<F>(f: &F, x0: &[f64], cfg: &NelderMeadConfig) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    if n == 0 {
        return Minimum {
            x: vec![],
            value: eval(&[]),
            iterations: 0,
            converged: true,
        };
    }

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += if x[i].abs() > 1e-8 {
            cfg.initial_step * x[i].abs().max(1.0)
        } else {
            cfg.initial_step
        };
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iterations {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        if spread.is_finite() && spread <= cfg.tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|x| x[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(1.0);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = along(2.0);
            let fe = eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(0.5);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=n {
            simplex[i] = best
                .iter()
                .zip(&simplex[i])
                .map(|(b, x)| b + 0.5 * (x - b))
                .collect();
            values[i] = eval(&simplex[i]);
        }
    }

    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    Minimum {
        x: simplex[best].clone(),
        value: values[best],
        iterations,
        converged,
    }
}

/// Runs Nelder-Mead from `x0` and from `cfg.restarts` jittered copies of it,
/// then polishes the best point with one more run. Returns the best converged
/// minimum, or a convergence error carrying the best point seen.
pub fn minimize<F>(f: F, x0: &[f64], cfg: &NelderMeadConfig) -> Result<Minimum>
where
    F: Fn(&[f64]) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(0x5_eed0_fa11);
    let mut starts = vec![x0.to_vec()];
    for _ in 0..cfg.restarts {
        starts.push(
            x0.iter()
                .map(|x| x + rng.random_range(-cfg.jitter..=cfg.jitter))
                .collect(),
        );
    }

    let mut best: Option<Minimum> = None;
    let mut total_iterations = 0;
    for start in &starts {
        let m = nelder_mead(&f, start, cfg);
        total_iterations += m.iterations;
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    let mut best = best.expect("at least one start");
    let polished = nelder_mead(&f, &best.x, cfg);
    total_iterations += polished.iterations;
    if polished.value <= best.value {
        best = Minimum {
            converged: polished.converged || best.converged,
            ..polished
        };
    }
    if !best.converged || !best.value.is_finite() {
        return Err(Error::Convergence {
            iterations: total_iterations,
            best_value: best.value,
            best_point: best.x,
        });
    }
    Ok(best)
}

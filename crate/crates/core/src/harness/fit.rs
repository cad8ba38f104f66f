use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::model::Trajectory;
use crate::rng::SimRng;
use crate::{Error, Result};

const BOOTSTRAP_RESAMPLES: usize = 1000;
const BOOTSTRAP_SEED: u64 = 0x5eed_b007;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub alpha: f64,
    /// Log of the fitted prefactor.
    pub intercept: f64,
    /// Percentile 95% bootstrap interval; equal to `(alpha, alpha)` for a single run.
    pub ci: (f64, f64),
    pub t_min: f64,
    pub points: usize,
}

/// Least-squares slope and intercept of `ln y` against `ln t`.
pub fn fit_power_law(times: &[f64], values: &[f64]) -> Result<(f64, f64)> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(Error::Insufficient("power-law fit needs at least two points".into()));
    }
    if times.iter().chain(values).any(|&v| !(v > 0.0)) {
        return Err(Error::Undefined("power-law fit needs positive times and values".into()));
    }
    let n = times.len() as f64;
    let xs: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Undefined("power-law fit needs distinct times".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Log-log slope of the ensemble mean `R(t)` over checkpoints `t ≥ t_min`,
/// with a run-level bootstrap confidence interval.
pub fn fit_exponent(trajs: &[Trajectory], t_min: f64) -> Result<ExponentFit> {
    let first = trajs.first().ok_or_else(|| Error::Insufficient("no trajectories".into()))?;
    let times: Vec<f64> = first.records.iter().map(|r| r.t).filter(|&t| t >= t_min && t > 0.0).collect();
    if times.len() < 4 {
        return Err(Error::Insufficient(format!(
            "need at least 4 checkpoints at t >= {t_min}, found {}",
            times.len()
        )));
    }
    // fronts[run][k] = R at times[k]
    let fronts: Vec<Vec<f64>> = trajs
        .iter()
        .map(|traj| {
            times
                .iter()
                .map(|&t| {
                    traj.at(t).map(|r| r.front as f64).ok_or_else(|| {
                        Error::Insufficient(format!("run {} has no record at t = {t}", traj.run_id))
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mean_of = |idx: &mut dyn Iterator<Item = usize>| -> Vec<f64> {
        let mut sums = vec![0.0; times.len()];
        let mut n = 0usize;
        for i in idx {
            for (s, v) in sums.iter_mut().zip(&fronts[i]) {
                *s += v;
            }
            n += 1;
        }
        sums.iter().map(|s| s / n as f64).collect()
    };

    let means = mean_of(&mut (0..trajs.len()));
    let (alpha, intercept) = fit_power_law(&times, &means)?;

    let ci = if trajs.len() > 1 {
        let mut rng = SimRng::seed_from_u64(BOOTSTRAP_SEED);
        let n = trajs.len();
        let mut slopes: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
            .filter_map(|_| {
                let m = mean_of(&mut (0..n).map(|_| rng.random_range(0..n)));
                fit_power_law(&times, &m).ok().map(|(s, _)| s)
            })
            .collect();
        if slopes.is_empty() {
            return Err(Error::Undefined("every bootstrap resample had a zero mean front".into()));
        }
        slopes.sort_by(f64::total_cmp);
        (percentile(&slopes, 0.025), percentile(&slopes, 0.975))
    } else {
        (alpha, alpha)
    };

    Ok(ExponentFit { alpha, intercept, ci, t_min, points: times.len() })
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Least-squares decay rate `c` of `mu·(1 - e^{-c·j})` against `(j, mean)` pairs.
pub fn fit_wave_rate(profile: &[(u32, f64)], mu: f64) -> Result<f64> {
    if profile.len() < 2 {
        return Err(Error::Insufficient("profile fit needs at least two offsets".into()));
    }
    let sse = |log_c: f64| -> f64 {
        let c = log_c.exp();
        profile
            .iter()
            .map(|&(j, m)| (m - mu * (1.0 - (-c * j as f64).exp())).powi(2))
            .sum()
    };
    let (lo, hi) = (1e-7f64.ln(), 10f64.ln());
    let grid = 400;
    let step = (hi - lo) / grid as f64;
    let best = (0..=grid)
        .map(|k| lo + k as f64 * step)
        .min_by(|a, b| sse(*a).total_cmp(&sse(*b)))
        .unwrap();
    let (mut a, mut b) = (best - step, best + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (sse(x1), sse(x2));
    while b - a > 1e-12 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = sse(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = sse(x2);
        }
    }
    Ok((0.5 * (a + b)).exp())
}

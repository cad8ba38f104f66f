use serde::{Deserialize, Serialize};

use rayon::prelude::*;

use super::ExperimentSpec;
use crate::analytics;
use crate::model::{TimeMode, Trajectory};
use crate::simulator::{lost_intensity, simulate_run_observed};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std: f64,
    /// `std / √n`.
    pub se: f64,
}

pub fn summarize(xs: &[f64]) -> Result<Summary> {
    if xs.is_empty() {
        return Err(Error::Insufficient("empty sample".into()));
    }
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(Summary { n, mean, std, se: std / (n as f64).sqrt() })
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Insufficient("KS test needs two non-empty samples".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = (na * nb / (na + nb)).sqrt();
    Ok((d, kolmogorov_q((en + 0.12 + 0.11 / en) * d)))
}

/// Survival function of the Kolmogorov distribution.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-12 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LostRateEstimate {
    pub t_start: f64,
    pub t_end: f64,
    /// Ensemble-mean front speed over the window.
    pub speed: f64,
    /// Ensemble-mean rate of lost-particle growth over the window.
    pub lost_rate: f64,
    pub lost_rate_se: f64,
    /// `kappa·speed²` for the time mode.
    pub predicted: f64,
    pub ratio: f64,
}

/// Compares the measured lost-particle rate on `[t_start, t_end]` with
/// `kappa·r²` evaluated at the measured speed.
pub fn lost_rate_estimate(trajs: &[Trajectory], t_start: f64, t_end: f64, mode: TimeMode) -> Result<LostRateEstimate> {
    if !(t_end > t_start) {
        return Err(Error::invalid("lost-rate window must have t_end > t_start"));
    }
    let mut dr = Vec::with_capacity(trajs.len());
    let mut dl = Vec::with_capacity(trajs.len());
    for traj in trajs {
        let (a, b) = match (traj.at(t_start), traj.at(t_end)) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::Insufficient(format!(
                    "run {} has no records at {t_start} and {t_end}",
                    traj.run_id
                )))
            }
        };
        dr.push((b.front - a.front) as f64);
        dl.push((b.lost - a.lost) as f64);
    }
    let width = t_end - t_start;
    let r = summarize(&dr)?;
    let l = summarize(&dl)?;
    let speed = r.mean / width;
    let lost_rate = l.mean / width;
    let predicted = analytics::lost_rate(speed, mode);
    if predicted == 0.0 {
        return Err(Error::Undefined("front did not move in the lost-rate window".into()));
    }
    Ok(LostRateEstimate {
        t_start,
        t_end,
        speed,
        lost_rate,
        lost_rate_se: l.se / width,
        predicted,
        ratio: lost_rate / predicted,
    })
}

/// Like [`lost_rate_estimate`], but the lost count on the window is replaced
/// by the integral of [`lost_intensity`] along each path. Both have the same
/// expectation; the integral avoids the counting noise of rare loss events.
/// `t_start` and `t_end` must be checkpoints of `spec.params`.
pub fn lost_rate_compensated(spec: &ExperimentSpec, t_start: f64, t_end: f64) -> Result<(LostRateEstimate, Vec<Trajectory>)> {
    spec.validate()?;
    let init = spec.initial_condition()?;
    let mode = spec.params.time_mode;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.parallelism)
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    let runs: Vec<(Trajectory, f64)> = pool.install(|| {
        (0..spec.runs)
            .into_par_iter()
            .map(|run_id| {
                let mut integral = 0.0;
                let traj = simulate_run_observed(&spec.params, init, run_id, |t, dt, field| {
                    let overlap = (t + dt).min(t_end) - t.max(t_start);
                    if overlap > 0.0 {
                        integral += overlap * lost_intensity(field, mode);
                    }
                })?;
                Ok((traj, integral))
            })
            .collect::<Result<_>>()
    })?;
    let (trajs, integrals): (Vec<Trajectory>, Vec<f64>) = runs.into_iter().unzip();
    let counted = lost_rate_estimate(&trajs, t_start, t_end, mode)?;
    let width = t_end - t_start;
    let l = summarize(&integrals)?;
    let lost_rate = l.mean / width;
    Ok((
        LostRateEstimate { lost_rate, lost_rate_se: l.se / width, ratio: lost_rate / counted.predicted, ..counted },
        trajs,
    ))
}

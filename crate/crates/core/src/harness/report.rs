use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::fit::{fit_exponent, fit_wave_rate, ExponentFit};
use super::stats::{summarize, Summary};
use crate::analytics::{PredictionSet, Regime};
use crate::model::{TimeMode, Trajectory};
use crate::simulator::front_profile_estimate;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub predicted: f64,
    pub empirical: Summary,
    /// `(mean - predicted) / se`; infinite when the sample has no spread.
    pub z: f64,
}

impl Comparison {
    fn new(predicted: f64, empirical: Summary) -> Self {
        let diff = empirical.mean - predicted;
        let z = if empirical.se > 0.0 {
            diff / empirical.se
        } else if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
        Comparison { predicted, empirical, z }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileFit {
    pub window: (f64, f64),
    pub offsets: usize,
    pub rate: f64,
    pub predicted_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub mu: f64,
    pub time_mode: TimeMode,
    pub regime: Regime,
    pub runs: usize,
    pub horizon: f64,
    pub front: Comparison,
    /// Present outside the subcritical regime, where the lost-count formula applies.
    pub lost: Option<Comparison>,
    pub lost_summary: Summary,
    pub exponent: Option<ExponentFit>,
    pub profile: Option<ProfileFit>,
}

/// Summarises `R(T)` and `L(T)` against `predictions`, adding an exponent fit
/// over `t >= T/16` and a profile fit over `[T/2, T]` when the data allow.
pub fn compare_report(trajs: &[Trajectory], predictions: &PredictionSet) -> Result<Report> {
    let first = trajs.first().ok_or_else(|| Error::Insufficient("no trajectories".into()))?;
    let horizon = first.records.last().map(|r| r.t).ok_or_else(|| Error::Insufficient("empty trajectory".into()))?;
    let mut fronts = Vec::with_capacity(trajs.len());
    let mut losts = Vec::with_capacity(trajs.len());
    for traj in trajs {
        let rec = traj
            .at(horizon)
            .ok_or_else(|| Error::Insufficient(format!("run {} has no record at t = {horizon}", traj.run_id)))?;
        fronts.push(rec.front as f64);
        losts.push(rec.lost as f64);
    }
    let front = Comparison::new(predictions.size_at(horizon), summarize(&fronts)?);
    let lost_summary = summarize(&losts)?;
    let lost = match predictions.regime {
        Regime::Subcritical => None,
        _ => Some(Comparison::new(predictions.lost_total_at(horizon), lost_summary)),
    };
    let exponent = fit_exponent(trajs, horizon / 16.0).ok();
    let window = (horizon / 2.0, horizon);
    let profile = front_profile_estimate(trajs, window).ok().and_then(|p| {
        let rate = fit_wave_rate(&p, predictions.mu).ok()?;
        Some(ProfileFit { window, offsets: p.len(), rate, predicted_rate: predictions.wave_rate_at(horizon) })
    });
    Ok(Report {
        mu: predictions.mu,
        time_mode: predictions.time_mode,
        regime: predictions.regime,
        runs: trajs.len(),
        horizon,
        front,
        lost,
        lost_summary,
        exponent,
        profile,
    })
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Plain-text table, one row per observable.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "mu = {}  mode = {}  regime = {:?}  runs = {}  T = {}",
            self.mu, self.time_mode, self.regime, self.runs, self.horizon
        );
        let _ = writeln!(s, "{:<10} {:>12} {:>12} {:>12} {:>10} {:>8}", "quantity", "prediction", "mean", "std", "se", "z");
        let mut row = |name: &str, c: &Comparison| {
            let _ = writeln!(
                s,
                "{:<10} {:>12.1} {:>12.1} {:>12.1} {:>10.2} {:>8.2}",
                name, c.predicted, c.empirical.mean, c.empirical.std, c.empirical.se, c.z
            );
        };
        row("R(T)", &self.front);
        match &self.lost {
            Some(c) => row("L(T)", c),
            None => {
                let l = &self.lost_summary;
                let _ = writeln!(
                    s,
                    "{:<10} {:>12} {:>12.1} {:>12.1} {:>10.2} {:>8}",
                    "L(T)", "-", l.mean, l.std, l.se, "-"
                );
            }
        }
        if let Some(e) = &self.exponent {
            let _ = writeln!(
                s,
                "exponent   {:.4}  95% CI [{:.4}, {:.4}]  (t >= {}, {} points)",
                e.alpha, e.ci.0, e.ci.1, e.t_min, e.points
            );
        }
        if let Some(p) = &self.profile {
            let _ = writeln!(
                s,
                "profile    rate {:.5}  predicted {:.5}  ({} offsets, t in [{}, {}])",
                p.rate, p.predicted_rate, p.offsets, p.window.0, p.window.1
            );
        }
        s
    }
}

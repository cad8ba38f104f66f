//! Ensemble orchestration, estimators and reports.

pub mod config;
pub mod fit;
pub mod report;
pub mod stats;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{ModelParams, Trajectory};
use crate::simulator::{simulate_run, InitialCondition};
use crate::{Error, Result};

pub use fit::{fit_exponent, fit_power_law, fit_wave_rate, ExponentFit};
pub use report::{compare_report, Report};
pub use stats::{ks_two_sample, lost_rate_compensated, lost_rate_estimate, summarize, LostRateEstimate, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitSpec {
    PoissonUniform,
    /// Wave ahead of a front moving at the predicted speed for `mu = 1 + epsilon`.
    StationaryWave { epsilon: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub params: ModelParams,
    pub runs: u64,
    pub init: InitSpec,
    /// Worker threads; 0 uses all available cores.
    pub parallelism: usize,
}

impl ExperimentSpec {
    pub fn new(params: ModelParams, runs: u64) -> Self {
        ExperimentSpec { params, runs, init: InitSpec::PoissonUniform, parallelism: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.runs == 0 {
            return Err(Error::invalid("runs must be at least 1"));
        }
        if let InitSpec::StationaryWave { epsilon } = self.init {
            if !(epsilon > 0.0) || (self.params.mu - 1.0 - epsilon).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "stationary-wave initialization needs mu = 1 + epsilon > 1 (mu = {}, epsilon = {epsilon})",
                    self.params.mu
                )));
            }
        }
        Ok(())
    }

    pub fn initial_condition(&self) -> Result<InitialCondition> {
        match self.init {
            InitSpec::PoissonUniform => Ok(InitialCondition::Uniform),
            InitSpec::StationaryWave { .. } => InitialCondition::predicted_wave(self.params.mu, self.params.time_mode),
        }
    }
}

/// Runs `spec.runs` independent realisations, run `k` on [`crate::rng::stream`]`(seed, k)`.
///
/// Output is sorted by `run_id` whatever the scheduling. If any run fails the
/// error lists the completed and failed run ids.
pub fn run_ensemble(spec: &ExperimentSpec) -> Result<Vec<Trajectory>> {
    spec.validate()?;
    let init = spec.initial_condition()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.parallelism)
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    let results: Vec<(u64, Result<Trajectory>)> = pool.install(|| {
        (0..spec.runs)
            .into_par_iter()
            .map(|run_id| (run_id, simulate_run(&spec.params, init, run_id)))
            .collect()
    });
    let mut trajs = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (run_id, res) in results {
        match res {
            Ok(t) => trajs.push(t),
            Err(e) => failures.push((run_id, e.to_string())),
        }
    }
    if !failures.is_empty() {
        let completed = trajs.iter().map(|t| t.run_id).collect();
        return Err(Error::Ensemble { completed, failures });
    }
    trajs.sort_by_key(|t| t.run_id);
    Ok(trajs)
}

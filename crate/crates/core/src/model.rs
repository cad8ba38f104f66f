//! Shared domain types: parameters, the particle field and trajectories.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::analytics;
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeMode {
    Continuous,
    Discrete,
}

impl std::str::FromStr for TimeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "continuous" => Ok(TimeMode::Continuous),
            "discrete" => Ok(TimeMode::Discrete),
            other => Err(Error::invalid(format!("unknown time mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for TimeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TimeMode::Continuous => "continuous",
            TimeMode::Discrete => "discrete",
        })
    }
}

pub const DEFAULT_WINDOW_MARGIN: f64 = 6.0;
pub const DEFAULT_PROFILE_WIDTH: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub mu: f64,
    pub time_mode: TimeMode,
    /// End time; a step count in discrete mode.
    pub horizon: f64,
    /// Right wall sits `window_margin·√horizon` beyond the predicted front.
    pub window_margin: f64,
    pub seed: u64,
    pub checkpoints: Vec<f64>,
    /// Front-relative profile snapshot width at checkpoints; 0 disables snapshots.
    #[serde(default)]
    pub profile_width: usize,
    /// Fixes the wall position instead of deriving it from the prediction.
    #[serde(default)]
    pub x_max: Option<usize>,
}

impl ModelParams {
    /// Parameters with the default margin and a dyadic checkpoint grid.
    pub fn new(mu: f64, time_mode: TimeMode, horizon: f64, seed: u64) -> Self {
        ModelParams {
            mu,
            time_mode,
            horizon,
            window_margin: DEFAULT_WINDOW_MARGIN,
            seed,
            checkpoints: dyadic_checkpoints(horizon, time_mode, 12),
            profile_width: 0,
            x_max: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.window_margin >= 4.0) {
            return Err(Error::invalid(format!("window margin must be at least 4, got {}", self.window_margin)));
        }
        if self.time_mode == TimeMode::Discrete && self.horizon.fract() != 0.0 {
            return Err(Error::invalid("discrete horizon must be a whole number of steps"));
        }
        for pair in self.checkpoints.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::invalid("checkpoints must be strictly increasing"));
            }
        }
        if let Some(&first) = self.checkpoints.first() {
            if first < 0.0 {
                return Err(Error::invalid("checkpoints must be non-negative"));
            }
        }
        if let Some(&last) = self.checkpoints.last() {
            if last > self.horizon {
                return Err(Error::invalid(format!("last checkpoint {last} exceeds horizon {}", self.horizon)));
            }
        }
        if self.time_mode == TimeMode::Discrete && self.checkpoints.iter().any(|t| t.fract() != 0.0) {
            return Err(Error::invalid("discrete checkpoints must be whole step counts"));
        }
        Ok(())
    }

    /// Right-wall site: the predicted front at the horizon plus the diffusive margin.
    pub fn window_x_max(&self) -> Result<usize> {
        if let Some(x) = self.x_max {
            return Ok(x);
        }
        let predicted = analytics::predict(self.mu, self.time_mode)?.size_at(self.horizon);
        Ok((predicted + self.window_margin * self.horizon.sqrt()).ceil() as usize)
    }
}

/// `{T/2^k : k = levels..=1} ∪ {T}`, rounded to whole steps in discrete mode.
pub fn dyadic_checkpoints(horizon: f64, mode: TimeMode, levels: u32) -> Vec<f64> {
    let mut out: Vec<f64> = (0..=levels)
        .rev()
        .map(|k| horizon / 2f64.powi(k as i32))
        .map(|t| if mode == TimeMode::Discrete { t.round() } else { t })
        .filter(|&t| t > 0.0)
        .collect();
    out.dedup();
    out
}

/// Aggregate front and per-site counts on `[0, x_max]`.
///
/// `counts[i]` is indexed by absolute site; entries at or behind the front
/// stay zero.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParticleField {
    pub front: usize,
    pub counts: Vec<u32>,
    pub lost: u64,
    pub dead: u64,
    pub initial_mass: u64,
}

impl ParticleField {
    /// Field with explicit counts for sites `1..=counts.len()`; front at 0.
    pub fn from_counts(site_counts: &[u32]) -> Self {
        let mut counts = Vec::with_capacity(site_counts.len() + 1);
        counts.push(0);
        counts.extend_from_slice(site_counts);
        let initial_mass = site_counts.iter().map(|&n| n as u64).sum();
        ParticleField { front: 0, counts, lost: 0, dead: 0, initial_mass }
    }

    pub fn x_max(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn alive(&self) -> u64 {
        self.counts[self.front + 1..].iter().map(|&n| n as u64).sum()
    }

    /// Count at `front + offset`, or `None` past the wall.
    pub fn ahead(&self, offset: usize) -> Option<u32> {
        self.counts.get(self.front + offset).copied()
    }

    /// Checks the bookkeeping identities `D = R + L` and `initial = alive + D`.
    pub fn ledger_ok(&self) -> bool {
        self.dead == self.front as u64 + self.lost
            && self.initial_mass == self.alive() + self.dead
            && self.counts[..=self.front].iter().all(|&n| n == 0)
    }
}

fn poisson_count<R: Rng>(rng: &mut R, mean: f64) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    // Poisson::new only fails for non-positive or non-finite means.
    Poisson::new(mean).map(|d| d.sample(rng) as u32).unwrap_or(0)
}

pub(crate) fn window_for(params: &ModelParams) -> Result<usize> {
    params.validate()?;
    let x_max = params.window_x_max()?;
    if x_max < 2 {
        return Err(Error::EmptyWindow(x_max));
    }
    Ok(x_max)
}

/// I.i.d. Poisson(`mu`) counts on `[1, x_max]` drawn from `rng`.
pub fn poisson_field<R: Rng>(params: &ModelParams, rng: &mut R) -> Result<ParticleField> {
    let x_max = window_for(params)?;
    let counts: Vec<u32> = (1..=x_max).map(|_| poisson_count(rng, params.mu)).collect();
    Ok(ParticleField::from_counts(&counts))
}

/// Independent Poisson(`profile(i)`) counts on `[1, x_max]`.
pub fn profile_field<R: Rng, F: Fn(usize) -> f64>(params: &ModelParams, profile: F, rng: &mut R) -> Result<ParticleField> {
    let x_max = window_for(params)?;
    let mut counts = Vec::with_capacity(x_max);
    for i in 1..=x_max {
        let mean = profile(i);
        if !(mean >= 0.0) || !mean.is_finite() {
            return Err(Error::invalid(format!("profile mean at site {i} is {mean}")));
        }
        counts.push(poisson_count(rng, mean));
    }
    Ok(ParticleField::from_counts(&counts))
}

/// Uniform Poisson(`mu`) initial field from run 0 of `params.seed`.
pub fn init_field(params: &ModelParams) -> Result<ParticleField> {
    poisson_field(params, &mut rng::stream(params.seed, 0))
}

pub fn init_field_with_profile<F: Fn(usize) -> f64>(params: &ModelParams, profile: F) -> Result<ParticleField> {
    profile_field(params, profile, &mut rng::stream(params.seed, 0))
}

/// Profile `mu·(1 - e^{-rate·i})` of the stationary wave ahead of a moving front.
pub fn wave_profile(mu: f64, rate: f64) -> impl Fn(usize) -> f64 {
    move |i| analytics::stationary_wave(mu, 0.5 * rate, i as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    #[serde(rename = "R")]
    pub front: u64,
    #[serde(rename = "L")]
    pub lost: u64,
    #[serde(rename = "D")]
    pub dead: u64,
    pub alive: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSnapshot {
    pub t: f64,
    pub offset: u32,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub run_id: u64,
    pub params: ModelParams,
    pub records: Vec<Record>,
    #[serde(default)]
    pub profiles: Vec<ProfileSnapshot>,
}

impl Trajectory {
    pub fn new(run_id: u64, params: ModelParams) -> Self {
        Trajectory { run_id, params, records: Vec::new(), profiles: Vec::new() }
    }

    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }

    /// Record at exactly time `t`, if one was taken.
    pub fn at(&self, t: f64) -> Option<&Record> {
        self.records.iter().find(|r| r.t == t)
    }

    /// True when `R`, `L`, `D` are non-decreasing and `D = R + L` in every record.
    pub fn is_consistent(&self) -> bool {
        self.records.iter().all(|r| r.dead == r.front + r.lost)
            && self.records.windows(2).all(|w| {
                w[1].t >= w[0].t && w[1].front >= w[0].front && w[1].lost >= w[0].lost && w[1].dead >= w[0].dead
            })
    }
}

/// Appends `(t, R, L, D, alive)`; also snapshots the front profile when enabled.
pub fn record_checkpoint(field: &ParticleField, t: f64, traj: &mut Trajectory) -> Result<()> {
    if let Some(last) = traj.records.last() {
        if t < last.t {
            return Err(Error::OutOfOrder { t, last: last.t });
        }
    }
    traj.records.push(Record {
        t,
        front: field.front as u64,
        lost: field.lost,
        dead: field.dead,
        alive: field.alive(),
    });
    let width = traj.params.profile_width.min(field.x_max() - field.front.min(field.x_max()));
    for j in 1..=width {
        traj.profiles.push(ProfileSnapshot { t, offset: j as u32, count: field.counts[field.front + j] });
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct RecordRow {
    run_id: u64,
    t: f64,
    #[serde(rename = "R")]
    front: u64,
    #[serde(rename = "L")]
    lost: u64,
    #[serde(rename = "D")]
    dead: u64,
    alive: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileRow {
    run_id: u64,
    t: f64,
    offset: u32,
    count: u32,
}

/// Writes `run_id,t,R,L,D,alive` rows for every trajectory.
pub fn write_records_csv<W: Write>(trajs: &[Trajectory], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for traj in trajs {
        for r in &traj.records {
            w.serialize(RecordRow {
                run_id: traj.run_id,
                t: r.t,
                front: r.front,
                lost: r.lost,
                dead: r.dead,
                alive: r.alive,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `run_id,t,offset,count` rows.
pub fn write_profiles_csv<W: Write>(trajs: &[Trajectory], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    // An empty file still gets its header.
    if trajs.iter().all(|t| t.profiles.is_empty()) {
        w.write_record(["run_id", "t", "offset", "count"])?;
    }
    for traj in trajs {
        for p in &traj.profiles {
            w.serialize(ProfileRow { run_id: traj.run_id, t: p.t, offset: p.offset, count: p.count })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads record and (optionally) profile CSVs back into trajectories sharing `params`.
pub fn read_trajectories_csv<R: Read, P: Read>(
    records: R,
    profiles: Option<P>,
    params: &ModelParams,
) -> Result<Vec<Trajectory>> {
    let mut by_run: std::collections::BTreeMap<u64, Trajectory> = Default::default();
    for row in csv::Reader::from_reader(records).deserialize::<RecordRow>() {
        let row = row?;
        by_run
            .entry(row.run_id)
            .or_insert_with(|| Trajectory::new(row.run_id, params.clone()))
            .records
            .push(Record { t: row.t, front: row.front, lost: row.lost, dead: row.dead, alive: row.alive });
    }
    if let Some(p) = profiles {
        for row in csv::Reader::from_reader(p).deserialize::<ProfileRow>() {
            let row = row?;
            if let Some(traj) = by_run.get_mut(&row.run_id) {
                traj.profiles.push(ProfileSnapshot { t: row.t, offset: row.offset, count: row.count });
            }
        }
    }
    Ok(by_run.into_values().collect())
}

pub fn write_json<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, traj)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(mu: f64) -> ModelParams {
        ModelParams::new(mu, TimeMode::Discrete, 1e5, 11)
    }

    #[test]
    fn window_for_subcritical_example() {
        let p = params(0.4382);
        assert_eq!(p.window_x_max().unwrap(), 2056);
    }

    #[test]
    fn init_is_deterministic() {
        let p = params(0.7);
        assert_eq!(init_field(&p).unwrap(), init_field(&p).unwrap());
        let mut q = p.clone();
        q.seed = 12;
        assert_ne!(init_field(&p).unwrap().counts, init_field(&q).unwrap().counts);
    }

    #[test]
    fn fresh_field_bookkeeping() {
        let f = init_field(&params(0.4382)).unwrap();
        assert_eq!(f.front, 0);
        assert_eq!(f.x_max(), 2056);
        assert_eq!((f.lost, f.dead), (0, 0));
        assert_eq!(f.initial_mass, f.alive());
        assert!(f.ledger_ok());
    }

    #[test]
    fn tiny_density_gives_empty_field() {
        let f = init_field(&params(1e-300)).unwrap();
        assert_eq!(f.initial_mass, 0);
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = params(0.5);
        p.mu = -1.0;
        assert!(p.validate().is_err());
        let mut p = params(0.5);
        p.window_margin = 3.0;
        assert!(p.validate().is_err());
        let mut p = params(0.5);
        p.checkpoints = vec![10.0, 5.0];
        assert!(p.validate().is_err());
        let mut p = params(0.5);
        p.checkpoints = vec![2e5];
        assert!(p.validate().is_err());
        let mut p = params(0.5);
        p.x_max = Some(1);
        assert!(matches!(init_field(&p), Err(Error::EmptyWindow(1))));
    }

    #[test]
    fn constant_and_zero_profiles() {
        let p = params(0.5);
        let z = init_field_with_profile(&p, |_| 0.0).unwrap();
        assert_eq!(z.initial_mass, 0);
        assert!(init_field_with_profile(&p, |_| -0.1).is_err());
        let wave = wave_profile(1.02, 0.8 * 0.02);
        assert!((wave(100) - 1.02 * (1.0 - (-1.6f64).exp())).abs() < 1e-12);
        assert!((wave(100) - 0.814).abs() < 1e-3);
    }

    #[test]
    fn dyadic_grid() {
        let c = dyadic_checkpoints(1e5, TimeMode::Discrete, 4);
        assert_eq!(c, vec![6250.0, 12500.0, 25000.0, 50000.0, 100000.0]);
        let c = dyadic_checkpoints(3.0, TimeMode::Discrete, 4);
        assert_eq!(c, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn record_checkpoint_fresh_and_ordering() {
        let f = ParticleField::from_counts(&[3, 1, 0, 2]);
        let mut traj = Trajectory::new(0, params(1.0));
        record_checkpoint(&f, 0.0, &mut traj).unwrap();
        assert_eq!(traj.records[0], Record { t: 0.0, front: 0, lost: 0, dead: 0, alive: 6 });
        assert!(matches!(record_checkpoint(&f, -1.0, &mut traj), Err(Error::OutOfOrder { .. })));
    }

    #[test]
    fn profile_snapshots_clip_at_wall() {
        let mut p = params(1.0);
        p.profile_width = 10;
        let mut f = ParticleField::from_counts(&[0, 4, 5, 6]);
        // front at site 1, live sites 2..=4
        f.front = 1;
        let mut traj = Trajectory::new(0, p);
        record_checkpoint(&f, 1.0, &mut traj).unwrap();
        let got: Vec<(u32, u32)> = traj.profiles.iter().map(|s| (s.offset, s.count)).collect();
        assert_eq!(got, vec![(1, 4), (2, 5), (3, 6)]);
    }

    #[test]
    fn csv_header_and_round_trip() {
        let p = params(1.0);
        let mut traj = Trajectory::new(4, p.clone());
        traj.records.push(Record { t: 2.0, front: 1, lost: 2, dead: 3, alive: 7 });
        traj.profiles.push(ProfileSnapshot { t: 2.0, offset: 1, count: 3 });
        let mut buf = Vec::new();
        write_records_csv(std::slice::from_ref(&traj), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("run_id,t,R,L,D,alive\n"));
        let mut pbuf = Vec::new();
        write_profiles_csv(std::slice::from_ref(&traj), &mut pbuf).unwrap();
        assert!(String::from_utf8(pbuf.clone()).unwrap().starts_with("run_id,t,offset,count\n"));
        let back = read_trajectories_csv(&buf[..], Some(&pbuf[..]), &p).unwrap();
        assert_eq!(back, vec![traj]);
    }
}

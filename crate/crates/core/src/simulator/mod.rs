//! Exact stochastic dynamics.
//!
//! Continuous time is simulated event by event: with `M` live particles the
//! next jump happens after an `Exp(M)` wait, the jumping particle's site is
//! drawn proportionally to its count through a [`PrefixSumTree`], and the
//! direction is a fair coin. Discrete time moves every particle at once,
//! drawing the number of left movers per site as Binomial(n, 1/2).
//!
//! The right wall at `x_max` reflects by suppressing outward jumps: a
//! particle that tries to leave stays put. That keeps the walk's transition
//! kernel symmetric, so product Poisson(`mu`) remains stationary near the
//! wall.

mod tree;
pub mod reference;

pub use tree::PrefixSumTree;

use rand::{Rng, RngCore};
use rand_distr::Exp1;

use crate::analytics;
use crate::model::{self, record_checkpoint, ModelParams, ParticleField, TimeMode, Trajectory};
use crate::rng::{self, CoinFlips, SimRng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Left,
    Right,
}

/// Whether the aggregate is live. `PureDiffusion` freezes the front and
/// reflects at it, so particle number is conserved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dynamics {
    #[default]
    Aggregating,
    PureDiffusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Outcome {
    pub advanced: bool,
    /// Particles that died in this event/step.
    pub swallowed: u64,
}

/// Event-by-event continuous-time dynamics.
#[derive(Debug, Clone)]
pub struct ContinuousStepper {
    field: ParticleField,
    tree: PrefixSumTree,
    dynamics: Dynamics,
}

impl ContinuousStepper {
    pub fn new(field: ParticleField, dynamics: Dynamics) -> Self {
        let weights: Vec<u64> = field.counts[1..].iter().map(|&n| n as u64).collect();
        let tree = PrefixSumTree::from_weights(&weights);
        ContinuousStepper { field, tree, dynamics }
    }

    pub fn field(&self) -> &ParticleField {
        &self.field
    }

    pub fn into_field(self) -> ParticleField {
        self.field
    }

    pub fn alive(&self) -> u64 {
        self.tree.total()
    }

    /// Site of the `k`-th live particle, `k < alive()`.
    pub fn site_of(&self, k: u64) -> usize {
        self.tree.find(k)
    }

    fn move_one(&mut self, from: usize, to: usize) {
        self.field.counts[from] -= 1;
        self.field.counts[to] += 1;
        self.tree.add(from, -1);
        self.tree.add(to, 1);
    }

    /// Applies one jump of a particle sitting at `site`.
    pub fn jump(&mut self, site: usize, dir: Direction) -> Outcome {
        let front = self.field.front;
        let x_max = self.field.x_max();
        debug_assert!(site > front && site <= x_max && self.field.counts[site] > 0);
        match dir {
            Direction::Right if site == x_max => Outcome::default(),
            Direction::Right => {
                self.move_one(site, site + 1);
                Outcome::default()
            }
            Direction::Left if site == front + 1 => match self.dynamics {
                Dynamics::PureDiffusion => Outcome::default(),
                Dynamics::Aggregating => {
                    let k = std::mem::take(&mut self.field.counts[site]) as u64;
                    self.tree.add(site, -(k as i64));
                    self.field.front = site;
                    self.field.dead += k;
                    self.field.lost += k - 1;
                    Outcome { advanced: true, swallowed: k }
                }
            },
            Direction::Left => {
                self.move_one(site, site - 1);
                Outcome::default()
            }
        }
    }

    /// Samples and applies one event; returns the waiting time before it,
    /// or `None` when no particle is alive.
    pub fn next_event<R: RngCore>(&mut self, rng: &mut R, flips: &mut CoinFlips) -> Option<(f64, Outcome)> {
        let m = self.alive();
        if m == 0 {
            return None;
        }
        let wait: f64 = rng.sample::<f64, _>(Exp1) / m as f64;
        let site = self.site_of(rng.random_range(0..m));
        let dir = if flips.flip(rng) { Direction::Left } else { Direction::Right };
        Some((wait, self.jump(site, dir)))
    }
}

/// Whole-lattice discrete-time dynamics: every particle jumps, then the aggregate acts.
#[derive(Debug, Clone)]
pub struct DiscreteStepper {
    field: ParticleField,
    scratch: Vec<u32>,
    alive: u64,
    dynamics: Dynamics,
}

impl DiscreteStepper {
    pub fn new(field: ParticleField, dynamics: Dynamics) -> Self {
        let alive = field.alive();
        let scratch = vec![0; field.counts.len()];
        DiscreteStepper { field, scratch, alive, dynamics }
    }

    pub fn field(&self) -> &ParticleField {
        &self.field
    }

    pub fn into_field(self) -> ParticleField {
        self.field
    }

    pub fn alive(&self) -> u64 {
        self.alive
    }

    /// One step with caller-chosen left movers: `left_movers(i, n)` returns how
    /// many of the `n > 0` particles at site `i` jump left (at most `n`).
    pub fn step_with<F: FnMut(usize, u32) -> u32>(&mut self, mut left_movers: F) -> Outcome {
        let front = self.field.front;
        let x_max = self.field.x_max();
        if front >= x_max {
            return Outcome::default();
        }
        let counts = &self.field.counts;
        let next = &mut self.scratch;
        next[front..=x_max].fill(0);
        for i in front + 1..=x_max {
            let n = counts[i];
            if n == 0 {
                continue;
            }
            let left = left_movers(i, n);
            debug_assert!(left <= n);
            next[i - 1] += left;
            next[i.min(x_max - 1) + 1] += n - left;
        }
        self.resolve()
    }

    pub fn step<R: RngCore>(&mut self, rng: &mut R, flips: &mut CoinFlips) -> Outcome {
        let front = self.field.front;
        let x_max = self.field.x_max();
        if front >= x_max {
            return Outcome::default();
        }
        let counts = &self.field.counts;
        let next = &mut self.scratch;
        next[front..=x_max].fill(0);
        // Interior sites without a branch on emptiness; the wall site last.
        for i in front + 1..x_max {
            let n = counts[i];
            let left = flips.binomial_half_fast(rng, n);
            next[i - 1] += left;
            next[i + 1] += n - left;
        }
        let n = counts[x_max];
        let left = flips.binomial_half_fast(rng, n);
        next[x_max - 1] += left;
        next[x_max] += n - left;
        self.resolve()
    }

    /// Aggregate rule on the post-jump field held in `scratch`, then swap it in.
    ///
    /// Only left movers from `front + 1` can reach `front`, and only left
    /// movers from `front + 2` can reach `front + 1`.
    fn resolve(&mut self) -> Outcome {
        let front = self.field.front;
        let next = &mut self.scratch;
        let left_first = next[front];
        let mut outcome = Outcome::default();
        match self.dynamics {
            Dynamics::Aggregating if left_first >= 1 => {
                // The new front site receives only left movers from the old
                // front + 2; they are swallowed along with the first site's.
                let k = (left_first + next[front + 1]) as u64;
                next[front] = 0;
                next[front + 1] = 0;
                self.field.front = front + 1;
                self.field.dead += k;
                self.field.lost += k - 1;
                self.alive -= k;
                outcome = Outcome { advanced: true, swallowed: k };
            }
            Dynamics::Aggregating => {}
            Dynamics::PureDiffusion => {
                next[front + 1] += next[front];
                next[front] = 0;
            }
        }
        std::mem::swap(&mut self.field.counts, &mut self.scratch);
        outcome
    }
}

fn start_trajectory(field: &ParticleField, params: &ModelParams, run_id: u64) -> Result<Trajectory> {
    let mut traj = Trajectory::new(run_id, params.clone());
    record_checkpoint(field, 0.0, &mut traj)?;
    Ok(traj)
}

/// Runs the continuous-time dynamics to `params.horizon`, leaving the final state in `field`.
///
/// If every particle dies first, the frozen state is recorded at the
/// remaining checkpoints.
pub fn run_continuous<R: RngCore>(field: &mut ParticleField, params: &ModelParams, run_id: u64, rng: &mut R) -> Result<Trajectory> {
    run_continuous_observed(field, params, run_id, rng, |_, _, _| {})
}

/// [`run_continuous`] that also calls `observe(t, dt, state)` for every
/// interval `[t, t + dt)` on which the state is constant (clipped to the horizon).
pub fn run_continuous_observed<R: RngCore, F: FnMut(f64, f64, &ParticleField)>(
    field: &mut ParticleField,
    params: &ModelParams,
    run_id: u64,
    rng: &mut R,
    mut observe: F,
) -> Result<Trajectory> {
    if params.time_mode != TimeMode::Continuous {
        return Err(Error::invalid("run_continuous needs time_mode = continuous"));
    }
    params.validate()?;
    let mut traj = start_trajectory(field, params, run_id)?;
    let mut stepper = ContinuousStepper::new(std::mem::take(field), Dynamics::Aggregating);
    let mut flips = CoinFlips::new();
    let checkpoints: Vec<f64> = params.checkpoints.iter().copied().filter(|&t| t > 0.0).collect();
    let mut next_cp = 0;
    let mut t = 0.0;
    while stepper.alive() > 0 {
        // The state is constant between events, so sampling the wait before
        // applying the jump lets checkpoints inside the gap see the old state.
        let m = stepper.alive();
        let wait: f64 = rng.sample::<f64, _>(Exp1) / m as f64;
        let t_next = t + wait;
        while next_cp < checkpoints.len() && checkpoints[next_cp] < t_next {
            record_checkpoint(stepper.field(), checkpoints[next_cp], &mut traj)?;
            next_cp += 1;
        }
        if t_next > params.horizon {
            observe(t, params.horizon - t, stepper.field());
            break;
        }
        observe(t, wait, stepper.field());
        t = t_next;
        let site = stepper.site_of(rng.random_range(0..m));
        let dir = if flips.flip(rng) { Direction::Left } else { Direction::Right };
        stepper.jump(site, dir);
    }
    for &cp in &checkpoints[next_cp..] {
        record_checkpoint(stepper.field(), cp, &mut traj)?;
    }
    *field = stepper.into_field();
    Ok(traj)
}

/// Runs `params.horizon` discrete steps, leaving the final state in `field`.
pub fn run_discrete<R: RngCore>(field: &mut ParticleField, params: &ModelParams, run_id: u64, rng: &mut R) -> Result<Trajectory> {
    run_discrete_observed(field, params, run_id, rng, |_, _, _| {})
}

/// [`run_discrete`] that also calls `observe(step, 1.0, state)` with the state
/// before each step.
pub fn run_discrete_observed<R: RngCore, F: FnMut(f64, f64, &ParticleField)>(
    field: &mut ParticleField,
    params: &ModelParams,
    run_id: u64,
    rng: &mut R,
    mut observe: F,
) -> Result<Trajectory> {
    if params.time_mode != TimeMode::Discrete {
        return Err(Error::invalid("run_discrete needs time_mode = discrete"));
    }
    params.validate()?;
    let mut traj = start_trajectory(field, params, run_id)?;
    let mut stepper = DiscreteStepper::new(std::mem::take(field), Dynamics::Aggregating);
    let mut flips = CoinFlips::new();
    let horizon = params.horizon as u64;
    let mut cps = params.checkpoints.iter().copied().filter(|&t| t > 0.0).peekable();
    let mut step = 0u64;
    while step < horizon && stepper.alive() > 0 {
        observe(step as f64, 1.0, stepper.field());
        stepper.step(rng, &mut flips);
        step += 1;
        if cps.peek() == Some(&(step as f64)) {
            record_checkpoint(stepper.field(), step as f64, &mut traj)?;
            cps.next();
        }
    }
    for cp in cps {
        record_checkpoint(stepper.field(), cp, &mut traj)?;
    }
    *field = stepper.into_field();
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    /// I.i.d. Poisson(`mu`) on every site.
    Uniform,
    /// Poisson(`mu·(1 - e^{-rate·i})`).
    Wave { rate: f64 },
}

impl InitialCondition {
    /// Wave at the predicted supercritical profile rate (`2 × speed`).
    pub fn predicted_wave(mu: f64, mode: TimeMode) -> Result<Self> {
        let p = analytics::predict(mu, mode)?;
        match p.wave_rate {
            Some(rate) => Ok(InitialCondition::Wave { rate }),
            None => Err(Error::invalid(format!("stationary wave initialization needs mu > 1, got {mu}"))),
        }
    }
}

/// Builds the initial field and runs one complete realisation on stream `run_id`.
pub fn simulate_run(params: &ModelParams, init: InitialCondition, run_id: u64) -> Result<Trajectory> {
    simulate_run_observed(params, init, run_id, |_, _, _| {})
}

/// [`simulate_run`] with a state observer as in [`run_continuous_observed`].
pub fn simulate_run_observed<F: FnMut(f64, f64, &ParticleField)>(
    params: &ModelParams,
    init: InitialCondition,
    run_id: u64,
    observe: F,
) -> Result<Trajectory> {
    let mut rng: SimRng = rng::stream(params.seed, run_id);
    let mut field = match init {
        InitialCondition::Uniform => model::poisson_field(params, &mut rng)?,
        InitialCondition::Wave { rate } => {
            if !(rate > 0.0) {
                return Err(Error::invalid(format!("wave rate must be positive, got {rate}")));
            }
            model::profile_field(params, model::wave_profile(params.mu, rate), &mut rng)?
        }
    };
    match params.time_mode {
        TimeMode::Continuous => run_continuous_observed(&mut field, params, run_id, &mut rng, observe),
        TimeMode::Discrete => run_discrete_observed(&mut field, params, run_id, &mut rng, observe),
    }
}

/// Expected number of particles lost per unit time (continuous) or in the
/// next step (discrete) given the current state.
///
/// Continuous: each of the `n₁` particles at `R+1` jumps left at rate ½ and
/// takes `n₁ - 1` others with it. Discrete: with `ℓ₁ ~ Bin(n₁, ½)` and
/// `ℓ₂ ~ Bin(n₂, ½)` the loss is `ℓ₁ + ℓ₂ - 1` on `{ℓ₁ ≥ 1}`.
pub fn lost_intensity(field: &ParticleField, mode: TimeMode) -> f64 {
    let n1 = field.ahead(1).unwrap_or(0) as f64;
    match mode {
        TimeMode::Continuous => 0.5 * n1 * (n1 - 1.0).max(0.0),
        TimeMode::Discrete => {
            if n1 == 0.0 {
                return 0.0;
            }
            let n2 = field.ahead(2).unwrap_or(0) as f64;
            0.5 * n1 + (1.0 - 0.5f64.powf(n1)) * (0.5 * n2 - 1.0)
        }
    }
}

/// Mean count at each front offset over all snapshots with `t` in `[t_start, t_end]`.
///
/// Offsets past the wall are never recorded, so they simply drop out.
pub fn front_profile_estimate(trajs: &[Trajectory], t_window: (f64, f64)) -> Result<Vec<(u32, f64)>> {
    let (lo, hi) = t_window;
    let mut sums: Vec<(u64, u64)> = Vec::new();
    for traj in trajs {
        for s in traj.profiles.iter().filter(|s| s.t >= lo && s.t <= hi) {
            let j = s.offset as usize;
            if sums.len() <= j {
                sums.resize(j + 1, (0, 0));
            }
            sums[j].0 += s.count as u64;
            sums[j].1 += 1;
        }
    }
    let out: Vec<(u32, f64)> = sums
        .iter()
        .enumerate()
        .filter(|(_, &(_, n))| n > 0)
        .map(|(j, &(sum, n))| (j as u32, sum as f64 / n as f64))
        .collect();
    if out.is_empty() {
        return Err(Error::Insufficient(format!("no profile snapshots in [{lo}, {hi}]")));
    }
    Ok(out)
}

/// Variance-to-mean ratio of per-run counts at a fixed site and time.
pub fn dispersion_diagnostic(samples: &[u32]) -> Result<f64> {
    if samples.len() < 30 {
        return Err(Error::Insufficient(format!("need at least 30 samples, got {}", samples.len())));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().map(|&x| x as f64).sum::<f64>() / n;
    if mean == 0.0 {
        return Err(Error::Undefined("index of dispersion with zero mean".into()));
    }
    let var = samples.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(var / mean)
}

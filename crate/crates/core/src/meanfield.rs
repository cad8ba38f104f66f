//! Lattice ODE for the conditional Poisson intensities `λ(i, t)` ahead of the front:
//!
//! `dλ_i/dt = ½λ_{i-1} + ½λ_{i+1} - λ_i`, with `λ_i = 0` for `i ≤ R` and
//! `λ(x_max) = μ`.

use std::io::Write;

use rand::Rng;

use crate::linalg::solve_tridiagonal;
use crate::model::{ModelParams, Record, Trajectory};
use crate::rng::{self, SimRng};
use crate::{Error, Result};

/// Largest explicit Euler step accepted.
pub const MAX_DT: f64 = 0.5;
/// Cap on the per-step advance probability in the hybrid scheme.
pub const MAX_ADVANCE_PROB: f64 = 0.05;

/// Value of the ghost site left of the first live site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeftBoundary {
    /// Absorbing aggregate: `λ(R) = 0`.
    Aggregate,
    /// No front; the lattice continues at density `μ`.
    FarField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityField {
    pub front: usize,
    /// Indexed by absolute site `0..=x_max`.
    pub lambda: Vec<f64>,
    pub mu: f64,
    pub s: f64,
    pub left: LeftBoundary,
}

impl IntensityField {
    /// `λ ≡ μ` on `[1, x_max]` with the aggregate at 0.
    pub fn uniform(mu: f64, x_max: usize) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::invalid(format!("mu must be non-negative, got {mu}")));
        }
        if x_max < 2 {
            return Err(Error::EmptyWindow(x_max));
        }
        let mut lambda = vec![mu; x_max + 1];
        lambda[0] = 0.0;
        Ok(IntensityField { front: 0, lambda, mu, s: 0.0, left: LeftBoundary::Aggregate })
    }

    pub fn x_max(&self) -> usize {
        self.lambda.len() - 1
    }

    /// `Σ_{i>R} λ(i)`.
    pub fn mass(&self) -> f64 {
        self.lambda.iter().skip(self.front + 1).sum()
    }

    /// Moves the front to `to` (never backwards) and zeroes everything behind it.
    pub fn advance_to(&mut self, to: usize) {
        let to = to.min(self.x_max());
        while self.front < to {
            self.front += 1;
            self.lambda[self.front] = 0.0;
        }
    }

    /// Time derivative of every site under the current boundary conditions.
    pub fn derivative(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.lambda.len()];
        let lo = self.front + 1;
        let hi = self.x_max();
        let ghost = self.ghost();
        for i in lo..hi {
            let left = if i == lo { ghost } else { self.lambda[i - 1] };
            d[i] = 0.5 * left + 0.5 * self.lambda[i + 1] - self.lambda[i];
        }
        d
    }

    fn ghost(&self) -> f64 {
        match self.left {
            LeftBoundary::Aggregate => 0.0,
            LeftBoundary::FarField => self.mu,
        }
    }

    /// Writes `s,i,lambda` rows for the live sites.
    pub fn write_csv<W: Write>(&self, out: W, with_header: bool) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        if with_header {
            w.write_record(["s", "i", "lambda"])?;
        }
        for i in self.front + 1..=self.x_max() {
            w.serialize((self.s, i, self.lambda[i]))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One explicit Euler step of length `dt`.
pub fn step_intensity(field: &mut IntensityField, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(Error::Unstable { dt, bound: MAX_DT });
    }
    let lo = field.front + 1;
    let hi = field.x_max();
    if lo < hi {
        let lam = &mut field.lambda;
        let keep = 1.0 - dt;
        let half = 0.5 * dt;
        let mut prev = match field.left {
            LeftBoundary::Aggregate => 0.0,
            LeftBoundary::FarField => field.mu,
        };
        for i in lo..hi {
            let cur = lam[i];
            lam[i] = keep * cur + half * (prev + lam[i + 1]);
            prev = cur;
        }
    }
    field.s += dt;
    Ok(())
}

/// Integrates the intensities from `λ ≡ μ` to `params.horizon` with the front
/// following `front`, a list of `(time, position)` jumps; the front sits at 0
/// before the first jump.
pub fn run_with_front(front: &[(f64, usize)], params: &ModelParams, dt: f64) -> Result<IntensityField> {
    params.validate()?;
    if front.windows(2).any(|w| w[1].0 < w[0].0 || w[1].1 < w[0].1) {
        return Err(Error::invalid("front path must be non-decreasing in time and position"));
    }
    if front.iter().any(|&(t, _)| !(t >= 0.0)) {
        return Err(Error::invalid("front jump times must be non-negative"));
    }
    let mut field = IntensityField::uniform(params.mu, params.window_x_max()?)?;
    let mut jumps = front.iter().peekable();
    let horizon = params.horizon;
    loop {
        while let Some(&&(t, pos)) = jumps.peek() {
            if t > field.s {
                break;
            }
            field.advance_to(pos);
            jumps.next();
        }
        if field.front >= field.x_max() {
            field.lambda.iter_mut().for_each(|l| *l = 0.0);
            field.s = horizon;
            return Ok(field);
        }
        let remaining = horizon - field.s;
        if remaining <= 1e-12 * horizon.max(1.0) {
            field.s = horizon;
            return Ok(field);
        }
        let mut h = dt.min(remaining);
        if let Some(&&(t, _)) = jumps.peek() {
            h = h.min(t - field.s);
        }
        step_intensity(&mut field, h)?;
    }
}

/// Intensity field coupled to a random front that advances with rate `½λ(R+1)`
/// (first-order thinning per step), on [`rng::stream`]`(seed, run_id)`.
///
/// The trajectory records `R` with `L = 0`, `D = R`, and `alive` set to the
/// rounded intensity mass.
pub fn run_hybrid(params: &ModelParams, dt: f64, run_id: u64) -> Result<(Trajectory, IntensityField)> {
    let (traj, field, _) = run_hybrid_with_path(params, dt, run_id)?;
    Ok((traj, field))
}

/// [`run_hybrid`] that also returns every front advance as `(time, new position)`,
/// the input format of [`run_with_front`].
pub fn run_hybrid_with_path(params: &ModelParams, dt: f64, run_id: u64) -> Result<(Trajectory, IntensityField, Vec<(f64, usize)>)> {
    params.validate()?;
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(Error::Unstable { dt, bound: MAX_DT });
    }
    let mut rng: SimRng = rng::stream(params.seed, run_id);
    let mut field = IntensityField::uniform(params.mu, params.window_x_max()?)?;
    let mut traj = Trajectory::new(run_id, params.clone());
    let mut path = Vec::new();
    let snapshot = |f: &IntensityField, t: f64, traj: &mut Trajectory| {
        let front = f.front as u64;
        traj.records.push(Record { t, front, lost: 0, dead: front, alive: f.mass().round() as u64 });
    };
    snapshot(&field, 0.0, &mut traj);
    let mut cps = params.checkpoints.iter().copied().filter(|&c| c > 0.0).peekable();
    while let Some(&cp) = cps.peek() {
        if field.front >= field.x_max() {
            snapshot(&field, cp, &mut traj);
            cps.next();
            continue;
        }
        let remaining = cp - field.s;
        if remaining <= 1e-9 {
            snapshot(&field, cp, &mut traj);
            cps.next();
            continue;
        }
        let rate = 0.5 * field.lambda[field.front + 1];
        let mut h = dt.min(remaining);
        if rate * h > MAX_ADVANCE_PROB {
            h = MAX_ADVANCE_PROB / rate;
        }
        let advance = rng.random::<f64>() < rate * h;
        step_intensity(&mut field, h)?;
        if advance {
            field.advance_to(field.front + 1);
            path.push((field.s, field.front));
        }
    }
    Ok((traj, field, path))
}

/// Stationary profile in a frame moving right at speed `r`, on offsets
/// `0..=width` with `λ_0 = 0` and `λ_width = μ`, from the central-difference
/// recurrence `½(λ_{i+1} - 2λ_i + λ_{i-1}) + ½r(λ_{i+1} - λ_{i-1}) = 0`.
pub fn comoving_steady_state(mu: f64, r: f64, width: usize) -> Result<Vec<f64>> {
    if !(r >= 0.0 && r < 1.0) {
        return Err(Error::invalid(format!("comoving speed must be in [0, 1), got {r}")));
    }
    if width < 2 {
        return Err(Error::EmptyWindow(width));
    }
    let n = width - 1;
    let lower = vec![0.5 - 0.5 * r; n];
    let diag = vec![-1.0; n];
    let upper = vec![0.5 + 0.5 * r; n];
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = -(0.5 + 0.5 * r) * mu;
    let interior = solve_tridiagonal(&lower, &diag, &upper, &rhs)?;
    let mut out = Vec::with_capacity(width + 1);
    out.push(0.0);
    out.extend(interior);
    out.push(mu);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics;
    use crate::model::TimeMode;

    fn field(mu: f64, x_max: usize) -> IntensityField {
        IntensityField::uniform(mu, x_max).unwrap()
    }

    #[test]
    fn constant_is_fixed_without_front() {
        let mut f = field(0.7, 50);
        f.lambda[0] = 0.7;
        f.left = LeftBoundary::FarField;
        let before = f.lambda.clone();
        for _ in 0..100 {
            step_intensity(&mut f, 0.5).unwrap();
        }
        assert_eq!(f.lambda, before);
    }

    #[test]
    fn first_site_derivative_at_front() {
        let f = field(0.8, 20);
        let d = f.derivative();
        assert!((d[1] + 0.4).abs() < 1e-15);
        assert!(d[2..20].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn linear_profile_is_harmonic() {
        let mut f = field(0.0, 30);
        for i in 0..=30 {
            f.lambda[i] = 0.1 * i as f64;
        }
        f.mu = 3.0;
        let d = f.derivative();
        assert!(d.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn rejects_unstable_step() {
        let mut f = field(1.0, 10);
        assert!(matches!(step_intensity(&mut f, 0.6), Err(Error::Unstable { .. })));
        assert!(step_intensity(&mut f, 0.0).is_err());
    }

    #[test]
    fn mass_leaks_only_at_front_and_wall() {
        let mut f = field(1.0, 40);
        for _ in 0..7 {
            step_intensity(&mut f, 0.3).unwrap();
        }
        f.advance_to(2);
        let x = f.x_max();
        let dt = 0.1;
        let before = f.mass();
        let expected = -0.5 * f.lambda[f.front + 1] + 0.5 * (f.lambda[x] - f.lambda[x - 1]);
        step_intensity(&mut f, dt).unwrap();
        assert!(((f.mass() - before) / dt - expected).abs() < 1e-12);
    }

    #[test]
    fn comparison_principle() {
        let mut a = field(0.5, 60);
        let mut b = field(0.5, 60);
        for i in 1..60 {
            b.lambda[i] += 0.01 * ((i * 7) % 5) as f64;
        }
        for _ in 0..400 {
            step_intensity(&mut a, 0.25).unwrap();
            step_intensity(&mut b, 0.25).unwrap();
            assert!(a.lambda.iter().zip(&b.lambda).all(|(x, y)| x <= y));
        }
    }

    #[test]
    fn linear_in_mu() {
        let path = [(3.0, 1), (10.0, 4), (25.0, 5)];
        let p1 = ModelParams::new(0.3, TimeMode::Continuous, 40.0, 0);
        let p2 = ModelParams { mu: 0.6, x_max: Some(p1.window_x_max().unwrap()), ..p1.clone() };
        let a = run_with_front(&path, &p1, 0.1).unwrap();
        let b = run_with_front(&path, &p2, 0.1).unwrap();
        for (x, y) in a.lambda.iter().zip(&b.lambda) {
            assert!((2.0 * x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn front_past_wall_empties_field() {
        let p = ModelParams::new(1.0, TimeMode::Continuous, 10.0, 0);
        let f = run_with_front(&[(0.0, usize::MAX)], &p, 0.1).unwrap();
        assert!(f.lambda.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn decreasing_front_rejected() {
        let p = ModelParams::new(1.0, TimeMode::Continuous, 10.0, 0);
        assert!(run_with_front(&[(1.0, 3), (2.0, 2)], &p, 0.1).is_err());
        assert!(run_with_front(&[(2.0, 3), (1.0, 4)], &p, 0.1).is_err());
    }

    #[test]
    fn richardson_half_step() {
        let p = ModelParams::new(1.0, TimeMode::Continuous, 100.0, 0);
        for path in [vec![], vec![(5.0, 1), (10.0, 2), (30.0, 3)]] {
            let a = run_with_front(&path, &p, 0.1).unwrap();
            let b = run_with_front(&path, &p, 0.05).unwrap();
            let sup = a.lambda.iter().zip(&b.lambda).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(sup < 1e-4 * p.mu, "{sup}");
        }
    }

    #[test]
    fn zero_intensity_never_advances() {
        let mut p = ModelParams::new(1e-300, TimeMode::Continuous, 200.0, 3);
        p.x_max = Some(20);
        let (traj, f) = run_hybrid(&p, 0.5, 0).unwrap();
        assert_eq!(f.front, 0);
        assert!(traj.records.iter().all(|r| r.front == 0));
        assert!(traj.is_consistent());
    }

    #[test]
    fn hybrid_records_every_checkpoint() {
        let p = ModelParams::new(0.8, TimeMode::Continuous, 64.0, 9);
        let (traj, _) = run_hybrid(&p, 0.25, 2).unwrap();
        assert_eq!(traj.records.len(), p.checkpoints.len() + 1);
        assert!(traj.is_consistent());
        let (again, _) = run_hybrid(&p, 0.25, 2).unwrap();
        assert_eq!(traj, again);
    }

    #[test]
    fn comoving_state_matches_stationary_wave() {
        for r in [0.005, 0.01, 0.02, 0.05] {
            let mu = 1.0 + 2.0 * r;
            let prof = comoving_steady_state(mu, r, 3000).unwrap();
            let err = (0..=600)
                .map(|i| (prof[i] - analytics::stationary_wave(mu, r, i as f64)).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-3, "r = {r}: {err}");
        }
    }
}

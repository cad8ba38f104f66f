//! Heat equation `∂_s μ = ½∂²_x μ` on `x > r(s)` with `μ(r) = 0`, far field
//! `μ∞ < 1` and front law `dr/ds = ½∂_x μ(r, s)`.
//!
//! The profile lives on a uniform grid in `ξ = x - r(s)`, where the equation
//! picks up the advection term `v·∂_ξ μ`. Steps are Crank–Nicolson with the
//! front speed from a predictor–corrector pass.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analytics;
use crate::linalg::solve_tridiagonal;
use crate::quadrature::{integrate, Tolerance};
use crate::{Error, Result};

/// Largest far-field density the solver is meant for.
pub const MAX_MU_INF: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StefanConfig {
    pub dxi: f64,
    pub xi_max: f64,
    pub ds: f64,
    /// Start time of runs seeded from the similarity solution.
    pub s0: f64,
    /// Steps are capped at `early_fraction · s` so the singular start is resolved.
    pub early_fraction: f64,
}

impl Default for StefanConfig {
    fn default() -> Self {
        StefanConfig { dxi: 0.01, xi_max: 12.0, ds: 1e-4, s0: 1e-3, early_fraction: 0.02 }
    }
}

impl StefanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dxi > 0.0 && self.xi_max >= 10.0 * self.dxi) {
            return Err(Error::invalid(format!("need 0 < dxi <= xi_max / 10 (dxi = {}, xi_max = {})", self.dxi, self.xi_max)));
        }
        if !(self.ds > 0.0) || !(self.s0 >= 0.0) || !(self.early_fraction > 0.0) {
            return Err(Error::invalid("ds, s0 and early_fraction must be positive"));
        }
        let bound = max_ds(self.dxi);
        if self.ds > bound {
            return Err(Error::Unstable { dt: self.ds, bound });
        }
        Ok(())
    }
}

/// Largest step that keeps the Crank–Nicolson update monotone.
pub fn max_ds(dxi: f64) -> f64 {
    2.0 * dxi * dxi
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StefanState {
    pub s: f64,
    pub r: f64,
    pub dxi: f64,
    pub mu_inf: f64,
    /// `μ(k·dxi)` for `k = 0..=n`; first entry 0, last `mu_inf`.
    pub profile: Vec<f64>,
}

impl StefanState {
    fn check(mu_inf: f64, dxi: f64, xi_max: f64) -> Result<usize> {
        if !(mu_inf > 0.0 && mu_inf <= MAX_MU_INF) {
            return Err(Error::invalid(format!("far-field density must be in (0, {MAX_MU_INF}], got {mu_inf}")));
        }
        if !(dxi > 0.0 && xi_max >= 10.0 * dxi) {
            return Err(Error::invalid("need 0 < dxi <= xi_max / 10"));
        }
        Ok((xi_max / dxi).round() as usize)
    }

    /// `μ ≡ mu_inf` with the absorbing front at 0, at `s = 0`.
    pub fn step_profile(mu_inf: f64, dxi: f64, xi_max: f64) -> Result<Self> {
        let n = Self::check(mu_inf, dxi, xi_max)?;
        let mut profile = vec![mu_inf; n + 1];
        profile[0] = 0.0;
        Ok(StefanState { s: 0.0, r: 0.0, dxi, mu_inf, profile })
    }

    /// Exact similarity solution sampled at time `s > 0`.
    pub fn similarity(mu_inf: f64, s: f64, dxi: f64, xi_max: f64) -> Result<Self> {
        let n = Self::check(mu_inf, dxi, xi_max)?;
        if !(s > 0.0) {
            return Err(Error::invalid(format!("similarity slice needs s > 0, got {s}")));
        }
        let r = analytics::solve_r_subcritical(mu_inf)?;
        let root = s.sqrt();
        let us: Vec<f64> = (0..=n).map(|k| k as f64 * dxi / root).collect();
        let mut profile = similarity_values(r, &us)?;
        profile.iter_mut().for_each(|m| *m = m.min(mu_inf));
        profile[n] = mu_inf;
        Ok(StefanState { s, r: r * root, dxi, mu_inf, profile })
    }

    pub fn xi(&self, k: usize) -> f64 {
        k as f64 * self.dxi
    }

    /// `½ ∂_ξ μ(0)` from the three-point one-sided difference.
    pub fn front_speed(&self) -> f64 {
        speed(&self.profile, self.dxi)
    }

    pub fn write_csv<W: Write>(&self, out: W, with_header: bool) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        if with_header {
            w.write_record(["s", "xi", "mu"])?;
        }
        for (k, m) in self.profile.iter().enumerate() {
            w.serialize((self.s, self.xi(k), m))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn speed(profile: &[f64], h: f64) -> f64 {
    0.5 * (-3.0 * profile[0] + 4.0 * profile[1] - profile[2]) / (2.0 * h)
}

/// `r·∫_0^u e^{-rv - v²/2} dv` at each (sorted) `u`.
fn similarity_values(r: f64, us: &[f64]) -> Result<Vec<f64>> {
    let tol = Tolerance { abs: 1e-14, rel: 1e-12 };
    let f = |v: f64| (-r * v - 0.5 * v * v).exp();
    let mut acc = 0.0;
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(us.len());
    for &u in us {
        if u > prev {
            acc += integrate(f, prev, u, tol)?.0;
            prev = u;
        }
        out.push(r * acc);
    }
    Ok(out)
}

/// Closed-form similarity profile at `s = 1` in the original coordinate:
/// `μ·∫_r^x e^{-y²/2} dy / ∫_r^∞ e^{-y²/2} dy` for `x ≥ r(μ)`, zero behind the front.
pub fn self_similar_profile(mu: f64, x: f64) -> Result<f64> {
    let r = analytics::solve_r_subcritical(mu)?;
    if x <= r {
        return Ok(0.0);
    }
    if !x.is_finite() {
        return Ok(mu);
    }
    Ok(similarity_values(r, &[x - r])?[0].min(mu))
}

/// One Crank–Nicolson step of length `ds`.
pub fn stefan_step(state: &mut StefanState, ds: f64) -> Result<()> {
    let bound = max_ds(state.dxi);
    if !(ds > 0.0 && ds <= bound) {
        return Err(Error::Unstable { dt: ds, bound });
    }
    let v0 = state.front_speed();
    if v0 < 0.0 {
        return Err(Error::NegativeSpeed(v0));
    }
    let predicted = cn_solve(&state.profile, state.dxi, ds, v0)?;
    let v1 = speed(&predicted, state.dxi);
    if v1 < 0.0 {
        return Err(Error::NegativeSpeed(v1));
    }
    let v = 0.5 * (v0 + v1);
    state.profile = cn_solve(&state.profile, state.dxi, ds, v)?;
    state.r += v * ds;
    state.s += ds;
    Ok(())
}

fn cn_solve(profile: &[f64], h: f64, ds: f64, v: f64) -> Result<Vec<f64>> {
    let n = profile.len() - 1;
    let m = n - 1;
    // L μ_k = a μ_{k-1} - 2d μ_k + c μ_{k+1}
    let d = 0.5 / (h * h);
    let a = d - v / (2.0 * h);
    let c = d + v / (2.0 * h);
    let half = 0.5 * ds;
    let lower = vec![-half * a; m];
    let diag = vec![1.0 + half * 2.0 * d; m];
    let upper = vec![-half * c; m];
    let mut rhs = Vec::with_capacity(m);
    for k in 1..n {
        let l = a * profile[k - 1] - 2.0 * d * profile[k] + c * profile[k + 1];
        rhs.push(profile[k] + half * l);
    }
    // Boundary values are fixed in time.
    rhs[0] += half * a * profile[0];
    rhs[m - 1] += half * c * profile[n];
    let interior = solve_tridiagonal(&lower, &diag, &upper, &rhs)?;
    let mut out = Vec::with_capacity(n + 1);
    out.push(profile[0]);
    out.extend(interior);
    out.push(profile[n]);
    Ok(out)
}

/// Steps to `s_end` with step `min(ds, early_fraction·s, s_end - s)`, calling
/// `observe` after every step.
pub fn integrate_to<F: FnMut(&StefanState)>(
    state: &mut StefanState,
    s_end: f64,
    config: &StefanConfig,
    mut observe: F,
) -> Result<()> {
    config.validate()?;
    let floor = 1e-2 * state.dxi * state.dxi;
    while s_end - state.s > 1e-12 * s_end {
        let ds = config.ds.min((config.early_fraction * state.s).max(floor)).min(s_end - state.s);
        stefan_step(state, ds)?;
        observe(state);
    }
    Ok(())
}

/// Runs from the similarity slice at `config.s0` to `s_end`.
pub fn solve(mu_inf: f64, s_end: f64, config: &StefanConfig) -> Result<StefanState> {
    config.validate()?;
    if !(s_end > config.s0) {
        return Err(Error::invalid(format!("s_end = {s_end} must exceed s0 = {}", config.s0)));
    }
    let mut state = StefanState::similarity(mu_inf, config.s0, config.dxi, config.xi_max)?;
    integrate_to(&mut state, s_end, config, |_| {})?;
    Ok(state)
}

/// `∫_0^Ξ (μ∞ - μ) dξ + μ∞·r - r` by the trapezoid rule; zero for exact solutions.
pub fn conservation_residual(state: &StefanState) -> f64 {
    let p = &state.profile;
    let n = p.len() - 1;
    let deficit: f64 = (0..=n)
        .map(|k| {
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            w * (state.mu_inf - p[k])
        })
        .sum::<f64>()
        * state.dxi;
    deficit + state.mu_inf * state.r - state.r
}

/// Max-norm distance between the state and the similarity solution at the same `s`.
pub fn profile_error(state: &StefanState) -> Result<f64> {
    let exact = StefanState::similarity(state.mu_inf, state.s, state.dxi, state.xi(state.profile.len() - 1))?;
    Ok(state.profile.iter().zip(&exact.profile).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MU: f64 = 0.4382;

    #[test]
    fn closed_form_boundary_values() {
        let r = analytics::solve_r_subcritical(MU).unwrap();
        assert_eq!(self_similar_profile(MU, r).unwrap(), 0.0);
        assert_eq!(self_similar_profile(MU, r - 1.0).unwrap(), 0.0);
        assert!((self_similar_profile(MU, 40.0).unwrap() - MU).abs() < 1e-10);
        assert_eq!(self_similar_profile(MU, f64::INFINITY).unwrap(), MU);
    }

    #[test]
    fn closed_form_slope_at_front() {
        let r = analytics::solve_r_subcritical(MU).unwrap();
        let h = 1e-5;
        let f1 = self_similar_profile(MU, r + h).unwrap();
        let f2 = self_similar_profile(MU, r + 2.0 * h).unwrap();
        let slope = (4.0 * f1 - f2) / (2.0 * h);
        assert!((slope - r).abs() < 1e-4, "{slope}");
    }

    #[test]
    fn closed_form_matches_erfc_ratio() {
        use statrs::function::erf::erfc;
        let r = analytics::solve_r_subcritical(MU).unwrap();
        for x in [0.7, 1.0, 2.0, 3.5] {
            let z = std::f64::consts::FRAC_1_SQRT_2;
            let want = MU * (erfc(r * z) - erfc(x * z)) / erfc(r * z);
            assert!((self_similar_profile(MU, x).unwrap() - want).abs() < 1e-10);
        }
    }

    #[test]
    fn flat_front_does_not_move() {
        let mut st = StefanState::step_profile(0.5, 0.1, 2.0).unwrap();
        st.profile.iter_mut().for_each(|m| *m = 0.0);
        let n = st.profile.len() - 1;
        st.profile[n] = 0.5;
        st.profile[1] = 0.0;
        st.profile[2] = 0.0;
        assert_eq!(st.front_speed(), 0.0);
    }

    #[test]
    fn rejects_unstable_and_negative_speed() {
        let mut st = StefanState::step_profile(0.5, 0.01, 1.0).unwrap();
        assert!(matches!(stefan_step(&mut st, 1e-3), Err(Error::Unstable { .. })));
        st.profile[1] = 0.0;
        st.profile[2] = 0.3;
        assert!(matches!(stefan_step(&mut st, 1e-5), Err(Error::NegativeSpeed(_))));
        assert!(StefanState::step_profile(1.0, 0.01, 1.0).is_err());
    }

    #[test]
    fn initial_residuals_vanish() {
        let st = StefanState::step_profile(MU, 0.01, 12.0).unwrap();
        assert!(conservation_residual(&st).abs() < 0.01 * MU);
        for s in [1e-3, 0.1, 1.0, 4.0] {
            let st = StefanState::similarity(MU, s, 0.01, 12.0).unwrap();
            assert!(conservation_residual(&st).abs() < 1e-3, "s = {s}");
        }
    }

    #[test]
    fn self_similar_growth() {
        let cfg = StefanConfig::default();
        let mut st = StefanState::similarity(MU, 1.0, cfg.dxi, cfg.xi_max).unwrap();
        let r1 = st.r;
        integrate_to(&mut st, 4.0, &StefanConfig { ds: 2e-4, ..cfg }, |_| {}).unwrap();
        assert!((st.r / r1 - 2.0).abs() < 0.01, "{}", st.r / r1);
    }

    #[test]
    fn monotone_profiles_stay_monotone() {
        let cfg = StefanConfig::default();
        let mut st = StefanState::similarity(MU, cfg.s0, cfg.dxi, cfg.xi_max).unwrap();
        let mut last_r = st.r;
        integrate_to(&mut st, 0.2, &cfg, |s| {
            assert!(s.profile.windows(2).all(|w| w[1] >= w[0] - 1e-12));
            assert!(s.profile.iter().all(|&m| (-1e-12..=s.mu_inf + 1e-12).contains(&m)));
            assert!(s.r >= last_r);
            last_r = s.r;
        })
        .unwrap();
    }

    #[test]
    fn step_start_grows_like_square_root() {
        let cfg = StefanConfig { dxi: 0.002, xi_max: 4.0, ds: 8e-6, ..StefanConfig::default() };
        let mut st = StefanState::step_profile(MU, cfg.dxi, cfg.xi_max).unwrap();
        let targets: Vec<f64> = (0..=8).map(|k| 1e-3 * 10f64.powf(k as f64 / 4.0)).collect();
        let mut rs = Vec::new();
        for &s in &targets {
            integrate_to(&mut st, s, &cfg, |_| {}).unwrap();
            rs.push(st.r);
        }
        let (slope, _) = crate::harness::fit_power_law(&targets, &rs).unwrap();
        assert!((slope - 0.5).abs() < 0.02, "{slope}");
    }
}

//! Closed-form growth predictions for the three density regimes.
//!
//! | regime         | exponent | continuous time     | discrete time        |
//! |----------------|----------|---------------------|----------------------|
//! | `mu < 1`       | 1/2      | root `r` of `mu_of_r(r) = mu` (both modes) |
//! | `mu = 1`       | 2/3      | `(1/2)(3/2)^(2/3)`  | `(9/40)^(1/3)`       |
//! | `mu = 1 + eps` | 1        | `eps/2`             | `2 eps/5`            |
//!
//! The supercritical and critical constants follow from balancing two
//! expressions for the rate at which particles are lost:
//! `kappa * r^2` (with `kappa = 2` in continuous time, `5/2` in discrete time)
//! against the drift of `R(mu - 1) + mu/(2r)`.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::model::TimeMode;
use crate::quadrature::{quad_breaks, Tolerance};
use crate::{Error, Result};

/// Upper limit for the `e^{-x}`-weighted integrals; the truncated tail is below `e^{-40}`.
const TAIL_CUTOFF: f64 = 40.0;
const QUAD_TOL: Tolerance = Tolerance { abs: 1e-13, rel: 1e-13 };
const ROOT_TOL: f64 = 1e-10;

/// Densities within this distance of 1 are treated as critical.
pub const CRITICAL_BAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl Regime {
    pub fn of(mu: f64) -> Self {
        if (mu - 1.0).abs() <= CRITICAL_BAND {
            Regime::Critical
        } else if mu < 1.0 {
            Regime::Subcritical
        } else {
            Regime::Supercritical
        }
    }

    pub fn exponent(self) -> f64 {
        match self {
            Regime::Subcritical => 0.5,
            Regime::Critical => 2.0 / 3.0,
            Regime::Supercritical => 1.0,
        }
    }
}

/// `mu(r) = ∫₀^∞ e^{-x} exp(-x²/(2r²)) dx`, the far-field density whose
/// subcritical front grows like `r·√t`.
pub fn mu_of_r(r: f64) -> Result<f64> {
    check_r(r)?;
    let inv = 0.5 / (r * r);
    quad_breaks(|x| (-x - inv * x * x).exp(), &breakpoints(r), QUAD_TOL)
}

/// `1 - mu(r)` evaluated without cancellation, so the large-`r` tail
/// `1/r² - 3/r⁴ + ...` stays resolvable.
pub fn mu_deficit(r: f64) -> Result<f64> {
    check_r(r)?;
    let inv = 0.5 / (r * r);
    quad_breaks(|x| -(-x).exp() * (-inv * x * x).exp_m1(), &breakpoints(r), QUAD_TOL)
}

/// The same function through the normal tail: `r·e^{r²/2}·√(2π)·(1 - Φ(r))`.
///
/// Accurate for moderate `r`; past `r ≈ 30` the exponential factors leave
/// the double range.
pub fn mu_of_r_closed_form(r: f64) -> Result<f64> {
    check_r(r)?;
    let tail = 0.5 * erfc(r / std::f64::consts::SQRT_2);
    Ok(r * (0.5 * r * r).exp() * (2.0 * std::f64::consts::PI).sqrt() * tail)
}

/// The Gaussian factor has width `r`; split there so small `r` is resolved.
fn breakpoints(r: f64) -> Vec<f64> {
    let knee = 10.0 * r;
    if knee < TAIL_CUTOFF {
        vec![0.0, knee, TAIL_CUTOFF]
    } else {
        vec![0.0, TAIL_CUTOFF]
    }
}

fn check_r(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("r must be positive and finite, got {r}")))
    }
}

/// Unique positive root of `mu_of_r(r) = mu` for `mu ∈ (0, 1)`.
///
/// Bisection in `log r` on `mu_deficit(r) - (1 - mu)`, which keeps relative
/// precision as `mu → 1` where `r ~ (1 - mu)^{-1/2}` becomes large.
pub fn solve_r_subcritical(mu: f64) -> Result<f64> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::invalid(format!("subcritical root needs mu in (0, 1), got {mu}")));
    }
    let target = 1.0 - mu;
    let g = |r: f64| mu_deficit(r).map(|d| d - target);

    // mu(r) ≈ r√(π/2) near 0 and 1 - mu(r) ≈ 1/r² for large r.
    let mut lo = (0.5 * mu).min(0.5);
    let mut hi = (2.0 / target.sqrt()).max(2.0);
    while g(lo)? <= 0.0 {
        lo *= 0.5;
    }
    while g(hi)? >= 0.0 {
        hi *= 2.0;
    }
    while hi - lo > ROOT_TOL * hi.max(1.0) {
        let mid = (lo * hi).sqrt();
        if g(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Stationary density at offset `i` ahead of a front moving at speed `r`.
pub fn stationary_wave(mu: f64, r: f64, i: f64) -> f64 {
    -mu * (-2.0 * r * i).exp_m1()
}

/// Expected number of lost particles once the stationary wave is established.
pub fn lost_total(front: f64, mu: f64, r: f64) -> f64 {
    front * (mu - 1.0) + mu / (2.0 * r)
}

/// Coefficient `kappa` in `dE[L]/dt ≈ kappa·r²`.
pub fn lost_rate_coefficient(mode: TimeMode) -> f64 {
    match mode {
        TimeMode::Continuous => 2.0,
        TimeMode::Discrete => 2.5,
    }
}

pub fn lost_rate(r: f64, mode: TimeMode) -> f64 {
    lost_rate_coefficient(mode) * r * r
}

/// Linear speed for `mu > 1`: the lost-particle drift `eps·r` equals `kappa·r²`.
pub fn supercritical_speed(mu: f64, mode: TimeMode) -> f64 {
    (mu - 1.0) / lost_rate_coefficient(mode)
}

/// Constant `c` in `R(t) ≈ c·t^{2/3}` at `mu = 1`: `c³ = 9/(16 kappa)`.
pub fn critical_constant(mode: TimeMode) -> f64 {
    (9.0 / (16.0 * lost_rate_coefficient(mode))).cbrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub mu: f64,
    pub regime: Regime,
    pub time_mode: TimeMode,
    /// `r(mu)`, `c` or the linear speed, depending on the regime.
    pub constant: f64,
    pub alpha: f64,
    /// Profile decay rate `2r`; constant only in the supercritical regime.
    pub wave_rate: Option<f64>,
    pub lost_rate: Option<f64>,
    pub lost_intercept: Option<f64>,
}

impl PredictionSet {
    pub fn size_at(&self, t: f64) -> f64 {
        self.constant * t.powf(self.alpha)
    }

    pub fn speed_at(&self, t: f64) -> f64 {
        self.constant * self.alpha * t.powf(self.alpha - 1.0)
    }

    pub fn wave_rate_at(&self, t: f64) -> f64 {
        2.0 * self.speed_at(t)
    }

    pub fn lost_rate_at(&self, t: f64) -> f64 {
        lost_rate(self.speed_at(t), self.time_mode)
    }

    pub fn lost_total_at(&self, t: f64) -> f64 {
        lost_total(self.size_at(t), self.mu, self.speed_at(t))
    }
}

pub fn predict(mu: f64, mode: TimeMode) -> Result<PredictionSet> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::invalid(format!("mu must be positive, got {mu}")));
    }
    let regime = Regime::of(mu);
    let alpha = regime.exponent();
    let set = match regime {
        Regime::Subcritical => PredictionSet {
            mu,
            regime,
            time_mode: mode,
            constant: solve_r_subcritical(mu)?,
            alpha,
            wave_rate: None,
            lost_rate: None,
            lost_intercept: None,
        },
        Regime::Critical => PredictionSet {
            mu,
            regime,
            time_mode: mode,
            constant: critical_constant(mode),
            alpha,
            wave_rate: None,
            lost_rate: None,
            lost_intercept: None,
        },
        Regime::Supercritical => {
            let v = supercritical_speed(mu, mode);
            PredictionSet {
                mu,
                regime,
                time_mode: mode,
                constant: v,
                alpha,
                wave_rate: Some(2.0 * v),
                lost_rate: Some(lost_rate(v, mode)),
                lost_intercept: Some(mu / (2.0 * v)),
            }
        }
    };
    Ok(set)
}

/// `coefficient · t^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub coefficient: f64,
    pub exponent: f64,
}

/// The two critical-regime expressions for `dE[L]/dt` under `R ≈ c·t^α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBalance {
    /// Derivative of `L ≈ 1/(2r)` with `r = cα t^{α-1}`.
    pub from_profile: PowerLaw,
    /// `kappa·r²` with the same `r`.
    pub from_rate: PowerLaw,
}

impl LossBalance {
    pub fn exponent_gap(&self) -> f64 {
        self.from_profile.exponent - self.from_rate.exponent
    }

    pub fn coefficient_ratio(&self) -> f64 {
        self.from_profile.coefficient / self.from_rate.coefficient
    }

    pub fn balanced(&self, tol: f64) -> bool {
        self.exponent_gap().abs() <= tol && (self.coefficient_ratio() - 1.0).abs() <= tol
    }
}

pub fn critical_exponent_balance(alpha: f64, c: f64, mode: TimeMode) -> Result<LossBalance> {
    if !(alpha > 0.5 && alpha < 1.0) || !(c > 0.0) {
        return Err(Error::invalid(format!("need 1/2 < alpha < 1 and c > 0, got ({alpha}, {c})")));
    }
    let kappa = lost_rate_coefficient(mode);
    Ok(LossBalance {
        from_profile: PowerLaw { coefficient: (1.0 - alpha) / (2.0 * c * alpha), exponent: -alpha },
        from_rate: PowerLaw { coefficient: kappa * c * c * alpha * alpha, exponent: 2.0 * alpha - 2.0 },
    })
}

/// Solves the balance: equal exponents force `α = 2/3`, equal coefficients then fix `c`.
pub fn solve_critical_balance(mode: TimeMode) -> (f64, f64) {
    // -α = 2α - 2
    let alpha: f64 = 2.0 / 3.0;
    // (1-α)/(2cα) = kappa c² α²  =>  c³ = (1-α)/(2 kappa α³)
    let kappa = lost_rate_coefficient(mode);
    let c = ((1.0 - alpha) / (2.0 * kappa * alpha.powi(3))).cbrt();
    (alpha, c)
}

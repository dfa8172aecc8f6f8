//! Three-ball inequalities, vanishing-order slopes, `c₀` fitting and the
//! desk-scale decay iteration.

mod fit;
mod landis;
mod three_ball;
mod vanishing;

pub use fit::{fit_c0, C0Fit, C0_CAP};
pub use landis::{
    gating_conditions, landis_iteration, GatingCondition, GatingPolicy, GatingReport,
    LandisConfig, LandisReport, LandisStep, MAX_STEPS,
};
pub use three_ball::{
    auto_alpha, kappa_classical, kappa_variable, sandwich_check, three_ball_classical,
    three_ball_variable, ExplicitBound, SandwichCheck, ThreeBallKind, ThreeBallReport,
};
pub use vanishing::{vanishing_order, VanishingReport, DEFAULT_WINDOW};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::BallRule;
use crate::solutions::SolutionField;

/// Radii for a three-ball inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiiTriple {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

impl RadiiTriple {
    pub fn new(r1: f64, r2: f64, r3: f64) -> Self {
        RadiiTriple { r1, r2, r3 }
    }

    /// `0 < r1 < r2 < σ r2 < r3 ≤ R`.
    pub fn check(&self, sigma: f64, big_r: f64) -> Result<()> {
        let RadiiTriple { r1, r2, r3 } = *self;
        if !(r1 > 0.0 && r1.is_finite()) {
            return Err(Error::config("r1", format!("must be positive, got {r1}")));
        }
        if !(r2 > r1) {
            return Err(Error::config("r2", format!("need r1 < r2, got r1 = {r1}, r2 = {r2}")));
        }
        if !(sigma > 1.0) {
            return Err(Error::config("sigma", format!("must exceed 1, got {sigma}")));
        }
        if !(r3 > sigma * r2) {
            return Err(Error::config(
                "r3",
                format!("need sigma*r2 < r3, got {} >= {r3}", sigma * r2),
            ));
        }
        if !(r3 <= big_r) {
            return Err(Error::config("r3", format!("must not exceed R = {big_r}, got {r3}")));
        }
        Ok(())
    }
}

/// Constants used across certification tasks. `c₀`, `c₁`, `C̃`, ... are
/// only known to exist; here they are plain inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyConfig {
    /// Monotonicity constant of the variable-coefficient `Ñ`.
    pub c0: f64,
    /// Constant of the `div(Ax)/μ - n` bound, entering `e^{c₁ηR}`.
    pub c1: f64,
    /// Dilation in the variable-coefficient three-ball inequality.
    pub sigma: f64,
    pub radii: RadiiTriple,
    pub delta: f64,
    pub epsilon: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            c0: 0.0,
            c1: 0.0,
            sigma: 2.0,
            radii: RadiiTriple::new(0.1, 0.25, 0.75),
            delta: 0.1,
            epsilon: 0.2,
        }
    }
}

impl CertifyConfig {
    pub fn validate(&self, big_r: f64) -> Result<()> {
        for (name, v) in [("c0", self.c0), ("c1", self.c1)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !(self.delta > 0.0 && self.delta < self.epsilon && self.epsilon.is_finite()) {
            return Err(Error::config(
                "delta",
                format!("need 0 < delta < epsilon, got {} and {}", self.delta, self.epsilon),
            ));
        }
        self.radii.check(self.sigma, big_r)
    }
}

/// `h(r) = ∫_{B_r(center)} u²` with an unweighted rule.
pub(crate) fn ball_mass(sol: &SolutionField, rule: &BallRule, center: &[f64], r: f64) -> Result<f64> {
    rule.integrate(center, r, |x| {
        let u = sol.value(x);
        u * u
    })
}

/// Volume of the unit ball.
pub(crate) fn unit_ball_volume(n: usize) -> f64 {
    match n {
        2 => std::f64::consts::PI,
        _ => 4.0 / 3.0 * std::f64::consts::PI,
    }
}

//! Log-log slope of `h(r) = ∫_{B_r} u²` as `r → 0`.

use serde::{Deserialize, Serialize};

use super::ball_mass;
use crate::error::{Error, Result};
use crate::fields::Constants;
use crate::quad::{geometric_radii, BallDomain, BallRule};
use crate::solutions::SolutionField;

/// Fraction of the smallest radii used in the slope fit.
pub const DEFAULT_WINDOW: f64 = 0.25;

const MIN_R: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanishingReport {
    pub radii: Vec<f64>,
    pub h: Vec<f64>,
    pub window: f64,
    /// Number of radii entering the fit.
    pub used: usize,
    pub slope: f64,
    pub intercept: f64,
    /// Largest residual of the fit on `log h`.
    pub fit_residual: f64,
    /// `C[K² + M^{2/3} + η + 1] e^{cη}`, when requested.
    pub bound_exponent: Option<f64>,
}

impl VanishingReport {
    /// Attach the lower-bound exponent for user-supplied `(C, c)`.
    pub fn with_bound(mut self, big_c: f64, c: f64, k: &Constants) -> Self {
        self.bound_exponent =
            Some(big_c * (k.k * k.k + k.m.powf(2.0 / 3.0) + k.eta + 1.0) * (c * k.eta).exp());
        self
    }
}

/// OLS slope of `(log r, log h)` over the smallest `window` fraction of
/// `points` geometric radii in `[r_min, r_max]`.
pub fn vanishing_order(
    sol: &SolutionField,
    domain: &BallDomain,
    r_min: f64,
    r_max: f64,
    points: usize,
    window: f64,
) -> Result<VanishingReport> {
    if !(r_min >= MIN_R) {
        return Err(Error::config("r_min", format!("must be at least {MIN_R}, got {r_min}")));
    }
    if !(r_max > r_min) {
        return Err(Error::config("r_max", format!("must exceed r_min = {r_min}, got {r_max}")));
    }
    if points < 4 {
        return Err(Error::config("points", format!("need at least 4, got {points}")));
    }
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::config("window", format!("must lie in (0, 1], got {window}")));
    }
    domain.check_radius(r_max)?;
    let rule = BallRule::new(domain.dim(), 0.0, domain.levels())?;
    let radii = geometric_radii(r_min, r_max, points);
    let h = radii
        .iter()
        .map(|&r| {
            let v = ball_mass(sol, &rule, domain.center(), r)?;
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Degenerate { radius: r, value: v })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let used = ((window * points as f64).ceil() as usize).clamp(2, points);
    let xs: Vec<f64> = radii[..used].iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = h[..used].iter().map(|v| v.ln()).collect();
    let (slope, intercept) = ols(&xs, &ys);
    let fit_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x - intercept).abs())
        .fold(0.0, f64::max);
    Ok(VanishingReport {
        radii,
        h,
        window,
        used,
        slope,
        intercept,
        fit_residual,
        bound_exponent: None,
    })
}

fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

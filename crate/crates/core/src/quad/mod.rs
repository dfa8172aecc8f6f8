//! Weighted integrals over balls and their radial derivatives.
//!
//! Everything here is built around the boundary-vanishing weight
//! `ω_r(x) = r² - |x - c|²` on `B_r(c)`. [`BallRule`] carries the quadrature,
//! [`integrate_weighted`] is the one-shot entry point, and
//! [`check_derivative_identity`] compares a numerical `F'(r)` against both
//! closed-form expressions for the derivative of `F(r) = ∫_{B_r} f ω_r^α`.

mod radial;
mod rule;

pub use radial::{
    geometric_radii, local_derivative, radial_derivative, uniform_radii, RadialGrid,
    StencilDerivative,
};
pub use rule::{BallRule, NodeCounts};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible radius as a fraction of the domain radius.
pub const MIN_RADIUS_FRACTION: f64 = 1e-3;

/// Default refinement level for examples and interactive runs.
pub const DEFAULT_LEVELS: u32 = 5;

/// Refinement level used by the acceptance suite.
pub const ACCEPTANCE_LEVELS: u32 = 7;

/// A ball `B_R(center)` in dimension 2 or 3 together with a quadrature level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallDomain {
    center: Vec<f64>,
    radius: f64,
    levels: u32,
}

impl BallDomain {
    pub fn new(center: Vec<f64>, radius: f64, levels: u32) -> Result<Self> {
        let dim = center.len();
        if dim != 2 && dim != 3 {
            return Err(Error::domain(format!("dimension must be 2 or 3, got {dim}")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("ball center must be finite"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::domain(format!("ball radius must be positive, got {radius}")));
        }
        if levels == 0 {
            return Err(Error::domain("levels must be at least 1"));
        }
        Ok(BallDomain {
            center,
            radius,
            levels,
        })
    }

    /// Ball of radius `radius` centered at the origin.
    pub fn centered(dim: usize, radius: f64, levels: u32) -> Result<Self> {
        Self::new(vec![0.0; dim], radius, levels)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn with_levels(&self, levels: u32) -> Self {
        BallDomain {
            levels,
            ..self.clone()
        }
    }

    pub fn min_radius(&self) -> f64 {
        MIN_RADIUS_FRACTION * self.radius
    }

    /// Reject radii outside `[1e-3 R, R]`.
    pub fn check_radius(&self, r: f64) -> Result<()> {
        if !(r.is_finite() && r >= self.min_radius() && r <= self.radius * (1.0 + 1e-12)) {
            return Err(Error::domain(format!(
                "radius {r} outside [{}, {}]",
                self.min_radius(),
                self.radius
            )));
        }
        Ok(())
    }

    pub fn rule(&self, alpha: f64) -> Result<BallRule> {
        BallRule::new(self.dim(), alpha, self.levels)
    }
}

/// The weight `ω_r^α`: radius `r` and exponent `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub r: f64,
    pub alpha: f64,
}

impl WeightSpec {
    pub fn new(r: f64, alpha: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::domain(format!("weight radius must be positive, got {r}")));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::domain(format!("weight exponent must be >= 0, got {alpha}")));
        }
        Ok(WeightSpec { r, alpha })
    }
}

/// `ω_r(x) = r² - |x|²` for `x` measured from the ball center.
pub fn weight(x: &[f64], spec: &WeightSpec) -> Result<f64> {
    let x2: f64 = x.iter().map(|c| c * c).sum();
    let r2 = spec.r * spec.r;
    if x2 > r2 * (1.0 + 1e-14) {
        return Err(Error::domain(format!(
            "|x| = {} exceeds r = {}",
            x2.sqrt(),
            spec.r
        )));
    }
    Ok((r2 - x2).max(0.0))
}

/// `∫_{B_r(c)} f(x) ω_r(x)^α dx` with the domain's quadrature level.
pub fn integrate_weighted<F>(f: F, domain: &BallDomain, spec: &WeightSpec) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    domain.check_radius(spec.r)?;
    domain.rule(spec.alpha)?.integrate(domain.center(), spec.r, f)
}

/// Residuals of the two weight-derivative identities at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResiduals {
    pub r: f64,
    pub value: f64,
    /// Numerical `F'(r)` from the local stencil.
    pub derivative: f64,
    /// `(2α+n)/r F + (1/r) ∫ ∇f·x ω^α`.
    pub rhs_gradient: f64,
    /// `(2α+n)/r F + 1/(2(α+1) r) ∫ Δf ω^(α+1)`.
    pub rhs_laplacian: f64,
    pub residual_gradient: f64,
    pub residual_laplacian: f64,
    pub stencil_error: f64,
}

impl IdentityResiduals {
    /// Residuals relative to the largest magnitude among the compared terms.
    pub fn relative(&self) -> (f64, f64) {
        let scale = self
            .derivative
            .abs()
            .max(self.rhs_gradient.abs())
            .max(self.rhs_laplacian.abs())
            .max(f64::MIN_POSITIVE);
        (self.residual_gradient / scale, self.residual_laplacian / scale)
    }
}

/// Compare `F'(r)` for `F(r) = ∫_{B_r} f ω_r^α` against both closed forms.
///
/// `grad_f` writes `∇f(x)` into its output slice; `x` passed to all three
/// closures is the physical point, and the radial vector is `x - center`.
pub fn check_derivative_identity<F, G, L>(
    f: F,
    grad_f: G,
    lap_f: L,
    domain: &BallDomain,
    alpha: f64,
    r: f64,
) -> Result<IdentityResiduals>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
    L: Fn(&[f64]) -> f64,
{
    if !(alpha >= 1.0) {
        return Err(Error::domain(format!(
            "derivative identity needs alpha >= 1, got {alpha}"
        )));
    }
    domain.check_radius(r)?;
    let n = domain.dim();
    let c = domain.center();
    let rule = domain.rule(alpha)?;

    let value = rule.integrate(c, r, &f)?;
    let mut g = [0.0; 3];
    let mut radial_term = 0.0;
    let mut laplacian_term = 0.0;
    rule.visit(c, r, |x, omega, w| {
        grad_f(x, &mut g[..n]);
        let gx: f64 = (0..n).map(|i| g[i] * (x[i] - c[i])).sum();
        let lap = lap_f(x);
        if !(gx.is_finite() && lap.is_finite()) {
            return Err(Error::NonFinite {
                point: x.to_vec(),
                value: if gx.is_finite() { lap } else { gx },
            });
        }
        radial_term += w * gx;
        laplacian_term += w * lap * omega;
        Ok(())
    })?;

    let head = (2.0 * alpha + n as f64) / r * value;
    let rhs_gradient = head + radial_term / r;
    let rhs_laplacian = head + laplacian_term / (2.0 * (alpha + 1.0) * r);

    let stencil = local_derivative(
        |s| rule.integrate(c, s, &f),
        r,
        domain.min_radius() * 0.5,
        domain.radius(),
    )?;
    Ok(IdentityResiduals {
        r,
        value,
        derivative: stencil.value,
        rhs_gradient,
        rhs_laplacian,
        residual_gradient: (stencil.value - rhs_gradient).abs(),
        residual_laplacian: (stencil.value - rhs_laplacian).abs(),
        stencil_error: stencil.error_estimate,
    })
}

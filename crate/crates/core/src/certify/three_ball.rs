//! Three-ball inequalities: `κ`, both sides, the fitted constant, and the
//! explicit constant the proof produces for a concrete `α`.

use serde::{Deserialize, Serialize};

use super::{ball_mass, CertifyConfig, RadiiTriple};
use crate::error::{Error, Result};
use crate::fields::CoefficientField;
use crate::quad::{BallDomain, BallRule};
use crate::solutions::SolutionField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThreeBallKind {
    Classical,
    Variable,
}

/// The inequality with the proof's explicit constant for one `α`, on the
/// level of `h = ‖u‖²`: `log h(r₂) - κ log h(r₁) - (1-κ) log h(r₃) ≤ log_constant`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplicitBound {
    pub alpha: f64,
    pub log_constant: f64,
    pub log_gap: f64,
    /// `log_constant - log_gap`.
    pub margin: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreeBallReport {
    pub kind: ThreeBallKind,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub sigma: f64,
    pub big_r: f64,
    pub kappa: f64,
    /// `‖u‖_{L²(B_r)}` at `r₁, r₂, r₃`.
    pub norms: [f64; 3],
    /// `‖u‖_{r₂}`.
    pub lhs: f64,
    /// `(‖u‖_{r₁}^κ, ‖u‖_{r₃}^{1-κ})`.
    pub rhs_factors: (f64, f64),
    /// `log(lhs / (f₁ f₂))`; negative when the inequality holds with constant 1.
    pub log_slack: f64,
    /// Logarithm of the explicit prefactor (`c₁ηR + 2 - 2 log λ` for variable).
    pub log_prefactor: f64,
    /// `(MR²)^{2/3}` or `[(KR)² + (MR²)^{2/3}][log(σ²/(σ²-1)) + log(r₃/σr₂)]`.
    pub predicted_scaling: f64,
    /// Smallest `C ≥ 0` making the inequality hold; `None` when the scaling
    /// vanishes but the slack is positive.
    pub fitted_c: Option<f64>,
    pub explicit: ExplicitBound,
    pub passed: bool,
}

/// `α = max(2, ⌈(MR²)^{2/3}⌉)`.
pub fn auto_alpha(m: f64, big_r: f64) -> f64 {
    (m * big_r * big_r).powf(2.0 / 3.0).ceil().max(2.0)
}

pub fn kappa_classical(r: &RadiiTriple) -> f64 {
    (r.r3 / (2.0 * r.r2)).ln() / (r.r3 / r.r1).ln()
}

/// `κ` of the variable-coefficient three-ball inequality with `e₀ = (5/3) e^{1 + c₀ηR}`.
pub fn kappa_variable(r: &RadiiTriple, sigma: f64, c0: f64, eta: f64, big_r: f64) -> f64 {
    let e = 5.0 / 3.0 * (1.0 + c0 * eta * big_r).exp();
    let sr2 = (sigma * r.r2).ln();
    (r.r3.ln() - sr2) / (r.r3.ln() + (e - 1.0) * sr2 - e * r.r1.ln())
}

fn norms(sol: &SolutionField, domain: &BallDomain, r: &RadiiTriple) -> Result<[f64; 3]> {
    if sol.dim() != domain.dim() {
        return Err(Error::domain("solution and domain dimensions differ"));
    }
    let rule = BallRule::new(domain.dim(), 0.0, domain.levels())?;
    let mut out = [0.0; 3];
    for (o, &radius) in out.iter_mut().zip(&[r.r1, r.r2, r.r3]) {
        let h = ball_mass(sol, &rule, domain.center(), radius)?;
        if !(h > 0.0) {
            return Err(Error::Degenerate {
                radius,
                value: h,
            });
        }
        *o = h.sqrt();
    }
    Ok(out)
}

fn fitted(numerator: f64, scaling: f64) -> Option<f64> {
    if scaling > 0.0 {
        Some((numerator / scaling).max(0.0))
    } else if numerator <= 0.0 {
        Some(0.0)
    } else {
        None
    }
}

#[allow(clippy::too_many_arguments)]
fn report(
    kind: ThreeBallKind,
    r: &RadiiTriple,
    sigma: f64,
    big_r: f64,
    kappa: f64,
    norms: [f64; 3],
    log_prefactor: f64,
    predicted_scaling: f64,
    alpha: f64,
    log_constant: f64,
) -> ThreeBallReport {
    let f1 = norms[0].powf(kappa);
    let f2 = norms[2].powf(1.0 - kappa);
    let log_slack = norms[1].ln() - kappa * norms[0].ln() - (1.0 - kappa) * norms[2].ln();
    let fitted_c = fitted(log_slack - log_prefactor, predicted_scaling);
    let log_gap = 2.0 * log_slack;
    let explicit = ExplicitBound {
        alpha,
        log_constant,
        log_gap,
        margin: log_constant - log_gap,
        holds: log_gap <= log_constant,
    };
    ThreeBallReport {
        kind,
        r1: r.r1,
        r2: r.r2,
        r3: r.r3,
        sigma,
        big_r,
        kappa,
        norms,
        lhs: norms[1],
        rhs_factors: (f1, f2),
        log_slack,
        log_prefactor,
        predicted_scaling,
        fitted_c,
        explicit,
        passed: fitted_c.is_some() && explicit.holds,
    }
}

/// Classical inequality on `B_R` (the domain) with `M` from the solution's field.
pub fn three_ball_classical(
    sol: &SolutionField,
    domain: &BallDomain,
    radii: &RadiiTriple,
) -> Result<ThreeBallReport> {
    let big_r = domain.radius();
    radii.check(2.0, big_r)?;
    let m = sol.field().constants().m;
    let norms = norms(sol, domain, radii)?;
    let kappa = kappa_classical(radii);
    let mr2 = m * big_r * big_r;
    let alpha = auto_alpha(m, big_r);
    let log_constant =
        alpha * (4.0f64 / 3.0).ln() + mr2 / (2.0 * alpha) + (mr2 / (8.0 * alpha)).powi(2);
    Ok(report(
        ThreeBallKind::Classical,
        radii,
        2.0,
        big_r,
        kappa,
        norms,
        0.0,
        mr2.powf(2.0 / 3.0),
        alpha,
        log_constant,
    ))
}

/// Variable-coefficient inequality; `A`, `λ`, `η`, `M`, `K` come from `field`
/// and `σ`, `c₀`, `c₁` from `cfg`.
pub fn three_ball_variable(
    sol: &SolutionField,
    field: &CoefficientField,
    domain: &BallDomain,
    radii: &RadiiTriple,
    cfg: &CertifyConfig,
) -> Result<ThreeBallReport> {
    let big_r = domain.radius();
    radii.check(cfg.sigma, big_r)?;
    field.require_identity_at_origin()?;
    let c = field.constants();
    let norms = norms(sol, domain, radii)?;
    let sigma = cfg.sigma;
    let kappa = kappa_variable(radii, sigma, cfg.c0, c.eta, big_r);
    let log_prefactor = cfg.c1 * c.eta * big_r + 2.0 - 2.0 * c.lambda.ln();
    let mr2 = c.m * big_r * big_r;
    let dilation = (sigma * sigma / (sigma * sigma - 1.0)).ln();
    let outer = (radii.r3 / (sigma * radii.r2)).ln();
    let predicted = ((c.k * big_r).powi(2) + mr2.powf(2.0 / 3.0)) * (dilation + outer);
    let alpha = 2f64
        .max((c.k * big_r / (2.0 * c.lambda)).powi(2).ceil())
        .max((mr2 / c.lambda).powf(2.0 / 3.0).ceil());
    let log_constant = log_prefactor
        + alpha * (dilation + 2.0 * outer)
        + (mr2 / (12.0 * c.lambda * alpha)).powi(2)
        + mr2 / (2.0 * c.lambda * alpha);
    Ok(report(
        ThreeBallKind::Variable,
        radii,
        sigma,
        big_r,
        kappa,
        norms,
        log_prefactor,
        predicted,
        alpha,
        log_constant,
    ))
}

/// `H(r) ≤ r^{2(α-1)} h(r)` and `h(r) ≤ H(ρ)/(ρ² - r²)^{α-1}` for `A = I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichCheck {
    pub r: f64,
    pub rho: f64,
    pub alpha: f64,
    pub big_h_r: f64,
    pub h_r: f64,
    pub big_h_rho: f64,
    pub upper_holds: bool,
    pub lower_holds: bool,
}

pub fn sandwich_check(
    sol: &SolutionField,
    domain: &BallDomain,
    alpha: f64,
    r: f64,
    rho: f64,
) -> Result<SandwichCheck> {
    if !(r > 0.0 && rho > r) {
        return Err(Error::config("rho", format!("need 0 < r < rho, got r = {r}, rho = {rho}")));
    }
    domain.check_radius(rho)?;
    let n = domain.dim();
    let weighted = BallRule::new(n, alpha - 1.0, domain.levels())?;
    let flat = BallRule::new(n, 0.0, domain.levels())?;
    let c = domain.center();
    let big_h_r = ball_mass(sol, &weighted, c, r)?;
    let big_h_rho = ball_mass(sol, &weighted, c, rho)?;
    let h_r = ball_mass(sol, &flat, c, r)?;
    let tol = 1e-12;
    Ok(SandwichCheck {
        r,
        rho,
        alpha,
        big_h_r,
        h_r,
        big_h_rho,
        upper_holds: big_h_r <= r.powf(2.0 * (alpha - 1.0)) * h_r * (1.0 + tol),
        lower_holds: h_r <= big_h_rho / (rho * rho - r * r).powf(alpha - 1.0) * (1.0 + tol),
    })
}

//! Derivative identities and monotonicity verdicts for computed bundles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{integrate_raw, rule_pair, BundleKind, FrequencyBundle};
use crate::error::{Error, Result};
use crate::quad::{local_derivative, BallDomain, BallRule};
use crate::solutions::SolutionField;

/// Fewest radii for which a monotonicity verdict is issued.
pub const MIN_MONOTONICITY_POINTS: usize = 16;

/// Multiplier applied to numerical error estimates before a verdict.
pub const BUDGET_FACTOR: f64 = 10.0;

/// One radius of a derivative identity or inequality check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    pub r: f64,
    /// Left-hand side with the numerical derivative.
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs - rhs`.
    pub slack: f64,
    /// `|slack|` relative to the larger side.
    pub relative: f64,
    /// Stencil error plus the level-to-level change of both sides.
    pub error_estimate: f64,
}

impl DerivativeCheck {
    fn new(r: f64, lhs: f64, rhs: f64, error_estimate: f64) -> Self {
        let slack = lhs - rhs;
        let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
        DerivativeCheck {
            r,
            lhs,
            rhs,
            slack,
            relative: slack.abs() / scale,
            error_estimate,
        }
    }

    /// Inequality verdict: `slack ≥ -10 × error`.
    pub fn holds(&self) -> bool {
        self.slack >= -BUDGET_FACTOR * self.error_estimate
    }
}

fn sides<F>(bundle: &FrequencyBundle, domain: &BallDomain, rules: [&BallRule; 2], eval: F) -> Result<Vec<DerivativeCheck>>
where
    F: Fn(&BallRule, f64) -> Result<(f64, f64, f64)> + Sync,
{
    let (lo, hi) = (0.5 * domain.min_radius(), domain.radius());
    bundle
        .rows
        .par_iter()
        .map(|row| {
            let r = row.r;
            let mut out = [(0.0, 0.0, 0.0); 2];
            for (slot, rule) in out.iter_mut().zip(rules) {
                // (lhs without derivative part, derivative, rhs)
                let st = local_derivative(|s| eval(rule, s).map(|t| t.0), r, lo, hi)?;
                let (_, extra, rhs) = eval(rule, r)?;
                *slot = (st.value + extra, st.error_estimate, rhs);
            }
            let (fine, coarse) = (out[0], out[1]);
            let err = fine.1 + (fine.0 - coarse.0).abs() + (fine.2 - coarse.2).abs();
            Ok(DerivativeCheck::new(r, fine.0, fine.2, err))
        })
        .collect()
}

/// `H'(r)` against `(2(α-1)+n)/r H + (D+L)/(αr) [+ E_H/r]` on the bundle's radii.
pub fn check_h_derivative(
    bundle: &FrequencyBundle,
    sol: &SolutionField,
    domain: &BallDomain,
) -> Result<Vec<DerivativeCheck>> {
    let (fine, coarse) = rule_pair(domain, bundle.alpha)?;
    let field = bundle.field.as_ref();
    let alpha = bundle.alpha;
    let n = bundle.dim as f64;
    sides(bundle, domain, [&fine, &coarse], |rule, s| {
        let raw = integrate_raw(sol, field, rule, s, alpha)?;
        let rhs = (2.0 * (alpha - 1.0) + n) / s * raw.h + (raw.d + raw.l) / (alpha * s) + raw.eh / s;
        Ok((raw.h, 0.0, rhs))
    })
}

/// `N'(r) [+ c₀ηN]` against `-∫(div A∇u)² μ⁻¹ ω^(α+1) / (4αrH)`.
pub fn check_n_derivative_bound(
    bundle: &FrequencyBundle,
    sol: &SolutionField,
    domain: &BallDomain,
) -> Result<Vec<DerivativeCheck>> {
    let (fine, coarse) = rule_pair(domain, bundle.alpha)?;
    let field = bundle.field.as_ref();
    let alpha = bundle.alpha;
    let damping = match bundle.kind {
        BundleKind::Classical => 0.0,
        BundleKind::Variable => bundle.c0 * bundle.constants.eta,
    };
    let mut checks = sides(bundle, domain, [&fine, &coarse], |rule, s| {
        let raw = integrate_raw(sol, field, rule, s, alpha)?;
        let rhs = -raw.delta_sq / (4.0 * alpha * s * raw.h);
        Ok((raw.n(), damping * raw.n(), rhs))
    })?;
    // Rounding in N propagates through the stencil as ~ε N / step.
    for (c, row) in checks.iter_mut().zip(&bundle.rows) {
        c.error_estimate += 1e-9 * row.n.abs().max(1.0) / row.r;
    }
    Ok(checks)
}

/// Verdict on `Ñ(r_{i+1}) ≥ Ñ(r_i) - budget`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub kind: BundleKind,
    pub alpha: f64,
    pub c0: f64,
    pub radii: Vec<f64>,
    pub ntilde: Vec<f64>,
    /// Largest drop `Ñ(r_i) - Ñ(r_{i+1})`, zero when nondecreasing.
    pub worst_violation: f64,
    /// Left radius of the worst drop.
    pub worst_at: Option<f64>,
    /// Drops exceeding the budget.
    pub violations: usize,
    /// `10 max|ΔÑ| + 1e-12 max|Ñ|`, with `ΔÑ` the level-to-level change.
    pub budget: f64,
    pub passed: bool,
}

pub fn verify_monotonicity(bundle: &FrequencyBundle) -> Result<MonotonicityReport> {
    let rows = &bundle.rows;
    if rows.len() < MIN_MONOTONICITY_POINTS {
        return Err(Error::Precondition(format!(
            "monotonicity needs at least {MIN_MONOTONICITY_POINTS} radii, got {}",
            rows.len()
        )));
    }
    if rows.windows(2).any(|w| w[1].r <= w[0].r) {
        return Err(Error::Precondition("radii must be strictly increasing".into()));
    }
    let scale = rows.iter().map(|r| r.ntilde.abs()).fold(0.0, f64::max);
    let quad = rows.iter().map(|r| r.err.ntilde).fold(0.0, f64::max);
    let budget = BUDGET_FACTOR * quad + 1e-12 * scale;
    let mut worst = 0.0;
    let mut worst_at = None;
    let mut violations = 0;
    for w in rows.windows(2) {
        let drop = w[0].ntilde - w[1].ntilde;
        if drop > worst {
            worst = drop;
            worst_at = Some(w[0].r);
        }
        if drop > budget {
            violations += 1;
        }
    }
    Ok(MonotonicityReport {
        kind: bundle.kind,
        alpha: bundle.alpha,
        c0: bundle.c0,
        radii: bundle.radii(),
        ntilde: bundle.ntilde(),
        worst_violation: worst,
        worst_at,
        violations,
        budget,
        passed: worst <= budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frequency::classical_bundle;
    use crate::quad::geometric_radii;
    use crate::solutions::HarmonicVariant;

    fn disc(levels: u32) -> BallDomain {
        BallDomain::centered(2, 1.0, levels).unwrap()
    }

    #[test]
    fn h_identity_for_linear_and_constant() {
        for d in [0, 1] {
            let u = SolutionField::harmonic_polynomial(2, d, HarmonicVariant::Re).unwrap();
            let dom = disc(6);
            let b = classical_bundle(&u, &dom, 2.0, &[0.3, 0.6, 0.9]).unwrap();
            for c in check_h_derivative(&b, &u, &dom).unwrap() {
                assert!(c.relative < 1e-6, "{d}: {c:?}");
            }
        }
    }

    #[test]
    fn h_identity_with_potential() {
        let u = SolutionField::oscillatory(2, 4.0).unwrap();
        let dom = disc(6);
        let b = classical_bundle(&u, &dom, 3.0, &[0.2, 0.5, 0.8]).unwrap();
        for c in check_h_derivative(&b, &u, &dom).unwrap() {
            assert!(c.relative < 1e-6, "{c:?}");
        }
    }

    #[test]
    fn n_bound_for_schrodinger_families() {
        let dom = disc(5);
        let radii = geometric_radii(0.2, 0.9, 6);
        for u in [
            SolutionField::oscillatory(2, 1.0).unwrap(),
            SolutionField::exponential(2, 1.0).unwrap(),
        ] {
            let b = classical_bundle(&u, &dom, 2.0, &radii).unwrap();
            for c in check_n_derivative_bound(&b, &u, &dom).unwrap() {
                assert!(c.holds(), "{c:?}");
            }
        }
    }

    #[test]
    fn harmonic_n_bound_is_tight() {
        let u = SolutionField::harmonic_polynomial(2, 1, HarmonicVariant::Re).unwrap();
        let dom = disc(5);
        let b = classical_bundle(&u, &dom, 2.0, &[0.3, 0.7]).unwrap();
        for c in check_n_derivative_bound(&b, &u, &dom).unwrap() {
            assert_eq!(c.rhs, 0.0);
            assert!(c.lhs.abs() < 1e-7, "{c:?}");
        }
    }

    #[test]
    fn monotone_for_exact_family() {
        let u = SolutionField::oscillatory(2, std::f64::consts::PI.powi(2)).unwrap();
        let b = classical_bundle(&u, &disc(5), 5.0, &geometric_radii(0.1, 0.9, 24)).unwrap();
        let rep = verify_monotonicity(&b).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn decoy_is_flagged() {
        let u = SolutionField::decoy(2, 0.05).unwrap();
        let b = classical_bundle(&u, &disc(5), 2.0, &geometric_radii(0.1, 0.9, 24)).unwrap();
        let rep = verify_monotonicity(&b).unwrap();
        assert!(!rep.passed && rep.violations > 0, "{rep:?}");
    }

    #[test]
    fn short_grid_rejected() {
        let u = SolutionField::harmonic_polynomial(2, 1, HarmonicVariant::Re).unwrap();
        let b = classical_bundle(&u, &disc(4), 2.0, &geometric_radii(0.1, 0.9, 8)).unwrap();
        assert!(verify_monotonicity(&b).is_err());
    }
}

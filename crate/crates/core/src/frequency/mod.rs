//! Weighted frequency functions `H, D, L, I, J, N, Ñ` on radius grids.
//!
//! Every integral uses one [`BallRule`] with exponent `α - 1`; the extra
//! factors of `ω_r` for `D`, `L` and the `N'` bound are applied per node.
//! Each bundle is computed at the domain's level and one level coarser, and
//! the difference is kept as the quadrature error estimate.

mod checks;

pub use checks::{
    check_h_derivative, check_n_derivative_bound, verify_monotonicity, DerivativeCheck,
    MonotonicityReport, MIN_MONOTONICITY_POINTS,
};

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{dot, mat_vec, mu_z, CoefficientField, Constants};
use crate::quad::{BallDomain, BallRule};
use crate::solutions::SolutionField;

/// `H` below this value is treated as `u ≡ 0` on the ball.
pub const H_FLOOR: f64 = 1e-30;

/// Smallest exponent the frequency lemmas allow.
pub const MIN_ALPHA: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BundleKind {
    Classical,
    Variable,
}

/// Frequency quantities at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BundleRow {
    pub r: f64,
    pub h: f64,
    pub d: f64,
    pub l: f64,
    pub i: f64,
    pub j: f64,
    pub n: f64,
    pub ntilde: f64,
    pub eh: f64,
    pub ed: f64,
    /// `2α ∫ u A∇u·x ω^(α-1)` evaluated directly, to compare with `I = D + L`.
    pub i_direct: f64,
    /// `∫ (div A∇u)² μ⁻¹ ω^(α+1)`.
    pub delta_sq: f64,
    /// Differences against the next coarser quadrature level.
    pub err: RowError,
}

/// Absolute level-to-level differences for one row.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    pub h: f64,
    pub d: f64,
    pub l: f64,
    pub n: f64,
    pub ntilde: f64,
    pub eh: f64,
    pub ed: f64,
}

/// The bundle on a radius grid plus everything needed to reproduce it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrequencyBundle {
    pub kind: BundleKind,
    pub dim: usize,
    pub alpha: f64,
    pub levels: u32,
    pub constants: Constants,
    /// Constant in the exponential factor of the variable `Ñ`; zero for classical.
    pub c0: f64,
    pub rows: Vec<BundleRow>,
    #[serde(skip)]
    pub(crate) field: Option<CoefficientField>,
}

impl FrequencyBundle {
    pub fn radii(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.r).collect()
    }

    pub fn ntilde(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.ntilde).collect()
    }

    /// The coefficient field used by a variable bundle.
    pub fn field(&self) -> Option<&CoefficientField> {
        self.field.as_ref()
    }

    /// Recompute `Ñ` for another `c₀` without touching the integrals.
    pub fn with_c0(&self, c0: f64) -> FrequencyBundle {
        let mut out = self.clone();
        out.c0 = c0;
        for row in &mut out.rows {
            let t = ntilde(self.kind, &self.constants, self.alpha, c0, row.r, row.n);
            let coarse = ntilde(
                self.kind,
                &self.constants,
                self.alpha,
                c0,
                row.r,
                row.n + row.err.n,
            );
            row.ntilde = t;
            row.err.ntilde = (t - coarse).abs();
        }
        out
    }

    /// Largest `|E_H|/(ηrH)` and `|E_D|/(ηrD)` over the grid.
    pub fn error_term_ratios(&self) -> Option<(f64, f64)> {
        let eta = self.constants.eta;
        if self.kind != BundleKind::Variable || eta <= 0.0 {
            return None;
        }
        let mut out = (0.0f64, 0.0f64);
        for row in &self.rows {
            out.0 = out.0.max(row.eh.abs() / (eta * row.r * row.h));
            if row.d > 0.0 {
                out.1 = out.1.max(row.ed.abs() / (eta * row.r * row.d));
            }
        }
        Some(out)
    }

    /// Largest violation of `J = (I+D)/2`, `D = J - L/2`, `I = J + L/2`
    /// relative to the row's scale.
    pub fn algebraic_defect(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| {
                let scale = r.d.abs().max(r.l.abs()).max(r.i.abs()).max(f64::MIN_POSITIVE);
                let e1 = (r.j - 0.5 * (r.i + r.d)).abs();
                let e2 = (r.d - (r.j - 0.5 * r.l)).abs();
                let e3 = (r.i - (r.j + 0.5 * r.l)).abs();
                e1.max(e2).max(e3) / scale
            })
            .fold(0.0, f64::max)
    }
}

/// Modified frequency for either corollary.
pub(crate) fn ntilde(kind: BundleKind, c: &Constants, alpha: f64, c0: f64, r: f64, n: f64) -> f64 {
    match kind {
        BundleKind::Classical => n + c.m * c.m * r.powi(4) / (16.0 * alpha),
        BundleKind::Variable => {
            let l2 = c.lambda * c.lambda;
            (n + c.m * c.m * r.powi(4) / (8.0 * l2 * alpha))
                * (c0 * c.eta * r + c.k * c.k * r * r / (4.0 * l2 * alpha)).exp()
        }
    }
}

/// Raw integrals at one radius.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Raw {
    pub h: f64,
    pub d: f64,
    pub l: f64,
    pub eh: f64,
    pub ed: f64,
    pub i_direct: f64,
    pub delta_sq: f64,
}

impl Raw {
    pub fn n(&self) -> f64 {
        self.d / self.h
    }
}

fn non_finite(x: &[f64], v: f64) -> Error {
    Error::NonFinite {
        point: x.to_vec(),
        value: v,
    }
}

/// Integrate the bundle's ingredients on `B_r(0)` with `rule` (exponent `α - 1`).
pub(crate) fn integrate_raw(
    sol: &SolutionField,
    field: Option<&CoefficientField>,
    rule: &BallRule,
    r: f64,
    alpha: f64,
) -> Result<Raw> {
    let n = sol.dim();
    let origin = [0.0; 3];
    let mut raw = Raw::default();
    rule.visit(&origin[..n], r, |x, omega, w| {
        let s = sol.sample(x);
        if !(s.u.is_finite() && s.div_a_grad.is_finite()) {
            return Err(non_finite(x, if s.u.is_finite() { s.div_a_grad } else { s.u }));
        }
        let u = s.u;
        let g = s.grad;
        let lap = s.div_a_grad;
        match field {
            None => {
                raw.h += w * u * u;
                raw.d += w * omega * dot(&g, &g, n);
                raw.l += w * omega * u * lap;
                raw.i_direct += w * 2.0 * alpha * u * dot(&g, x, n);
                raw.delta_sq += w * omega * omega * lap * lap;
            }
            Some(f) => {
                let mz = mu_z(f, x)?;
                let a = f.a(x);
                let ag = mat_vec(&a, &g, n);
                let energy = dot(&ag, &g, n);
                let nf = n as f64;
                raw.h += w * u * u * mz.mu;
                raw.d += w * omega * energy;
                raw.l += w * omega * u * lap;
                raw.eh += w * u * u * (mz.div_ax - nf * mz.mu);
                let mut mixed = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            let delta = if i == k { 1.0 } else { 0.0 };
                            mixed += a[i][j] * g[k] * g[j] * (delta - mz.jac_z[i][k]);
                        }
                    }
                }
                let ga = f.grad_a(x);
                let mut transport = 0.0;
                for k in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            transport += ga[k][i][j] * g[i] * g[j] * mz.z[k];
                        }
                    }
                }
                raw.ed += w * omega * ((mz.div_z - nf) * energy + 2.0 * mixed + transport);
                raw.i_direct += w * 2.0 * alpha * u * dot(&ag, x, n);
                raw.delta_sq += w * omega * omega * lap * lap / mz.mu;
            }
        }
        Ok(())
    })?;
    if !(raw.h > H_FLOOR) {
        return Err(Error::Degenerate {
            radius: r,
            value: raw.h,
        });
    }
    Ok(raw)
}

fn check_inputs(sol: &SolutionField, domain: &BallDomain, alpha: f64, radii: &[f64]) -> Result<()> {
    if sol.dim() != domain.dim() {
        return Err(Error::domain("solution and domain dimensions differ"));
    }
    if domain.center().iter().any(|&c| c != 0.0) {
        return Err(Error::domain("frequency functions are centered at the origin"));
    }
    if !(alpha.is_finite() && alpha >= MIN_ALPHA) {
        return Err(Error::domain(format!("alpha must be >= {MIN_ALPHA}, got {alpha}")));
    }
    if radii.is_empty() {
        return Err(Error::config("radii", "radius grid is empty"));
    }
    for &r in radii {
        domain.check_radius(r)?;
    }
    Ok(())
}

/// Rules at the domain level and the one used for the error estimate.
pub(crate) fn rule_pair(domain: &BallDomain, alpha: f64) -> Result<(BallRule, BallRule)> {
    let lv = domain.levels();
    let other = if lv > 1 { lv - 1 } else { lv + 1 };
    Ok((
        BallRule::new(domain.dim(), alpha - 1.0, lv)?,
        BallRule::new(domain.dim(), alpha - 1.0, other)?,
    ))
}

#[allow(clippy::too_many_arguments)]
fn build(
    kind: BundleKind,
    sol: &SolutionField,
    field: Option<&CoefficientField>,
    domain: &BallDomain,
    alpha: f64,
    radii: &[f64],
    constants: Constants,
    c0: f64,
) -> Result<FrequencyBundle> {
    let (fine, coarse) = rule_pair(domain, alpha)?;
    let rows = radii
        .par_iter()
        .map(|&r| {
            let a = integrate_raw(sol, field, &fine, r, alpha)?;
            let b = integrate_raw(sol, field, &coarse, r, alpha)?;
            let nt = |raw: &Raw| ntilde(kind, &constants, alpha, c0, r, raw.n());
            let i = a.d + a.l;
            Ok(BundleRow {
                r,
                h: a.h,
                d: a.d,
                l: a.l,
                i,
                j: 0.5 * (i + a.d),
                n: a.n(),
                ntilde: nt(&a),
                eh: a.eh,
                ed: a.ed,
                i_direct: a.i_direct,
                delta_sq: a.delta_sq,
                err: RowError {
                    h: (a.h - b.h).abs(),
                    d: (a.d - b.d).abs(),
                    l: (a.l - b.l).abs(),
                    n: (a.n() - b.n()).abs(),
                    ntilde: (nt(&a) - nt(&b)).abs(),
                    eh: (a.eh - b.eh).abs(),
                    ed: (a.ed - b.ed).abs(),
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FrequencyBundle {
        kind,
        dim: sol.dim(),
        alpha,
        levels: domain.levels(),
        constants,
        c0,
        rows,
        field: field.cloned(),
    })
}

/// Classical bundle for `-Δu + W·∇u + Vu = 0`; `Δu` is taken from the
/// solution's equation and `M` from its field's constants.
pub fn classical_bundle(
    sol: &SolutionField,
    domain: &BallDomain,
    alpha: f64,
    radii: &[f64],
) -> Result<FrequencyBundle> {
    check_inputs(sol, domain, alpha, radii)?;
    if !sol.field().is_identity_matrix() {
        return Err(Error::Precondition(
            "classical bundle needs A = I; use the variable-coefficient bundle".into(),
        ));
    }
    let constants = sol.field().constants();
    build(BundleKind::Classical, sol, None, domain, alpha, radii, constants, 0.0)
}

/// Variable-coefficient bundle with `A`, `μ`, `Z` and the constants of
/// `field`, and `div(A∇u)` from the solution's own equation.
pub fn variable_bundle(
    sol: &SolutionField,
    field: &CoefficientField,
    domain: &BallDomain,
    alpha: f64,
    radii: &[f64],
    c0: f64,
) -> Result<FrequencyBundle> {
    check_inputs(sol, domain, alpha, radii)?;
    if field.dim() != sol.dim() {
        return Err(Error::domain("field and solution dimensions differ"));
    }
    if !(c0.is_finite() && c0 >= 0.0) {
        return Err(Error::config("c0", format!("must be a nonnegative number, got {c0}")));
    }
    field.require_identity_at_origin()?;
    build(
        BundleKind::Variable,
        sol,
        Some(field),
        domain,
        alpha,
        radii,
        field.constants(),
        c0,
    )
}

pub const BUNDLE_CSV_HEADER: &str = "r,H,D,L,I,J,N,Ntilde,EH,ED,alpha";

/// One row per radius, scientific notation with 17 significant digits.
pub fn write_bundle_csv<W: Write>(bundle: &FrequencyBundle, mut out: W) -> Result<()> {
    writeln!(out, "{BUNDLE_CSV_HEADER}")?;
    for r in &bundle.rows {
        let cols = [r.r, r.h, r.d, r.l, r.i, r.j, r.n, r.ntilde, r.eh, r.ed, bundle.alpha];
        let line: Vec<String> = cols.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

//! Task execution: each task yields a verdict, a few summary metrics and the
//! text of its artifacts.

use std::fmt::Write as _;

use super::scenario::{AlphaPolicy, C0Spec, Scenario, SolutionSpec, TaskSpec, Variant};
use crate::certify::{
    auto_alpha, fit_c0, landis_iteration, three_ball_classical, three_ball_variable,
    vanishing_order, CertifyConfig, ThreeBallReport,
};
use crate::error::{Error, Result};
use crate::fields::{CoefficientField, DEFAULT_SAMPLES};
use crate::frequency::{
    classical_bundle, variable_bundle, verify_monotonicity, write_bundle_csv, FrequencyBundle,
};
use crate::quad::BallDomain;
use crate::solutions::{solve_dirichlet, SolutionField};

/// Largest algebraic defect of a bundle still counted as consistent.
const BUNDLE_DEFECT_TOL: f64 = 1e-10;

pub(crate) struct Context {
    pub domain: BallDomain,
    pub sol: SolutionField,
    pub field: CoefficientField,
    pub alpha: f64,
    pub radii: Vec<f64>,
    pub levels: u32,
}

pub(crate) struct TaskOutput {
    pub passed: bool,
    pub summary: Vec<(String, f64)>,
    /// `(extension, contents)`.
    pub files: Vec<(&'static str, String)>,
}

pub(crate) fn build_context(s: &Scenario, levels: u32) -> Result<Context> {
    let domain = s.domain(levels)?;
    let n = s.dimension;
    let sol = match &s.solution {
        SolutionSpec::Harmonic { degree, variant } => {
            SolutionField::harmonic_polynomial(n, *degree, *variant)?
        }
        SolutionSpec::Exponential { m } => SolutionField::exponential(n, *m)?,
        SolutionSpec::Oscillatory { m } => SolutionField::oscillatory(n, *m)?,
        SolutionSpec::Drift { k } => SolutionField::drift(n, *k)?,
        SolutionSpec::DampedHarmonic { degree, variant, b } => {
            SolutionField::damped_harmonic(n, *degree, *variant, *b, s.domain_radius)?
        }
        SolutionSpec::Decoy { eps } => SolutionField::decoy(n, *eps)?,
        SolutionSpec::Solve { boundary, h } => {
            let spec = s
                .coefficients
                .as_ref()
                .ok_or_else(|| Error::config("coefficients", "required when family = \"solve\""))?;
            let field = spec.build(&domain, DEFAULT_SAMPLES)?;
            solve_dirichlet(&field, &domain, |x| boundary.eval(x), *h)?
        }
    };
    let field = sol.field().clone();
    let alpha = match s.alpha {
        AlphaPolicy::Explicit(a) => a,
        AlphaPolicy::Named(_) => auto_alpha(field.constants().m, s.domain_radius),
    };
    Ok(Context {
        domain,
        sol,
        field,
        alpha,
        radii: s.radii.radii(),
        levels,
    })
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "nan".into()
    }
}

fn json<T: serde::Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

impl Context {
    fn variant(&self, v: Option<Variant>) -> Variant {
        v.unwrap_or(if self.field.is_identity_matrix() {
            Variant::Classical
        } else {
            Variant::Variable
        })
    }

    fn c0(&self, spec: C0Spec) -> Result<f64> {
        match spec {
            C0Spec::Value(v) => Ok(v),
            C0Spec::Named(_) => {
                Ok(fit_c0(&[(&self.field, &self.sol)], &self.domain, self.alpha, &self.radii)?.c0)
            }
        }
    }

    fn bundle(&self, variant: Option<Variant>, c0: C0Spec) -> Result<FrequencyBundle> {
        match self.variant(variant) {
            Variant::Classical => classical_bundle(&self.sol, &self.domain, self.alpha, &self.radii),
            Variant::Variable => {
                let c0 = self.c0(c0)?;
                variable_bundle(&self.sol, &self.field, &self.domain, self.alpha, &self.radii, c0)
            }
        }
    }
}

pub(crate) fn execute(ctx: &Context, task: &TaskSpec) -> Result<TaskOutput> {
    match task {
        TaskSpec::Bundle { variant, c0, .. } => {
            let b = ctx.bundle(*variant, *c0)?;
            let defect = b.algebraic_defect();
            let finite = b.rows.iter().all(|r| r.n.is_finite() && r.ntilde.is_finite());
            let last = b.rows.last().expect("radius grid is nonempty");
            let mut csv = Vec::new();
            write_bundle_csv(&b, &mut csv)?;
            Ok(TaskOutput {
                passed: finite && defect <= BUNDLE_DEFECT_TOL,
                summary: vec![
                    ("alpha".into(), b.alpha),
                    ("N_last".into(), last.n),
                    ("Ntilde_last".into(), last.ntilde),
                    ("algebraic_defect".into(), defect),
                ],
                files: vec![
                    ("csv", String::from_utf8(csv).expect("csv is ascii")),
                    ("json", json(&b)?),
                ],
            })
        }
        TaskSpec::Monotonicity {
            variant,
            c0,
            expect_violation,
            ..
        } => {
            let b = ctx.bundle(*variant, *c0)?;
            let rep = verify_monotonicity(&b)?;
            let mut csv = String::from("r,Ntilde,err_Ntilde,drop_to_next\n");
            for (i, row) in b.rows.iter().enumerate() {
                let drop = b.rows.get(i + 1).map_or(f64::NAN, |nx| row.ntilde - nx.ntilde);
                let _ = writeln!(csv, "{},{},{},{}", num(row.r), num(row.ntilde), num(row.err.ntilde), num(drop));
            }
            Ok(TaskOutput {
                passed: rep.passed != *expect_violation,
                summary: vec![
                    ("c0".into(), rep.c0),
                    ("worst_violation".into(), rep.worst_violation),
                    ("budget".into(), rep.budget),
                    ("violations".into(), rep.violations as f64),
                ],
                files: vec![("csv", csv), ("json", json(&rep)?)],
            })
        }
        TaskSpec::ThreeBall {
            variant,
            radii,
            sigma,
            c0,
            c1,
            ..
        } => {
            let rep = match ctx.variant(*variant) {
                Variant::Classical => three_ball_classical(&ctx.sol, &ctx.domain, radii)?,
                Variant::Variable => {
                    let cfg = CertifyConfig {
                        c0: ctx.c0(*c0)?,
                        c1: *c1,
                        sigma: *sigma,
                        radii: *radii,
                        ..Default::default()
                    };
                    three_ball_variable(&ctx.sol, &ctx.field, &ctx.domain, radii, &cfg)?
                }
            };
            Ok(TaskOutput {
                passed: rep.passed,
                summary: three_ball_summary(&rep),
                files: vec![("csv", three_ball_csv(&rep)), ("json", json(&rep)?)],
            })
        }
        TaskSpec::Vanishing {
            r_min,
            r_max,
            points,
            window,
            expect_slope,
            tolerance,
            bound,
            ..
        } => {
            let mut rep = vanishing_order(&ctx.sol, &ctx.domain, *r_min, *r_max, *points, *window)?;
            if let Some(b) = bound {
                rep = rep.with_bound(b.big_c, b.c, &ctx.field.constants());
            }
            let passed = expect_slope.is_none_or(|e| (rep.slope - e).abs() <= tolerance * e.abs());
            let mut csv = String::from("r,h\n");
            for (r, h) in rep.radii.iter().zip(&rep.h) {
                let _ = writeln!(csv, "{},{}", num(*r), num(*h));
            }
            Ok(TaskOutput {
                passed,
                summary: vec![
                    ("slope".into(), rep.slope),
                    ("fit_residual".into(), rep.fit_residual),
                    ("bound_exponent".into(), rep.bound_exponent.unwrap_or(f64::NAN)),
                ],
                files: vec![("csv", csv), ("json", json(&rep)?)],
            })
        }
        TaskSpec::Landis { r1, steps, config, .. } => {
            let rep = landis_iteration(&ctx.sol, &ctx.field, config, *r1, *steps, ctx.levels)?;
            let mut csv = String::from(
                "k,radius,log_measured,log_bound,holds,implied_c_tilde1,rho,kappa,log_slack\n",
            );
            for s in &rep.steps {
                let tb = s.three_ball.as_ref();
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{},{}",
                    s.k,
                    num(s.radius),
                    num(s.log_measured),
                    num(s.log_bound),
                    s.holds,
                    num(s.implied_c_tilde1.unwrap_or(f64::NAN)),
                    num(s.rho.unwrap_or(f64::NAN)),
                    num(tb.map_or(f64::NAN, |t| t.kappa)),
                    num(tb.map_or(f64::NAN, |t| t.log_slack)),
                );
            }
            let margin = rep
                .steps
                .iter()
                .map(|s| s.log_measured - s.log_bound)
                .fold(f64::INFINITY, f64::min);
            Ok(TaskOutput {
                passed: rep.passed && rep.halted.is_none(),
                summary: vec![
                    ("steps".into(), rep.steps.len() as f64),
                    ("min_log_margin".into(), margin),
                    ("cond0_threshold".into(), rep.gating.cond0_threshold()),
                ],
                files: vec![("csv", csv), ("json", json(&rep)?)],
            })
        }
    }
}

fn three_ball_summary(rep: &ThreeBallReport) -> Vec<(String, f64)> {
    vec![
        ("kappa".into(), rep.kappa),
        ("log_slack".into(), rep.log_slack),
        ("fitted_C".into(), rep.fitted_c.unwrap_or(f64::NAN)),
        ("explicit_margin".into(), rep.explicit.margin),
    ]
}

fn three_ball_csv(rep: &ThreeBallReport) -> String {
    let mut s = String::from(
        "kind,r1,r2,r3,sigma,R,kappa,lhs,factor1,factor3,log_slack,fitted_C,predicted_scaling,alpha,log_constant,log_gap\n",
    );
    let kind = match rep.kind {
        crate::certify::ThreeBallKind::Classical => "classical",
        crate::certify::ThreeBallKind::Variable => "variable",
    };
    let vals = [
        rep.r1,
        rep.r2,
        rep.r3,
        rep.sigma,
        rep.big_r,
        rep.kappa,
        rep.lhs,
        rep.rhs_factors.0,
        rep.rhs_factors.1,
        rep.log_slack,
        rep.fitted_c.unwrap_or(f64::NAN),
        rep.predicted_scaling,
        rep.explicit.alpha,
        rep.explicit.log_constant,
        rep.explicit.log_gap,
    ];
    s.push_str(kind);
    for v in vals {
        s.push(',');
        s.push_str(&num(v));
    }
    s.push('\n');
    s
}

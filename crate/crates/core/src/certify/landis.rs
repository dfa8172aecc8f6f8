//! Desk-scale run of the decay-at-infinity induction: base case at `|x₁| = R₁`,
//! then `R_k = R_{k-1}^{1+δ}` with the three-ball inequality on the
//! normalized ball around `x_k`.

use serde::{Deserialize, Serialize};

use super::{ball_mass, three_ball_variable, unit_ball_volume, CertifyConfig, RadiiTriple, ThreeBallReport};
use crate::error::{Error, Result};
use crate::fields::{normalize_at, CoefficientField, Constants, Mat};
use crate::quad::{BallDomain, BallRule};
use crate::solutions::SolutionField;

/// Most inductive steps run at desk scale.
pub const MAX_STEPS: usize = 3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GatingPolicy {
    /// Evaluate and record the conditions; iterate regardless.
    #[default]
    Record,
    /// Stop before the base case when a condition fails.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandisConfig {
    pub delta: f64,
    pub epsilon: f64,
    pub c0: f64,
    pub c1: f64,
    /// `c̃₁` in the chained bound `exp[-(e^{c̃₁R₁} + 1)|x_k|^{2(1+δ)}]`.
    pub c_tilde1: f64,
    /// `C̃` of the last gating condition.
    pub big_c_tilde: f64,
    /// `C̃₁` of the second gating condition.
    pub big_c_tilde1: f64,
    /// Growth constant in `|u(x)| ≤ exp(C₀|x|²)`.
    pub growth: f64,
    pub policy: GatingPolicy,
    /// Ray along which the points `x_k` are placed; `-e₁` when absent.
    pub direction: Option<Vec<f64>>,
}

impl Default for LandisConfig {
    fn default() -> Self {
        LandisConfig {
            delta: 0.1,
            epsilon: 0.2,
            c0: 0.0,
            c1: 0.0,
            c_tilde1: 0.0,
            big_c_tilde: 1.0,
            big_c_tilde1: 1.0,
            growth: 1.0,
            policy: GatingPolicy::Record,
            direction: None,
        }
    }
}

impl LandisConfig {
    pub fn from_certify(cfg: &CertifyConfig) -> Self {
        LandisConfig {
            delta: cfg.delta,
            epsilon: cfg.epsilon,
            c0: cfg.c0,
            c1: cfg.c1,
            ..Default::default()
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < self.epsilon && self.epsilon.is_finite()) {
            return Err(Error::config(
                "delta",
                format!("need 0 < delta < epsilon, got {} and {}", self.delta, self.epsilon),
            ));
        }
        for (name, v) in [
            ("c0", self.c0),
            ("c1", self.c1),
            ("c_tilde1", self.c_tilde1),
            ("big_c_tilde", self.big_c_tilde),
            ("big_c_tilde1", self.big_c_tilde1),
            ("growth", self.growth),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if let Some(d) = &self.direction {
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if d.len() != dim || !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::config("direction", "must be a nonzero vector of the right dimension"));
            }
        }
        Ok(())
    }

    fn unit_direction(&self, dim: usize) -> Vec<f64> {
        match &self.direction {
            Some(d) => {
                let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
                d.iter().map(|v| v / norm).collect()
            }
            None => {
                let mut d = vec![0.0; dim];
                d[0] = -1.0;
                d
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatingCondition {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatingReport {
    pub r1: f64,
    pub conditions: Vec<GatingCondition>,
    pub all_hold: bool,
}

impl GatingReport {
    /// Threshold of the first condition: `max{η, 12/λ, [2^{1+ε}c₀η/(λ(log 6 - 1))]^{1/(ε-δ)}}`.
    pub fn cond0_threshold(&self) -> f64 {
        self.conditions[0].rhs
    }
}

/// The four conditions on `R₁` that make the induction close.
pub fn gating_conditions(cfg: &LandisConfig, r1: f64, c: &Constants, dim: usize) -> GatingReport {
    let (d, e, l) = (cfg.delta, cfg.epsilon, c.lambda);
    let third = (2f64.powf(1.0 + e) * cfg.c0 * c.eta / (l * (6f64.ln() - 1.0))).powf(1.0 / (e - d));
    let t0 = c.eta.max(12.0 / l).max(third);
    let le = |name: &str, lhs: f64, rhs: f64| GatingCondition {
        name: name.into(),
        lhs,
        rhs,
        holds: lhs <= rhs,
    };
    let q = d / (1.0 + d);
    let cond2 = 1.0 + 10.0 * (r1 / l).ln() / (1.0 + l / 4.0 * r1.powf(-q)).ln();
    let ball = unit_ball_volume(dim) * (r1 / l).powi(dim as i32);
    let cond3 = 1.0
        + cfg.big_c_tilde * ((3.0 / l * r1.powf(q)).ln() + 1.0)
        + 4.0 * cfg.growth / (l * l)
        + ball.ln() / (2.0 * r1 * r1);
    let conditions = vec![
        GatingCondition {
            name: "cond0".into(),
            lhs: r1,
            rhs: t0,
            holds: r1 >= t0,
        },
        le("cond1", cfg.big_c_tilde1 * r1.ln(), r1.powf(2.0 * d)),
        le("cond2", cond2, r1.powf(1.5 * d)),
        le("cond3", cond3, r1.powf(0.5 * d)),
    ];
    let all_hold = conditions.iter().all(|c| c.holds);
    GatingReport {
        r1,
        conditions,
        all_hold,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandisStep {
    /// 1 for the base case.
    pub k: usize,
    pub radius: f64,
    pub x: Vec<f64>,
    /// `‖u‖_{L²(B₁(x_k))}`.
    pub measured: f64,
    pub log_measured: f64,
    /// Logarithm of the chained lower bound.
    pub log_bound: f64,
    pub holds: bool,
    /// Smallest `c̃₁` for which the bound at this step holds; `None` when
    /// every `c̃₁ ≥ 0` works.
    pub implied_c_tilde1: Option<f64>,
    /// Distance from `x_k` to the previous sphere in normalized coordinates.
    pub rho: Option<f64>,
    pub three_ball: Option<ThreeBallReport>,
    /// Why the three-ball diagnostic was skipped.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandisReport {
    pub r1: f64,
    pub steps_requested: usize,
    pub gating: GatingReport,
    pub unit_ball_norm: f64,
    pub steps: Vec<LandisStep>,
    pub halted: Option<String>,
    pub passed: bool,
}

/// Runs the base case and `steps` inductive steps.
pub fn landis_iteration(
    sol: &SolutionField,
    field: &CoefficientField,
    cfg: &LandisConfig,
    r1: f64,
    steps: usize,
    levels: u32,
) -> Result<LandisReport> {
    let n = sol.dim();
    if field.dim() != n {
        return Err(Error::domain("field and solution dimensions differ"));
    }
    cfg.validate(n)?;
    if steps > MAX_STEPS {
        return Err(Error::config("steps", format!("at most {MAX_STEPS}, got {steps}")));
    }
    if !(r1 > 2.0 && r1.is_finite()) {
        return Err(Error::config("R1", format!("must exceed 2, got {r1}")));
    }
    let c = field.constants();
    let gating = gating_conditions(cfg, r1, &c, n);
    let flat = BallRule::new(n, 0.0, levels)?;
    let origin = vec![0.0; n];
    let unit_ball_norm = ball_mass(sol, &flat, &origin, 1.0)?.sqrt();
    let mut report = LandisReport {
        r1,
        steps_requested: steps,
        gating,
        unit_ball_norm,
        steps: Vec::new(),
        halted: None,
        passed: false,
    };
    if cfg.policy == GatingPolicy::Strict && !report.gating.all_hold {
        let failed: Vec<_> = report
            .gating
            .conditions
            .iter()
            .filter(|c| !c.holds)
            .map(|c| c.name.clone())
            .collect();
        report.halted = Some(format!("gating failed: {}", failed.join(", ")));
        return Ok(report);
    }

    let dir = cfg.unit_direction(n);
    let sqrt_l = c.lambda.sqrt();
    let growth = cfg.c_tilde1 * r1;
    let mut prev = r1;
    for k in 1..=steps + 1 {
        let radius = if k == 1 { r1 } else { prev.powf(1.0 + cfg.delta) };
        let x: Vec<f64> = dir.iter().map(|d| d * radius).collect();
        let measured = ball_mass(sol, &flat, &x, 1.0)?.sqrt();
        let log_measured = measured.ln();
        let extra = if k == 1 { 0.0 } else { 1.0 };
        let power = radius.powf(2.0 * (1.0 + cfg.delta));
        let log_bound = -(growth.exp() + extra) * power;
        let implied_c_tilde1 = {
            let t = -log_measured / power - extra;
            (t > 0.0).then(|| t.ln() / r1).filter(|v| *v > 0.0)
        };

        let (local, t) = normalize_at(field, &x)?;
        let usol = sol.transformed(&t, local.clone())?;
        let (triple, sigma, rho, eta_r) = if k == 1 {
            let r3 = 3.0 * r1 / sqrt_l;
            (
                RadiiTriple::new(sqrt_l, (r1 + 1.0) / sqrt_l, r3),
                2.0,
                None,
                c.eta / sqrt_l,
            )
        } else {
            let s_inv = t.s_inv;
            let dist = |y: &[f64]| {
                let mut w = [0.0; 3];
                for i in 0..n {
                    w[i] = y[i] - x[i];
                }
                norm(&apply(&s_inv, &w, n), n)
            };
            let rho = sphere_min(n, prev, dist);
            let big_r = sphere_min(n, prev / 2.0, dist);
            let r2 = rho + 1.0 / sqrt_l;
            let sigma = (big_r + rho) / (2.0 * r2);
            let eta_loc = 2f64.powf(1.0 + cfg.epsilon) * c.eta / sqrt_l * prev.powf(-1.0 - cfg.epsilon);
            (RadiiTriple::new(sqrt_l, r2, big_r), sigma, Some(rho), eta_loc)
        };
        let mut step = LandisStep {
            k,
            radius,
            x,
            measured,
            log_measured,
            log_bound,
            holds: log_measured >= log_bound,
            implied_c_tilde1,
            rho,
            three_ball: None,
            note: None,
        };
        if sigma <= 1.0 + 1e-9 {
            step.note = Some(format!("sigma = {sigma:.6} leaves no room between r2 and r3"));
        } else {
            let lc = local.constants();
            let tb_field = local.with_constants(Constants { eta: eta_r, ..lc });
            let domain = BallDomain::centered(n, triple.r3, levels)?;
            let tb_cfg = CertifyConfig {
                c0: cfg.c0,
                c1: cfg.c1,
                sigma,
                radii: triple,
                delta: cfg.delta,
                epsilon: cfg.epsilon,
            };
            match three_ball_variable(&usol, &tb_field, &domain, &triple, &tb_cfg) {
                Ok(rep) => step.three_ball = Some(rep),
                Err(e) => step.note = Some(format!("three-ball skipped: {e}")),
            }
        }
        report.steps.push(step);
        prev = radius;
    }
    report.passed = report.steps.iter().all(|s| s.holds);
    Ok(report)
}

fn apply(m: &Mat, v: &[f64; 3], n: usize) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..n {
        for j in 0..n {
            out[i] += m[i][j] * v[j];
        }
    }
    out
}

fn norm(v: &[f64; 3], n: usize) -> f64 {
    v[..n].iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn sphere_point(n: usize, s: f64, angles: (f64, f64)) -> [f64; 3] {
    let (t, p) = angles;
    match n {
        2 => [s * t.cos(), s * t.sin(), 0.0],
        _ => [s * p.sin() * t.cos(), s * p.sin() * t.sin(), s * p.cos()],
    }
}

/// Minimum of `f` over the sphere `|y| = s`: a coarse angular scan followed by
/// shrinking coordinate searches.
fn sphere_min<F: Fn(&[f64]) -> f64>(n: usize, s: f64, f: F) -> f64 {
    use std::f64::consts::PI;
    let g = |a: (f64, f64)| f(&sphere_point(n, s, a)[..n]);
    let (nt, np) = if n == 2 { (720, 1) } else { (180, 90) };
    let mut best = (f64::INFINITY, (0.0, 0.0));
    for i in 0..nt {
        for j in 0..np {
            let a = (2.0 * PI * i as f64 / nt as f64, PI * (j as f64 + 0.5) / np as f64);
            let v = g(a);
            if v < best.0 {
                best = (v, a);
            }
        }
    }
    let mut step = 2.0 * PI / nt as f64;
    while step > 1e-13 {
        let mut moved = false;
        let (t, p) = best.1;
        let mut cands = vec![(t + step, p), (t - step, p)];
        if n == 3 {
            cands.extend([(t, p + step), (t, p - step)]);
        }
        for a in cands {
            let v = g(a);
            if v < best.0 {
                best = (v, a);
                moved = true;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cond0_threshold_without_drift_of_a() {
        let cfg = LandisConfig::default();
        for lambda in [1.0, 0.5] {
            let c = Constants::new(lambda, 0.0, 1.0, 0.0).unwrap();
            let g = gating_conditions(&cfg, 4.0, &c, 2);
            assert_eq!(g.cond0_threshold(), 12.0 / lambda);
            assert!(!g.conditions[0].holds);
        }
        let c = Constants::new(1.0, 0.5, 1.0, 0.0).unwrap();
        let cfg = LandisConfig {
            c0: 20.0,
            ..Default::default()
        };
        let g = gating_conditions(&cfg, 4.0, &c, 2);
        let hand = (2f64.powf(1.2) * 10.0 / (6f64.ln() - 1.0)).powf(10.0);
        assert!((g.cond0_threshold() - hand).abs() < 1e-9 * hand);
    }

    #[test]
    fn sphere_distances_match_closed_form() {
        let x = [-5.0, 0.0];
        let d = |y: &[f64]| ((y[0] - x[0]).powi(2) + (y[1] - x[1]).powi(2)).sqrt();
        assert!((sphere_min(2, 4.0, d) - 1.0).abs() < 1e-10);
        let x3 = [0.0, 3.0, 4.0];
        let d3 = |y: &[f64]| {
            y.iter().zip(&x3).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        };
        assert!((sphere_min(3, 2.0, d3) - 3.0).abs() < 1e-8);
    }

    #[test]
    fn exponential_along_decaying_ray() {
        let u = SolutionField::exponential(2, 1.0).unwrap();
        let rep = landis_iteration(&u, u.field(), &LandisConfig::default(), 4.0, 2, 5).unwrap();
        assert_eq!(rep.steps.len(), 3);
        assert!(rep.passed, "{rep:?}");
        assert!(rep.halted.is_none());
        let s2 = &rep.steps[1];
        assert!((s2.rho.unwrap() - (4f64.powf(1.1) - 4.0)).abs() < 1e-9);
        assert!(s2.three_ball.is_none() && s2.note.is_some());
        assert!(rep.steps[0].three_ball.is_some());
        assert!(rep.steps[2].three_ball.is_some());
        // B₁(-4e₁) ∋ points with x₁ ≤ -3, so the norm is below e^{-3}.
        assert!(rep.steps[0].measured < (-3.0f64).exp());
    }

    #[test]
    fn base_case_only_and_strict_policy() {
        let u = SolutionField::exponential(2, 1.0).unwrap();
        let rep = landis_iteration(&u, u.field(), &LandisConfig::default(), 4.0, 0, 4).unwrap();
        assert_eq!(rep.steps.len(), 1);
        let strict = LandisConfig {
            policy: GatingPolicy::Strict,
            ..Default::default()
        };
        let rep = landis_iteration(&u, u.field(), &strict, 4.0, 2, 4).unwrap();
        assert!(rep.steps.is_empty() && rep.halted.is_some());
    }

    #[test]
    fn too_many_steps_rejected() {
        let u = SolutionField::exponential(2, 1.0).unwrap();
        assert!(landis_iteration(&u, u.field(), &LandisConfig::default(), 4.0, 4, 4).is_err());
    }
}

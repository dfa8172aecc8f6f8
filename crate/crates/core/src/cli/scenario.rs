//! Scenario files: one TOML document describing the field, the solution, the
//! radius grid and the list of tasks.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::certify::{LandisConfig, RadiiTriple};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fields::CoefficientSpec;
use crate::quad::{geometric_radii, uniform_radii, BallDomain, MIN_RADIUS_FRACTION};
use crate::solutions::HarmonicVariant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub dimension: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub levels: Option<u32>,
    #[serde(default = "one")]
    pub domain_radius: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Required for `family = "solve"`; exact families carry their own field.
    #[serde(default)]
    pub coefficients: Option<CoefficientSpec>,
    pub solution: SolutionSpec,
    #[serde(default)]
    pub alpha: AlphaPolicy,
    #[serde(default)]
    pub radii: RadiusGrid,
    #[serde(default)]
    pub tasks: Vec<TaskSpec>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SolutionSpec {
    Harmonic {
        degree: u32,
        #[serde(default = "re")]
        variant: HarmonicVariant,
    },
    Exponential {
        m: f64,
    },
    Oscillatory {
        m: f64,
    },
    Drift {
        k: f64,
    },
    DampedHarmonic {
        degree: u32,
        #[serde(default = "re")]
        variant: HarmonicVariant,
        b: f64,
    },
    Decoy {
        eps: f64,
    },
    Solve {
        boundary: Expr,
        h: f64,
    },
}

fn re() -> HarmonicVariant {
    HarmonicVariant::Re
}

/// `alpha = 3.0` or `alpha = "auto"` (`max(2, ⌈(MR²)^{2/3}⌉)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaPolicy {
    Explicit(f64),
    Named(AlphaName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaName {
    Auto,
}

impl Default for AlphaPolicy {
    fn default() -> Self {
        AlphaPolicy::Explicit(2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    Geometric,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadiusGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl Default for RadiusGrid {
    fn default() -> Self {
        RadiusGrid {
            lo: 0.1,
            hi: 0.9,
            points: 24,
            spacing: Spacing::Geometric,
        }
    }
}

impl RadiusGrid {
    pub fn radii(&self) -> Vec<f64> {
        match self.spacing {
            Spacing::Geometric => geometric_radii(self.lo, self.hi, self.points),
            Spacing::Uniform => uniform_radii(self.lo, self.hi, self.points),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Classical,
    Variable,
}

/// `c0 = 0.5` or `c0 = "fit"` (fitted on the scenario's own pair).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum C0Spec {
    Value(f64),
    Named(C0Name),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum C0Name {
    Fit,
}

impl Default for C0Spec {
    fn default() -> Self {
        C0Spec::Value(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSpec {
    pub big_c: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskSpec {
    Bundle {
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        variant: Option<Variant>,
        #[serde(default)]
        c0: C0Spec,
    },
    Monotonicity {
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        variant: Option<Variant>,
        #[serde(default)]
        c0: C0Spec,
        /// Negative control: the task passes when a violation is found.
        #[serde(default)]
        expect_violation: bool,
    },
    ThreeBall {
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        variant: Option<Variant>,
        #[serde(default = "default_triple")]
        radii: RadiiTriple,
        #[serde(default = "two")]
        sigma: f64,
        #[serde(default)]
        c0: C0Spec,
        #[serde(default)]
        c1: f64,
    },
    Vanishing {
        #[serde(default)]
        label: Option<String>,
        #[serde(default = "vanishing_lo")]
        r_min: f64,
        #[serde(default = "vanishing_hi")]
        r_max: f64,
        #[serde(default = "sixteen")]
        points: usize,
        #[serde(default = "quarter")]
        window: f64,
        #[serde(default)]
        expect_slope: Option<f64>,
        /// Relative tolerance on `expect_slope`.
        #[serde(default = "percent")]
        tolerance: f64,
        #[serde(default)]
        bound: Option<BoundSpec>,
    },
    Landis {
        #[serde(default)]
        label: Option<String>,
        #[serde(default = "four")]
        r1: f64,
        #[serde(default = "two_steps")]
        steps: usize,
        #[serde(default)]
        config: LandisConfig,
    },
}

fn default_triple() -> RadiiTriple {
    RadiiTriple::new(0.1, 0.25, 0.75)
}
fn two() -> f64 {
    2.0
}
fn four() -> f64 {
    4.0
}
fn two_steps() -> usize {
    2
}
fn vanishing_lo() -> f64 {
    0.01
}
fn vanishing_hi() -> f64 {
    0.9
}
fn sixteen() -> usize {
    16
}
fn quarter() -> f64 {
    crate::certify::DEFAULT_WINDOW
}
fn percent() -> f64 {
    0.01
}

impl TaskSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            TaskSpec::Bundle { .. } => "bundle",
            TaskSpec::Monotonicity { .. } => "monotonicity",
            TaskSpec::ThreeBall { .. } => "three-ball",
            TaskSpec::Vanishing { .. } => "vanishing",
            TaskSpec::Landis { .. } => "landis",
        }
    }

    pub fn label(&self) -> String {
        let l = match self {
            TaskSpec::Bundle { label, .. }
            | TaskSpec::Monotonicity { label, .. }
            | TaskSpec::ThreeBall { label, .. }
            | TaskSpec::Vanishing { label, .. }
            | TaskSpec::Landis { label, .. } => label,
        };
        l.clone().unwrap_or_else(|| self.kind().to_string())
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn domain(&self, levels: u32) -> Result<BallDomain> {
        BallDomain::centered(self.dimension, self.domain_radius, levels)
    }

    /// Checks every parameter against the preconditions of the operation it
    /// feeds. Nothing is computed.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
        {
            return Err(Error::config("name", "use letters, digits, '-', '_' or '.'"));
        }
        if !matches!(self.dimension, 2 | 3) {
            return Err(Error::config("dimension", format!("must be 2 or 3, got {}", self.dimension)));
        }
        if !(self.domain_radius > 0.0 && self.domain_radius.is_finite()) {
            return Err(Error::config("domain_radius", "must be positive"));
        }
        if let Some(l) = self.levels {
            if !(1..=9).contains(&l) {
                return Err(Error::config("levels", format!("must lie in 1..=9, got {l}")));
            }
        }
        if let AlphaPolicy::Explicit(a) = self.alpha {
            if !(a >= crate::frequency::MIN_ALPHA && a.is_finite()) {
                return Err(Error::config("alpha", format!("must be at least 2, got {a}")));
            }
        }
        self.validate_solution()?;
        let g = self.radii;
        let min_r = MIN_RADIUS_FRACTION * self.domain_radius;
        if !(g.lo >= min_r && g.hi > g.lo && g.hi <= self.domain_radius && g.points >= 1) {
            return Err(Error::config(
                "radii",
                format!(
                    "need {min_r} <= lo < hi <= domain_radius = {} and points >= 1",
                    self.domain_radius
                ),
            ));
        }
        let identity = self.has_identity_matrix();
        for (i, task) in self.tasks.iter().enumerate() {
            self.validate_task(task, identity)
                .map_err(|e| prefix(e, &format!("tasks[{i}].")))?;
        }
        Ok(())
    }

    fn has_identity_matrix(&self) -> bool {
        match &self.coefficients {
            Some(c) => matches!(c.family, crate::fields::MatrixFamily::Identity),
            None => true,
        }
    }

    fn validate_solution(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("solution.{name}"), format!("must be positive, got {v}")))
            }
        };
        let exact = !matches!(self.solution, SolutionSpec::Solve { .. });
        if exact && self.coefficients.is_some() {
            return Err(Error::config(
                "coefficients",
                "exact families carry their own operator; use family = \"solve\" for custom coefficients",
            ));
        }
        match &self.solution {
            SolutionSpec::Harmonic { degree, variant } | SolutionSpec::DampedHarmonic { degree, variant, .. } => {
                crate::solutions::check_harmonic_spec(self.dimension, *degree, *variant)
                    .map_err(|e| prefix(e, "solution."))?;
                if let SolutionSpec::DampedHarmonic { b, .. } = self.solution {
                    pos("b", b)?;
                }
                Ok(())
            }
            SolutionSpec::Exponential { m } | SolutionSpec::Oscillatory { m } => pos("m", *m),
            SolutionSpec::Drift { k } => pos("k", *k),
            SolutionSpec::Decoy { eps } => pos("eps", *eps),
            SolutionSpec::Solve { boundary, h } => {
                if self.coefficients.is_none() {
                    return Err(Error::config("coefficients", "required when family = \"solve\""));
                }
                if boundary.arity() > self.dimension {
                    return Err(Error::config("solution.boundary", "uses coordinates beyond the dimension"));
                }
                if !(*h > 0.0 && *h <= self.domain_radius / 2.0) {
                    return Err(Error::config(
                        "solution.h",
                        format!("must lie in (0, domain_radius/2], got {h}"),
                    ));
                }
                Ok(())
            }
        }
    }

    fn validate_task(&self, task: &TaskSpec, identity: bool) -> Result<()> {
        let big_r = self.domain_radius;
        let classical_ok = |v: &Option<Variant>| {
            if *v == Some(Variant::Classical) && !identity {
                Err(Error::config("variant", "classical tasks need A = I"))
            } else {
                Ok(())
            }
        };
        let c0_ok = |c0: &C0Spec| match c0 {
            C0Spec::Value(v) if !(v.is_finite() && *v >= 0.0) => {
                Err(Error::config("c0", format!("must be >= 0, got {v}")))
            }
            C0Spec::Named(_) if self.radii.points < crate::frequency::MIN_MONOTONICITY_POINTS => {
                Err(Error::config("c0", "fitting needs a radius grid of at least 16 points"))
            }
            _ => Ok(()),
        };
        match task {
            TaskSpec::Bundle { variant, c0, .. } => {
                classical_ok(variant)?;
                c0_ok(c0)
            }
            TaskSpec::Monotonicity { variant, c0, .. } => {
                classical_ok(variant)?;
                c0_ok(c0)?;
                if self.radii.points < crate::frequency::MIN_MONOTONICITY_POINTS {
                    return Err(Error::config(
                        "radii.points",
                        format!(
                            "monotonicity needs at least {} radii",
                            crate::frequency::MIN_MONOTONICITY_POINTS
                        ),
                    ));
                }
                Ok(())
            }
            TaskSpec::ThreeBall {
                variant,
                radii,
                sigma,
                c0,
                c1,
                ..
            } => {
                classical_ok(variant)?;
                c0_ok(c0)?;
                if !(c1.is_finite() && *c1 >= 0.0) {
                    return Err(Error::config("c1", "must be >= 0"));
                }
                let s = match variant.unwrap_or(if identity { Variant::Classical } else { Variant::Variable }) {
                    Variant::Classical => 2.0,
                    Variant::Variable => *sigma,
                };
                radii.check(s, big_r).map_err(|e| prefix(e, "radii."))
            }
            TaskSpec::Vanishing {
                r_min,
                r_max,
                points,
                window,
                tolerance,
                ..
            } => {
                if !(*r_min >= 1e-3) {
                    return Err(Error::config("r_min", "must be at least 1e-3"));
                }
                if !(*r_max > *r_min && *r_max <= big_r) {
                    return Err(Error::config("r_max", "need r_min < r_max <= domain_radius"));
                }
                if *points < 4 {
                    return Err(Error::config("points", "need at least 4"));
                }
                if !(*window > 0.0 && *window <= 1.0) {
                    return Err(Error::config("window", "must lie in (0, 1]"));
                }
                if !(*tolerance > 0.0) {
                    return Err(Error::config("tolerance", "must be positive"));
                }
                Ok(())
            }
            TaskSpec::Landis { r1, steps, config, .. } => {
                if matches!(self.solution, SolutionSpec::Solve { .. }) {
                    return Err(Error::config("kind", "landis needs a solution defined on all of R^n"));
                }
                if !(*r1 > 2.0 && r1.is_finite()) {
                    return Err(Error::config("r1", format!("must exceed 2, got {r1}")));
                }
                if *steps > crate::certify::MAX_STEPS {
                    return Err(Error::config("steps", format!("at most {}", crate::certify::MAX_STEPS)));
                }
                config.validate(self.dimension).map_err(|e| prefix(e, "config."))
            }
        }
    }
}

fn prefix(e: Error, p: &str) -> Error {
    match e {
        Error::Config { field, message } => Error::Config {
            field: format!("{p}{field}"),
            message,
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HARMONIC: &str = r#"
        name = "harmonic-d1"
        dimension = 2
        [solution]
        family = "harmonic"
        degree = 1
        [[tasks]]
        kind = "bundle"
        [[tasks]]
        kind = "monotonicity"
    "#;

    #[test]
    fn parses_and_validates() {
        let s = Scenario::from_toml(HARMONIC).unwrap();
        s.validate().unwrap();
        assert_eq!(s.tasks.len(), 2);
        assert_eq!(s.alpha, AlphaPolicy::Explicit(2.0));
        assert_eq!(s.tasks[1].label(), "monotonicity");
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = HARMONIC.replace("degree = 1", "degree = 1\ncolour = 3");
        assert!(matches!(Scenario::from_toml(&bad), Err(Error::Parse(_))));
    }

    #[test]
    fn alpha_and_c0_policies() {
        let s = Scenario::from_toml(&format!("alpha = \"auto\"\n{HARMONIC}")).unwrap();
        assert_eq!(s.alpha, AlphaPolicy::Named(AlphaName::Auto));
        let t: TaskSpec = toml::from_str("kind = \"bundle\"\nc0 = \"fit\"").unwrap();
        assert!(matches!(t, TaskSpec::Bundle { c0: C0Spec::Named(C0Name::Fit), .. }));
    }

    #[test]
    fn bad_triple_names_the_field() {
        let s = Scenario::from_toml(&format!(
            "{HARMONIC}\n[[tasks]]\nkind = \"three-ball\"\nradii = {{ r1 = 0.3, r2 = 0.25, r3 = 0.75 }}\n"
        ))
        .unwrap();
        match s.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "tasks[2].radii.r2"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn solve_needs_coefficients() {
        let s = Scenario::from_toml(
            r#"
            name = "s"
            dimension = 2
            [solution]
            family = "solve"
            boundary = "exp(x1)"
            h = 0.05
            "#,
        )
        .unwrap();
        assert!(matches!(s.validate(), Err(Error::Config { field, .. }) if field == "coefficients"));
    }

    #[test]
    fn empty_task_list_is_valid() {
        let s = Scenario::from_toml("name = \"e\"\ndimension = 2\n[solution]\nfamily = \"exponential\"\nm = 1.0\n")
            .unwrap();
        s.validate().unwrap();
        assert!(s.tasks.is_empty());
    }
}

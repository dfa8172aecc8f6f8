//! Named matrix families and the declarative coefficient spec.

use serde::{Deserialize, Serialize};

use super::{validate, CoefficientField, Constants, MatGrad, Mat, IDENTITY};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::quad::BallDomain;

/// Built-in families for `A`. Each one equals `I` at the origin except
/// `constant`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum MatrixFamily {
    Identity,
    /// `diag(1 + η x1, 1, …)`.
    DiagonalLinear { eta: f64 },
    /// `I + η x1 E` with `E` symmetric.
    LinearPerturbation { eta: f64, e: Vec<Vec<f64>> },
    /// `R(η x2) diag(1 + η x1, 1) R(η x2)ᵀ` in the `(x1, x2)` plane; `∇A`
    /// is taken numerically.
    RotationPerturbation { eta: f64 },
    Constant { matrix: Vec<Vec<f64>> },
}

impl MatrixFamily {
    pub fn name(&self) -> &'static str {
        match self {
            MatrixFamily::Identity => "identity",
            MatrixFamily::DiagonalLinear { .. } => "diagonal-linear",
            MatrixFamily::LinearPerturbation { .. } => "linear-perturbation",
            MatrixFamily::RotationPerturbation { .. } => "rotation-perturbation",
            MatrixFamily::Constant { .. } => "constant",
        }
    }

    pub(crate) fn has_analytic_gradient(&self) -> bool {
        !matches!(self, MatrixFamily::RotationPerturbation { .. })
    }

    pub(crate) fn check(&self, dim: usize) -> Result<()> {
        let square = |m: &Vec<Vec<f64>>, field: &str| -> Result<()> {
            if m.len() != dim || m.iter().any(|row| row.len() != dim) {
                return Err(Error::config(field, format!("must be {dim}x{dim}")));
            }
            if m.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::config(field, "entries must be finite"));
            }
            Ok(())
        };
        match self {
            MatrixFamily::Identity => Ok(()),
            MatrixFamily::DiagonalLinear { eta } | MatrixFamily::RotationPerturbation { eta } => {
                finite_eta(*eta)
            }
            MatrixFamily::LinearPerturbation { eta, e } => {
                finite_eta(*eta)?;
                square(e, "coefficients.e")?;
                for i in 0..dim {
                    for j in 0..i {
                        if (e[i][j] - e[j][i]).abs() > 1e-14 {
                            return Err(Error::config("coefficients.e", "must be symmetric"));
                        }
                    }
                }
                Ok(())
            }
            MatrixFamily::Constant { matrix } => square(matrix, "coefficients.matrix"),
        }
    }

    pub fn eval(&self, x: &[f64], dim: usize) -> Mat {
        let mut a = IDENTITY;
        match self {
            MatrixFamily::Identity => {}
            MatrixFamily::DiagonalLinear { eta } => a[0][0] = 1.0 + eta * x[0],
            MatrixFamily::LinearPerturbation { eta, e } => {
                for i in 0..dim {
                    for j in 0..dim {
                        a[i][j] += eta * x[0] * e[i][j];
                    }
                }
            }
            MatrixFamily::RotationPerturbation { eta } => {
                let (s, c) = (eta * x[1]).sin_cos();
                let d = 1.0 + eta * x[0];
                a[0][0] = d * c * c + s * s;
                a[1][1] = d * s * s + c * c;
                a[0][1] = (d - 1.0) * c * s;
                a[1][0] = a[0][1];
            }
            MatrixFamily::Constant { matrix } => {
                for i in 0..dim {
                    for j in 0..dim {
                        a[i][j] = matrix[i][j];
                    }
                }
            }
        }
        a
    }

    pub(crate) fn gradient(&self, _x: &[f64], dim: usize) -> MatGrad {
        let mut g = [[[0.0; 3]; 3]; 3];
        match self {
            MatrixFamily::DiagonalLinear { eta } => g[0][0][0] = *eta,
            MatrixFamily::LinearPerturbation { eta, e } => {
                for i in 0..dim {
                    for j in 0..dim {
                        g[0][i][j] = eta * e[i][j];
                    }
                }
            }
            _ => {}
        }
        g
    }
}

fn finite_eta(eta: f64) -> Result<()> {
    if !eta.is_finite() {
        return Err(Error::config("coefficients.eta", "must be finite"));
    }
    Ok(())
}

/// Declared constants; any that are omitted are filled from sampling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclaredConstants {
    pub lambda: Option<f64>,
    pub eta: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<f64>,
    #[serde(rename = "K")]
    pub k: Option<f64>,
}

/// Scenario-level description of `(A, W, V)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSpec {
    #[serde(flatten)]
    pub family: MatrixFamily,
    #[serde(default)]
    pub w: Option<Vec<Expr>>,
    #[serde(default)]
    pub v: Option<Expr>,
    #[serde(default)]
    pub declared: DeclaredConstants,
}

impl Default for CoefficientSpec {
    fn default() -> Self {
        CoefficientSpec {
            family: MatrixFamily::Identity,
            w: None,
            v: None,
            declared: DeclaredConstants::default(),
        }
    }
}

impl CoefficientSpec {
    /// Build the field on `domain`, filling undeclared constants from a
    /// sampled validation (`λ` capped at 1).
    pub fn build(&self, domain: &BallDomain, samples: usize) -> Result<CoefficientField> {
        let dim = domain.dim();
        let v = self.v.clone().unwrap_or_else(|| Expr::constant(0.0));
        let provisional = CoefficientField::from_family(
            dim,
            self.family.clone(),
            self.w.clone(),
            v,
            Constants::laplace(),
        )?
        .with_fd_radius(domain.radius());
        let d = self.declared;
        if let (Some(lambda), Some(eta), Some(m), Some(k)) = (d.lambda, d.eta, d.m, d.k) {
            let c = Constants::new(lambda, eta, m, k)?;
            return Ok(provisional.with_constants(c));
        }
        let report = validate(&provisional, domain, samples)?;
        let c = Constants::new(
            d.lambda.unwrap_or(report.observed_lambda.min(1.0)),
            d.eta.unwrap_or(report.lipschitz_quotient),
            d.m.unwrap_or(report.v_max),
            d.k.unwrap_or(report.w_max),
        )?;
        Ok(provisional.with_constants(c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_are_identity_at_origin() {
        let fams = [
            MatrixFamily::Identity,
            MatrixFamily::DiagonalLinear { eta: 0.3 },
            MatrixFamily::LinearPerturbation {
                eta: 0.2,
                e: vec![vec![1.0, 0.5], vec![0.5, -0.5]],
            },
            MatrixFamily::RotationPerturbation { eta: 0.4 },
        ];
        for f in fams {
            assert_eq!(f.eval(&[0.0, 0.0], 2), IDENTITY, "{}", f.name());
        }
    }

    #[test]
    fn rotation_family_is_symmetric_with_expected_spectrum() {
        let f = MatrixFamily::RotationPerturbation { eta: 0.5 };
        let a = f.eval(&[0.4, 0.7], 2);
        assert_eq!(a[0][1], a[1][0]);
        let tr = a[0][0] + a[1][1];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        assert!((tr - 2.2).abs() < 1e-14);
        assert!((det - 1.2).abs() < 1e-14);
    }

    #[test]
    fn spec_parses_from_toml() {
        let spec: CoefficientSpec = toml::from_str(
            r#"
            family = "linear-perturbation"
            eta = 0.1
            e = [[1.0, 0.5], [0.5, -0.5]]
            v = "1 + x1^2"
            [declared]
            lambda = 0.8
            "#,
        )
        .unwrap();
        assert_eq!(spec.family.name(), "linear-perturbation");
        assert_eq!(spec.declared.lambda, Some(0.8));
        let dom = BallDomain::centered(2, 1.0, 3).unwrap();
        let field = spec.build(&dom, 256).unwrap();
        let c = field.constants();
        assert_eq!(c.lambda, 0.8);
        assert!((c.m - 2.0).abs() < 0.05);
        assert!((c.eta - 0.1).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_e_rejected() {
        let f = MatrixFamily::LinearPerturbation {
            eta: 0.1,
            e: vec![vec![1.0, 0.5], vec![0.4, 0.0]],
        };
        assert!(f.check(2).is_err());
    }
}

//! Evaluable solutions of `-div(A∇u) + W·∇u + Vu = 0`.
//!
//! `div(A∇u)` is always evaluated through the equation as `W·∇u + Vu`,
//! except for custom fields that bring their own operator value.

mod exact;
mod grid_io;
mod solver;

pub use exact::{HarmonicVariant, MAX_HARMONIC_DEGREE};
pub(crate) use exact::check_harmonic as check_harmonic_spec;
pub use grid_io::{read_grid_csv, write_grid_csv};
pub use solver::{solve_dirichlet, GridSolution, SolverStats};

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fields::{
    dot, mat_vec, transpose, Affine, CoefficientField, Constants, MatrixFamily, NormalizeTransform,
    ScalarFn, Vec3,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Exact,
    Solved,
    /// User-supplied closures; not necessarily a solution of anything.
    Custom,
}

/// `u`, `∇u` and `div(A∇u)` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub u: f64,
    pub grad: Vec3,
    pub div_a_grad: f64,
}

pub type GradFn = dyn Fn(&[f64]) -> Vec3 + Send + Sync;

#[derive(Clone)]
enum Repr {
    Harmonic {
        degree: u32,
        variant: HarmonicVariant,
    },
    /// `exp(s x1)`.
    Exponential { s: f64 },
    /// `sin(s x1)`.
    Sine { s: f64 },
    /// `p(x) exp(-b |x|²)` with `p` harmonic of degree `d`.
    DampedHarmonic {
        degree: u32,
        variant: HarmonicVariant,
        b: f64,
    },
    Grid(Arc<GridSolution>),
    Custom {
        u: Arc<ScalarFn>,
        grad: Arc<GradFn>,
        op: Option<Arc<ScalarFn>>,
    },
}

/// A solution together with the operator it solves.
#[derive(Clone)]
pub struct SolutionField {
    dim: usize,
    repr: Repr,
    field: CoefficientField,
    provenance: Provenance,
    residual_bound: Option<f64>,
    transform: Option<Affine>,
    label: String,
}

impl fmt::Debug for SolutionField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SolutionField")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("provenance", &self.provenance)
            .field("residual_bound", &self.residual_bound)
            .field("field", &self.field)
            .finish()
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::domain(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

fn drift_field(dim: usize, k: f64) -> CoefficientField {
    let mut w = vec![Expr::constant(0.0); dim];
    w[0] = Expr::constant(k);
    let c = Constants {
        k,
        ..Constants::laplace()
    };
    CoefficientField::from_family(dim, MatrixFamily::Identity, Some(w), Expr::constant(0.0), c)
        .expect("identity family with constant drift is valid")
}

impl SolutionField {
    fn exact(dim: usize, repr: Repr, field: CoefficientField, label: String) -> Self {
        SolutionField {
            dim,
            repr,
            field,
            provenance: Provenance::Exact,
            residual_bound: Some(0.0),
            transform: None,
            label,
        }
    }

    /// Harmonic polynomial of degree `d` (`Δu = 0`).
    pub fn harmonic_polynomial(dim: usize, degree: u32, variant: HarmonicVariant) -> Result<Self> {
        exact::check_harmonic(dim, degree, variant)?;
        Ok(Self::exact(
            dim,
            Repr::Harmonic { degree, variant },
            CoefficientField::laplace(dim),
            format!("harmonic-{variant:?}-d{degree}").to_lowercase(),
        ))
    }

    /// `exp(√M x1)` solving `-Δu + M u = 0`.
    pub fn exponential(dim: usize, m: f64) -> Result<Self> {
        positive("M", m)?;
        check_dim(dim)?;
        Ok(Self::exact(
            dim,
            Repr::Exponential { s: m.sqrt() },
            CoefficientField::schrodinger(dim, m),
            format!("exponential-M{m}"),
        ))
    }

    /// `sin(√M x1)` solving `-Δu - M u = 0`.
    pub fn oscillatory(dim: usize, m: f64) -> Result<Self> {
        positive("M", m)?;
        check_dim(dim)?;
        Ok(Self::exact(
            dim,
            Repr::Sine { s: m.sqrt() },
            CoefficientField::schrodinger(dim, -m),
            format!("oscillatory-M{m}"),
        ))
    }

    /// `exp(K x1)` solving `-Δu + W·∇u = 0` with `W = (K, 0, …)`.
    pub fn drift(dim: usize, k: f64) -> Result<Self> {
        positive("K", k)?;
        check_dim(dim)?;
        Ok(Self::exact(
            dim,
            Repr::Exponential { s: k },
            drift_field(dim, k),
            format!("drift-K{k}"),
        ))
    }

    /// `p(x) exp(-b|x|²)` with `p` harmonic of degree `d`; it solves
    /// `-Δu + Vu = 0` for `V = 4b²|x|² - 2b(n + 2d)`. `M` is declared as
    /// `sup |V|` over `B_radius`.
    pub fn damped_harmonic(
        dim: usize,
        degree: u32,
        variant: HarmonicVariant,
        b: f64,
        radius: f64,
    ) -> Result<Self> {
        exact::check_harmonic(dim, degree, variant)?;
        positive("b", b)?;
        positive("radius", radius)?;
        let c0 = 2.0 * b * (dim as f64 + 2.0 * degree as f64);
        let c2 = 4.0 * b * b;
        let r2 = (1..=dim).map(|i| format!("x{i}^2")).collect::<Vec<_>>().join(" + ");
        let v = Expr::parse(&format!("{c2:?} * ({r2}) - {c0:?}"))?;
        let m = c0.max((c2 * radius * radius - c0).abs());
        let field = CoefficientField::from_family(
            dim,
            MatrixFamily::Identity,
            None,
            v,
            Constants {
                m,
                ..Constants::laplace()
            },
        )?;
        Ok(Self::exact(
            dim,
            Repr::DampedHarmonic { degree, variant, b },
            field,
            format!("damped-harmonic-d{degree}-b{b}"),
        ))
    }

    /// `x1 |x|²/(|x|² + ε)`, cubic near the origin and linear beyond `√ε`.
    ///
    /// Not a solution of any equation with bounded `V`; it is paired with
    /// the Laplacian (`M = 0`) and its true `Δu`, so its frequency decreases
    /// and monotonicity checks must flag it.
    pub fn decoy(dim: usize, eps: f64) -> Result<Self> {
        check_dim(dim)?;
        positive("eps", eps)?;
        let u = move |x: &[f64]| {
            let s = dot(x, x, x.len());
            x[0] * s / (s + eps)
        };
        let grad = move |x: &[f64]| {
            let n = x.len();
            let s = dot(x, x, n);
            let (f, fp) = (s / (s + eps), eps / ((s + eps) * (s + eps)));
            let mut g = [0.0; 3];
            for i in 0..n {
                g[i] = 2.0 * x[0] * x[i] * fp;
            }
            g[0] += f;
            g
        };
        let lap = move |x: &[f64]| {
            let n = x.len();
            let s = dot(x, x, n);
            let fp = eps / ((s + eps) * (s + eps));
            let fpp = -2.0 * eps / ((s + eps) * (s + eps) * (s + eps));
            x[0] * (2.0 * (n as f64 + 2.0) * fp + 4.0 * s * fpp)
        };
        Ok(Self::custom(
            dim,
            Arc::new(u),
            Arc::new(grad),
            Some(Arc::new(lap)),
            CoefficientField::laplace(dim),
        )?
        .with_label(format!("decoy(eps={eps})")))
    }

    /// User closures. `op`, when given, is `div(A∇u)`; otherwise the
    /// field's `W·∇u + Vu` is used.
    pub fn custom(
        dim: usize,
        u: Arc<ScalarFn>,
        grad: Arc<GradFn>,
        op: Option<Arc<ScalarFn>>,
        field: CoefficientField,
    ) -> Result<Self> {
        check_dim(dim)?;
        if field.dim() != dim {
            return Err(Error::domain("solution and field dimensions differ"));
        }
        Ok(SolutionField {
            dim,
            repr: Repr::Custom { u, grad, op },
            field,
            provenance: Provenance::Custom,
            residual_bound: None,
            transform: None,
            label: "custom".into(),
        })
    }

    pub(crate) fn from_grid(grid: GridSolution, field: CoefficientField, residual: f64) -> Self {
        SolutionField {
            dim: grid.dim(),
            repr: Repr::Grid(Arc::new(grid)),
            field,
            provenance: Provenance::Solved,
            residual_bound: Some(residual),
            transform: None,
            label: "solved".into(),
        }
    }

    /// Pair a cached grid with the operator it was solved for.
    pub fn from_cached_grid(grid: GridSolution, field: CoefficientField) -> Result<Self> {
        if grid.dim() != field.dim() {
            return Err(Error::domain("grid and field dimensions differ"));
        }
        let residual = grid.stats().residual_inf;
        Ok(Self::from_grid(grid, field, residual))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn field(&self) -> &CoefficientField {
        &self.field
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn residual_bound(&self) -> Option<f64> {
        self.residual_bound
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Replace the operator the solution is paired with. Used for negative
    /// controls; the provenance becomes `Custom`.
    pub fn with_field(mut self, field: CoefficientField) -> Self {
        self.field = field;
        self.provenance = Provenance::Custom;
        self
    }

    pub fn grid(&self) -> Option<&GridSolution> {
        match &self.repr {
            Repr::Grid(g) => Some(g),
            _ => None,
        }
    }

    fn base(&self, y: &[f64]) -> (f64, Vec3) {
        match &self.repr {
            Repr::Harmonic { degree, variant } => exact::harmonic(y, *degree, *variant),
            Repr::Exponential { s } => {
                let u = (s * y[0]).exp();
                (u, [s * u, 0.0, 0.0])
            }
            Repr::Sine { s } => {
                let (sn, cs) = (s * y[0]).sin_cos();
                (sn, [s * cs, 0.0, 0.0])
            }
            Repr::DampedHarmonic { degree, variant, b } => {
                let (p, gp) = exact::harmonic(y, *degree, *variant);
                let e = (-b * dot(y, y, self.dim)).exp();
                let mut g = [0.0; 3];
                for i in 0..self.dim {
                    g[i] = e * (gp[i] - 2.0 * b * p * y[i]);
                }
                (p * e, g)
            }
            Repr::Grid(grid) => grid.eval(y),
            Repr::Custom { u, grad, .. } => (u(y), grad(y)),
        }
    }

    /// `u(x)` and `∇u(x)`.
    pub fn eval(&self, x: &[f64]) -> (f64, Vec3) {
        match &self.transform {
            None => self.base(x),
            Some(t) => {
                let y = t.apply(x, self.dim);
                let (u, g) = self.base(&y[..self.dim]);
                (u, mat_vec(&transpose(&t.t, self.dim), &g, self.dim))
            }
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.eval(x).0
    }

    pub fn gradient(&self, x: &[f64]) -> Vec3 {
        self.eval(x).1
    }

    /// `u`, `∇u`, and `div(A∇u)` evaluated through the equation.
    pub fn sample(&self, x: &[f64]) -> Sample {
        let (u, grad) = self.eval(x);
        let div_a_grad = match &self.repr {
            Repr::Custom { op: Some(op), .. } => match &self.transform {
                None => op(x),
                Some(t) => op(&t.apply(x, self.dim)[..self.dim]),
            },
            _ => {
                let w = self.field.w(x);
                dot(&w, &grad, self.dim) + self.field.v(x) * u
            }
        };
        Sample {
            u,
            grad,
            div_a_grad,
        }
    }

    pub fn div_a_grad(&self, x: &[f64]) -> f64 {
        self.sample(x).div_a_grad
    }

    /// `-Δu + W·∇u + Vu` with `Δu` from closed-form second derivatives.
    /// Only available for untransformed exact families (which have `A = I`).
    pub fn exact_residual(&self, x: &[f64]) -> Option<f64> {
        if self.transform.is_some() || self.provenance != Provenance::Exact {
            return None;
        }
        let n = self.dim;
        let lap = match &self.repr {
            Repr::Harmonic { degree, variant } => exact::harmonic_laplacian(x, *degree, *variant),
            Repr::Exponential { s } => s * s * (s * x[0]).exp(),
            Repr::Sine { s } => -s * s * (s * x[0]).sin(),
            Repr::DampedHarmonic { degree, variant, b } => {
                let (p, gp) = exact::harmonic(x, *degree, *variant);
                let r2 = dot(x, x, n);
                let e = (-b * r2).exp();
                let lap_p = exact::harmonic_laplacian(x, *degree, *variant);
                let grad_p_dot_x = dot(&gp, x, n);
                e * (lap_p - 4.0 * b * grad_p_dot_x + p * (4.0 * b * b * r2 - 2.0 * b * n as f64))
            }
            _ => return None,
        };
        let (u, g) = self.eval(x);
        Some(-lap + dot(&self.field.w(x), &g, n) + self.field.v(x) * u)
    }

    /// `u_k(x) = u(x0 + S x)` paired with the normalized field.
    pub fn transformed(&self, t: &NormalizeTransform, field: CoefficientField) -> Result<Self> {
        if field.dim() != self.dim {
            return Err(Error::domain("field dimension differs from the solution's"));
        }
        let a = t.affine();
        let composed = match &self.transform {
            None => a,
            Some(old) => old.compose(&a, self.dim),
        };
        Ok(SolutionField {
            transform: Some(composed),
            field,
            label: format!("{} (normalized)", self.label),
            ..self.clone()
        })
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim != 2 && dim != 3 {
        return Err(Error::domain(format!("dimension must be 2 or 3, got {dim}")));
    }
    Ok(())
}

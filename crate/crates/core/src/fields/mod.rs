//! The coefficient triple `(A, W, V)` of `-div(A∇u) + W·∇u + Vu`, the
//! auxiliary `μ` and `Z`, and the point normalization `x ↦ x0 + S x`.

mod builtin;
mod checks;
mod sampling;

pub use builtin::{CoefficientSpec, MatrixFamily};
pub use checks::{
    check_lemma_a_bounds, mu_z, normalize_at, validate, LemmaConstants, MuZEvaluation,
    NormalizeTransform, ValidationReport, Violation, ViolationKind,
};
pub use sampling::{halton_ball, sample_points, DEFAULT_SAMPLES};

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;

/// Row-major matrix; only the leading `n × n` block is meaningful.
pub type Mat = [[f64; 3]; 3];
/// Vector; only the leading `n` entries are meaningful.
pub type Vec3 = [f64; 3];
/// `g[k][i][j] = ∂_k a_ij`.
pub type MatGrad = [[[f64; 3]; 3]; 3];

pub const IDENTITY: Mat = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub type MatrixFn = dyn Fn(&[f64]) -> Mat + Send + Sync;
pub type VectorFn = dyn Fn(&[f64]) -> Vec3 + Send + Sync;
pub type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Declared structural constants: ellipticity `λ`, Lipschitz bound `η`,
/// `‖V‖∞ ≤ M`, `‖W‖∞ ≤ K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub lambda: f64,
    pub eta: f64,
    pub m: f64,
    pub k: f64,
}

impl Constants {
    pub fn new(lambda: f64, eta: f64, m: f64, k: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::config("lambda", format!("must lie in (0, 1], got {lambda}")));
        }
        for (name, v) in [("eta", eta), ("M", m), ("K", k)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(Constants { lambda, eta, m, k })
    }

    pub fn laplace() -> Self {
        Constants {
            lambda: 1.0,
            eta: 0.0,
            m: 0.0,
            k: 0.0,
        }
    }
}

/// How `∂_k a_ij` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum GradientMode {
    Analytic,
    /// Central differences with the given step.
    FiniteDifference { step: f64 },
}

#[derive(Clone)]
enum MatrixSource {
    Family(MatrixFamily),
    Custom(Arc<MatrixFn>),
}

#[derive(Clone)]
enum VectorSource {
    Zero,
    Exprs(Vec<Expr>),
    Custom(Arc<VectorFn>),
}

#[derive(Clone)]
enum ScalarSource {
    Expr(Expr),
    Custom(Arc<ScalarFn>),
}

/// `y = x0 + T x`. Matrices transform as `T⁻¹ A(y) T⁻ᵀ`, drifts as `T⁻¹ W(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub x0: Vec3,
    pub t: Mat,
    pub t_inv: Mat,
}

impl Affine {
    pub fn apply(&self, x: &[f64], n: usize) -> Vec3 {
        let mut y = self.x0;
        for i in 0..n {
            for j in 0..n {
                y[i] += self.t[i][j] * x[j];
            }
        }
        y
    }

    /// `self ∘ other`: first `other`, then `self`.
    pub fn compose(&self, other: &Affine, n: usize) -> Affine {
        Affine {
            x0: self.apply(&other.x0[..n], n),
            t: mat_mul(&self.t, &other.t, n),
            t_inv: mat_mul(&other.t_inv, &self.t_inv, n),
        }
    }
}

/// Coefficients of `-div(A∇u) + W·∇u + Vu` with their declared constants.
#[derive(Clone)]
pub struct CoefficientField {
    dim: usize,
    a: MatrixSource,
    w: VectorSource,
    v: ScalarSource,
    constants: Constants,
    gradient: GradientMode,
    transform: Option<Affine>,
    label: String,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("constants", &self.constants)
            .field("gradient", &self.gradient)
            .field("transform", &self.transform)
            .finish()
    }
}

/// Default finite-difference step for numeric `∇A`, relative to the radius.
pub const FD_STEP_FRACTION: f64 = 1e-5;

impl CoefficientField {
    /// `-Δu + Vu` with constant `V = v`; `M` declared as `|v|`.
    pub fn laplace(dim: usize) -> Self {
        Self::schrodinger(dim, 0.0)
    }

    pub fn schrodinger(dim: usize, v: f64) -> Self {
        CoefficientField {
            dim,
            a: MatrixSource::Family(MatrixFamily::Identity),
            w: VectorSource::Zero,
            v: ScalarSource::Expr(Expr::constant(v)),
            constants: Constants {
                m: v.abs(),
                ..Constants::laplace()
            },
            gradient: GradientMode::Analytic,
            transform: None,
            label: "identity".into(),
        }
    }

    /// Built-in matrix family with expression-valued `W` and `V`.
    pub fn from_family(
        dim: usize,
        family: MatrixFamily,
        w: Option<Vec<Expr>>,
        v: Expr,
        constants: Constants,
    ) -> Result<Self> {
        check_dim(dim)?;
        family.check(dim)?;
        let w = match w {
            None => VectorSource::Zero,
            Some(ws) => {
                if ws.len() != dim {
                    return Err(Error::config(
                        "coefficients.w",
                        format!("expected {dim} components, got {}", ws.len()),
                    ));
                }
                check_arity(&ws, dim, "coefficients.w")?;
                VectorSource::Exprs(ws)
            }
        };
        check_arity(std::slice::from_ref(&v), dim, "coefficients.v")?;
        let gradient = if family.has_analytic_gradient() {
            GradientMode::Analytic
        } else {
            GradientMode::FiniteDifference { step: FD_STEP_FRACTION }
        };
        Ok(CoefficientField {
            dim,
            label: family.name().into(),
            a: MatrixSource::Family(family),
            w,
            v: ScalarSource::Expr(v),
            constants,
            gradient,
            transform: None,
        })
    }

    /// Arbitrary closures. `∇A` is taken by central differences with `fd_step`.
    pub fn custom(
        dim: usize,
        a: Arc<MatrixFn>,
        w: Option<Arc<VectorFn>>,
        v: Arc<ScalarFn>,
        constants: Constants,
        fd_step: f64,
    ) -> Result<Self> {
        check_dim(dim)?;
        Ok(CoefficientField {
            dim,
            a: MatrixSource::Custom(a),
            w: w.map_or(VectorSource::Zero, VectorSource::Custom),
            v: ScalarSource::Custom(v),
            constants,
            gradient: GradientMode::FiniteDifference { step: fd_step },
            transform: None,
            label: "custom".into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constants(&self) -> Constants {
        self.constants
    }

    pub fn with_constants(mut self, constants: Constants) -> Self {
        self.constants = constants;
        self
    }

    pub fn gradient_mode(&self) -> GradientMode {
        self.gradient
    }

    /// Rescale the finite-difference step to `FD_STEP_FRACTION · radius`.
    pub fn with_fd_radius(mut self, radius: f64) -> Self {
        if let GradientMode::FiniteDifference { .. } = self.gradient {
            self.gradient = GradientMode::FiniteDifference {
                step: FD_STEP_FRACTION * radius,
            };
        }
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn transform(&self) -> Option<&Affine> {
        self.transform.as_ref()
    }

    /// True when `A` is the identity everywhere (not merely at one point).
    pub fn is_identity_matrix(&self) -> bool {
        self.transform.is_none()
            && matches!(self.a, MatrixSource::Family(MatrixFamily::Identity))
    }

    pub fn has_drift(&self) -> bool {
        !matches!(self.w, VectorSource::Zero)
    }

    fn base_a(&self, y: &[f64]) -> Mat {
        match &self.a {
            MatrixSource::Family(f) => f.eval(y, self.dim),
            MatrixSource::Custom(f) => f(y),
        }
    }

    fn base_grad_a(&self, y: &[f64]) -> MatGrad {
        let n = self.dim;
        match (&self.a, self.gradient) {
            (MatrixSource::Family(f), GradientMode::Analytic) => f.gradient(y, n),
            _ => {
                let step = match self.gradient {
                    GradientMode::FiniteDifference { step } => step,
                    GradientMode::Analytic => FD_STEP_FRACTION,
                };
                let mut g = [[[0.0; 3]; 3]; 3];
                let mut yp = [0.0; 3];
                let mut ym = [0.0; 3];
                yp[..n].copy_from_slice(&y[..n]);
                ym[..n].copy_from_slice(&y[..n]);
                for k in 0..n {
                    yp[k] = y[k] + step;
                    ym[k] = y[k] - step;
                    let ap = self.base_a(&yp[..n]);
                    let am = self.base_a(&ym[..n]);
                    for i in 0..n {
                        for j in 0..n {
                            g[k][i][j] = (ap[i][j] - am[i][j]) / (2.0 * step);
                        }
                    }
                    yp[k] = y[k];
                    ym[k] = y[k];
                }
                g
            }
        }
    }

    fn base_w(&self, y: &[f64]) -> Vec3 {
        match &self.w {
            VectorSource::Zero => [0.0; 3],
            VectorSource::Exprs(es) => {
                let mut w = [0.0; 3];
                for (wi, e) in w.iter_mut().zip(es) {
                    *wi = e.eval(y);
                }
                w
            }
            VectorSource::Custom(f) => f(y),
        }
    }

    fn base_v(&self, y: &[f64]) -> f64 {
        match &self.v {
            ScalarSource::Expr(e) => e.eval(y),
            ScalarSource::Custom(f) => f(y),
        }
    }

    pub fn a(&self, x: &[f64]) -> Mat {
        let n = self.dim;
        match &self.transform {
            None => self.base_a(x),
            Some(t) => {
                let y = t.apply(x, n);
                let a = self.base_a(&y[..n]);
                congruence(&t.t_inv, &a, n)
            }
        }
    }

    /// `g[k][i][j] = ∂_k a_ij(x)`.
    pub fn grad_a(&self, x: &[f64]) -> MatGrad {
        let n = self.dim;
        match &self.transform {
            None => self.base_grad_a(x),
            Some(t) => {
                let y = t.apply(x, n);
                let gy = self.base_grad_a(&y[..n]);
                let mut inner = [[[0.0; 3]; 3]; 3];
                for l in 0..n {
                    inner[l] = congruence(&t.t_inv, &gy[l], n);
                }
                let mut g = [[[0.0; 3]; 3]; 3];
                for k in 0..n {
                    for l in 0..n {
                        let c = t.t[l][k];
                        if c == 0.0 {
                            continue;
                        }
                        for i in 0..n {
                            for j in 0..n {
                                g[k][i][j] += c * inner[l][i][j];
                            }
                        }
                    }
                }
                g
            }
        }
    }

    pub fn w(&self, x: &[f64]) -> Vec3 {
        let n = self.dim;
        match &self.transform {
            None => self.base_w(x),
            Some(t) => {
                let y = t.apply(x, n);
                mat_vec(&t.t_inv, &self.base_w(&y[..n]), n)
            }
        }
    }

    pub fn v(&self, x: &[f64]) -> f64 {
        match &self.transform {
            None => self.base_v(x),
            Some(t) => {
                let y = t.apply(x, self.dim);
                self.base_v(&y[..self.dim])
            }
        }
    }

    /// `Σ_i ∂_i a_ij`, the first-order coefficient of the non-divergence form.
    pub fn div_rows(&self, x: &[f64]) -> Vec3 {
        let n = self.dim;
        let g = self.grad_a(x);
        let mut b = [0.0; 3];
        for (j, bj) in b.iter_mut().enumerate().take(n) {
            *bj = (0..n).map(|i| g[i][i][j]).sum();
        }
        b
    }

    /// Max-entry distance of `A(0)` from the identity.
    pub fn origin_defect(&self) -> f64 {
        let a = self.a(&[0.0; 3][..self.dim]);
        let mut d: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                d = d.max((a[i][j] - IDENTITY[i][j]).abs());
            }
        }
        d
    }

    /// Precondition of the variable-coefficient machinery: `A(0) = I`.
    pub fn require_identity_at_origin(&self) -> Result<()> {
        let d = self.origin_defect();
        if d > 1e-10 {
            return Err(Error::Precondition(format!(
                "A(0) must be the identity; max entry defect {d:e}"
            )));
        }
        Ok(())
    }

    fn with_transform(&self, t: Affine, constants: Constants) -> Self {
        let composed = match &self.transform {
            None => t,
            Some(old) => old.compose(&t, self.dim),
        };
        CoefficientField {
            transform: Some(composed),
            constants,
            label: format!("{} (normalized)", self.label),
            ..self.clone()
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim != 2 && dim != 3 {
        return Err(Error::config("dimension", format!("must be 2 or 3, got {dim}")));
    }
    Ok(())
}

fn check_arity(es: &[Expr], dim: usize, field: &str) -> Result<()> {
    for e in es {
        if e.arity() > dim {
            return Err(Error::config(
                field,
                format!("`{e}` uses x{} in dimension {dim}", e.arity()),
            ));
        }
    }
    Ok(())
}

pub(crate) fn mat_mul(a: &Mat, b: &Mat, n: usize) -> Mat {
    let mut c = [[0.0; 3]; 3];
    for i in 0..n {
        for j in 0..n {
            c[i][j] = (0..n).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub(crate) fn transpose(a: &Mat, n: usize) -> Mat {
    let mut t = [[0.0; 3]; 3];
    for i in 0..n {
        for j in 0..n {
            t[i][j] = a[j][i];
        }
    }
    t
}

/// `P A Pᵀ`.
pub(crate) fn congruence(p: &Mat, a: &Mat, n: usize) -> Mat {
    mat_mul(&mat_mul(p, a, n), &transpose(p, n), n)
}

pub(crate) fn mat_vec(a: &Mat, v: &Vec3, n: usize) -> Vec3 {
    let mut out = [0.0; 3];
    for i in 0..n {
        out[i] = (0..n).map(|j| a[i][j] * v[j]).sum();
    }
    out
}

pub(crate) fn dot(a: &[f64], b: &[f64], n: usize) -> f64 {
    (0..n).map(|i| a[i] * b[i]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_validation() {
        assert!(Constants::new(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(Constants::new(1.5, 0.0, 0.0, 0.0).is_err());
        assert!(Constants::new(1.0, -1.0, 0.0, 0.0).is_err());
        assert!(Constants::new(0.5, 0.1, 2.0, 1.0).is_ok());
    }

    #[test]
    fn laplace_field_is_identity() {
        let f = CoefficientField::laplace(2);
        assert!(f.is_identity_matrix());
        assert_eq!(f.a(&[0.3, 0.1])[0][0], 1.0);
        assert_eq!(f.grad_a(&[0.3, 0.1]), [[[0.0; 3]; 3]; 3]);
        assert_eq!(f.v(&[0.3, 0.1]), 0.0);
        assert!(f.require_identity_at_origin().is_ok());
    }

    #[test]
    fn analytic_and_numeric_gradients_agree() {
        let c = Constants::new(0.5, 0.3, 0.0, 0.0).unwrap();
        let fam = MatrixFamily::LinearPerturbation {
            eta: 0.3,
            e: vec![vec![1.0, 0.5], vec![0.5, -0.5]],
        };
        let analytic =
            CoefficientField::from_family(2, fam.clone(), None, Expr::constant(0.0), c).unwrap();
        let fam2 = fam.clone();
        let numeric = CoefficientField::custom(
            2,
            Arc::new(move |x| fam2.eval(x, 2)),
            None,
            Arc::new(|_| 0.0),
            c,
            1e-5,
        )
        .unwrap();
        let x = [0.2, -0.4];
        let (ga, gn) = (analytic.grad_a(&x), numeric.grad_a(&x));
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    assert!((ga[k][i][j] - gn[k][i][j]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn drift_arity_checked() {
        let w = vec![Expr::parse("x3").unwrap(), Expr::constant(0.0)];
        let err = CoefficientField::from_family(
            2,
            MatrixFamily::Identity,
            Some(w),
            Expr::constant(0.0),
            Constants::laplace(),
        );
        assert!(matches!(err, Err(Error::Config { .. })));
    }
}

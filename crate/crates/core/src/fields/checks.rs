//! `μ`, `Z` and the structural checks on a coefficient field.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{
    dot, mat_vec, sample_points, Affine, CoefficientField, Constants, GradientMode, Mat, Vec3,
    IDENTITY,
};
use crate::error::{Error, Result};
use crate::quad::BallDomain;

/// `μ = Ax·x/|x|²`, `Z = Ax/μ` and derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuZEvaluation {
    pub mu: f64,
    pub z: Vec3,
    pub div_z: f64,
    /// `jac_z[i][k] = ∂_i Z_k`.
    pub jac_z: Mat,
    /// `div(A(x) x)`.
    pub div_ax: f64,
}

/// Evaluate `μ`, `Z` and `∇Z` at `x`.
///
/// At `x = 0` the continuous extension `μ = 1, Z = 0, ∇Z = I` is returned
/// when `A(0) = I`; otherwise the origin is a domain error.
pub fn mu_z(field: &CoefficientField, x: &[f64]) -> Result<MuZEvaluation> {
    let n = field.dim();
    let s: f64 = dot(x, x, n);
    let a = field.a(x);
    if s == 0.0 {
        if field.origin_defect() > 1e-10 {
            return Err(Error::domain("μ is undefined at the origin unless A(0) = I"));
        }
        let div_ax = (0..n).map(|i| a[i][i]).sum();
        return Ok(MuZEvaluation {
            mu: 1.0,
            z: [0.0; 3],
            div_z: n as f64,
            jac_z: IDENTITY,
            div_ax,
        });
    }
    let g = field.grad_a(x);
    let ax = mat_vec(&a, &[x[0], x[1], if n == 3 { x[2] } else { 0.0 }], n);
    let q = dot(&ax, x, n);
    let mu = q / s;
    let mut z = [0.0; 3];
    for k in 0..n {
        z[k] = ax[k] / mu;
    }
    // ∂_i (Ax)_k = Σ_j ∂_i a_kj x_j + a_ki;  ∂_i q = Σ_lm ∂_i a_lm x_l x_m + 2 (Ax)_i.
    let mut d_ax = [[0.0; 3]; 3];
    let mut d_q = [0.0; 3];
    for i in 0..n {
        for k in 0..n {
            d_ax[i][k] = (0..n).map(|j| g[i][k][j] * x[j]).sum::<f64>() + a[k][i];
        }
        let mut quad = 0.0;
        for l in 0..n {
            for m in 0..n {
                quad += g[i][l][m] * x[l] * x[m];
            }
        }
        d_q[i] = quad + 2.0 * ax[i];
    }
    let mut jac = [[0.0; 3]; 3];
    for i in 0..n {
        for k in 0..n {
            jac[i][k] = (2.0 * x[i] * ax[k] + s * d_ax[i][k]) / q - s * ax[k] * d_q[i] / (q * q);
        }
    }
    let div_z = (0..n).map(|k| jac[k][k]).sum();
    let div_ax = (0..n).map(|i| d_ax[i][i]).sum();
    Ok(MuZEvaluation {
        mu,
        z,
        div_z,
        jac_z: jac,
        div_ax,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    Symmetry,
    Ellipticity,
    Boundedness,
    Lipschitz,
    Potential,
    Drift,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub point: Vec<f64>,
    pub detail: String,
}

/// Worst observed values of the structural hypotheses over the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub samples: usize,
    pub gradient_mode: GradientMode,
    pub declared: Constants,
    pub symmetry_defect: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// `min(λ_min, 1/λ_max)`: the largest `λ` the samples allow.
    pub observed_lambda: f64,
    /// `observed_lambda - declared λ`; negative means a violation.
    pub ellipticity_margin: f64,
    /// `max |∇a_ij|` over samples and entries.
    pub lipschitz_quotient: f64,
    pub v_max: f64,
    pub w_max: f64,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

const REL_SLACK: f64 = 1e-9;

/// Sample the hypotheses on `A`, `W`, `V` over the domain ball. The first
/// violation of each kind is recorded with its point.
pub fn validate(
    field: &CoefficientField,
    domain: &BallDomain,
    samples: usize,
) -> Result<ValidationReport> {
    if samples == 0 {
        return Err(Error::config("samples", "must be at least 1"));
    }
    if field.dim() != domain.dim() {
        return Err(Error::domain("field and domain dimensions differ"));
    }
    let n = field.dim();
    let c = field.constants();
    let pts = sample_points(domain, domain.center(), domain.radius(), samples)?;
    let mut rep = ValidationReport {
        samples: pts.len(),
        gradient_mode: field.gradient_mode(),
        declared: c,
        symmetry_defect: 0.0,
        min_eigenvalue: f64::INFINITY,
        max_eigenvalue: f64::NEG_INFINITY,
        observed_lambda: 0.0,
        ellipticity_margin: 0.0,
        lipschitz_quotient: 0.0,
        v_max: 0.0,
        w_max: 0.0,
        violations: Vec::new(),
    };
    let flag = |rep: &mut ValidationReport, kind, x: &[f64], detail: String| {
        if !rep.violations.iter().any(|v| v.kind == kind) {
            rep.violations.push(Violation {
                kind,
                point: x.to_vec(),
                detail,
            });
        }
    };
    for p in &pts {
        let x = &p[..n];
        let a = field.a(x);
        let g = field.grad_a(x);
        let v = field.v(x);
        let w = field.w(x);
        let finite = a.iter().flatten().all(|e| e.is_finite())
            && g.iter().flatten().flatten().all(|e| e.is_finite())
            && v.is_finite()
            && w.iter().all(|e| e.is_finite());
        if !finite {
            flag(&mut rep, ViolationKind::NonFinite, x, "non-finite coefficient".into());
            continue;
        }
        let mut asym: f64 = 0.0;
        for i in 0..n {
            for j in 0..i {
                asym = asym.max((a[i][j] - a[j][i]).abs());
            }
        }
        rep.symmetry_defect = rep.symmetry_defect.max(asym);
        if asym > 1e-12 {
            flag(&mut rep, ViolationKind::Symmetry, x, format!("|a_ij - a_ji| = {asym:e}"));
        }
        let (lo, hi) = sym_eigen_range(&a, n);
        rep.min_eigenvalue = rep.min_eigenvalue.min(lo);
        rep.max_eigenvalue = rep.max_eigenvalue.max(hi);
        if lo < c.lambda * (1.0 - REL_SLACK) {
            flag(
                &mut rep,
                ViolationKind::Ellipticity,
                x,
                format!("smallest eigenvalue {lo} < λ = {}", c.lambda),
            );
        }
        if hi > (1.0 + REL_SLACK) / c.lambda {
            flag(
                &mut rep,
                ViolationKind::Boundedness,
                x,
                format!("largest eigenvalue {hi} > 1/λ = {}", 1.0 / c.lambda),
            );
        }
        let mut lip: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let norm = (0..n).map(|k| g[k][i][j].powi(2)).sum::<f64>().sqrt();
                lip = lip.max(norm);
            }
        }
        rep.lipschitz_quotient = rep.lipschitz_quotient.max(lip);
        if lip > c.eta * (1.0 + REL_SLACK) + 1e-12 {
            flag(&mut rep, ViolationKind::Lipschitz, x, format!("|∇a_ij| = {lip} > η = {}", c.eta));
        }
        rep.v_max = rep.v_max.max(v.abs());
        if v.abs() > c.m * (1.0 + REL_SLACK) + 1e-14 {
            flag(&mut rep, ViolationKind::Potential, x, format!("|V| = {} > M = {}", v.abs(), c.m));
        }
        let wn = dot(&w, &w, n).sqrt();
        rep.w_max = rep.w_max.max(wn);
        if wn > c.k * (1.0 + REL_SLACK) + 1e-14 {
            flag(&mut rep, ViolationKind::Drift, x, format!("|W| = {wn} > K = {}", c.k));
        }
    }
    rep.observed_lambda = rep.min_eigenvalue.min(1.0 / rep.max_eigenvalue);
    rep.ellipticity_margin = rep.observed_lambda - c.lambda;
    Ok(rep)
}

fn sym_eigen_range(a: &Mat, n: usize) -> (f64, f64) {
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (a[i][j] + a[j][i]));
    let e = m.symmetric_eigenvalues();
    (e.min(), e.max())
}

/// Sup-norm constants of the variable-coefficient estimates on `B_r(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaConstants {
    pub r: f64,
    pub eta: f64,
    pub samples: usize,
    /// `sup |div(Ax)/μ - n| / (η r)`.
    pub c1: f64,
    /// `sup_{i,k} |δ_ik - ∂_i Z_k| / (η r)`.
    pub c2: f64,
    /// `sup |div Z - n| / (η r)`.
    pub c3: f64,
}

/// Fit the smallest `c1, c2, c3` consistent with the samples in `B_r(0)`.
pub fn check_lemma_a_bounds(
    field: &CoefficientField,
    domain: &BallDomain,
    r: f64,
    samples: usize,
) -> Result<LemmaConstants> {
    field.require_identity_at_origin()?;
    let eta = field.constants().eta;
    if !(eta > 0.0) {
        return Err(Error::Precondition("the Lipschitz constant η must be positive".into()));
    }
    if !(r > 0.0 && r <= domain.radius()) {
        return Err(Error::domain(format!("r = {r} must lie in (0, {}]", domain.radius())));
    }
    let n = field.dim();
    let origin = vec![0.0; n];
    let pts = sample_points(domain, &origin, r, samples)?;
    let nf = n as f64;
    let (mut s1, mut s2, mut s3): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for p in &pts {
        let x = &p[..n];
        if dot(x, x, n) == 0.0 {
            continue;
        }
        let ev = mu_z(field, x)?;
        s1 = s1.max((ev.div_ax / ev.mu - nf).abs());
        for i in 0..n {
            for k in 0..n {
                s2 = s2.max((IDENTITY[i][k] - ev.jac_z[i][k]).abs());
            }
        }
        s3 = s3.max((ev.div_z - nf).abs());
    }
    let scale = eta * r;
    Ok(LemmaConstants {
        r,
        eta,
        samples: pts.len(),
        c1: s1 / scale,
        c2: s2 / scale,
        c3: s3 / scale,
    })
}

/// The change of variables `x ↦ x0 + S x` with `S = A(x0)^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizeTransform {
    pub x0: Vec3,
    pub s: Mat,
    pub s_inv: Mat,
}

impl NormalizeTransform {
    pub fn affine(&self) -> Affine {
        Affine {
            x0: self.x0,
            t: self.s,
            t_inv: self.s_inv,
        }
    }
}

/// Normalize `field` at `x0` so that the new matrix is `I` at the origin.
///
/// Constants transform as `λ → λ²`, `η → λ^{-1/2} η`, `K → λ^{-1/2} K`.
pub fn normalize_at(
    field: &CoefficientField,
    x0: &[f64],
) -> Result<(CoefficientField, NormalizeTransform)> {
    let n = field.dim();
    if x0.len() != n {
        return Err(Error::domain("x0 has the wrong dimension"));
    }
    let a = field.a(x0);
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in 0..i {
            asym = asym.max((a[i][j] - a[j][i]).abs());
        }
    }
    if asym > 1e-10 {
        return Err(Error::Decomposition(format!(
            "A(x0) is not symmetric (defect {asym:e})"
        )));
    }
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (a[i][j] + a[j][i]));
    let eig = m.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::Decomposition(format!(
            "A(x0) is not positive definite (eigenvalues {:?})",
            eig.eigenvalues.as_slice()
        )));
    }
    let q = &eig.eigenvectors;
    let mut s = [[0.0; 3]; 3];
    let mut s_inv = [[0.0; 3]; 3];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let l = eig.eigenvalues[k];
                s[i][j] += q[(i, k)] * l.sqrt() * q[(j, k)];
                s_inv[i][j] += q[(i, k)] * q[(j, k)] / l.sqrt();
            }
        }
    }
    let mut x = [0.0; 3];
    x[..n].copy_from_slice(x0);
    let t = NormalizeTransform { x0: x, s, s_inv };
    let c = field.constants();
    let new_c = Constants {
        lambda: c.lambda * c.lambda,
        eta: c.eta / c.lambda.sqrt(),
        m: c.m,
        k: c.k / c.lambda.sqrt(),
    };
    Ok((field.with_transform(t.affine(), new_c), t))
}

#[cfg(test)]
mod tests {
    use super::super::MatrixFamily;
    use super::*;
    use crate::expr::Expr;
    use std::sync::Arc;

    fn diag_linear(eta: f64) -> CoefficientField {
        CoefficientField::from_family(
            2,
            MatrixFamily::DiagonalLinear { eta },
            None,
            Expr::constant(0.0),
            Constants::new(0.9, eta, 0.0, 0.0).unwrap(),
        )
        .unwrap()
    }

    fn perturbed(eta: f64) -> CoefficientField {
        CoefficientField::from_family(
            2,
            MatrixFamily::LinearPerturbation {
                eta,
                e: vec![vec![1.0, 0.5], vec![0.5, -0.5]],
            },
            None,
            Expr::constant(0.0),
            Constants::new(0.8, eta * 1.2, 0.0, 0.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn identity_mu_z() {
        let f = CoefficientField::laplace(3);
        let e = mu_z(&f, &[0.3, -0.2, 0.5]).unwrap();
        assert_eq!(e.mu, 1.0);
        assert!((e.z[0] - 0.3).abs() < 1e-15 && (e.z[2] - 0.5).abs() < 1e-15);
        for i in 0..3 {
            for k in 0..3 {
                assert!((e.jac_z[i][k] - IDENTITY[i][k]).abs() < 1e-14);
            }
        }
        assert!((e.div_z - 3.0).abs() < 1e-14);
    }

    #[test]
    fn diagonal_linear_on_axis() {
        let f = diag_linear(0.1);
        let t = 0.01;
        let e = mu_z(&f, &[t, 0.0]).unwrap();
        assert!((e.mu - (1.0 + 0.1 * t)).abs() < 1e-15);
        assert!((e.z[0] - t).abs() < 1e-15 && e.z[1].abs() < 1e-15);
    }

    #[test]
    fn z_dot_x_is_x_squared() {
        let f = perturbed(0.2);
        for x in [[0.3, 0.1], [-0.5, 0.4], [0.01, -0.02]] {
            let e = mu_z(&f, &x).unwrap();
            let zx = e.z[0] * x[0] + e.z[1] * x[1];
            assert!((zx - (x[0] * x[0] + x[1] * x[1])).abs() < 1e-15);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let f = perturbed(0.3);
        let x = [0.31, -0.17];
        let e = mu_z(&f, &x).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let (zp, zm) = (mu_z(&f, &xp).unwrap().z, mu_z(&f, &xm).unwrap().z);
            for k in 0..2 {
                let fd = (zp[k] - zm[k]) / (2.0 * h);
                assert!((fd - e.jac_z[i][k]).abs() < 1e-8, "{i}{k}");
            }
        }
    }

    #[test]
    fn origin_handling() {
        let e = mu_z(&perturbed(0.1), &[0.0, 0.0]).unwrap();
        assert_eq!(e.mu, 1.0);
        let c = CoefficientField::from_family(
            2,
            MatrixFamily::Constant {
                matrix: vec![vec![4.0, 0.0], vec![0.0, 1.0]],
            },
            None,
            Expr::constant(0.0),
            Constants::new(0.25, 0.0, 0.0, 0.0).unwrap(),
        )
        .unwrap();
        assert!(matches!(mu_z(&c, &[0.0, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn mu_even_symmetry() {
        let a = |x: &[f64]| {
            let mut m = IDENTITY;
            m[0][0] = 1.0 + 0.2 * x[0] * x[0];
            m[0][1] = 0.1 * x[0] * x[1];
            m[1][0] = m[0][1];
            m
        };
        let f = CoefficientField::custom(
            2,
            Arc::new(a),
            None,
            Arc::new(|_| 0.0),
            Constants::laplace(),
            1e-5,
        )
        .unwrap();
        let x = [0.4, -0.3];
        let (p, m) = (mu_z(&f, &x).unwrap(), mu_z(&f, &[-0.4, 0.3]).unwrap());
        assert!((p.mu - m.mu).abs() < 1e-15);
    }

    #[test]
    fn validate_identity() {
        let dom = BallDomain::centered(2, 1.0, 3).unwrap();
        let rep = validate(&CoefficientField::laplace(2), &dom, 512).unwrap();
        assert!(rep.passed());
        assert_eq!(rep.lipschitz_quotient, 0.0);
        assert_eq!(rep.v_max, 0.0);
        assert_eq!(rep.w_max, 0.0);
        assert_eq!(rep.observed_lambda, 1.0);
    }

    #[test]
    fn validate_diagonal_linear() {
        let dom = BallDomain::centered(2, 1.0, 4).unwrap();
        let rep = validate(&diag_linear(0.1), &dom, 1024).unwrap();
        assert!(rep.passed(), "{:?}", rep.violations);
        assert!((rep.lipschitz_quotient - 0.1).abs() < 1e-14);
        assert!(rep.min_eigenvalue >= 0.9 - 1e-12);
        assert!(rep.min_eigenvalue < 0.91);
        assert_eq!(rep.gradient_mode, GradientMode::Analytic);
    }

    #[test]
    fn validate_flags_asymmetry() {
        let f = CoefficientField::custom(
            2,
            Arc::new(|x: &[f64]| {
                let mut m = IDENTITY;
                if x[0] > 0.5 {
                    m[0][1] = 0.1;
                }
                m
            }),
            None,
            Arc::new(|_| 0.0),
            Constants::new(0.5, 10.0, 0.0, 0.0).unwrap(),
            1e-5,
        )
        .unwrap();
        let dom = BallDomain::centered(2, 1.0, 3).unwrap();
        let rep = validate(&f, &dom, 256).unwrap();
        assert!(rep.violations.iter().any(|v| v.kind == ViolationKind::Symmetry));
        assert!(matches!(rep.gradient_mode, GradientMode::FiniteDifference { .. }));
    }

    #[test]
    fn lemma_constants_identity_rejected_and_perturbed_stable() {
        let dom = BallDomain::centered(2, 1.0, 4).unwrap();
        let id = CoefficientField::laplace(2);
        assert!(matches!(
            check_lemma_a_bounds(&id, &dom, 0.5, 64),
            Err(Error::Precondition(_))
        ));
        let a = check_lemma_a_bounds(&perturbed(0.05), &dom, 0.5, 1024).unwrap();
        let b = check_lemma_a_bounds(&perturbed(0.1), &dom, 0.5, 1024).unwrap();
        for (p, q) in [(a.c1, b.c1), (a.c2, b.c2), (a.c3, b.c3)] {
            assert!(p > 0.0 && p.is_finite());
            assert!((p / q - 1.0).abs() < 0.2, "{p} {q}");
        }
    }

    #[test]
    fn normalize_constant_diagonal() {
        let f = CoefficientField::from_family(
            2,
            MatrixFamily::Constant {
                matrix: vec![vec![4.0, 0.0], vec![0.0, 1.0]],
            },
            None,
            Expr::constant(0.0),
            Constants::new(0.25, 0.0, 0.0, 0.0).unwrap(),
        )
        .unwrap();
        let (g, t) = normalize_at(&f, &[0.0, 0.0]).unwrap();
        assert!((t.s[0][0] - 2.0).abs() < 1e-14 && (t.s[1][1] - 1.0).abs() < 1e-14);
        assert!(t.s[0][1].abs() < 1e-14);
        let a = g.a(&[0.7, -0.2]);
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[i][j] - IDENTITY[i][j]).abs() < 1e-14);
            }
        }
        assert_eq!(g.constants().lambda, 0.0625);
    }

    #[test]
    fn normalize_rejects_indefinite() {
        let f = CoefficientField::from_family(
            2,
            MatrixFamily::Constant {
                matrix: vec![vec![1.0, 0.0], vec![0.0, -1.0]],
            },
            None,
            Expr::constant(0.0),
            Constants::laplace(),
        )
        .unwrap();
        assert!(matches!(normalize_at(&f, &[0.0, 0.0]), Err(Error::Decomposition(_))));
    }

    #[test]
    fn normalize_is_identity_at_origin_and_composes() {
        let f = perturbed(0.3);
        let (g, _) = normalize_at(&f, &[0.5, 0.2]).unwrap();
        assert!(g.origin_defect() < 1e-12);
        let (h, _) = normalize_at(&g, &[0.1, -0.3]).unwrap();
        assert!(h.origin_defect() < 1e-12);
        // The composed map sends 0 to x0 + S x0'.
        let x0 = g.transform().unwrap().apply(&[0.1, -0.3], 2);
        let direct = h.transform().unwrap().x0;
        assert!((x0[0] - direct[0]).abs() < 1e-15 && (x0[1] - direct[1]).abs() < 1e-15);
    }

    #[test]
    fn transformed_gradient_matches_finite_differences() {
        let f = perturbed(0.3);
        let (g, _) = normalize_at(&f, &[0.4, 0.1]).unwrap();
        let x = [0.2, -0.1];
        let ga = g.grad_a(&x);
        let h = 1e-6;
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let (ap, am) = (g.a(&xp), g.a(&xm));
            for i in 0..2 {
                for j in 0..2 {
                    let fd = (ap[i][j] - am[i][j]) / (2.0 * h);
                    assert!((fd - ga[k][i][j]).abs() < 1e-8);
                }
            }
        }
    }
}

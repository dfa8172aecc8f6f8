//! Product quadrature on the unit ball with the weight `(1 - |y|^2)^alpha`
//! absorbed into the radial rule.
//!
//! The radial integral `∫_0^1 ρ^(n-1) (1-ρ²)^α φ(ρ) dρ` is mapped to `t = 2ρ - 1`
//! and integrated with Gauss–Jacobi weight `(1-t)^α (1+t)^(n-1)`; the leftover
//! factor `(1+ρ)^α` is smooth and folded into the node weights. Angles use the
//! equal-weight trapezoidal rule on the circle (n = 2) or Gauss–Legendre in
//! `cos θ` times trapezoid in `φ` (n = 3).

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::{FiniteAboveNegOneF64, GaussJacobi, GaussLegendre};

use crate::error::{Error, Result};

/// Node counts for a refinement level. Each level doubles every count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeCounts {
    pub radial: usize,
    /// Trapezoid nodes on the circle (n = 2) or in azimuth (n = 3).
    pub azimuth: usize,
    /// Gauss–Legendre nodes in `cos θ`; zero for n = 2.
    pub polar: usize,
}

impl NodeCounts {
    pub fn for_level(dim: usize, levels: u32) -> Self {
        let base = 1usize << levels;
        match dim {
            2 => NodeCounts {
                radial: base,
                azimuth: 2 * base,
                polar: 0,
            },
            _ => NodeCounts {
                radial: base,
                azimuth: base,
                polar: (base / 2).max(1),
            },
        }
    }
}

/// Nodes and weights on the unit ball for `∫_{B_1} g(y) (1 - |y|²)^α dy`.
#[derive(Debug, Clone)]
pub struct BallRule {
    dim: usize,
    alpha: f64,
    counts: NodeCounts,
    /// Unit-ball nodes, `dim` coordinates per node.
    points: Vec<f64>,
    /// `1 - |y|²` per node.
    one_minus_rho2: Vec<f64>,
    weights: Vec<f64>,
}

impl BallRule {
    pub fn new(dim: usize, alpha: f64, levels: u32) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::domain(format!("dimension must be 2 or 3, got {dim}")));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::domain(format!("weight exponent must be >= 0, got {alpha}")));
        }
        if levels == 0 || levels > 12 {
            return Err(Error::domain(format!("levels must lie in 1..=12, got {levels}")));
        }
        let counts = NodeCounts::for_level(dim, levels);

        let jacobi = GaussJacobi::new(
            NonZeroUsize::new(counts.radial).expect("radial count is positive"),
            FiniteAboveNegOneF64::new(alpha).expect("alpha validated above"),
            FiniteAboveNegOneF64::new((dim - 1) as f64).expect("dim - 1 is finite"),
        );
        let jacobian = 2f64.powf(-((dim - 1) as f64) - alpha - 1.0);
        let radial: Vec<(f64, f64)> = jacobi
            .iter()
            .map(|&(t, w)| {
                let rho = 0.5 * (1.0 + t);
                (rho, w * jacobian * (1.0 + rho).powf(alpha))
            })
            .collect();

        let directions = unit_directions(dim, counts);
        let total = radial.len() * directions.len();
        let mut points = Vec::with_capacity(total * dim);
        let mut one_minus_rho2 = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        for &(rho, wr) in &radial {
            for (dir, wa) in &directions {
                points.extend(dir.iter().map(|c| rho * c));
                one_minus_rho2.push((1.0 - rho) * (1.0 + rho));
                weights.push(wr * wa);
            }
        }
        Ok(BallRule {
            dim,
            alpha,
            counts,
            points,
            one_minus_rho2,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn counts(&self) -> NodeCounts {
        self.counts
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Largest total degree `d` such that every polynomial of degree `<= d`
    /// is integrated exactly, valid when `alpha` is an integer.
    pub fn exactness_degree(&self) -> usize {
        let radial = 2 * self.counts.radial - 1;
        let radial = radial.saturating_sub(self.alpha.ceil() as usize);
        match self.dim {
            2 => radial.min(self.counts.azimuth - 1),
            _ => radial
                .min(2 * self.counts.polar - 1)
                .min(self.counts.azimuth - 1),
        }
    }

    /// Visit every node of the rule mapped onto `B_r(center)`.
    ///
    /// The callback receives the physical point `x`, the weight value
    /// `ω_r(x) = r² - |x - center|²`, and a quadrature weight `w` such that
    /// `Σ w g(x) ≈ ∫_{B_r} g ω_r^α dx`. Extra powers of `ω_r` are applied by
    /// the caller.
    pub fn visit<F>(&self, center: &[f64], r: f64, mut f: F) -> Result<()>
    where
        F: FnMut(&[f64], f64, f64) -> Result<()>,
    {
        debug_assert_eq!(center.len(), self.dim);
        let n = self.dim;
        let scale = r.powf(n as f64 + 2.0 * self.alpha);
        let r2 = r * r;
        let mut x = [0.0; 3];
        for (k, (&w, &q)) in self.weights.iter().zip(&self.one_minus_rho2).enumerate() {
            let y = &self.points[k * n..(k + 1) * n];
            for i in 0..n {
                x[i] = center[i] + r * y[i];
            }
            f(&x[..n], r2 * q, w * scale)?;
        }
        Ok(())
    }

    /// `∫_{B_r(center)} g(x) ω_r(x)^α dx`, rejecting non-finite samples.
    pub fn integrate<G>(&self, center: &[f64], r: f64, g: G) -> Result<f64>
    where
        G: Fn(&[f64]) -> f64,
    {
        let mut acc = 0.0;
        self.visit(center, r, |x, _, w| {
            let v = g(x);
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    point: x.to_vec(),
                    value: v,
                });
            }
            acc += w * v;
            Ok(())
        })?;
        Ok(acc)
    }
}

fn unit_directions(dim: usize, counts: NodeCounts) -> Vec<(Vec<f64>, f64)> {
    let m = counts.azimuth;
    let dphi = 2.0 * PI / m as f64;
    match dim {
        2 => (0..m)
            .map(|j| {
                let phi = j as f64 * dphi;
                (vec![phi.cos(), phi.sin()], dphi)
            })
            .collect(),
        _ => {
            let legendre = GaussLegendre::new(
                NonZeroUsize::new(counts.polar).expect("polar count is positive"),
            );
            let mut dirs = Vec::with_capacity(counts.polar * m);
            for &(z, wz) in legendre.iter() {
                let s = (1.0 - z * z).max(0.0).sqrt();
                for j in 0..m {
                    let phi = j as f64 * dphi;
                    dirs.push((vec![s * phi.cos(), s * phi.sin(), z], wz * dphi));
                }
            }
            dirs
        }
    }
}

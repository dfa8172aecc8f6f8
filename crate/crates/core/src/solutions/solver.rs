//! Shortley–Weller finite differences on a Cartesian grid clipped to a ball.
//!
//! The operator is discretized in non-divergence form
//! `-a_ij ∂_ij u + (W_j - Σ_i ∂_i a_ij) ∂_j u + V u`. Arms that leave the
//! ball are shortened to the sphere, where the Dirichlet datum is imposed.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use log::debug;
use serde::{Deserialize, Serialize};

use super::SolutionField;
use crate::error::{Error, Result};
use crate::fields::{CoefficientField, Vec3};
use crate::quad::BallDomain;

/// Largest system the direct solver is asked to factor.
pub const MAX_UNKNOWNS: usize = 400_000;

/// Diagnostics of one solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub h: f64,
    pub unknowns: usize,
    /// `‖A u - b‖∞` of the discrete system after the solve.
    pub residual_inf: f64,
    /// Mixed-derivative stencils that fell back to a one-sided quadrant.
    pub mixed_one_sided: usize,
    /// Mixed-derivative stencils dropped for lack of interior corners.
    pub mixed_dropped: usize,
}

/// Nodal values and gradients of a discrete solution. Exterior nodes are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSolution {
    pub(crate) dim: usize,
    pub(crate) h: f64,
    pub(crate) lo: Vec3,
    pub(crate) counts: [usize; 3],
    pub(crate) center: Vec3,
    pub(crate) radius: f64,
    pub(crate) values: Vec<f64>,
    pub(crate) grads: Vec<Vec3>,
    pub(crate) stats: SolverStats,
}

impl GridSolution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts[..self.dim]
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Physical coordinates of node `k` (row-major, last index fastest).
    pub fn node(&self, k: usize) -> Vec3 {
        let idx = self.unflatten(k);
        let mut x = [0.0; 3];
        for d in 0..self.dim {
            x[d] = self.lo[d] + self.h * idx[d] as f64;
        }
        x
    }

    fn flatten(&self, idx: [usize; 3]) -> usize {
        let mut k = 0;
        for d in 0..self.dim {
            k = k * self.counts[d] + idx[d];
        }
        k
    }

    fn unflatten(&self, mut k: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        for d in (0..self.dim).rev() {
            idx[d] = k % self.counts[d];
            k /= self.counts[d];
        }
        idx
    }

    /// Multilinear interpolation of `u` and `∇u`; cells with exterior
    /// corners fall back to a first-order Taylor step from the nearest
    /// interior node.
    pub fn eval(&self, y: &[f64]) -> (f64, Vec3) {
        let n = self.dim;
        let mut base = [0usize; 3];
        let mut t = [0.0; 3];
        for d in 0..n {
            let s = (y[d] - self.lo[d]) / self.h;
            let b = (s.floor().max(0.0) as usize).min(self.counts[d] - 2);
            base[d] = b;
            t[d] = s - b as f64;
        }
        let mut u = 0.0;
        let mut g = [0.0; 3];
        let mut complete = true;
        for corner in 0..(1usize << n) {
            let mut idx = base;
            let mut w = 1.0;
            for d in 0..n {
                if corner >> d & 1 == 1 {
                    idx[d] += 1;
                    w *= t[d];
                } else {
                    w *= 1.0 - t[d];
                }
            }
            let k = self.flatten(idx);
            let v = self.values[k];
            if !v.is_finite() {
                complete = false;
                break;
            }
            u += w * v;
            for d in 0..n {
                g[d] += w * self.grads[k][d];
            }
        }
        if complete {
            return (u, g);
        }
        let mut best: Option<(f64, usize)> = None;
        let window = |b: usize, c: usize| b.saturating_sub(1)..(b + 3).min(c);
        let mut visit = |idx: [usize; 3]| {
            let k = self.flatten(idx);
            if self.values[k].is_finite() {
                let x = self.node(k);
                let dist: f64 = (0..n).map(|d| (x[d] - y[d]).powi(2)).sum();
                if best.is_none_or(|(bd, _)| dist < bd) {
                    best = Some((dist, k));
                }
            }
        };
        for i0 in window(base[0], self.counts[0]) {
            for i1 in window(base[1], self.counts[1]) {
                if n == 2 {
                    visit([i0, i1, 0]);
                } else {
                    for i2 in window(base[2], self.counts[2]) {
                        visit([i0, i1, i2]);
                    }
                }
            }
        }
        match best {
            None => (f64::NAN, [f64::NAN; 3]),
            Some((_, k)) => {
                let x = self.node(k);
                let g = self.grads[k];
                let du: f64 = (0..n).map(|d| g[d] * (y[d] - x[d])).sum();
                (self.values[k] + du, g)
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Target {
    Unknown(usize),
    Known(f64),
}

#[derive(Clone, Copy)]
struct Arm {
    dist: f64,
    target: Target,
}

/// Solve `-div(A∇u) + W·∇u + Vu = 0` in the domain ball with `u = g` on
/// the sphere. `g` is evaluated only at points of the sphere.
pub fn solve_dirichlet<G>(
    field: &CoefficientField,
    domain: &BallDomain,
    g: G,
    h: f64,
) -> Result<SolutionField>
where
    G: Fn(&[f64]) -> f64,
{
    let n = domain.dim();
    if field.dim() != n {
        return Err(Error::domain("field and domain dimensions differ"));
    }
    let big_r = domain.radius();
    if !(h.is_finite() && h > 0.0 && h <= 0.5 * big_r) {
        return Err(Error::config("h", format!("mesh size must lie in (0, R/2], got {h}")));
    }
    let m = (big_r / h).ceil() as usize;
    let side = 2 * m + 1;
    let mut counts = [1usize; 3];
    let mut lo = [0.0; 3];
    let mut center = [0.0; 3];
    for d in 0..n {
        counts[d] = side;
        center[d] = domain.center()[d];
        lo[d] = center[d] - m as f64 * h;
    }
    let total: usize = counts[..n].iter().product();
    let mut grid = GridSolution {
        dim: n,
        h,
        lo,
        counts,
        center,
        radius: big_r,
        values: vec![f64::NAN; total],
        grads: vec![[f64::NAN; 3]; total],
        stats: SolverStats {
            h,
            unknowns: 0,
            residual_inf: 0.0,
            mixed_one_sided: 0,
            mixed_dropped: 0,
        },
    };

    let margin = 1e-6 * h;
    let mut unknown_of = vec![usize::MAX; total];
    let mut nodes = Vec::new();
    for k in 0..total {
        let x = grid.node(k);
        let r2: f64 = (0..n).map(|d| (x[d] - center[d]).powi(2)).sum();
        if r2.sqrt() < big_r - margin {
            unknown_of[k] = nodes.len();
            nodes.push(k);
        }
    }
    let nu = nodes.len();
    if nu > MAX_UNKNOWNS {
        return Err(Error::config(
            "h",
            format!("{nu} unknowns exceed the direct-solver limit {MAX_UNKNOWNS}"),
        ));
    }
    if nu == 0 {
        return Err(Error::config("h", "mesh has no interior nodes"));
    }

    let arms_of = |k: usize| -> [[Arm; 2]; 3] {
        let idx = grid.unflatten(k);
        let x = grid.node(k);
        let r2: f64 = (0..n).map(|d| (x[d] - center[d]).powi(2)).sum();
        let mut arms = [[Arm {
            dist: h,
            target: Target::Known(0.0),
        }; 2]; 3];
        for d in 0..n {
            for (side_ix, s) in [1isize, -1].into_iter().enumerate() {
                let j = idx[d] as isize + s;
                let mut nb = idx;
                nb[d] = j as usize;
                let interior = j >= 0
                    && (j as usize) < counts[d]
                    && unknown_of[grid.flatten(nb)] != usize::MAX;
                arms[d][side_ix] = if interior {
                    Arm {
                        dist: h,
                        target: Target::Unknown(unknown_of[grid.flatten(nb)]),
                    }
                } else {
                    let di = x[d] - center[d];
                    let disc = (big_r * big_r - r2 + di * di).max(0.0).sqrt();
                    let dist = if s > 0 { disc - di } else { disc + di };
                    let mut p = x;
                    p[d] += s as f64 * dist;
                    Arm {
                        dist,
                        target: Target::Known(g(&p[..n])),
                    }
                };
            }
        }
        arms
    };

    let mut triplets: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(nu * (3 * n + 1));
    let mut rhs = vec![0.0; nu];
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(nu);
    let mut node_arms = Vec::with_capacity(nu);
    let (mut one_sided, mut dropped) = (0usize, 0usize);
    for (row, &k) in nodes.iter().enumerate() {
        let x = grid.node(k);
        let xs = &x[..n];
        let a = field.a(xs);
        let b = field.div_rows(xs);
        let w = field.w(xs);
        let v = field.v(xs);
        let arms = arms_of(k);
        let mut entries: Vec<(usize, f64)> = vec![(row, v)];
        let add = |t: Target, c: f64, entries: &mut Vec<(usize, f64)>, rhs: &mut f64| match t {
            Target::Unknown(j) => entries.push((j, c)),
            Target::Known(val) => *rhs -= c * val,
        };
        let mut b_row = 0.0;
        for d in 0..n {
            let (p, q) = (arms[d][0], arms[d][1]);
            let (hp, hm) = (p.dist, q.dist);
            let sum = hp + hm;
            // -a_dd ∂_dd u
            let c2p = 2.0 / (hp * sum);
            let c2m = 2.0 / (hm * sum);
            let c20 = -2.0 / (hp * hm);
            // (W_d - b_d) ∂_d u
            let cd = w[d] - b[d];
            let c1p = hm / (hp * sum);
            let c1m = -hp / (hm * sum);
            let c10 = (hp - hm) / (hp * hm);
            entries.push((row, -a[d][d] * c20 + cd * c10));
            add(p.target, -a[d][d] * c2p + cd * c1p, &mut entries, &mut b_row);
            add(q.target, -a[d][d] * c2m + cd * c1m, &mut entries, &mut b_row);
        }
        let idx = grid.unflatten(k);
        for i in 0..n {
            for j in (i + 1)..n {
                let aij = 0.5 * (a[i][j] + a[j][i]);
                if aij.abs() < 1e-15 {
                    continue;
                }
                // -2 a_ij ∂_ij u
                let coef = -2.0 * aij;
                let corner = |si: isize, sj: isize| -> Option<usize> {
                    let (ci, cj) = (idx[i] as isize + si, idx[j] as isize + sj);
                    if ci < 0 || cj < 0 || ci as usize >= counts[i] || cj as usize >= counts[j] {
                        return None;
                    }
                    let mut c = idx;
                    c[i] = ci as usize;
                    c[j] = cj as usize;
                    let u = unknown_of[grid.flatten(c)];
                    (u != usize::MAX).then_some(u)
                };
                let four = [(1, 1), (1, -1), (-1, 1), (-1, -1)].map(|(si, sj)| corner(si, sj));
                if four.iter().all(Option::is_some) {
                    for ((si, sj), u) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
                        .into_iter()
                        .zip(four)
                    {
                        entries.push((u.unwrap(), coef * si * sj / (4.0 * h * h)));
                    }
                    continue;
                }
                let mut done = false;
                for (si, sj) in [(1isize, 1isize), (1, -1), (-1, 1), (-1, -1)] {
                    if let (Some(ud), Some(ui), Some(uj)) =
                        (corner(si, sj), corner(si, 0), corner(0, sj))
                    {
                        let c = coef * (si * sj) as f64 / (h * h);
                        entries.push((ud, c));
                        entries.push((ui, -c));
                        entries.push((uj, -c));
                        entries.push((row, c));
                        one_sided += 1;
                        done = true;
                        break;
                    }
                }
                if !done {
                    dropped += 1;
                }
            }
        }
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (c, val) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == c => last.1 += val,
                _ => merged.push((c, val)),
            }
        }
        for &(c, val) in &merged {
            triplets.push(Triplet::new(row, c, val));
        }
        rhs[row] = b_row;
        rows.push(merged);
        node_arms.push(arms);
    }

    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(nu, nu, &triplets)
        .map_err(|e| Error::Solver(format!("assembly failed: {e:?}")))?;
    let lu = mat
        .sp_lu()
        .map_err(|e| Error::Solver(format!("sparse LU failed on {nu} unknowns: {e:?}")))?;
    let b = Mat::<f64>::from_fn(nu, 1, |i, _| rhs[i]);
    let sol = lu.solve(&b);
    let u: Vec<f64> = (0..nu).map(|i| sol[(i, 0)]).collect();
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver(format!(
            "solution has non-finite entries ({nu} unknowns, h = {h})"
        )));
    }
    let residual_inf = rows
        .iter()
        .zip(&rhs)
        .map(|(row, &bi)| (row.iter().map(|&(c, v)| v * u[c]).sum::<f64>() - bi).abs())
        .fold(0.0, f64::max);

    for (row, &k) in nodes.iter().enumerate() {
        grid.values[k] = u[row];
        let arms = &node_arms[row];
        let mut gk = [0.0; 3];
        for d in 0..n {
            let val = |a: &Arm| match a.target {
                Target::Unknown(j) => u[j],
                Target::Known(v) => v,
            };
            let (p, q) = (arms[d][0], arms[d][1]);
            let (hp, hm) = (p.dist, q.dist);
            gk[d] = (hm * hm * (val(&p) - u[row]) + hp * hp * (u[row] - val(&q)))
                / (hp * hm * (hp + hm));
        }
        grid.grads[k] = gk;
    }
    grid.stats = SolverStats {
        h,
        unknowns: nu,
        residual_inf,
        mixed_one_sided: one_sided,
        mixed_dropped: dropped,
    };
    debug!("solved {nu} unknowns at h = {h}: residual {residual_inf:e}");
    Ok(SolutionField::from_grid(grid, field.clone(), residual_inf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solutions::HarmonicVariant;

    fn disc() -> BallDomain {
        BallDomain::centered(2, 1.0, 4).unwrap()
    }

    fn nodal_error(sol: &SolutionField, exact: &SolutionField) -> f64 {
        let g = sol.grid().unwrap();
        (0..g.values.len())
            .filter(|&k| g.values[k].is_finite())
            .map(|k| (g.values[k] - exact.value(&g.node(k)[..2])).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn linear_datum_is_reproduced() {
        let exact = SolutionField::harmonic_polynomial(2, 1, HarmonicVariant::Re).unwrap();
        let sol = solve_dirichlet(&CoefficientField::laplace(2), &disc(), |x| x[0], 0.1).unwrap();
        assert!(nodal_error(&sol, &exact) < 1e-12);
        let (u, g) = sol.eval(&[0.33, -0.41]);
        assert!((u - 0.33).abs() < 1e-12 && (g[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_datum_gives_zero() {
        let sol = solve_dirichlet(&CoefficientField::laplace(2), &disc(), |_| 0.0, 0.1).unwrap();
        let g = sol.grid().unwrap();
        assert!(g.values.iter().filter(|v| v.is_finite()).all(|v| *v == 0.0));
    }

    #[test]
    fn exponential_converges_at_second_order() {
        let exact = SolutionField::exponential(2, 1.0).unwrap();
        let field = exact.field().clone();
        let errs: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&h| {
                let sol = solve_dirichlet(&field, &disc(), |x| x[0].exp(), h).unwrap();
                nodal_error(&sol, &exact)
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.8, "{errs:?}");
        }
    }

    #[test]
    fn rejects_bad_mesh() {
        let f = CoefficientField::laplace(2);
        assert!(solve_dirichlet(&f, &disc(), |_| 0.0, 0.0).is_err());
        assert!(solve_dirichlet(&f, &disc(), |_| 0.0, 0.9).is_err());
    }

    #[test]
    fn three_dimensional_linear_datum() {
        let dom = BallDomain::centered(3, 1.0, 3).unwrap();
        let sol =
            solve_dirichlet(&CoefficientField::laplace(3), &dom, |x| x[0] + 2.0 * x[2], 0.2)
                .unwrap();
        let (u, _) = sol.eval(&[0.1, 0.2, 0.3]);
        assert!((u - 0.7).abs() < 1e-10);
    }
}

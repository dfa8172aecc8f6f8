//! Radial grids and finite-difference differentiation in the radius.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-radius samples of a scalar function of `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    radii: Vec<f64>,
    values: Vec<f64>,
}

impl RadialGrid {
    pub fn new(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.len() != values.len() {
            return Err(Error::domain(format!(
                "radial grid has {} radii but {} values",
                radii.len(),
                values.len()
            )));
        }
        if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::domain("radii must be positive and finite"));
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("radii must be strictly increasing"));
        }
        Ok(RadialGrid { radii, values })
    }

    pub fn from_fn<F: FnMut(f64) -> f64>(radii: Vec<f64>, mut f: F) -> Result<Self> {
        let values = radii.iter().map(|&r| f(r)).collect();
        Self::new(radii, values)
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }
}

/// Equally spaced radii on `[lo, hi]`.
pub fn uniform_radii(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|i| lo + step * i as f64).collect()
}

/// Radii with equal logarithmic steps on `[lo, hi]`.
pub fn geometric_radii(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (points - 1) as f64;
    (0..points)
        .map(|i| {
            if i == points - 1 {
                hi
            } else {
                (a + step * i as f64).exp()
            }
        })
        .collect()
}

const STENCIL: usize = 5;

/// Estimate `F'(r)` from grid samples.
///
/// Uses Fornberg weights on the five grid points nearest to `r` (centered
/// where the grid allows), which is fourth-order accurate for smooth `F` and
/// reduces to the classical central stencil on uniform grids.
pub fn radial_derivative(grid: &RadialGrid, r: f64) -> Result<f64> {
    let radii = grid.radii();
    if radii.len() < STENCIL {
        return Err(Error::domain(format!(
            "grid has {} points; the stencil needs {STENCIL}",
            radii.len()
        )));
    }
    let (lo, hi) = (radii[0], radii[radii.len() - 1]);
    if !(r >= lo && r <= hi) {
        return Err(Error::domain(format!("r = {r} lies outside the grid [{lo}, {hi}]")));
    }
    let nearest = match radii.binary_search_by(|p| p.total_cmp(&r)) {
        Ok(i) => i,
        Err(i) => {
            if i == 0 {
                0
            } else if i == radii.len() || (r - radii[i - 1]) <= (radii[i] - r) {
                i - 1
            } else {
                i
            }
        }
    };
    let start = nearest.saturating_sub(STENCIL / 2).min(radii.len() - STENCIL);
    let nodes = &radii[start..start + STENCIL];
    let weights = fornberg_first_derivative(r, nodes);
    Ok(weights
        .iter()
        .zip(&grid.values()[start..start + STENCIL])
        .map(|(w, v)| w * v)
        .sum())
}

/// First-derivative weights at `z` for the given nodes (Fornberg 1988).
fn fornberg_first_derivative(z: f64, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    // c[j][k]: weight of node j for derivative order k (k = 0, 1).
    let mut c = vec![[0.0f64; 2]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|w| w[1]).collect()
}

/// A derivative estimate with the step that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StencilDerivative {
    pub value: f64,
    pub step: f64,
    /// Richardson estimate of the stencil truncation error.
    pub error_estimate: f64,
}

/// Differentiate a function of `r` at `r` with a local five-point stencil.
///
/// The step starts at `1e-2 r` (clipped to stay inside `[r_lo, r_hi]`) and is
/// halved while the Richardson estimate `|D(h) - D(h/2)| / 15` keeps
/// shrinking, so that truncation error sits well below quadrature error.
pub fn local_derivative<F>(mut f: F, r: f64, r_lo: f64, r_hi: f64) -> Result<StencilDerivative>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(r > r_lo && r < r_hi) {
        return Err(Error::domain(format!(
            "r = {r} must lie strictly inside ({r_lo}, {r_hi})"
        )));
    }
    let mut h = (1e-2 * r).min(0.49 * (r - r_lo)).min(0.49 * (r_hi - r));
    let mut stencil = |h: f64| -> Result<f64> {
        let radii: Vec<f64> = (-2..=2).map(|k| r + k as f64 * h).collect();
        let grid = RadialGrid::new(radii.clone(), radii.iter().map(|&s| f(s)).collect::<Result<_>>()?)?;
        radial_derivative(&grid, r)
    };
    let coarse = stencil(h)?;
    h *= 0.5;
    let mut fine = stencil(h)?;
    let mut err = (coarse - fine).abs() / 15.0;
    for _ in 0..3 {
        let next = stencil(0.5 * h)?;
        let next_err = (fine - next).abs() / 15.0;
        if next_err >= err {
            break;
        }
        fine = next;
        err = next_err;
        h *= 0.5;
    }
    Ok(StencilDerivative {
        value: fine,
        step: h,
        error_estimate: err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_on_uniform_grid() {
        let grid = RadialGrid::from_fn(uniform_radii(0.1, 0.9, 17), |r| r * r).unwrap();
        assert!((radial_derivative(&grid, 0.5).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_has_zero_derivative() {
        let grid = RadialGrid::from_fn(geometric_radii(0.1, 0.9, 16), |_| 3.5).unwrap();
        for &r in grid.radii() {
            assert!(radial_derivative(&grid, r).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn ball_weight_integral_at_unit_radius() {
        // F(r) = π r^6 / 3 (f ≡ 1, n = 2, α = 2); F'(1) = 2π.
        let f = |r: f64| std::f64::consts::PI * r.powi(6) / 3.0;
        let grid = RadialGrid::from_fn(uniform_radii(0.96, 1.04, 9), f).unwrap();
        let d = radial_derivative(&grid, 1.0).unwrap();
        assert!((d - 2.0 * std::f64::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn outside_grid_is_domain_error() {
        let grid = RadialGrid::from_fn(uniform_radii(0.1, 0.9, 9), |r| r).unwrap();
        assert!(matches!(radial_derivative(&grid, 0.95), Err(Error::Domain(_))));
        assert!(matches!(radial_derivative(&grid, 0.05), Err(Error::Domain(_))));
    }

    #[test]
    fn short_grid_rejected() {
        let grid = RadialGrid::from_fn(uniform_radii(0.1, 0.9, 4), |r| r).unwrap();
        assert!(radial_derivative(&grid, 0.5).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(RadialGrid::new(vec![0.1, 0.1], vec![1.0, 2.0]).is_err());
        assert!(RadialGrid::new(vec![0.1, 0.2], vec![1.0]).is_err());
    }

    #[test]
    fn one_sided_near_edges_is_fourth_order() {
        let grid = RadialGrid::from_fn(uniform_radii(0.5, 1.0, 21), |r| r.powi(4)).unwrap();
        let d = radial_derivative(&grid, 0.5).unwrap();
        assert!((d - 4.0 * 0.125).abs() < 1e-12);
    }

    #[test]
    fn local_derivative_of_power() {
        let d = local_derivative(|r| Ok(r.powi(10)), 0.7, 0.0, 1.0).unwrap();
        assert!((d.value - 10.0 * 0.7f64.powi(9)).abs() < 1e-9);
    }
}

//! Deterministic point sets for sup-norm estimates.

use crate::error::Result;
use crate::quad::{BallDomain, BallRule};

pub const DEFAULT_SAMPLES: usize = 4096;

const PRIMES: [u64; 3] = [2, 3, 5];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    out
}

/// `count` Halton points in the closed ball `B_radius(center)` (cube rejection).
pub fn halton_ball(center: &[f64], radius: f64, count: usize) -> Vec<[f64; 3]> {
    let n = center.len();
    let mut out = Vec::with_capacity(count);
    let mut i = 1u64;
    while out.len() < count {
        let mut y = [0.0; 3];
        for (d, yd) in y.iter_mut().enumerate().take(n) {
            *yd = 2.0 * radical_inverse(i, PRIMES[d]) - 1.0;
        }
        i += 1;
        if y.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
            let mut x = [0.0; 3];
            for d in 0..n {
                x[d] = center[d] + radius * y[d];
            }
            out.push(x);
        }
    }
    out
}

/// Halton points plus the domain's quadrature nodes on `B_radius(center)`.
pub fn sample_points(
    domain: &BallDomain,
    center: &[f64],
    radius: f64,
    count: usize,
) -> Result<Vec<[f64; 3]>> {
    let mut pts = halton_ball(center, radius, count);
    let rule = BallRule::new(domain.dim(), 0.0, domain.levels().min(6))?;
    rule.visit(center, radius, |x, _, _| {
        let mut p = [0.0; 3];
        p[..x.len()].copy_from_slice(x);
        pts.push(p);
        Ok(())
    })?;
    Ok(pts)
}

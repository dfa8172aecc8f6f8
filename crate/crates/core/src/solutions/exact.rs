//! Closed-form solutions and their independent Laplacians.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::Vec3;

/// Which harmonic of degree `d` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HarmonicVariant {
    /// `Re (x1 + i x2)^d`.
    Re,
    /// `Im (x1 + i x2)^d`.
    Im,
    /// `r^d P_d(x3/r)` up to normalization, `n = 3` and `d <= 3`.
    Zonal,
}

pub const MAX_HARMONIC_DEGREE: u32 = 12;

pub(crate) fn check_harmonic(dim: usize, degree: u32, variant: HarmonicVariant) -> Result<()> {
    if dim != 2 && dim != 3 {
        return Err(Error::domain(format!("dimension must be 2 or 3, got {dim}")));
    }
    if degree > MAX_HARMONIC_DEGREE {
        return Err(Error::domain(format!(
            "harmonic degree {degree} exceeds {MAX_HARMONIC_DEGREE}"
        )));
    }
    match variant {
        HarmonicVariant::Im if degree == 0 => {
            Err(Error::domain("Im (x1 + i x2)^0 vanishes identically"))
        }
        HarmonicVariant::Zonal if dim != 3 || degree > 3 => Err(Error::domain(format!(
            "zonal harmonics need n = 3 and d <= 3, got n = {dim}, d = {degree}"
        ))),
        _ => Ok(()),
    }
}

/// `(x1 + i x2)^k` for `k = d` and `k = d - 1`.
fn complex_powers(x1: f64, x2: f64, d: u32) -> ((f64, f64), (f64, f64)) {
    let mut prev = (0.0, 0.0);
    let mut cur = (1.0, 0.0);
    for _ in 0..d {
        prev = cur;
        cur = (cur.0 * x1 - cur.1 * x2, cur.0 * x2 + cur.1 * x1);
    }
    (cur, prev)
}

/// Value and gradient of the harmonic polynomial.
pub(crate) fn harmonic(x: &[f64], degree: u32, variant: HarmonicVariant) -> (f64, Vec3) {
    let mut g = [0.0; 3];
    match variant {
        HarmonicVariant::Re | HarmonicVariant::Im => {
            let ((re, im), (pre, pim)) = complex_powers(x[0], x[1], degree);
            let d = degree as f64;
            let (dre, dim) = (d * pre, d * pim);
            if variant == HarmonicVariant::Re {
                g[0] = dre;
                g[1] = -dim;
                (re, g)
            } else {
                g[0] = dim;
                g[1] = dre;
                (im, g)
            }
        }
        HarmonicVariant::Zonal => {
            let (x1, x2, x3) = (x[0], x[1], x[2]);
            let rho2 = x1 * x1 + x2 * x2;
            match degree {
                0 => (1.0, g),
                1 => {
                    g[2] = 1.0;
                    (x3, g)
                }
                2 => {
                    g[0] = -x1;
                    g[1] = -x2;
                    g[2] = 2.0 * x3;
                    (x3 * x3 - 0.5 * rho2, g)
                }
                _ => {
                    g[0] = -3.0 * x3 * x1;
                    g[1] = -3.0 * x3 * x2;
                    g[2] = 3.0 * x3 * x3 - 1.5 * rho2;
                    (x3 * x3 * x3 - 1.5 * x3 * rho2, g)
                }
            }
        }
    }
}

/// Laplacian of the harmonic polynomial by explicit second derivatives.
pub(crate) fn harmonic_laplacian(x: &[f64], degree: u32, variant: HarmonicVariant) -> f64 {
    match variant {
        HarmonicVariant::Re | HarmonicVariant::Im => {
            if degree < 2 {
                return 0.0;
            }
            // ∂11 = Re/Im of d(d-1) z^(d-2); ∂22 = its negative.
            let ((_, _), (pre, pim)) = complex_powers(x[0], x[1], degree - 1);
            let c = (degree * (degree - 1)) as f64;
            let d11 = if variant == HarmonicVariant::Re { c * pre } else { c * pim };
            let d22 = -d11;
            d11 + d22
        }
        HarmonicVariant::Zonal => match degree {
            2 => -1.0 - 1.0 + 2.0,
            3 => -3.0 * x[2] - 3.0 * x[2] + 6.0 * x[2],
            _ => 0.0,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_expansion() {
        let x = [0.7, -0.4];
        let (u, g) = harmonic(&x, 3, HarmonicVariant::Re);
        let expect = x[0].powi(3) - 3.0 * x[0] * x[1] * x[1];
        assert!((u - expect).abs() < 1e-15);
        assert!((g[0] - (3.0 * x[0] * x[0] - 3.0 * x[1] * x[1])).abs() < 1e-15);
        assert!((g[1] - (-6.0 * x[0] * x[1])).abs() < 1e-15);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let cases = [
            (2, 4, HarmonicVariant::Re),
            (2, 5, HarmonicVariant::Im),
            (3, 2, HarmonicVariant::Zonal),
            (3, 3, HarmonicVariant::Zonal),
        ];
        let x = [0.3, -0.2, 0.5];
        for (n, d, v) in cases {
            let (_, g) = harmonic(&x, d, v);
            for i in 0..n {
                let (mut p, mut m) = (x, x);
                p[i] += 1e-6;
                m[i] -= 1e-6;
                let fd = (harmonic(&p, d, v).0 - harmonic(&m, d, v).0) / 2e-6;
                assert!((fd - g[i]).abs() < 1e-8, "{d} {v:?} {i}");
            }
        }
    }

    #[test]
    fn degree_checks() {
        assert!(check_harmonic(2, 0, HarmonicVariant::Im).is_err());
        assert!(check_harmonic(2, 2, HarmonicVariant::Zonal).is_err());
        assert!(check_harmonic(3, 4, HarmonicVariant::Zonal).is_err());
        assert!(check_harmonic(4, 1, HarmonicVariant::Re).is_err());
        assert!(check_harmonic(3, 3, HarmonicVariant::Re).is_ok());
    }
}

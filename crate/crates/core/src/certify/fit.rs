//! Smallest `c₀` making `Ñ` monotone over a set of (field, solution) pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::CoefficientField;
use crate::frequency::{variable_bundle, verify_monotonicity, FrequencyBundle};
use crate::quad::BallDomain;
use crate::solutions::SolutionField;

/// Largest `c₀` tried before giving up.
pub const C0_CAP: f64 = 1e3;

const REL_PRECISION: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C0Fit {
    pub c0: f64,
    pub pairs: usize,
    /// Bisection evaluations of the whole set.
    pub evaluations: usize,
    /// Worst `Ñ` drop per pair at the fitted value.
    pub worst_violation: Vec<f64>,
}

/// Bisection to 1% relative precision; `fit_c0` fails when even `C0_CAP` is
/// not enough.
pub fn fit_c0(
    pairs: &[(&CoefficientField, &SolutionField)],
    domain: &BallDomain,
    alpha: f64,
    radii: &[f64],
) -> Result<C0Fit> {
    if pairs.is_empty() {
        return Err(Error::Precondition("fit_c0 needs at least one pair".into()));
    }
    let bundles = pairs
        .iter()
        .map(|(f, s)| variable_bundle(s, f, domain, alpha, radii, 0.0))
        .collect::<Result<Vec<FrequencyBundle>>>()?;
    let mut evaluations = 0;
    let mut probe = |c0: f64| -> Result<(bool, Vec<f64>)> {
        evaluations += 1;
        let mut ok = true;
        let mut worst = Vec::with_capacity(bundles.len());
        for b in &bundles {
            let rep = verify_monotonicity(&b.with_c0(c0))?;
            ok &= rep.passed;
            worst.push(rep.worst_violation);
        }
        Ok((ok, worst))
    };
    let (ok, worst) = probe(0.0)?;
    if ok {
        return Ok(C0Fit {
            c0: 0.0,
            pairs: pairs.len(),
            evaluations,
            worst_violation: worst,
        });
    }
    let (ok, mut best) = probe(C0_CAP)?;
    if !ok {
        return Err(Error::Fit(format!(
            "no c0 below {C0_CAP} makes every pair monotone"
        )));
    }
    // Find a bracket geometrically, then bisect.
    let mut hi = C0_CAP;
    let mut lo = 0.0;
    let mut c = 1e-3;
    while c < C0_CAP {
        let (ok, w) = probe(c)?;
        if ok {
            hi = c;
            best = w;
            break;
        }
        lo = c;
        c *= 4.0;
    }
    while hi - lo > REL_PRECISION * hi {
        let mid = 0.5 * (lo + hi);
        let (ok, w) = probe(mid)?;
        if ok {
            hi = mid;
            best = w;
        } else {
            lo = mid;
        }
    }
    Ok(C0Fit {
        c0: hi,
        pairs: pairs.len(),
        evaluations,
        worst_violation: best,
    })
}

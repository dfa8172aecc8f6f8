//! Closed-form oracles and invariants checked against the computed bundles.

use std::f64::consts::PI;
use std::sync::Arc;

use freqlab::certify::{kappa_classical, vanishing_order, RadiiTriple};
use freqlab::fields::CoefficientField;
use freqlab::frequency::classical_bundle;
use freqlab::quad::BallDomain;
use freqlab::solutions::{HarmonicVariant, SolutionField};
use proptest::prelude::*;

fn disc() -> BallDomain {
    BallDomain::centered(2, 1.0, 5).unwrap()
}

/// `B(d+1, α) = d! / (α (α+1) ⋯ (α+d))`.
fn beta_int(d: u32, alpha: f64) -> f64 {
    let mut b = 1.0 / alpha;
    for k in 1..=d {
        b *= k as f64 / (alpha + k as f64);
    }
    b
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // For Re z^d in the plane: H = (π/2) r^(2d+2α) B(d+1, α),
    // D = π d² r^(2d+2α) B(d, α+1), so N = 2dα at every radius.
    #[test]
    fn harmonic_bundle_matches_beta_integrals(d in 1u32..=5, alpha in 2.0f64..8.0, r in 0.2f64..1.0) {
        let sol = SolutionField::harmonic_polynomial(2, d, HarmonicVariant::Re).unwrap();
        let row = classical_bundle(&sol, &disc(), alpha, &[r]).unwrap().rows[0];
        let scale = r.powf(2.0 * d as f64 + 2.0 * alpha);
        let h = 0.5 * PI * scale * beta_int(d, alpha);
        let dd = PI * (d * d) as f64 * scale * beta_int(d - 1, alpha + 1.0);
        prop_assert!(rel(row.h, h) < 1e-10, "H {} vs {}", row.h, h);
        prop_assert!(rel(row.d, dd) < 1e-10, "D {} vs {}", row.d, dd);
        prop_assert!(rel(row.n, 2.0 * d as f64 * alpha) < 1e-10);
        prop_assert!(row.l.abs() < 1e-12 * row.d);
    }

    #[test]
    fn frequency_is_scale_invariant(c in 0.1f64..10.0, r in 0.2f64..0.9) {
        let base = SolutionField::exponential(2, 2.0).unwrap();
        let s = 2f64.sqrt();
        let scaled = SolutionField::custom(
            2,
            Arc::new(move |x: &[f64]| c * (s * x[0]).exp()),
            Arc::new(move |x: &[f64]| [c * s * (s * x[0]).exp(), 0.0, 0.0]),
            None,
            base.field().clone(),
        )
        .unwrap();
        let a = classical_bundle(&base, &disc(), 3.0, &[r]).unwrap().rows[0];
        let b = classical_bundle(&scaled, &disc(), 3.0, &[r]).unwrap().rows[0];
        prop_assert!(rel(b.h, c * c * a.h) < 1e-12);
        prop_assert!(rel(b.n, a.n) < 1e-12);
        prop_assert!(rel(b.ntilde, a.ntilde) < 1e-12);
    }

    // Im z^d is Re z^d rotated by π/(2d); the bundle only sees |x|.
    #[test]
    fn rotation_leaves_bundle_unchanged(d in 1u32..=4, r in 0.2f64..1.0) {
        let re = SolutionField::harmonic_polynomial(2, d, HarmonicVariant::Re).unwrap();
        let im = SolutionField::harmonic_polynomial(2, d, HarmonicVariant::Im).unwrap();
        let a = classical_bundle(&re, &disc(), 2.0, &[r]).unwrap().rows[0];
        let b = classical_bundle(&im, &disc(), 2.0, &[r]).unwrap().rows[0];
        prop_assert!(rel(a.h, b.h) < 1e-10 && rel(a.n, b.n) < 1e-10);
    }

    #[test]
    fn kappa_lies_in_unit_interval(r1 in 0.01f64..0.2, gap in 0.05f64..0.3, r3 in 0.7f64..1.0) {
        let r2 = r1 + gap;
        prop_assume!(2.0 * r2 < r3);
        let k = kappa_classical(&RadiiTriple::new(r1, r2, r3));
        let hand = (r3 / (2.0 * r2)).ln() / (r3 / r1).ln();
        prop_assert!((k - hand).abs() < 1e-14);
        prop_assert!(k > 0.0 && k < 1.0);
    }
}

#[test]
fn constant_function_bundle() {
    // u ≡ 1: H = ∫ ω^(α-1) = π r^(2α)/α, D = L = 0.
    let sol = SolutionField::harmonic_polynomial(2, 0, HarmonicVariant::Re).unwrap();
    for alpha in [2.0, 3.5] {
        let row = classical_bundle(&sol, &disc(), alpha, &[1.0]).unwrap().rows[0];
        assert!(rel(row.h, PI / alpha) < 1e-12);
        assert_eq!(row.d, 0.0);
        assert_eq!(row.n, 0.0);
    }
}

#[test]
fn vanishing_profile_closed_form() {
    // ∫_{B_r} (Re z^d)² = π r^(2d+2) / (2d+2).
    let d = 2;
    let sol = SolutionField::harmonic_polynomial(2, d, HarmonicVariant::Re).unwrap();
    let rep = vanishing_order(&sol, &disc(), 0.05, 0.9, 8, 1.0).unwrap();
    for (r, h) in rep.radii.iter().zip(&rep.h) {
        let want = PI * r.powi(2 * d as i32 + 2) / (2.0 * d as f64 + 2.0);
        assert!(rel(*h, want) < 1e-11, "r = {r}");
    }
}

#[test]
fn schrodinger_constants_follow_potential() {
    let c = CoefficientField::schrodinger(2, -3.0).constants();
    assert_eq!((c.lambda, c.eta, c.m, c.k), (1.0, 0.0, 3.0, 0.0));
}

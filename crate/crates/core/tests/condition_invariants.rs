mod common;

use common::library_metrics;
use oscgeo::conditions::{
    bourgain_geodesic, bourgain_residual, chaotic_check, contact_order, reported_order, span_residual, BourgainOptions,
    ChaoticOptions, ConditionReport, ContactOptions, Diagnostic, PhaseField,
};
use oscgeo::linalg::Mat;
use oscgeo::poly::{Monomial, Poly};
use proptest::prelude::*;

const PHASES: [&str; 4] = ["paraboloid", "bourgain", "test4", "xi5"];

fn coords(n: usize, half: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-half..half, n)
}

fn matrix(d: &Diagnostic) -> Mat {
    let Diagnostic::Matrix(rows) = d else { panic!("not a matrix: {d:?}") };
    Mat::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

fn number(d: &Diagnostic) -> f64 {
    let Diagnostic::Number(x) = d else { panic!("not a number: {d:?}") };
    *x
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `φ(x, t; y + shift)` for a polynomial phase in `(x₁, x₂, t, y₁, y₂)`.
fn shifted_phase(phi: &PhaseField, shift: &[f64]) -> PhaseField {
    let poly = phi.polynomial_form().unwrap();
    let mut terms = Vec::new();
    for m in poly.terms() {
        let (b, c) = (m.powers[3], m.powers[4]);
        for i in 0..=b {
            for j in 0..=c {
                let coeff = m.coeff
                    * binomial(b, i)
                    * binomial(c, j)
                    * shift[0].powi((b - i) as i32)
                    * shift[1].powi((c - j) as i32);
                terms.push(Monomial { coeff, powers: vec![m.powers[0], m.powers[1], m.powers[2], i, j] });
            }
        }
    }
    PhaseField::polynomial(3, Poly::new(5, terms).unwrap(), "shifted").unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * a.abs().max(b.abs()) + 1e-12
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bourgain_residual_is_scale_invariant(
        which in 0usize..4,
        x in coords(3, 0.2),
        y in coords(2, 0.2),
        c in prop_oneof![-5.0f64..-0.2, 0.2f64..5.0],
        a in prop_oneof![-5.0f64..-0.2, 0.2f64..5.0],
    ) {
        let phi = PhaseField::named(PHASES[which]).unwrap();
        let o = BourgainOptions::default();
        let base = bourgain_residual(&phi, &x, &y, &o);
        prop_assume!(base.is_ok());
        let base = base.unwrap();
        let scaled = bourgain_residual(&phi.scaled(c).unwrap(), &x, &y, &o).unwrap();
        prop_assert!(close(base.residuals["r"], scaled.residuals["r"]), "{:?} vs {:?}", base.residuals, scaled.residuals);
        prop_assert_eq!(base.verdict, scaled.verdict);
        prop_assert_eq!(base.recompute_verdict().unwrap(), base.verdict);
        let text = serde_json::to_string(&base).unwrap();
        prop_assert_eq!(&serde_json::from_str::<ConditionReport>(&text).unwrap(), &base);
        // a constant multiple of the transverse field scales the pair by (a, a²)
        let (m1, m2) = (matrix(&base.diagnostics["m1"]), matrix(&base.diagnostics["m2"]));
        let r0 = span_residual(&m1, &m2, 0.0);
        let ra = span_residual(&(&m1 * a), &(&m2 * (a * a)), 0.0);
        prop_assert!(close(r0.r, ra.r), "{} vs {}", r0.r, ra.r);
    }

    #[test]
    fn contact_order_survives_recentering(
        which in 0usize..4,
        x in coords(3, 0.15),
        y in coords(2, 0.15),
        shift in coords(2, 0.2),
    ) {
        let phi = PhaseField::named(PHASES[which]).unwrap();
        let o = ContactOptions::default();
        let moved: Vec<f64> = y.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let base = contact_order(&phi, &x, &moved, &o);
        prop_assume!(base.is_ok());
        let base = base.unwrap();
        let other = contact_order(&shifted_phase(&phi, &shift), &x, &y, &o).unwrap();
        prop_assert_eq!(reported_order(&base), reported_order(&other));
        for (k, v) in &base.residuals {
            prop_assert!(close(*v, other.residuals[k]), "{k}: {v} vs {}", other.residuals[k]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn bourgain_formulations_agree(
        i in 0usize..5,
        x in (-0.1f64..0.1, -0.1f64..0.1, -0.1f64..0.0),
        y in coords(2, 0.1),
        eps in 0.1f64..0.25,
    ) {
        let (name, m) = &library_metrics()[i];
        let o = BourgainOptions { cross_check: true, ..Default::default() };
        let rep = bourgain_geodesic(m, &[x.0, x.1, x.2], &y, eps, &o).unwrap();
        let d = number(&rep.diagnostics["cross_check_discrepancy"]);
        prop_assert!(d < 1e-3, "{name}: {d}");
    }

}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn chaotic_formulations_agree(i in 0usize..5, p in coords(3, 0.1)) {
        let (name, m) = &library_metrics()[i];
        let o = ChaoticOptions { directions: 16, ..Default::default() };
        let rep = chaotic_check(m, &p, &o).unwrap();
        prop_assert_eq!(number(&rep.diagnostics["ricci_disagreements"]), 0.0, "{}", name);
    }
}

use num_complex::Complex64;
use oscgeo::conditions::{fibonacci_directions, PhaseField};
use oscgeo::osclab::{
    osc_evaluate, tube_rasterize, union_volume, Amplitude, Density, OscOptions, TubeSource, TubeSpec, XGrid,
};
use oscgeo::poly::{Monomial, Poly};
use oscgeo::MetricField;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// phases linear in x, so an x-shift only adds a·y
const PHASES: [&str; 3] = ["paraboloid", "bourgain", "test4"];

fn grid() -> XGrid {
    XGrid::cube(3, 0.3, 3)
}

fn opts() -> OscOptions {
    OscOptions { lip: Some(3.0), ..Default::default() }
}

fn bump() -> Density {
    Density::Bump { center: vec![0.05, -0.05], radius: 0.4 }
}

/// `Σ c_k y^{α_k}` as a polynomial in `y` alone and as one in `(x, t, y)`.
fn y_poly(coeffs: &[(f64, u32, u32)]) -> (Poly, Poly) {
    let y = coeffs.iter().map(|&(c, a, b)| Monomial { coeff: c, powers: vec![a, b] }).collect();
    let full = coeffs.iter().map(|&(c, a, b)| Monomial { coeff: c, powers: vec![0, 0, 0, a, b] }).collect();
    (Poly::new(2, y).unwrap(), Poly::new(5, full).unwrap())
}

fn max_gap(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u.norm() - v.norm()).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn modulation_is_invisible(
        which in 0usize..3,
        c in prop::collection::vec((-1.0f64..1.0, 0u32..3, 0u32..3), 1..4),
        freq in 1.0f64..48.0,
    ) {
        let phi = PhaseField::named(PHASES[which]).unwrap();
        let (cy, cfull) = y_poly(&c);
        let moved = PhaseField::polynomial(3, phi.polynomial_form().unwrap().add(&cfull), "modulated").unwrap();
        let amp = Amplitude::centered(3, 0.5);
        let plain = osc_evaluate(&phi, &amp, &bump(), freq, &grid(), &opts()).unwrap();
        let f = Density::Modulated { base: Box::new(bump()), phase: cy, freq: -freq };
        let absorbed = osc_evaluate(&moved, &amp, &f, freq, &grid(), &opts()).unwrap();
        let gap = max_gap(&plain.values, &absorbed.values);
        prop_assert!(gap < 1e-10, "{gap}");
    }

    #[test]
    fn translation_is_covariant(
        which in 0usize..3,
        a in prop::collection::vec(-0.2f64..0.2, 2),
        freq in 1.0f64..48.0,
    ) {
        let phi = PhaseField::named(PHASES[which]).unwrap();
        let amp = Amplitude::centered(3, 0.5);
        let moved_amp = Amplitude { x_center: a.clone(), ..amp.clone() };
        let moved = osc_evaluate(&phi, &moved_amp, &bump(), freq, &grid().shifted(&[a[0], a[1], 0.0]), &opts()).unwrap();
        let (ay, _) = y_poly(&[(a[0], 1, 0), (a[1], 0, 1)]);
        let f = Density::Modulated { base: Box::new(bump()), phase: ay, freq };
        let fixed = osc_evaluate(&phi, &amp, &f, freq, &grid(), &opts()).unwrap();
        prop_assert!(max_gap(&moved.values, &fixed.values) < 1e-10);
        for p in [1.0, 2.0, 4.0] {
            prop_assert!((moved.lp_norm(p) - fixed.lp_norm(p)).abs() < 1e-10);
        }
    }

    #[test]
    fn halving_the_spacing_is_stable(which in 0usize..3, freq in 4.0f64..128.0) {
        let phi = PhaseField::named(PHASES[which]).unwrap();
        let amp = Amplitude::centered(3, 0.5);
        let base = osc_evaluate(&phi, &amp, &bump(), freq, &grid(), &OscOptions::default()).unwrap();
        let fine = osc_evaluate(&phi, &amp, &bump(), freq, &grid(), &OscOptions { refine: 2, ..Default::default() }).unwrap();
        let scale = base.max_abs();
        for (u, v) in base.values.iter().zip(&fine.values) {
            let gap = (u.norm() - v.norm()).abs();
            prop_assert!(gap < 1e-3 * u.norm().max(1e-3 * scale), "{gap} at |T| = {}", u.norm());
        }
        for (v, b) in base.values.iter().zip(&base.bounds) {
            prop_assert!(v.norm() <= b * (1.0 + 1e-12));
        }
    }
}

#[test]
fn euclidean_direction_net_covers_a_tenth_of_the_box() {
    let m = MetricField::euclidean(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let specs: Vec<TubeSpec> = fibonacci_directions(2048)
        .into_iter()
        .filter(|d| d[2] > 0.0)
        .map(|d| TubeSpec { key: d.to_vec(), omega: (0..3).map(|_| rng.gen_range(-0.25..0.25)).collect() })
        .collect();
    let tf = tube_rasterize(TubeSource::Metric(&m), &specs, 1.0 / 32.0, None).unwrap();
    let v = union_volume(&tf);
    assert!(v >= 0.1, "{v}");
}

mod common;

use common::*;
use proptest::prelude::*;

fn coeffs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_is_associative_and_distributive(a in coeffs(35), b in coeffs(35), c in coeffs(35)) {
        let (a, b, c) = (random_jet(3, 4, &a), random_jet(3, 4, &b), random_jet(3, 4, &c));
        prop_assert!(ring_law_error(&a, &b, &c) < 1e-12);
    }

    #[test]
    fn sine_and_cosine_satisfy_pythagoras(a in coeffs(35)) {
        prop_assert!(pythagoras_error(&random_jet(3, 4, &a)) < 1e-12);
    }

    #[test]
    fn partials_match_finite_differences(
        p in prop::collection::vec(-0.5f64..0.5, 3),
        which in 0usize..3,
        order in 1usize..=6,
    ) {
        let (name, fj, fnum) = smooth_functions()[which];
        let ratio = jet_fd_ratio(fj, fnum, &p, order);
        prop_assert!(ratio <= 1.0, "{name} at {p:?}, order {order}: ratio {ratio}");
    }
}

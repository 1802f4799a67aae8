use blowup_core::lyapunov::{
    build_matrix, is_positive_definite, leading_minors_exact, min_eig_normalized, published_lambda, search_lambda, PdMode, PdVerdict,
};
use num_bigint::BigInt;
use proptest::prelude::*;

const PUBLISHED: [&str; 10] = [
    "4096",
    "1224375",
    "114265104",
    "6270814340",
    "280372975336",
    "12330415584972",
    "687248010753336",
    "69483419810465760",
    "12807765625815100744",
    "136953089422286895648",
];

#[test]
fn published_weights_give_published_minors() {
    let minors = leading_minors_exact(&published_lambda()).unwrap();
    let got: Vec<String> = minors.iter().map(BigInt::to_string).collect();
    assert_eq!(got, PUBLISHED);
}

#[test]
fn best_value_grows_with_iterations() {
    for d in [3, 7, 10] {
        let mut prev = f64::NEG_INFINITY;
        for iters in [100, 1000, 5000] {
            let c = search_lambda(d, 4, iters, 11);
            assert!(c.min_eig >= prev - 1e-14, "d={d} iters={iters}: {} < {prev}", c.min_eig);
            prev = c.min_eig;
        }
    }
}

#[test]
fn searched_weights_agree_with_exact_check() {
    // d = 10 needs the full search budget to become feasible; the verdicts must agree regardless.
    for d in 1..=10 {
        let c = search_lambda(d, 4, 2000, 5);
        assert!(c.feasible || d == 10, "d={d}: {}", c.min_eig);
        assert_eq!(c.exact_positive_definite, c.min_eig > 0.0, "d={d}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn feasibility_is_scale_invariant(lambda in prop::collection::vec(0.01f64..10.0, 1..=10)) {
        let base = is_positive_definite(&build_matrix(&lambda), PdMode::Exact);
        let eig = min_eig_normalized(&lambda);
        for c in [0.5, 3.0] {
            let scaled: Vec<f64> = lambda.iter().map(|v| c * v).collect();
            prop_assert_eq!(is_positive_definite(&build_matrix(&scaled), PdMode::Exact), base);
            prop_assert!((min_eig_normalized(&scaled) - eig).abs() <= 1e-12 * (1.0 + eig.abs()));
        }
        // Away from the boundary the floating and exact verdicts coincide.
        if eig.abs() > 1e-6 {
            prop_assert_eq!(base == PdVerdict::PositiveDefinite, eig > 0.0);
        }
    }
}

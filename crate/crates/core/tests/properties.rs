mod common;

use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn edge_sets_nest_along_the_threshold(x in data_matrix(5..=30, 2..=10), g1 in 0.0f64..1.0, g2 in 0.0f64..1.0) {
        nested_along_path(&x, g1, g2)?;
    }

    #[test]
    fn neighborhoods_agree_with_edge_set(x in data_matrix(5..=30, 2..=10), gamma in 0.0f64..1.0) {
        neighborhoods_match_edges(&x, gamma)?;
    }

    #[test]
    fn column_permutation_and_sign_flips(
        (x, cols, flips) in data_matrix(5..=30, 2..=10).prop_flat_map(|x| {
            let p = x.p();
            (Just(x), permutation(p), proptest::collection::vec(any::<bool>(), p))
        }),
        gamma in 0.0f64..1.0,
    ) {
        permutation_and_sign_invariance(&x, &cols, &flips, gamma)?;
    }

    #[test]
    fn affine_column_maps(
        x in data_matrix(5..=30, 2..=10),
        j in 0usize..10,
        alpha in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0],
        beta in -100.0f64..100.0,
        gamma in 0.0f64..1.0,
    ) {
        affine_invariance(&x, j, alpha, beta, gamma)?;
    }

    #[test]
    fn union_find_matches_bfs(e in edge_set(2..=12)) {
        components_match_bfs(&e)?;
    }

    #[test]
    fn confusion_is_swap_symmetric((a, b) in (2usize..=12).prop_flat_map(|p| (edge_set(p..=p), edge_set(p..=p)))) {
        confusion_swap(&a, &b)?;
    }

    #[test]
    fn correlation_scaling_is_idempotent(s in spd_matrix(2..=15)) {
        cov_to_corr_idempotent(&s)?;
    }

    #[test]
    fn inverse_of_inverse(s in spd_matrix(2..=15)) {
        double_inverse(&s)?;
    }

    #[test]
    fn eigen_extremes_match_inertia_bisection(s in spd_matrix(2..=12).prop_map(|s| s.shift_diagonal(-0.5))) {
        eigen_matches_inertia(&s)?;
    }

    #[test]
    fn quantile_inverts_cdf(u in prop_oneof![1e-12f64..1e-3, 1e-3f64..0.999, 0.999f64..(1.0 - 1e-12)]) {
        quantile_round_trip(u)?;
    }

    #[test]
    fn and_rule_within_or_rule(x in data_matrix(20..=40, 3..=8), lambda in 0.02f64..0.5) {
        and_within_or(&x, lambda)?;
    }

    #[test]
    fn lasso_satisfies_kkt(
        (x, y) in (10usize..=30, 2usize..=6).prop_flat_map(|(n, p)| {
            (data_matrix(n..=n, p..=p), proptest::collection::vec(-5.0f64..5.0, n))
        }),
        lambda in 0.0f64..3.0,
    ) {
        lasso_kkt(&x, &y, lambda)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn unpenalized_glasso_inverts(s in spd_matrix(2..=8)) {
        glasso_unpenalized_is_inverse(&s)?;
    }

    #[test]
    fn glasso_dual_objective_never_decreases(s in spd_matrix(3..=15), frac in 0.05f64..0.95) {
        glasso_trace_monotone(&s, frac)?;
    }

    #[test]
    fn glasso_components_refine_thresholding(s in spd_matrix(3..=15), frac in 0.05f64..0.95) {
        glasso_components_refine_threshold(&s, frac)?;
    }

    #[test]
    fn error_rate_reports_are_reproducible(seed in 0u64..1000) {
        table1_deterministic(seed)?;
    }
}

#[test]
fn eigen_extremes_on_the_tridiagonal_path() {
    let g: Vec<f64> = (0..80 * 80)
        .map(|k| ((k * 7919 % 1013) as f64 / 1013.0) - 0.5)
        .collect();
    let s = gram_plus_ridge(80, &g);
    eigen_matches_inertia(&s).unwrap();
}

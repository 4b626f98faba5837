use cellfree_otfs_core::channel_model::{split_doppler, LargeScaleState};
use cellfree_otfs_core::estimation::{gamma_sp, UserSnrs};
use cellfree_otfs_core::linalg::RealMatrix;
use cellfree_otfs_core::power_control::{
    bisection_steps, bisection_upper_bound, equalize, min_sinr, sinr_vector, uniform_eta_for,
};
use cellfree_otfs_core::rng::derive_seed;
use cellfree_otfs_core::spectral_efficiency::ap_loads;
use proptest::prelude::*;

fn link_stats(m_a: usize, k_u: usize) -> impl Strategy<Value = (RealMatrix, RealMatrix)> {
    (
        prop::collection::vec(0.01f64..1.0, m_a * k_u),
        prop::collection::vec(0.05f64..1.0, m_a * k_u),
    )
        .prop_map(move |(b, frac)| {
            let beta = RealMatrix::from_vec(m_a, k_u, b).unwrap();
            let varrho = RealMatrix::from_fn(m_a, k_u, |p, q| beta[(p, q)] * frac[p * k_u + q]);
            (varrho, beta)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn uniform_power_fills_every_ap((v, _b) in link_stats(4, 3)) {
        let eta = uniform_eta_for(&v).unwrap();
        for load in ap_loads(&eta, &v) {
            prop_assert!((load - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sinr_is_below_the_bisection_bound((v, b) in link_stats(3, 3), rho in 0.1f64..1e4) {
        let eta = uniform_eta_for(&v).unwrap();
        let bound = bisection_upper_bound(&v, &b, rho);
        prop_assert!(min_sinr(&eta, &v, &b, rho) < bound);
    }

    #[test]
    fn common_power_scaling_never_hurts((v, b) in link_stats(3, 2), rho in 0.1f64..100.0, c in 0.05f64..1.0) {
        let eta = uniform_eta_for(&v).unwrap();
        let low = eta.map(|e| e * c);
        for (s_low, s_full) in sinr_vector(&low, &v, &b, rho).iter().zip(sinr_vector(&eta, &v, &b, rho)) {
            prop_assert!(*s_low <= s_full * (1.0 + 1e-12));
        }
    }

    #[test]
    fn equalizing_at_the_minimum_keeps_power_feasible((v, b) in link_stats(3, 3), rho in 0.5f64..100.0) {
        let eta = uniform_eta_for(&v).unwrap();
        let t = min_sinr(&eta, &v, &b, rho);
        if let Some(eq) = equalize(&eta, &v, &b, rho, t) {
            for s in sinr_vector(&eq, &v, &b, rho) {
                prop_assert!((s - t).abs() <= 1e-8 * t);
            }
            for load in ap_loads(&eq, &v) {
                prop_assert!(load <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn sp_variances_stay_in_range(
        beta in prop::collection::vec(1e-14f64..1e-9, 2 * 2 * 3),
        mu in prop::collection::vec(0.01f64..0.99, 2),
    ) {
        let ls = LargeScaleState::from_betas(2, 2, 3, beta).unwrap();
        let snr = UserSnrs { pilot: mu.iter().map(|m| m * 1e13).collect(), data: mu.iter().map(|m| (1.0 - m) * 1e13).collect(), eta: vec![1.0; 2] };
        let stats = gamma_sp(&ls, &snr).unwrap();
        for (g, b) in stats.gamma.iter().zip(&ls.beta) {
            prop_assert!(*g >= 0.0 && *g <= *b);
        }
    }

    #[test]
    fn bisection_step_count_shrinks_bracket(width in 1e-6f64..1e3, eps in 1e-6f64..1.0) {
        let n = bisection_steps(width, eps);
        prop_assert!(width / 2f64.powi(n as i32) <= eps * (1.0 + 1e-12));
        if n > 0 {
            prop_assert!(width / 2f64.powi(n as i32 - 1) > eps);
        }
    }

    #[test]
    fn doppler_split_recombines(nu in -20.0f64..20.0) {
        let (k, kappa) = split_doppler(nu);
        prop_assert!(kappa > -0.5 && kappa <= 0.5);
        prop_assert!((k as f64 + kappa - nu).abs() < 1e-12);
    }

    #[test]
    fn derived_seeds_are_distinct(master in any::<u64>(), a in 0u64..1000, b in 0u64..1000) {
        prop_assume!(a != b);
        prop_assert_ne!(derive_seed(master, a), derive_seed(master, b));
    }
}

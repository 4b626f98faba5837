use cellfree_otfs_core::channel_model::generate_drop;
use cellfree_otfs_core::estimation::{gamma_ep, gamma_sp, sp_coefficients, varrho_of_mu, UserSnrs};
use cellfree_otfs_core::SystemConfig;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn desk() -> SystemConfig {
    SystemConfig::default()
}

#[test]
fn pilot_fraction_form_matches_direct_evaluation() {
    let cfg = desk();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let drop = generate_drop(&cfg, seed).unwrap();
        let ls = &drop.large_scale;
        let coeff = sp_coefficients(ls, &cfg).unwrap();
        // 50 random pilot-fraction vectors per drop, 1000 points in total.
        for _ in 0..50 {
            let mu: Vec<f64> = (0..cfg.num_users).map(|_| rng.random_range(1e-3..1.0 - 1e-3)).collect();
            let direct = gamma_sp(ls, &UserSnrs::sp_split(&cfg, &mu)).unwrap();
            let via_mu = coeff.stats(ls, &mu).unwrap();
            for (a, b) in direct.gamma.iter().zip(&via_mu.gamma) {
                if *a > 0.0 {
                    worst = worst.max((a - b).abs() / a);
                }
            }
            let vm = varrho_of_mu(&coeff, &mu).unwrap();
            assert!(
                vm.max_abs_diff(&direct.varrho) <= 1e-12 * direct.varrho.as_slice().iter().cloned().fold(0.0, f64::max)
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 1000);
    assert!(worst < 1e-12, "worst relative error {worst:e}");
}

#[test]
fn estimate_variance_stays_within_prior() {
    let cfg = desk();
    for seed in 100..200u64 {
        let drop = generate_drop(&cfg, seed).unwrap();
        let ls = &drop.large_scale;
        let ep = gamma_ep(ls, &cfg, &UserSnrs::ep_default(&cfg)).unwrap();
        let sp = gamma_sp(ls, &UserSnrs::sp_split(&cfg, &vec![0.5; cfg.num_users])).unwrap();
        for stats in [&ep, &sp] {
            stats.check_bounds(ls, 0.0).unwrap();
            for (g, b) in stats.gamma.iter().zip(&ls.beta) {
                assert!(*g >= 0.0 && *g <= *b, "{g} vs {b}");
            }
        }
    }
}

#[test]
fn link_quality_grows_with_pilot_fraction() {
    let cfg = desk();
    let drop = generate_drop(&cfg, 7).unwrap();
    let coeff = sp_coefficients(&drop.large_scale, &cfg).unwrap();
    for p in 0..cfg.num_aps {
        for q in 0..cfg.num_users {
            let mut prev = 0.0;
            for k in 1..20 {
                let v = coeff.varrho_link(p, q, k as f64 / 20.0);
                assert!(v > prev);
                prev = v;
            }
            assert!(prev <= coeff.beta_sum[(p, q)]);
        }
    }
}

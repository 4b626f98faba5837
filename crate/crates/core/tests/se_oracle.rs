use cellfree_otfs_core::channel_model::generate_drop;
use cellfree_otfs_core::config::PdpTap;
use cellfree_otfs_core::estimation::{gamma_ep, sp_coefficients, UserSnrs};
use cellfree_otfs_core::power_control::uniform_eta;
use cellfree_otfs_core::spectral_efficiency::{mc_sinr_oracle, sinr_all, SinrInputs};
use cellfree_otfs_core::SystemConfig;

fn small_cfg(m_a: usize, k_u: usize, paths: usize) -> SystemConfig {
    SystemConfig {
        num_subcarriers: 4,
        num_doppler_bins: 4,
        num_aps: m_a,
        num_users: k_u,
        num_paths: paths,
        k_max: 0,
        // Short enough that every tap maps to delay index 0 or 1.
        tau_max_s: 1.0 / (4.0 * 15e3),
        power_delay_profile: (0..paths)
            .map(|i| PdpTap {
                delay_ns: 1e4 * i as f64,
                power_db: -3.0 * i as f64,
            })
            .collect(),
        ..SystemConfig::default()
    }
}

#[test]
#[allow(clippy::needless_range_loop)]
fn closed_form_sinr_agrees_with_monte_carlo() {
    let cases = [(2, 2, 2, 1u64), (3, 1, 1, 2), (4, 3, 2, 3)];
    for (m_a, k_u, paths, seed) in cases {
        let cfg = small_cfg(m_a, k_u, paths);
        cfg.validate().unwrap();
        let drop = generate_drop(&cfg, seed).unwrap();
        let ls = &drop.large_scale;
        let ep = gamma_ep(ls, &cfg, &UserSnrs::ep_default(&cfg)).unwrap();
        let sp = sp_coefficients(ls, &cfg).unwrap().stats(ls, &vec![0.4; k_u]).unwrap();
        for stats in [ep, sp] {
            let eta = uniform_eta(&stats).unwrap();
            let cf = sinr_all(&SinrInputs::new(&eta, &stats, cfg.rho_d(), cfg.omega_dl())).unwrap();
            let mc = mc_sinr_oracle(ls, &stats, &eta, &cfg, 4000, seed + 100).unwrap();
            for q in 0..k_u {
                let tol = (0.1 * cf[q]).max(3.0 * mc.std_err[q]);
                assert!(
                    (mc.sinr[q] - cf[q]).abs() <= tol,
                    "case {m_a}x{k_u}x{paths} user {q}: mc {} +- {} vs {}",
                    mc.sinr[q],
                    mc.std_err[q],
                    cf[q]
                );
            }
        }
    }
}

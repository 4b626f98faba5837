//! Oracle and property suites behind the `validate` subcommand.
//!
//! Every suite returns a [`SuiteReport`] instead of panicking so that the CLI
//! can run them all and summarize. The desk-scale suites share one batch of
//! solved drops ([`DeskEvidence`]) because the solves dominate the cost.

use std::f64::consts::{FRAC_PI_2, PI};
use std::time::Instant;

use cellfree_otfs_core::channel_model::{generate_drop, LargeScaleState};
use cellfree_otfs_core::config::PdpTap;
use cellfree_otfs_core::conic::ConicBackend;
use cellfree_otfs_core::estimation::{gamma_ep, gamma_sp, guard_budget_for, sp_coefficients, varrho_of_mu, UserSnrs};
use cellfree_otfs_core::linalg::{ComplexMatrix, RealMatrix};
use cellfree_otfs_core::otfs::{isfft, sfft, tap_operator, DdGrid, PathTap};
use cellfree_otfs_core::pipeline::{evaluate_large_scale, AllocationScheme};
use cellfree_otfs_core::power_control::{
    alternate_maxmin_sp, bisect_max_min, bisection_steps, maxmin_ep, min_sinr, sca_pilot_data, sinr_vector,
    uniform_eta, BisectionOutcome,
};
use cellfree_otfs_core::rng::derive_seed;
use cellfree_otfs_core::spectral_efficiency::{ap_loads, mc_sinr_oracle, sinr_all, sinr_unchecked, SinrInputs};
use cellfree_otfs_core::SystemConfig;
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::stats::stats_from_samples;

/// Slack allowed on monotone objective traces.
pub const TRACE_SLACK: f64 = 1e-9;
/// Largest tolerated per-AP power overshoot.
pub const POWER_RESIDUAL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub passed: bool,
    pub checks: usize,
    /// First failures (at most a handful) or a short summary on success.
    pub detail: String,
    pub elapsed_s: f64,
}

/// Collects pass/fail checks with a capped list of failure messages.
struct Tally {
    name: &'static str,
    checks: usize,
    failures: Vec<String>,
    notes: Vec<String>,
    start: Instant,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Tally {
            name,
            checks: 0,
            failures: Vec::new(),
            notes: Vec::new(),
            start: Instant::now(),
        }
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(msg());
        }
    }

    fn note(&mut self, s: String) {
        self.notes.push(s);
    }

    fn finish(self) -> SuiteReport {
        let passed = self.failures.is_empty() && self.checks > 0;
        let detail = if passed {
            self.notes.join("; ")
        } else if self.checks == 0 {
            "no checks ran".into()
        } else {
            let shown: Vec<_> = self.failures.iter().take(5).cloned().collect();
            format!(
                "{} of {} checks failed: {}",
                self.failures.len(),
                self.checks,
                shown.join(" | ")
            )
        };
        SuiteReport {
            name: self.name.into(),
            passed,
            checks: self.checks,
            detail,
            elapsed_s: self.start.elapsed().as_secs_f64(),
        }
    }
}

fn lift<T, E: std::fmt::Display>(t: &mut Tally, what: &str, r: Result<T, E>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            t.check(false, || format!("{what}: {e}"));
            None
        }
    }
}

// ---------------------------------------------------------------------------
// Closed-form SINR against Monte Carlo

/// A small configuration whose dense effective channels are cheap: a 4x4
/// grid, no Doppler and taps that land on delay bins 0 and 1.
pub fn small_config(num_aps: usize, num_users: usize, num_paths: usize) -> SystemConfig {
    SystemConfig {
        num_subcarriers: 4,
        num_doppler_bins: 4,
        num_aps,
        num_users,
        num_paths,
        k_max: 0,
        tau_max_s: 1.0 / (4.0 * 15e3),
        power_delay_profile: (0..num_paths)
            .map(|i| PdpTap {
                delay_ns: 1e4 * i as f64,
                power_db: -3.0 * i as f64,
            })
            .collect(),
        ..SystemConfig::default()
    }
}

/// Random small instances, both estimation schemes, uniform power and a
/// random pilot fraction for superimposed pilots. Passes when every user is
/// within 10% or three standard errors of the closed form.
#[allow(clippy::needless_range_loop)]
pub fn se_vs_monte_carlo(instances: usize, draws: usize, seed: u64) -> SuiteReport {
    let mut t = Tally::new("se_vs_monte_carlo");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_sigma: f64 = 0.0;
    for i in 0..instances {
        let m_a = rng.random_range(1..=4);
        let k_u = rng.random_range(1..=3);
        let paths = rng.random_range(1..=2);
        let mu = rng.random_range(0.1..0.9);
        let cfg = small_config(m_a, k_u, paths);
        let drop_seed = derive_seed(seed, i as u64);
        let Some(drop) = lift(&mut t, "drop", generate_drop(&cfg, drop_seed)) else {
            continue;
        };
        let ls = &drop.large_scale;
        let ep = lift(&mut t, "ep stats", gamma_ep(ls, &cfg, &UserSnrs::ep_default(&cfg)));
        let sp = lift(
            &mut t,
            "sp stats",
            sp_coefficients(ls, &cfg).and_then(|c| c.stats(ls, &vec![mu; k_u])),
        );
        for (label, stats) in [("ep", ep), ("sp", sp)] {
            let Some(stats) = stats else { continue };
            let Some(eta) = lift(&mut t, "uniform power", uniform_eta(&stats)) else {
                continue;
            };
            let inputs = SinrInputs::new(&eta, &stats, cfg.rho_d(), cfg.omega_dl());
            let Some(cf) = lift(&mut t, "closed form", sinr_all(&inputs)) else {
                continue;
            };
            let Some(mc) = lift(
                &mut t,
                "monte carlo",
                mc_sinr_oracle(ls, &stats, &eta, &cfg, draws, derive_seed(drop_seed, 1)),
            ) else {
                continue;
            };
            for q in 0..k_u {
                let tol = (0.1 * cf[q]).max(3.0 * mc.std_err[q]);
                let err = (mc.sinr[q] - cf[q]).abs();
                if mc.std_err[q] > 0.0 {
                    worst_sigma = worst_sigma.max(err / mc.std_err[q]);
                }
                t.check(err <= tol, || {
                    format!(
                        "instance {i} ({m_a}x{k_u}x{paths}, {label}) user {q}: mc {:.6e} +- {:.2e} vs {:.6e}",
                        mc.sinr[q], mc.std_err[q], cf[q]
                    )
                });
            }
        }
    }
    t.note(format!(
        "{instances} instances, {draws} draws, worst deviation {worst_sigma:.2} standard errors"
    ));
    t.finish()
}

// ---------------------------------------------------------------------------
// Estimation formulas

/// The pilot-fraction form of the superimposed-pilot variances against direct
/// evaluation on `points` random fractions, and `0 <= gamma <= beta` for both
/// schemes on `drops` random desk-scale drops.
pub fn estimation_consistency(cfg: &SystemConfig, points: usize, drops: usize, seed: u64) -> SuiteReport {
    let mut t = Tally::new("estimation_consistency");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_drop = 50usize;
    let mut worst: f64 = 0.0;
    let mut done = 0;
    let mut d = 0u64;
    while done < points {
        let Some(drop) = lift(&mut t, "drop", generate_drop(cfg, derive_seed(seed, d))) else {
            break;
        };
        d += 1;
        let ls = &drop.large_scale;
        let Some(coeff) = lift(&mut t, "coefficients", sp_coefficients(ls, cfg)) else {
            break;
        };
        for _ in 0..per_drop.min(points - done) {
            let mu: Vec<f64> = (0..cfg.num_users).map(|_| rng.random_range(1e-3..1.0 - 1e-3)).collect();
            let direct = gamma_sp(ls, &UserSnrs::sp_split(cfg, &mu));
            let via = coeff.stats(ls, &mu);
            if let (Some(a), Some(b)) = (lift(&mut t, "direct", direct), lift(&mut t, "mu form", via)) {
                let rel = a
                    .gamma
                    .iter()
                    .zip(&b.gamma)
                    .filter(|(x, _)| **x > 0.0)
                    .map(|(x, y)| (x - y).abs() / x)
                    .fold(0.0, f64::max);
                worst = worst.max(rel);
                t.check(rel < 1e-12, || format!("relative error {rel:e} at mu {mu:?}"));
            }
            done += 1;
        }
    }
    for d in 0..drops as u64 {
        let Some(drop) = lift(&mut t, "drop", generate_drop(cfg, derive_seed(seed ^ 0x5eed, d))) else {
            continue;
        };
        let ls = &drop.large_scale;
        let ep = gamma_ep(ls, cfg, &UserSnrs::ep_default(cfg));
        let sp = gamma_sp(ls, &UserSnrs::sp_split(cfg, &vec![0.5; cfg.num_users]));
        for (label, stats) in [("ep", ep), ("sp", sp)] {
            if let Some(s) = lift(&mut t, label, stats) {
                let ok = s.gamma.iter().zip(&ls.beta).all(|(g, b)| *g >= 0.0 && g <= b);
                t.check(ok, || format!("drop {d} {label}: estimate variance outside [0, beta]"));
            }
        }
    }
    t.note(format!(
        "{done} pilot-fraction points, worst relative error {worst:.1e}; {drops} drops bounded"
    ));
    t.finish()
}

// ---------------------------------------------------------------------------
// Toy-scale optimizer oracles

/// Max-min SINR for two APs and two users by zooming grid search over the
/// per-AP amplitude vectors `u_p = r_p (cos phi_p, sin phi_p)`, where
/// `u_pq = sqrt(eta_pq varrho_pq)`. Every grid point is power-feasible.
pub fn grid_max_min_2x2(varrho: &RealMatrix, beta_sum: &RealMatrix, rho: f64) -> f64 {
    let eval = |x: [f64; 4]| {
        let [r0, a0, r1, a1] = x;
        let u = [[r0 * a0.cos(), r0 * a0.sin()], [r1 * a1.cos(), r1 * a1.sin()]];
        let load = [r0 * r0, r1 * r1];
        (0..2)
            .map(|q| {
                let amp: f64 = (0..2).map(|p| varrho[(p, q)].sqrt() * u[p][q]).sum();
                let den: f64 = (0..2).map(|p| beta_sum[(p, q)] * load[p]).sum();
                rho * amp * amp / (rho * den + 1.0)
            })
            .fold(f64::INFINITY, f64::min)
    };
    let full = [1.0, FRAC_PI_2, 1.0, FRAC_PI_2];
    let mut lo = [0.0; 4];
    let mut hi = full;
    let mut best = (f64::NEG_INFINITY, [0.0; 4]);
    let steps = 24;
    for _round in 0..6 {
        for i0 in 0..=steps {
            for i1 in 0..=steps {
                for i2 in 0..=steps {
                    for i3 in 0..=steps {
                        let idx = [i0, i1, i2, i3];
                        let x: [f64; 4] =
                            std::array::from_fn(|d| lo[d] + (hi[d] - lo[d]) * idx[d] as f64 / steps as f64);
                        let f = eval(x);
                        if f > best.0 {
                            best = (f, x);
                        }
                    }
                }
            }
        }
        for d in 0..4 {
            let w = (hi[d] - lo[d]) / 4.0;
            lo[d] = (best.1[d] - w).max(0.0);
            hi[d] = (best.1[d] + w).min(full[d]);
        }
    }
    best.0
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-13 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    f(0.5 * (lo + hi))
}

/// Bisection (superimposed pilots at a fixed fraction) and embedded-pilot
/// max-min against grid search on 2x2 drops, and SCA against golden-section
/// search on 1x1 drops.
pub fn toy_optimizers(drops: usize, seed: u64, backend: &dyn ConicBackend) -> SuiteReport {
    let mut t = Tally::new("toy_optimizers");
    let toy = SystemConfig {
        num_aps: 2,
        num_users: 2,
        ..SystemConfig::default()
    };
    let rho = toy.rho_d();
    let mut worst_grid: f64 = 0.0;
    for d in 0..drops as u64 {
        let Some(drop) = lift(&mut t, "drop", generate_drop(&toy, derive_seed(seed, d))) else {
            continue;
        };
        let ls = &drop.large_scale;
        if let Some(coeff) = lift(&mut t, "coefficients", sp_coefficients(ls, &toy)) {
            let v = varrho_of_mu(&coeff, &[0.5, 0.5]).expect("shapes match");
            if let Some(out) = lift(
                &mut t,
                "bisection",
                bisect_max_min(&v, &coeff.beta_sum, rho, 1e-6, None, backend),
            ) {
                let grid = grid_max_min_2x2(&v, &coeff.beta_sum, rho);
                let rel = (out.t - grid) / grid;
                worst_grid = worst_grid.max(rel.abs());
                t.check(rel.abs() < 0.02, || {
                    format!("drop {d} sp bisection {} vs grid {grid}", out.t)
                });
            }
        }
        if let Some(sol) = lift(&mut t, "ep max-min", maxmin_ep(ls, &toy, backend)) {
            if let Some(stats) = lift(&mut t, "ep stats", gamma_ep(ls, &toy, &UserSnrs::ep_default(&toy))) {
                let grid = grid_max_min_2x2(&stats.varrho, &stats.beta_sum, rho);
                let rel = (sol.t - grid) / grid;
                worst_grid = worst_grid.max(rel.abs());
                t.check(rel.abs() < 0.02, || {
                    format!("drop {d} ep max-min {} vs grid {grid}", sol.t)
                });
            }
        }
    }

    let single = SystemConfig {
        num_aps: 1,
        num_users: 1,
        ..SystemConfig::default()
    };
    let margin = single.solver.mu_margin;
    let mut worst_sca: f64 = 0.0;
    for (d, load) in [0.3, 0.6, 0.95].into_iter().enumerate() {
        let Some(drop) = lift(
            &mut t,
            "drop",
            generate_drop(&single, derive_seed(seed ^ 0x1, d as u64)),
        ) else {
            continue;
        };
        let ls: &LargeScaleState = &drop.large_scale;
        let Some(coeff) = lift(&mut t, "coefficients", sp_coefficients(ls, &single)) else {
            continue;
        };
        let v0 = varrho_of_mu(&coeff, &[0.5]).expect("shapes match");
        let eta = RealMatrix::filled(1, 1, load / v0[(0, 0)]);
        let sinr_at = |mu: f64| {
            let v = RealMatrix::filled(1, 1, coeff.varrho_link(0, 0, mu));
            if eta[(0, 0)] * v[(0, 0)] > 1.0 {
                f64::NEG_INFINITY
            } else {
                sinr_unchecked(&eta, &v, &coeff.beta_sum, rho, 0)
            }
        };
        let oracle = golden_max(sinr_at, margin, 1.0 - margin);
        if let Some(out) = lift(
            &mut t,
            "sca",
            sca_pilot_data(&eta, &v0, &coeff, rho, margin, 1e-12, 200, backend),
        ) {
            let rel = (out.t - oracle).abs() / oracle;
            worst_sca = worst_sca.max(rel);
            t.check(rel < 1e-4, || format!("load {load}: sca {} vs golden {oracle}", out.t));
            t.check(monotone(&out.trace), || format!("load {load}: sca trace not monotone"));
        }
    }
    t.note(format!(
        "worst grid gap {:.3}%, worst sca gap {worst_sca:.1e}",
        100.0 * worst_grid
    ));
    t.finish()
}

pub fn monotone(trace: &[f64]) -> bool {
    trace.windows(2).all(|w| w[1] >= w[0] - TRACE_SLACK)
}

// ---------------------------------------------------------------------------
// OTFS transforms and effective channel

pub fn otfs_identities(max_dim: usize, seed: u64) -> SuiteReport {
    let mut t = Tally::new("otfs_identities");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap = max_dim * max_dim;
    for m in 1..=max_dim {
        for n in 1..=max_dim {
            let data = (0..m * n)
                .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let x = DdGrid::from_vector(m, n, data).expect("sizes match");
            let tf = isfft(&x);
            let scale = x.frobenius_norm().max(1.0);
            t.check((tf.frobenius_norm() - x.frobenius_norm()).abs() < 1e-12 * scale, || {
                format!("{m}x{n}: isfft changes the norm")
            });
            let back = sfft(&tf);
            let err = back
                .as_vector()
                .iter()
                .zip(x.as_vector())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            t.check(err < 1e-12, || format!("{m}x{n}: sfft(isfft(x)) off by {err:e}"));

            let Some(id) = lift(
                &mut t,
                "zero tap",
                tap_operator(
                    &PathTap {
                        delay: 0,
                        doppler: 0,
                        frac: 0.0,
                    },
                    m,
                    n,
                    cap,
                ),
            ) else {
                continue;
            };
            t.check(id.max_abs_diff(&ComplexMatrix::identity(m * n)) < 1e-12, || {
                format!("{m}x{n}: zero tap is not the identity")
            });

            let tap = PathTap {
                delay: rng.random_range(0..m),
                doppler: rng.random_range(-(n as i32) / 2..=(n as i32) / 2),
                frac: rng.random::<f64>() - 0.5,
            };
            let Some(op) = lift(&mut t, "tap", tap_operator(&tap, m, n, cap)) else {
                continue;
            };
            let gram = op.mul_adjoint(&op);
            t.check(gram.max_abs_diff(&ComplexMatrix::identity(m * n)) < 1e-10, || {
                format!("{m}x{n} {tap:?}: operator is not unitary")
            });
            let dense = dense_tap_reference(&tap, m, n);
            t.check(op.max_abs_diff(&dense) < 1e-10, || {
                format!("{m}x{n} {tap:?}: disagrees with dense construction")
            });
        }
    }
    t.note(format!("all M, N <= {max_dim}"));
    t.finish()
}

/// `(F_N kron I_M) Pi^delay Delta (F_N kron I_M)^H` built from explicit
/// dense factors.
pub fn dense_tap_reference(tap: &PathTap, m: usize, n: usize) -> ComplexMatrix {
    let size = m * n;
    let zero = Complex64::new(0.0, 0.0);
    let fkron = ComplexMatrix::from_fn(size, size, |r, c| {
        if r % m != c % m {
            return zero;
        }
        Complex64::cis(-2.0 * PI * ((r / m) * (c / m)) as f64 / n as f64) / (n as f64).sqrt()
    });
    let nu = tap.doppler as f64 + tap.frac;
    let shift_phase = ComplexMatrix::from_fn(size, size, |r, c| {
        if r == (c + tap.delay) % size {
            Complex64::cis(2.0 * PI * nu * c as f64 / size as f64)
        } else {
            zero
        }
    });
    fkron.mul(&shift_phase).mul(&fkron.adjoint())
}

// ---------------------------------------------------------------------------
// Desk-scale evidence

/// Checks of one bisection optimum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BisectionCheck {
    pub iterations: usize,
    pub expected_iterations: usize,
    pub final_width: f64,
    pub max_load: f64,
    /// `max SINR - min SINR` at the returned powers.
    pub spread: f64,
    pub t: f64,
}

impl BisectionCheck {
    fn of(out: &BisectionOutcome, varrho: &RealMatrix, beta_sum: &RealMatrix, rho: f64, eps: f64) -> Self {
        let (lo, hi) = out.initial_bracket;
        let sinr = sinr_vector(&out.eta, varrho, beta_sum, rho);
        let max = sinr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = sinr.iter().cloned().fold(f64::INFINITY, f64::min);
        BisectionCheck {
            iterations: out.iterations,
            expected_iterations: bisection_steps(hi - lo, eps),
            final_width: out.final_bracket.1 - out.final_bracket.0,
            max_load: ap_loads(&out.eta, varrho).into_iter().fold(0.0, f64::max),
            spread: max - min,
            t: out.t,
        }
    }
}

/// Everything measured on one desk-scale drop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeskDrop {
    pub drop: usize,
    pub seed: u64,
    pub sp_bisection: BisectionCheck,
    pub ep_bisection: Option<BisectionCheck>,
    pub sca_trace: Vec<f64>,
    pub joint_trace: Vec<f64>,
    pub joint_max_load: f64,
    /// Minimum SE per scheme, in [`AllocationScheme::ALL`] order.
    pub min_se: Vec<f64>,
    /// Per-user SE per scheme, in [`AllocationScheme::ALL`] order.
    pub se: Vec<Vec<f64>>,
    pub converged: Vec<bool>,
}

impl DeskDrop {
    pub fn min_se_of(&self, s: AllocationScheme) -> f64 {
        self.min_se[scheme_index(s)]
    }
}

fn scheme_index(s: AllocationScheme) -> usize {
    AllocationScheme::ALL
        .iter()
        .position(|x| *x == s)
        .expect("every scheme is listed")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeskEvidence {
    pub cfg: SystemConfig,
    pub drops: Vec<DeskDrop>,
    pub errors: Vec<String>,
    pub elapsed_s: f64,
}

fn desk_drop(cfg: &SystemConfig, drop: usize, seed: u64, backend: &dyn ConicBackend) -> Result<DeskDrop, String> {
    let err = |e: cellfree_otfs_core::Error| format!("drop {drop}: {e}");
    let rho = cfg.rho_d();
    let eps = cfg.solver.eps_bisection;
    let ls = generate_drop(cfg, seed).map_err(err)?.large_scale;

    let coeff = sp_coefficients(&ls, cfg).map_err(err)?;
    let v_half = varrho_of_mu(&coeff, &vec![0.5; cfg.num_users]).map_err(err)?;
    let pct = bisect_max_min(&v_half, &coeff.beta_sum, rho, eps, None, backend).map_err(err)?;
    let sp_bisection = BisectionCheck::of(&pct, &v_half, &coeff.beta_sum, rho, eps);

    let ep_fits = guard_budget_for(cfg)
        .map(|g| cfg.num_users <= g.k_u_max)
        .unwrap_or(false);
    let ep_bisection = if ep_fits {
        let stats = gamma_ep(&ls, cfg, &UserSnrs::ep_default(cfg)).map_err(err)?;
        let out = bisect_max_min(&stats.varrho, &stats.beta_sum, rho, eps, None, backend).map_err(err)?;
        Some(BisectionCheck::of(&out, &stats.varrho, &stats.beta_sum, rho, eps))
    } else {
        None
    };

    let sp = &cfg.solver;
    let sca = sca_pilot_data(
        &pct.eta,
        &v_half,
        &coeff,
        rho,
        sp.mu_margin,
        sp.eps_sca,
        sp.max_iterations,
        backend,
    )
    .map_err(err)?;
    let joint = alternate_maxmin_sp(&ls, cfg, backend).map_err(err)?;
    let joint_max_load = ap_loads(&joint.solution.eta, &joint.solution.varrho)
        .into_iter()
        .fold(0.0, f64::max);
    debug_assert!(
        (min_sinr(&joint.solution.eta, &joint.solution.varrho, &coeff.beta_sum, rho) - joint.solution.t).abs()
            <= 1e-9 * joint.solution.t.max(1.0)
    );

    let mut min_se = Vec::new();
    let mut se = Vec::new();
    let mut converged = Vec::new();
    for scheme in AllocationScheme::ALL {
        let ev = evaluate_large_scale(&ls, cfg, seed, scheme, backend).map_err(err)?;
        min_se.push(ev.min_se);
        converged.push(ev.status == cellfree_otfs_core::power_control::SolveStatus::Converged);
        se.push(ev.se);
    }
    Ok(DeskDrop {
        drop,
        seed,
        sp_bisection,
        ep_bisection,
        sca_trace: sca.trace,
        joint_trace: joint.solution.trace,
        joint_max_load,
        min_se,
        se,
        converged,
    })
}

/// Solves `drops` random drops of `cfg` with every scheme and records the
/// quantities the structural and trend suites look at.
pub fn desk_evidence(cfg: &SystemConfig, drops: usize, seed: u64, backend: &dyn ConicBackend) -> DeskEvidence {
    let start = Instant::now();
    let results: Vec<Result<DeskDrop, String>> = (0..drops)
        .into_par_iter()
        .map(|d| desk_drop(cfg, d, derive_seed(seed, d as u64), backend))
        .collect();
    let mut out = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(d) => out.push(d),
            Err(e) => errors.push(e),
        }
    }
    DeskEvidence {
        cfg: cfg.clone(),
        drops: out,
        errors,
        elapsed_s: start.elapsed().as_secs_f64(),
    }
}

/// Per-AP power, equal-SINR spread, iteration count and monotone traces.
pub fn structural_invariants(ev: &DeskEvidence) -> SuiteReport {
    let mut t = Tally::new("structural_invariants");
    for e in &ev.errors {
        t.check(false, || e.clone());
    }
    let eps = ev.cfg.solver.eps_bisection;
    let mut worst_load: f64 = 0.0;
    let mut worst_spread: f64 = 0.0;
    for d in &ev.drops {
        let checks = [
            Some(("sp", &d.sp_bisection)),
            d.ep_bisection.as_ref().map(|b| ("ep", b)),
        ];
        for (label, b) in checks.into_iter().flatten() {
            worst_load = worst_load.max(b.max_load - 1.0);
            worst_spread = worst_spread.max(b.spread);
            t.check(b.max_load <= 1.0 + POWER_RESIDUAL, || {
                format!("drop {} {label}: AP load {}", d.drop, b.max_load)
            });
            t.check(b.spread < 10.0 * eps, || {
                format!("drop {} {label}: SINR spread {}", d.drop, b.spread)
            });
            t.check(b.iterations == b.expected_iterations, || {
                format!(
                    "drop {} {label}: {} iterations, expected {}",
                    d.drop, b.iterations, b.expected_iterations
                )
            });
            t.check(b.final_width <= eps * (1.0 + 1e-12), || {
                format!("drop {} {label}: final bracket width {}", d.drop, b.final_width)
            });
        }
        worst_load = worst_load.max(d.joint_max_load - 1.0);
        t.check(d.joint_max_load <= 1.0 + POWER_RESIDUAL, || {
            format!("drop {}: joint AP load {}", d.drop, d.joint_max_load)
        });
        t.check(monotone(&d.sca_trace), || {
            format!("drop {}: sca trace {:?}", d.drop, d.sca_trace)
        });
        t.check(monotone(&d.joint_trace), || {
            format!("drop {}: alternating trace {:?}", d.drop, d.joint_trace)
        });
    }
    t.note(format!(
        "{} drops, worst AP overshoot {worst_load:.1e}, worst SINR spread {worst_spread:.1e}",
        ev.drops.len()
    ));
    t.finish()
}

/// Numbers behind the qualitative trend checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendSummary {
    pub sp_joint_95: f64,
    pub sp_pct_95: f64,
    pub sp_uniform_95: f64,
    pub ep_95: f64,
    pub ep_uniform_95: f64,
    pub sp_dominance_violations: usize,
}

pub fn trend_summary(ev: &DeskEvidence) -> Option<TrendSummary> {
    let p5 = |s: AllocationScheme| {
        let pooled: Vec<f64> = ev
            .drops
            .iter()
            .flat_map(|d| d.se[scheme_index(s)].iter().copied())
            .collect();
        stats_from_samples(pooled).ok().map(|st| st.likely_95())
    };
    let violations = ev
        .drops
        .iter()
        .filter(|d| d.converged[scheme_index(AllocationScheme::SpJoint)])
        .filter(|d| d.min_se_of(AllocationScheme::SpJoint) <= d.min_se_of(AllocationScheme::UniformSp))
        .count();
    Some(TrendSummary {
        sp_joint_95: p5(AllocationScheme::SpJoint)?,
        sp_pct_95: p5(AllocationScheme::SpPctOnly)?,
        sp_uniform_95: p5(AllocationScheme::UniformSp)?,
        ep_95: p5(AllocationScheme::Ep)?,
        ep_uniform_95: p5(AllocationScheme::UniformEp)?,
        sp_dominance_violations: violations,
    })
}

/// Optimized against uniform power, joint against power-only optimization.
pub fn qualitative_trends(ev: &DeskEvidence) -> SuiteReport {
    let mut t = Tally::new("qualitative_trends");
    for e in &ev.errors {
        t.check(false, || e.clone());
    }
    let Some(s) = trend_summary(ev) else {
        t.check(false, || "no drops to summarize".into());
        return t.finish();
    };
    t.check(s.sp_dominance_violations == 0, || {
        format!(
            "joint SP failed to beat uniform SP on {} drops",
            s.sp_dominance_violations
        )
    });
    let sp_ratio = s.sp_joint_95 / s.sp_uniform_95;
    let ep_ratio = s.ep_95 / s.ep_uniform_95;
    t.check(sp_ratio > 1.5, || {
        format!("SP optimized/uniform 95%-likely ratio {sp_ratio}")
    });
    t.check(ep_ratio > 1.1, || {
        format!("EP optimized/uniform 95%-likely ratio {ep_ratio}")
    });
    t.check(s.sp_joint_95 > s.sp_pct_95, || {
        format!("joint {} vs power-only {} 95%-likely SE", s.sp_joint_95, s.sp_pct_95)
    });
    t.note(format!(
        "95%-likely SE: sp_joint {:.4}, sp_pct_only {:.4}, uniform_sp {:.4}, ep {:.4}, uniform_ep {:.4}; ratios sp {sp_ratio:.1}, ep {ep_ratio:.2}",
        s.sp_joint_95, s.sp_pct_95, s.sp_uniform_95, s.ep_95, s.ep_uniform_95
    ));
    t.finish()
}

/// Embedded pilots must be reported infeasible exactly for the user counts
/// above the guard budget.
pub fn ep_cutoff(
    base: &SystemConfig,
    users: &[usize],
    drops: usize,
    seed: u64,
    backend: &dyn ConicBackend,
) -> SuiteReport {
    let mut t = Tally::new("ep_cutoff");
    let mut k_u_max = None;
    for &k in users {
        let cfg = SystemConfig {
            num_users: k,
            uplink_power: None,
            ..base.clone()
        };
        let budget = guard_budget_for(&cfg).map(|g| g.k_u_max).unwrap_or(0);
        let expected = (cfg.num_subcarriers * cfg.num_doppler_bins)
            / guard_budget_for(&cfg).map(|g| g.n_guard).unwrap_or(usize::MAX);
        t.check(budget == expected, || {
            format!("guard budget {budget} vs floor(MN/N_guard) {expected}")
        });
        k_u_max = Some(budget);
        for d in 0..drops as u64 {
            let Some(drop) = lift(&mut t, "drop", generate_drop(&cfg, derive_seed(seed, d))) else {
                continue;
            };
            for scheme in [AllocationScheme::Ep, AllocationScheme::UniformEp] {
                let Some(ev) = lift(
                    &mut t,
                    "evaluate",
                    evaluate_large_scale(&drop.large_scale, &cfg, 0, scheme, backend),
                ) else {
                    continue;
                };
                let infeasible = ev.status == cellfree_otfs_core::power_control::SolveStatus::Infeasible;
                t.check(infeasible == (k > budget), || {
                    format!("K_u {k} ({}): infeasible {infeasible}, budget {budget}", scheme.name())
                });
            }
        }
    }
    if let Some(m) = k_u_max {
        t.note(format!("K_u_max {m}; checked {users:?}"));
    }
    t.finish()
}

/// Desk-scale default configuration: 30 APs, 8 users.
pub fn desk_config() -> SystemConfig {
    SystemConfig::default()
}

/// User counts straddling the embedded-pilot cutoff of `cfg`.
pub fn cutoff_sweep(cfg: &SystemConfig) -> Vec<usize> {
    let m = guard_budget_for(cfg).map(|g| g.k_u_max).unwrap_or(1).max(1);
    let mut v = vec![1, m.saturating_sub(1).max(1), m, m + 1, m + 2];
    v.dedup();
    v
}

//! Dense primal-dual interior-point method on the homogeneous self-dual
//! embedding, with Nesterov-Todd scaling and a Mehrotra corrector.
//!
//! Each iteration factors the normal matrix `(W^{-1} A)^T (W^{-1} A)` once
//! and reuses it for the predictor, the corrector and the auxiliary solve
//! that eliminates `d tau`. Everything is dense, which suits the small and
//! medium programs produced by the power-control code.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use super::cones::{self, Scaling};
use super::{Cone, ConeProgram, ConicBackend, ConicError, ConicSolution, ConicStatus};
use crate::linalg::{Cholesky, RealMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct IpmSettings {
    pub max_iterations: usize,
    /// Relative primal and dual feasibility tolerance.
    pub tol_feasibility: f64,
    /// Relative duality-gap tolerance.
    pub tol_gap: f64,
    /// Certificate tolerance for infeasibility detection.
    pub tol_infeasibility: f64,
    /// Looser tolerances accepted as `AlmostSolved` at the iteration cap.
    pub tol_reduced: f64,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    /// Diagonal regularization relative to the largest normal-matrix entry.
    pub regularization: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        IpmSettings {
            max_iterations: 100,
            tol_feasibility: 1e-8,
            tol_gap: 1e-8,
            tol_infeasibility: 1e-8,
            tol_reduced: 1e-6,
            step_fraction: 0.99,
            regularization: 1e-13,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct DenseIpm {
    pub settings: IpmSettings,
}

impl DenseIpm {
    pub fn new(settings: IpmSettings) -> Self {
        DenseIpm { settings }
    }
}

impl ConicBackend for DenseIpm {
    fn name(&self) -> &str {
        "dense-ipm"
    }

    fn solve(&self, program: &ConeProgram) -> Result<ConicSolution, ConicError> {
        program.validate()?;
        Ok(Solver::new(program, &self.settings).run())
    }
}

/// Growth of the residuals over the best iterate that ends the run.
const STALL_FACTOR: f64 = 1e3;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(Float::abs(*v)))
}

/// Block ranges of the cone list.
fn blocks(cones: &[Cone]) -> Vec<(Cone, core::ops::Range<usize>)> {
    let mut at = 0;
    cones
        .iter()
        .map(|&c| {
            let r = at..at + c.dim();
            at += c.dim();
            (c, r)
        })
        .collect()
}

struct Solver<'a> {
    prog: &'a ConeProgram,
    settings: &'a IpmSettings,
    a: RealMatrix,
    blocks: Vec<(Cone, core::ops::Range<usize>)>,
    degree: f64,
    n: usize,
    m: usize,
}

/// Right-hand sides of the reduced Newton system.
struct Rhs {
    x: Vec<f64>,
    z: Vec<f64>,
    tau: f64,
    /// `d_s` in `lambda o (W dz + W^{-1} ds) = -d_s`.
    ds: Vec<f64>,
    dkappa: f64,
}

struct Direction {
    x: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    tau: f64,
    kappa: f64,
}

struct Factor {
    scalings: Vec<Scaling>,
    lambda: Vec<f64>,
    chol: Cholesky,
    normal: Vec<f64>,
    /// Solution of the system with right-hand side `(-c, -b)`.
    x1: Vec<f64>,
    z1: Vec<f64>,
}

impl<'a> Solver<'a> {
    fn new(prog: &'a ConeProgram, settings: &'a IpmSettings) -> Self {
        let (m, n) = (prog.num_rows(), prog.num_vars);
        let mut a = RealMatrix::zeros(m, n);
        for &(r, c, v) in &prog.a {
            a[(r, c)] += v;
        }
        let degree = prog
            .cones
            .iter()
            .map(|c| match c {
                Cone::Nonnegative(d) => *d as f64,
                Cone::SecondOrder(_) => 1.0,
            })
            .sum();
        Solver {
            prog,
            settings,
            a,
            blocks: blocks(&prog.cones),
            degree,
            n,
            m,
        }
    }

    fn ax(&self, x: &[f64]) -> Vec<f64> {
        self.a.mul_vec(x)
    }

    fn atz(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for r in 0..self.m {
            let zr = z[r];
            if zr == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.a.row(r)) {
                *o += a * zr;
            }
        }
        out
    }

    fn scale(&self, scalings: &[Scaling], x: &[f64], inverse: bool) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for ((_, r), w) in self.blocks.iter().zip(scalings) {
            if inverse {
                w.apply_inv(&x[r.clone()], &mut out[r.clone()]);
            } else {
                w.apply(&x[r.clone()], &mut out[r.clone()]);
            }
        }
        out
    }

    /// Least-squares start shifted into the cone interior.
    fn initial_point(&self) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let mut normal = vec![0.0; self.n * self.n];
        for r in 0..self.m {
            let row = self.a.row(r);
            for i in 0..self.n {
                if row[i] == 0.0 {
                    continue;
                }
                for j in 0..=i {
                    normal[i * self.n + j] += row[i] * row[j];
                }
            }
        }
        let scale = (0..self.n).map(|i| normal[i * self.n + i]).fold(1.0, f64::max);
        let chol = Cholesky::factor_slice(self.n, &symmetrize(normal, self.n), 1e-10 * scale).ok()?;
        // x = argmin ||b - A x||, s = b - A x.
        let mut x = self.atz(&self.prog.b);
        chol.solve_in_place(&mut x);
        let mut s = self.prog.slack(&x);
        // z = -A (A^T A)^{-1} c.
        let mut y = self.prog.c.clone();
        chol.solve_in_place(&mut y);
        let mut z: Vec<f64> = self.ax(&y).into_iter().map(|v| -v).collect();
        for v in [&mut s, &mut z] {
            for (cone, r) in &self.blocks {
                let e = cones::min_eig(*cone, &v[r.clone()]);
                if e <= 0.0 {
                    cones::add_identity(*cone, 1.0 - e, &mut v[r.clone()]);
                }
            }
        }
        Some((x, s, z))
    }

    fn factor(&self, s: &[f64], z: &[f64], b: &[f64]) -> Option<Factor> {
        let mut scalings = Vec::with_capacity(self.blocks.len());
        for (cone, r) in &self.blocks {
            scalings.push(Scaling::new(*cone, &s[r.clone()], &z[r.clone()])?);
        }
        let lambda = self.scale(&scalings, z, false);
        // B = W^{-1} A, column by column through each block.
        let mut wa = RealMatrix::zeros(self.m, self.n);
        let mut col = vec![0.0; self.m];
        let mut out = vec![0.0; self.m];
        for j in 0..self.n {
            for r in 0..self.m {
                col[r] = self.a[(r, j)];
            }
            for ((_, rg), w) in self.blocks.iter().zip(&scalings) {
                if col[rg.clone()].iter().all(|v| *v == 0.0) {
                    out[rg.clone()].iter_mut().for_each(|v| *v = 0.0);
                } else {
                    w.apply_inv(&col[rg.clone()], &mut out[rg.clone()]);
                }
            }
            for r in 0..self.m {
                wa[(r, j)] = out[r];
            }
        }
        let mut normal = vec![0.0; self.n * self.n];
        for r in 0..self.m {
            let row = wa.row(r);
            for i in 0..self.n {
                let ri = row[i];
                if ri == 0.0 {
                    continue;
                }
                let dst = &mut normal[i * self.n..i * self.n + i + 1];
                for (d, rj) in dst.iter_mut().zip(&row[..=i]) {
                    *d += ri * rj;
                }
            }
        }
        let normal = symmetrize(normal, self.n);
        let scale = (0..self.n)
            .map(|i| normal[i * self.n + i])
            .fold(0.0, f64::max)
            .max(1e-300);
        let chol = Cholesky::factor_slice(self.n, &normal, self.settings.regularization * scale).ok()?;
        let mut f = Factor {
            scalings,
            lambda,
            chol,
            normal,
            x1: Vec::new(),
            z1: Vec::new(),
        };
        let neg_c: Vec<f64> = self.prog.c.iter().map(|v| -v).collect();
        let neg_b: Vec<f64> = b.iter().map(|v| -v).collect();
        let (x1, z1) = self.solve_kkt(&f, &neg_c, &neg_b);
        f.x1 = x1;
        f.z1 = z1;
        Some(f)
    }

    /// Solves `A^T dz = r1`, `-A dx + W^2 dz = r2`.
    fn solve_kkt(&self, f: &Factor, r1: &[f64], r2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let winv2 = |v: &[f64]| {
            let t = self.scale(&f.scalings, v, true);
            self.scale(&f.scalings, &t, true)
        };
        let w2r2 = winv2(r2);
        let at = self.atz(&w2r2);
        let rhs: Vec<f64> = r1.iter().zip(&at).map(|(a, b)| a - b).collect();
        let mut dx = rhs.clone();
        f.chol.solve_in_place(&mut dx);
        // Two rounds of refinement against the unregularized normal matrix.
        for _ in 0..2 {
            let mut res = rhs.clone();
            for i in 0..self.n {
                res[i] -= dot(&f.normal[i * self.n..(i + 1) * self.n], &dx);
            }
            f.chol.solve_in_place(&mut res);
            for (d, r) in dx.iter_mut().zip(&res) {
                *d += r;
            }
        }
        let adx = self.ax(&dx);
        let t: Vec<f64> = r2.iter().zip(&adx).map(|(a, b)| a + b).collect();
        (dx, winv2(&t))
    }

    fn direction(&self, f: &Factor, rhs: &Rhs, tau: f64, kappa: f64, b: &[f64]) -> Direction {
        // lambda \ d_s, then W (lambda \ d_s).
        let mut ld = vec![0.0; self.m];
        for (cone, r) in &self.blocks {
            cones::jordan_div(*cone, &f.lambda[r.clone()], &rhs.ds[r.clone()], &mut ld[r.clone()]);
        }
        let wld = self.scale(&f.scalings, &ld, false);
        let r2: Vec<f64> = rhs.z.iter().zip(&wld).map(|(a, b)| a - b).collect();
        let (x2, z2) = self.solve_kkt(f, &rhs.x, &r2);
        let c = &self.prog.c;
        let rhs3 = rhs.tau - rhs.dkappa / tau;
        let den = kappa / tau - dot(c, &f.x1) - dot(b, &f.z1);
        let dtau = (rhs3 + dot(c, &x2) + dot(b, &z2)) / den;
        let dx: Vec<f64> = x2.iter().zip(&f.x1).map(|(a, b)| a + dtau * b).collect();
        let dz: Vec<f64> = z2.iter().zip(&f.z1).map(|(a, b)| a + dtau * b).collect();
        let wdz = self.scale(&f.scalings, &dz, false);
        let w2dz = self.scale(&f.scalings, &wdz, false);
        let ds: Vec<f64> = wld.iter().zip(&w2dz).map(|(a, b)| -a - b).collect();
        let dkappa = (-rhs.dkappa - kappa * dtau) / tau;
        Direction {
            x: dx,
            z: dz,
            s: ds,
            tau: dtau,
            kappa: dkappa,
        }
    }

    fn step_length(&self, s: &[f64], z: &[f64], tau: f64, kappa: f64, d: &Direction) -> f64 {
        let mut alpha = 1e30;
        for (cone, r) in &self.blocks {
            alpha = cones::max_step(*cone, &s[r.clone()], &d.s[r.clone()], alpha);
            alpha = cones::max_step(*cone, &z[r.clone()], &d.z[r.clone()], alpha);
        }
        if d.tau < 0.0 {
            alpha = alpha.min(-tau / d.tau);
        }
        if d.kappa < 0.0 {
            alpha = alpha.min(-kappa / d.kappa);
        }
        alpha
    }

    fn run(&self) -> ConicSolution {
        let prog = self.prog;
        let (n, m) = (self.n, self.m);
        let b = &prog.b;
        let c = &prog.c;
        let fail = |status, iterations| ConicSolution {
            status,
            x: vec![0.0; n],
            s: vec![0.0; m],
            z: vec![0.0; m],
            iterations,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
        };
        let Some((mut x, mut s, mut z)) = self.initial_point() else {
            return fail(ConicStatus::NumericalError, 0);
        };
        let (mut tau, mut kappa) = (1.0_f64, 1.0_f64);
        let b_scale = 1.0_f64.max(norm_inf(b));
        let c_scale = 1.0_f64.max(norm_inf(c));
        let mut best: Option<ConicSolution> = None;
        let mut best_merit = f64::INFINITY;

        for iter in 0..=self.settings.max_iterations {
            // Residuals of the embedding.
            let ax = self.ax(&x);
            let atz = self.atz(&z);
            let r_x: Vec<f64> = atz.iter().zip(c).map(|(a, c)| a + c * tau).collect();
            let r_z: Vec<f64> = (0..m).map(|i| -ax[i] + b[i] * tau - s[i]).collect();
            let cx = dot(c, &x);
            let bz = dot(b, &z);
            let r_tau = -cx - bz - kappa;

            let pres = norm_inf(&r_z) / tau / b_scale;
            let dres = norm_inf(&r_x) / tau / c_scale;
            let (pobj, dobj) = (cx / tau, -bz / tau);
            let gap = Float::abs(pobj - dobj) / 1.0_f64.max(Float::abs(pobj).min(Float::abs(dobj)));
            let make = |status| ConicSolution {
                status,
                x: x.iter().map(|v| v / tau).collect(),
                s: s.iter().map(|v| v / tau).collect(),
                z: z.iter().map(|v| v / tau).collect(),
                iterations: iter,
                primal_residual: pres,
                dual_residual: dres,
            };
            let st = self.settings;
            if pres < st.tol_feasibility && dres < st.tol_feasibility && gap < st.tol_gap {
                return make(ConicStatus::Solved);
            }
            // Keep the most accurate reduced-accuracy iterate; once the
            // residuals blow up past it, numerical accuracy is exhausted.
            let merit = pres.max(dres).max(gap);
            if merit < st.tol_reduced && merit < best_merit {
                best_merit = merit;
                best = Some(make(ConicStatus::AlmostSolved));
            } else if best.is_some() && merit > STALL_FACTOR * best_merit {
                break;
            }
            // Infeasibility certificates.
            if bz < 0.0 && norm_inf(&atz) / c_scale <= st.tol_infeasibility * -bz / b_scale.max(1.0) {
                let scale = -bz;
                return ConicSolution {
                    status: ConicStatus::PrimalInfeasible,
                    x: vec![0.0; n],
                    s: vec![0.0; m],
                    z: z.iter().map(|v| v / scale).collect(),
                    iterations: iter,
                    primal_residual: pres,
                    dual_residual: dres,
                };
            }
            if cx < 0.0 {
                let axs: Vec<f64> = ax.iter().zip(&s).map(|(a, s)| a + s).collect();
                if norm_inf(&axs) / b_scale <= st.tol_infeasibility * -cx / c_scale {
                    let scale = -cx;
                    return ConicSolution {
                        status: ConicStatus::DualInfeasible,
                        x: x.iter().map(|v| v / scale).collect(),
                        s: s.iter().map(|v| v / scale).collect(),
                        z: vec![0.0; m],
                        iterations: iter,
                        primal_residual: pres,
                        dual_residual: dres,
                    };
                }
            }
            if iter == st.max_iterations {
                break;
            }

            let Some(f) = self.factor(&s, &z, b) else {
                return best.unwrap_or_else(|| fail(ConicStatus::NumericalError, iter));
            };
            let mu = (dot(&s, &z) + tau * kappa) / (self.degree + 1.0);

            // Predictor.
            let mut ll = vec![0.0; m];
            for (cone, r) in &self.blocks {
                cones::jordan(*cone, &f.lambda[r.clone()], &f.lambda[r.clone()], &mut ll[r.clone()]);
            }
            let aff = Rhs {
                x: r_x.iter().map(|v| -v).collect(),
                z: r_z.iter().map(|v| -v).collect(),
                tau: -r_tau,
                ds: ll.clone(),
                dkappa: tau * kappa,
            };
            let da = self.direction(&f, &aff, tau, kappa, b);
            let alpha_aff = self.step_length(&s, &z, tau, kappa, &da).min(1.0);
            let sigma = Float::powi(1.0 - alpha_aff, 3);

            // Corrector: d_s = lambda o lambda + (W^{-1} ds_a) o (W dz_a) - sigma mu e.
            let wids = self.scale(&f.scalings, &da.s, true);
            let wdz = self.scale(&f.scalings, &da.z, false);
            let mut ds = vec![0.0; m];
            for (cone, r) in &self.blocks {
                cones::jordan(*cone, &wids[r.clone()], &wdz[r.clone()], &mut ds[r.clone()]);
                cones::add_identity(*cone, -sigma * mu, &mut ds[r.clone()]);
            }
            for (d, l) in ds.iter_mut().zip(&ll) {
                *d += l;
            }
            let eta = 1.0 - sigma;
            let comb = Rhs {
                x: r_x.iter().map(|v| -eta * v).collect(),
                z: r_z.iter().map(|v| -eta * v).collect(),
                tau: -eta * r_tau,
                ds,
                dkappa: tau * kappa + da.tau * da.kappa - sigma * mu,
            };
            let d = self.direction(&f, &comb, tau, kappa, b);
            let step = (self.settings.step_fraction * self.step_length(&s, &z, tau, kappa, &d)).min(1.0);
            if !(step > 0.0) || !step.is_finite() {
                return best.unwrap_or_else(|| fail(ConicStatus::NumericalError, iter));
            }
            for (v, dv) in x.iter_mut().zip(&d.x) {
                *v += step * dv;
            }
            for (v, dv) in s.iter_mut().zip(&d.s) {
                *v += step * dv;
            }
            for (v, dv) in z.iter_mut().zip(&d.z) {
                *v += step * dv;
            }
            tau += step * d.tau;
            kappa += step * d.kappa;
            if !(tau > 0.0 && kappa > 0.0) || x.iter().any(|v| !v.is_finite()) {
                return best.unwrap_or_else(|| fail(ConicStatus::NumericalError, iter));
            }
        }
        best.unwrap_or_else(|| fail(ConicStatus::MaxIterations, self.settings.max_iterations))
    }
}

/// Mirrors the lower triangle of a row-major square matrix.
fn symmetrize(mut a: Vec<f64>, n: usize) -> Vec<f64> {
    for i in 0..n {
        for j in 0..i {
            a[j * n + i] = a[i * n + j];
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn solve(p: &ConeProgram) -> ConicSolution {
        DenseIpm::default().solve(p).unwrap()
    }

    #[test]
    fn small_lp() {
        // min -x1 - x2  s.t. x1 + 2 x2 <= 4, 3 x1 + x2 <= 6, x >= 0.
        let mut p = ConeProgram::new(2);
        p.c = vec![-1.0, -1.0];
        p.push_block(
            Cone::Nonnegative(4),
            &[
                vec![(0, 1.0), (1, 2.0)],
                vec![(0, 3.0), (1, 1.0)],
                vec![(0, -1.0)],
                vec![(1, -1.0)],
            ],
            &[4.0, 6.0, 0.0, 0.0],
        );
        let sol = solve(&p);
        assert_eq!(sol.status, ConicStatus::Solved);
        assert!(
            (sol.x[0] - 1.6).abs() < 1e-7 && (sol.x[1] - 1.2).abs() < 1e-7,
            "{:?}",
            sol.x
        );
    }

    #[test]
    fn projection_onto_disc() {
        // min t  s.t. ||(x - 3, y - 4)|| <= t  with  x^2 + y^2 <= 1.
        let mut p = ConeProgram::new(3);
        p.c = vec![0.0, 0.0, 1.0];
        p.push_block(
            Cone::SecondOrder(3),
            &[vec![(2, -1.0)], vec![(0, -1.0)], vec![(1, -1.0)]],
            &[0.0, -3.0, -4.0],
        );
        p.push_block(
            Cone::SecondOrder(3),
            &[vec![], vec![(0, -1.0)], vec![(1, -1.0)]],
            &[1.0, 0.0, 0.0],
        );
        let sol = solve(&p);
        assert_eq!(sol.status, ConicStatus::Solved);
        assert!((sol.x[2] - 4.0).abs() < 1e-7);
        assert!((sol.x[0] - 0.6).abs() < 1e-6 && (sol.x[1] - 0.8).abs() < 1e-6);
        assert!(p.max_violation(&sol.x) < 1e-7);
    }

    #[test]
    fn detects_primal_infeasibility() {
        // x >= 1 and x <= 0.
        let mut p = ConeProgram::new(1);
        p.c = vec![1.0];
        p.push_block(Cone::Nonnegative(2), &[vec![(0, -1.0)], vec![(0, 1.0)]], &[-1.0, 0.0]);
        assert_eq!(solve(&p).status, ConicStatus::PrimalInfeasible);
    }

    #[test]
    fn detects_unboundedness() {
        // min -x  s.t. x >= 0.
        let mut p = ConeProgram::new(1);
        p.c = vec![-1.0];
        p.push_block(Cone::Nonnegative(1), &[vec![(0, -1.0)]], &[0.0]);
        assert_eq!(solve(&p).status, ConicStatus::DualInfeasible);
    }
}

//! Per-cone algebra for the interior-point method: Nesterov-Todd scaling,
//! Jordan products and step lengths.

use alloc::vec::Vec;

use num_traits::Float;

use super::Cone;

/// NT scaling of one cone block. `W` is symmetric for both cone types.
#[derive(Debug, Clone)]
pub(crate) enum Scaling {
    /// `W = diag(w)` with `w = sqrt(s / z)`.
    Nonnegative(Vec<f64>),
    /// `W = beta (2 v v^T - J)` with `J = diag(1, -1, ..., -1)`.
    SecondOrder { beta: f64, v: Vec<f64> },
}

/// `t^2 - ||u||^2`, factored to avoid cancellation near the boundary.
fn soc_det(x: &[f64]) -> f64 {
    let nu = Float::sqrt(x[1..].iter().map(|v| v * v).sum::<f64>());
    (x[0] - nu) * (x[0] + nu)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Scaling {
    /// Scaling with `W z = W^{-1} s`; `None` if either point left the cone.
    pub(crate) fn new(cone: Cone, s: &[f64], z: &[f64]) -> Option<Scaling> {
        match cone {
            Cone::Nonnegative(_) => {
                if s.iter().chain(z).any(|v| !(*v > 0.0)) {
                    return None;
                }
                Some(Scaling::Nonnegative(
                    s.iter().zip(z).map(|(s, z)| Float::sqrt(s / z)).collect(),
                ))
            }
            Cone::SecondOrder(_) => {
                let (ds, dz) = (soc_det(s), soc_det(z));
                if !(ds > 0.0 && dz > 0.0 && s[0] > 0.0 && z[0] > 0.0) {
                    return None;
                }
                let (ns, nz) = (Float::sqrt(ds), Float::sqrt(dz));
                let beta = Float::sqrt(ns / nz);
                let sb: Vec<f64> = s.iter().map(|v| v / ns).collect();
                let zb: Vec<f64> = z.iter().map(|v| v / nz).collect();
                let gamma = Float::sqrt((1.0 + dot(&sb, &zb)) / 2.0);
                // w = (s_bar + J z_bar) / (2 gamma)
                let mut w: Vec<f64> = sb.iter().zip(&zb).map(|(a, b)| (a - b) / (2.0 * gamma)).collect();
                w[0] = (sb[0] + zb[0]) / (2.0 * gamma);
                let denom = Float::sqrt(2.0 * (w[0] + 1.0));
                let mut v = w;
                v[0] += 1.0;
                v.iter_mut().for_each(|x| *x /= denom);
                Some(Scaling::SecondOrder { beta, v })
            }
        }
    }

    /// `out = W x`.
    pub(crate) fn apply(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Nonnegative(w) => {
                for ((o, x), w) in out.iter_mut().zip(x).zip(w) {
                    *o = w * x;
                }
            }
            Scaling::SecondOrder { beta, v } => {
                let vx = dot(v, x);
                for k in 0..x.len() {
                    let jx = if k == 0 { x[0] } else { -x[k] };
                    out[k] = beta * (2.0 * v[k] * vx - jx);
                }
            }
        }
    }

    /// `out = W^{-1} x`.
    pub(crate) fn apply_inv(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Nonnegative(w) => {
                for ((o, x), w) in out.iter_mut().zip(x).zip(w) {
                    *o = x / w;
                }
            }
            Scaling::SecondOrder { beta, v } => {
                // W^{-1} = (2 J v v^T J - J) / beta
                let jv0 = v[0];
                let vjx = jv0 * x[0] - dot(&v[1..], &x[1..]);
                for k in 0..x.len() {
                    let (jv, jx) = if k == 0 { (v[0], x[0]) } else { (-v[k], -x[k]) };
                    out[k] = (2.0 * jv * vjx - jx) / beta;
                }
            }
        }
    }
}

/// Jordan product `out = u o w`.
pub(crate) fn jordan(cone: Cone, u: &[f64], w: &[f64], out: &mut [f64]) {
    match cone {
        Cone::Nonnegative(_) => {
            for ((o, a), b) in out.iter_mut().zip(u).zip(w) {
                *o = a * b;
            }
        }
        Cone::SecondOrder(_) => {
            out[0] = dot(u, w);
            for k in 1..u.len() {
                out[k] = u[0] * w[k] + w[0] * u[k];
            }
        }
    }
}

/// Solves `lambda o x = d` for `x`.
pub(crate) fn jordan_div(cone: Cone, lambda: &[f64], d: &[f64], out: &mut [f64]) {
    match cone {
        Cone::Nonnegative(_) => {
            for ((o, l), d) in out.iter_mut().zip(lambda).zip(d) {
                *o = d / l;
            }
        }
        Cone::SecondOrder(_) => {
            let l0 = lambda[0];
            let ld = dot(&lambda[1..], &d[1..]);
            let x0 = (l0 * d[0] - ld) / soc_det(lambda);
            out[0] = x0;
            for k in 1..lambda.len() {
                out[k] = (d[k] - x0 * lambda[k]) / l0;
            }
        }
    }
}

/// Adds `alpha e` where `e` is the cone identity.
pub(crate) fn add_identity(cone: Cone, alpha: f64, x: &mut [f64]) {
    match cone {
        Cone::Nonnegative(_) => x.iter_mut().for_each(|v| *v += alpha),
        Cone::SecondOrder(_) => x[0] += alpha,
    }
}

/// Smallest "eigenvalue": `min x_i`, or `t - ||u||`.
pub(crate) fn min_eig(cone: Cone, x: &[f64]) -> f64 {
    match cone {
        Cone::Nonnegative(_) => x.iter().cloned().fold(f64::INFINITY, f64::min),
        Cone::SecondOrder(_) => x[0] - Float::sqrt(x[1..].iter().map(|v| v * v).sum::<f64>()),
    }
}

/// Largest `alpha` (capped at `cap`) keeping `x + alpha dx` in the cone.
pub(crate) fn max_step(cone: Cone, x: &[f64], dx: &[f64], cap: f64) -> f64 {
    match cone {
        Cone::Nonnegative(_) => x
            .iter()
            .zip(dx)
            .filter(|(_, d)| **d < 0.0)
            .map(|(x, d)| -x / d)
            .fold(cap, f64::min),
        Cone::SecondOrder(_) => {
            // (t + a dt)^2 - ||u + a du||^2 >= 0 and t + a dt >= 0.
            let qa = soc_det(dx);
            let qb = x[0] * dx[0] - dot(&x[1..], &dx[1..]);
            let qc = soc_det(x).max(0.0);
            let mut alpha = cap;
            if dx[0] < 0.0 {
                alpha = alpha.min(-x[0] / dx[0]);
            }
            // Smallest positive root of qa a^2 + 2 qb a + qc.
            let disc = qb * qb - qa * qc;
            let root = if qa == 0.0 {
                if qb < 0.0 {
                    -qc / (2.0 * qb)
                } else {
                    f64::INFINITY
                }
            } else if disc < 0.0 {
                f64::INFINITY
            } else {
                let sq = Float::sqrt(disc);
                // Roots r1 r2 = qc / qa, computed without cancellation.
                let t = -(qb + if qb >= 0.0 { sq } else { -sq });
                let (r1, r2) = if t != 0.0 {
                    (t / qa, qc / t)
                } else {
                    (f64::INFINITY, f64::INFINITY)
                };
                [r1, r2].into_iter().filter(|r| *r > 0.0).fold(f64::INFINITY, f64::min)
            };
            alpha.min(root)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn soc(x: &[f64]) -> bool {
        min_eig(Cone::SecondOrder(x.len()), x) >= -1e-12
    }

    #[test]
    fn nt_scaling_maps_z_and_s_to_same_point() {
        let cone = Cone::SecondOrder(4);
        let s = [3.0, 1.0, -0.5, 2.0];
        let z = [2.0, -0.3, 0.8, 0.1];
        let w = Scaling::new(cone, &s, &z).unwrap();
        let mut wz = vec![0.0; 4];
        let mut wis = vec![0.0; 4];
        w.apply(&z, &mut wz);
        w.apply_inv(&s, &mut wis);
        for k in 0..4 {
            assert!((wz[k] - wis[k]).abs() < 1e-12, "{wz:?} {wis:?}");
        }
        // W W^{-1} = I
        let x = [0.3, -1.2, 0.4, 0.9];
        let mut t = vec![0.0; 4];
        let mut back = vec![0.0; 4];
        w.apply_inv(&x, &mut t);
        w.apply(&t, &mut back);
        for k in 0..4 {
            assert!((back[k] - x[k]).abs() < 1e-12);
        }
        let cone = Cone::Nonnegative(2);
        let w = Scaling::new(cone, &[4.0, 1.0], &[1.0, 9.0]).unwrap();
        let mut a = vec![0.0; 2];
        let mut b = vec![0.0; 2];
        w.apply(&[1.0, 9.0], &mut a);
        w.apply_inv(&[4.0, 1.0], &mut b);
        assert_eq!(a, b);
    }

    #[test]
    fn jordan_division_inverts_product() {
        let cone = Cone::SecondOrder(3);
        let l = [2.0, 0.5, -1.0];
        let x = [0.7, 0.2, 1.5];
        let mut d = vec![0.0; 3];
        jordan(cone, &l, &x, &mut d);
        let mut back = vec![0.0; 3];
        jordan_div(cone, &l, &d, &mut back);
        for k in 0..3 {
            assert!((back[k] - x[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn step_reaches_cone_boundary() {
        let cone = Cone::SecondOrder(3);
        let x = [2.0, 0.0, 0.0];
        let dx = [-1.0, 1.0, 0.0];
        let a = max_step(cone, &x, &dx, 10.0);
        // (2 - a)^2 = a^2  =>  a = 1
        assert!((a - 1.0).abs() < 1e-12);
        let y: Vec<f64> = x.iter().zip(&dx).map(|(x, d)| x + a * d).collect();
        assert!(soc(&y));
        assert_eq!(max_step(cone, &x, &[1.0, 0.0, 0.0], 10.0), 10.0);
        let n = Cone::Nonnegative(2);
        assert_eq!(max_step(n, &[1.0, 2.0], &[-2.0, 1.0], 1.0), 0.5);
    }
}

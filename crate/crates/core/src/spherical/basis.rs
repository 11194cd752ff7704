use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::check_dim;

/// Label of one eigenfunction.
///
/// In the plane `index` is 0 for `cos kθ` and 1 for `sin kθ`; on the
/// two-sphere it is the order `m ∈ [-l, l]` of the real harmonic, negative
/// orders carrying `sin(|m|φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mode {
    pub degree: usize,
    pub index: i64,
}

/// Orthonormal Laplace–Beltrami eigenbasis of the unit sphere in `R^d`,
/// truncated at degree `cutoff`.
#[derive(Debug, Clone)]
pub struct Basis {
    dim: usize,
    cutoff: usize,
    modes: Vec<Mode>,
}

impl Basis {
    pub fn new(dim: usize, cutoff: usize) -> Result<Self> {
        check_dim(dim)?;
        let mut modes = Vec::new();
        for k in 0..=cutoff {
            if dim == 2 {
                modes.push(Mode { degree: k, index: 0 });
                if k > 0 {
                    modes.push(Mode { degree: k, index: 1 });
                }
            } else {
                for m in -(k as i64)..=(k as i64) {
                    modes.push(Mode { degree: k, index: m });
                }
            }
        }
        Ok(Self { dim, cutoff, modes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn mode(&self, j: usize) -> Mode {
        self.modes[j]
    }

    /// Position of a mode in the ordering, if within the cutoff.
    pub fn position(&self, mode: Mode) -> Option<usize> {
        let k = mode.degree;
        if k > self.cutoff {
            return None;
        }
        if self.dim == 2 {
            match (k, mode.index) {
                (0, 0) => Some(0),
                (0, _) => None,
                (_, i @ (0 | 1)) => Some(2 * k - 1 + i as usize),
                _ => None,
            }
        } else {
            let m = mode.index;
            if m.unsigned_abs() as usize > k {
                return None;
            }
            Some(k * k + (m + k as i64) as usize)
        }
    }

    pub fn eigenvalue(&self, j: usize) -> f64 {
        eigenvalue(self.dim, self.modes[j].degree)
    }

    /// Index range of all modes of one degree.
    pub fn degree_range(&self, k: usize) -> std::ops::Range<usize> {
        if self.dim == 2 {
            if k == 0 {
                0..1
            } else {
                (2 * k - 1)..(2 * k + 1)
            }
        } else {
            (k * k)..((k + 1) * (k + 1))
        }
    }

    /// Mode index of the degree-one function proportional to `x_axis`.
    pub fn degree_one_mode(&self, axis: usize) -> usize {
        if self.dim == 2 {
            1 + axis
        } else {
            // m = 1 ↔ x, m = -1 ↔ y, m = 0 ↔ z
            match axis {
                0 => 3,
                1 => 1,
                _ => 2,
            }
        }
    }

    /// Values of every basis function at the unit vector `theta`.
    pub fn eval(&self, theta: &[f64], out: &mut [f64]) {
        self.eval_inner(theta, out, None);
    }

    /// Values and tangential gradients (ambient coordinates, `d` entries per
    /// mode) at the unit vector `theta`.
    pub fn eval_with_gradient(&self, theta: &[f64], out: &mut [f64], grad: &mut [f64]) {
        self.eval_inner(theta, out, Some(grad));
    }

    fn eval_inner(&self, theta: &[f64], out: &mut [f64], grad: Option<&mut [f64]>) {
        if self.dim == 2 {
            eval_circle(self.cutoff, theta, out, grad);
        } else {
            eval_sphere(self.cutoff, theta, out, grad);
        }
    }
}

/// `k(k + d - 2)`.
pub fn eigenvalue(dim: usize, degree: usize) -> f64 {
    (degree * (degree + dim - 2)) as f64
}

fn eval_circle(cutoff: usize, theta: &[f64], out: &mut [f64], grad: Option<&mut [f64]>) {
    let t = theta[1].atan2(theta[0]);
    let tangent = [-t.sin(), t.cos()];
    let c0 = 1.0 / (2.0 * PI).sqrt();
    let ck = 1.0 / PI.sqrt();
    out[0] = c0;
    for k in 1..=cutoff {
        let kt = k as f64 * t;
        out[2 * k - 1] = ck * kt.cos();
        out[2 * k] = ck * kt.sin();
    }
    if let Some(g) = grad {
        g[0] = 0.0;
        g[1] = 0.0;
        for k in 1..=cutoff {
            let kf = k as f64;
            let kt = kf * t;
            let dc = -ck * kf * kt.sin();
            let ds = ck * kf * kt.cos();
            let (a, b) = (2 * k - 1, 2 * k);
            g[2 * a] = dc * tangent[0];
            g[2 * a + 1] = dc * tangent[1];
            g[2 * b] = ds * tangent[0];
            g[2 * b + 1] = ds * tangent[1];
        }
    }
}

/// Real spherical harmonics from fully normalized associated Legendre
/// functions. For `m ≥ 1` the recurrence is run on `P̄_l^m / sin θ`, which
/// keeps the gradient finite at the poles.
fn eval_sphere(cutoff: usize, theta: &[f64], out: &mut [f64], grad: Option<&mut [f64]>) {
    let z = theta[2].clamp(-1.0, 1.0);
    let s = (theta[0] * theta[0] + theta[1] * theta[1]).sqrt();
    let phi = if s > 0.0 { theta[1].atan2(theta[0]) } else { 0.0 };
    let n = cutoff + 1;
    // p[l][m]: P̄_l^m for m = 0, P̄_l^m / s for m ≥ 1
    let mut p = vec![0.0; n * n];
    let at = |l: usize, m: usize| l * n + m;
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..n {
        if m > 0 {
            let f = ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
            pmm *= f;
            if m > 1 {
                pmm *= s;
            }
        }
        p[at(m, m)] = pmm;
        if m + 1 < n {
            p[at(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * z * pmm;
        }
        for l in (m + 2)..n {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            p[at(l, m)] = a * (z * p[at(l - 1, m)] - b * p[at(l - 2, m)]);
        }
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    let (cphi, sphi) = (phi.cos(), phi.sin());
    for l in 0..n {
        let base = l * l + l;
        out[base] = p[at(l, 0)];
        for m in 1..=l {
            let mphi = m as f64 * phi;
            let v = sqrt2 * p[at(l, m)] * s;
            out[base + m] = v * mphi.cos();
            out[base - m] = v * mphi.sin();
        }
    }
    let Some(g) = grad else { return };
    let e_theta = [z * cphi, z * sphi, -s];
    let e_phi = [-sphi, cphi, 0.0];
    let mut put = |j: usize, dt: f64, dp: f64| {
        for k in 0..3 {
            g[3 * j + k] = dt * e_theta[k] + dp * e_phi[k];
        }
    };
    for l in 0..n {
        let base = l * l + l;
        let lf = l as f64;
        // m = 0: ∂θ P̄_l = -s dP̄_l/dz = -sqrt(l(l+1)) s (P̄_l^1 / s)
        let dt0 = if l == 0 {
            0.0
        } else {
            -(lf * (lf + 1.0)).sqrt() * s * p[at(l, 1)]
        };
        put(base, dt0, 0.0);
        for m in 1..=l {
            let mf = m as f64;
            let prev = if l > m { p[at(l - 1, m)] } else { 0.0 };
            let k = ((2.0 * lf + 1.0) / (2.0 * lf - 1.0) * (lf - mf) * (lf + mf)).sqrt();
            // ∂θ P̄ = l z (P̄_l/s) - k (P̄_{l-1}/s)
            let dtheta = sqrt2 * (lf * z * p[at(l, m)] - if l > m { k * prev } else { 0.0 });
            let q = sqrt2 * p[at(l, m)];
            let mphi = mf * phi;
            let (cm, sm) = (mphi.cos(), mphi.sin());
            put(base + m, dtheta * cm, -mf * q * sm);
            put(base - m, dtheta * sm, mf * q * cm);
        }
    }
}

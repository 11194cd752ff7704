//! Closed-form test fields: `μ(|x − x⁰|) c(θ)` for a prescribed angular
//! profile, and the exact planar solution with a flat free boundary.

use serde::{Deserialize, Serialize};

use crate::energy::mu;
use crate::error::{config, domain, Result};
use crate::geometry::{check_dim, gauss_legendre_interval, norm, Field, ScalarField};
use crate::spherical::{halfspace_value, QuadraticForm, SphereTrace};

/// Angular profile `c(θ)` on the unit sphere.
#[derive(Debug, Clone)]
pub enum Profile {
    Quadratic(QuadraticForm),
    HalfSpace(Vec<f64>),
    Trace(SphereTrace),
}

impl Profile {
    pub fn dim(&self) -> usize {
        match self {
            Profile::Quadratic(q) => q.dim(),
            Profile::HalfSpace(nu) => nu.len(),
            Profile::Trace(t) => t.dim(),
        }
    }

    /// `c(θ)` and its tangential gradient.
    pub fn eval(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let d = theta.len();
        let (v, mut g) = match self {
            Profile::Quadratic(q) => {
                let mut g = [0.0; 3];
                q.gradient(theta, &mut g[..d]);
                (q.value(theta), g)
            }
            Profile::HalfSpace(nu) => {
                let t: f64 = nu.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>().max(0.0);
                let mut g = [0.0; 3];
                for k in 0..d {
                    g[k] = t * nu[k];
                }
                (halfspace_value(nu, theta), g)
            }
            Profile::Trace(tr) => {
                let mut g = [0.0; 3];
                let v = tr.synthesize_with_gradient(theta, &mut g[..d]);
                return {
                    grad[..d].copy_from_slice(&g[..d]);
                    v
                };
            }
        };
        // the homogeneous-of-degree-two gradient has radial part 2c θ
        for k in 0..d {
            g[k] -= 2.0 * v * theta[k];
        }
        grad[..d].copy_from_slice(&g[..d]);
        v
    }
}

/// `u(x) = μ(|x − x⁰|) c((x − x⁰)/|x − x⁰|)`, defined for `|x − x⁰| ≤ 1`.
#[derive(Debug, Clone)]
pub struct MuField {
    center: Vec<f64>,
    profile: Profile,
}

impl MuField {
    pub fn new(center: &[f64], profile: Profile) -> Result<Self> {
        check_dim(center.len())?;
        if profile.dim() != center.len() {
            return config("profile and center dimensions differ");
        }
        Ok(Self {
            center: center.to_vec(),
            profile,
        })
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    /// Samples the field on a cube of half-width `half` around the center.
    pub fn sample(&self, half: f64, n: usize) -> Result<ScalarField> {
        let d = self.center.len();
        ScalarField::cube_from_fn(d, &self.center, half, n, true, |x| {
            self.value(x).unwrap_or(0.0).max(0.0)
        })
    }
}

impl Field for MuField {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let mut g = [0.0; 3];
        self.value_and_gradient(x, &mut g[..x.len()])
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.value_and_gradient(x, out).map(|_| ())
    }

    /// `∇u = μ'(ρ) c θ + (μ(ρ)/ρ) ∇_θ c` with `μ'(ρ) = −4ρ log ρ`.
    fn value_and_gradient(&self, x: &[f64], out: &mut [f64]) -> Result<f64> {
        let d = self.center.len();
        let mut y = [0.0; 3];
        for k in 0..d {
            y[k] = x[k] - self.center[k];
        }
        let rho = norm(&y[..d]);
        if rho == 0.0 {
            out[..d].iter_mut().for_each(|v| *v = 0.0);
            return Ok(0.0);
        }
        if rho > 1.0 {
            return domain(format!("synthetic field defined for |x - x0| <= 1, got {rho}"));
        }
        let theta: Vec<f64> = y[..d].iter().map(|v| v / rho).collect();
        let mut g = [0.0; 3];
        let c = self.profile.eval(&theta, &mut g[..d]);
        let m = mu(rho)?;
        let dm = -4.0 * rho * rho.ln();
        for k in 0..d {
            out[k] = dm * c * theta[k] + m / rho * g[k];
        }
        Ok(m * c)
    }
}

/// Exact solution `u(x) = U((x·e) − offset)` of `−Δu = log u` on `{u > 0}`
/// with `U = 0` on the negative side and `U'' = −log U`, `U(0) = U'(0) = 0`.
///
/// With `U = s²` the profile inverts in closed form up to a quadrature:
/// `t(s) = s ∫₀^∞ √2 e^{−w} / √(1 − 2 log s + 2w) dw`. Valid while
/// `U < 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanarSolution {
    normal: Vec<f64>,
    offset: f64,
}

impl PlanarSolution {
    pub fn new(normal: &[f64], offset: f64) -> Result<Self> {
        check_dim(normal.len())?;
        let n = norm(normal);
        if !(n > 0.0) {
            return config("normal must be nonzero");
        }
        Ok(Self {
            normal: normal.iter().map(|v| v / n).collect(),
            offset,
        })
    }

    /// Distance from the free boundary at which `U = s²`.
    pub fn distance_of(s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let a = 1.0 - 2.0 * s.ln();
        let mut acc = 0.0;
        for (lo, hi) in [(0.0, 4.0), (4.0, 14.0), (14.0, 44.0)] {
            for (w, wt) in gauss_legendre_interval(24, lo, hi) {
                acc += wt * (-w).exp() / (a + 2.0 * w).sqrt();
            }
        }
        std::f64::consts::SQRT_2 * s * acc
    }

    /// Largest distance from the free boundary where the profile is defined.
    pub fn max_distance() -> f64 {
        Self::distance_of(1.0)
    }

    /// `U(t)` for `t ≥ 0`.
    pub fn profile(t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        if t > Self::max_distance() {
            return domain(format!("planar profile defined up to distance {}", Self::max_distance()));
        }
        // safeguarded Newton on t(s) = t, dt/ds = √2/√(1 − 2 log s)
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut s = (t / std::f64::consts::SQRT_2).min(0.5);
        for _ in 0..100 {
            let f = Self::distance_of(s) - t;
            if f > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let df = std::f64::consts::SQRT_2 / (1.0 - 2.0 * s.ln()).sqrt();
            let mut next = s - f / df;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - s).abs() <= 1e-15 * s.max(1e-300) {
                s = next;
                break;
            }
            s = next;
        }
        Ok(s * s)
    }
}

impl Field for PlanarSolution {
    fn dim(&self) -> usize {
        self.normal.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let t: f64 = self.normal.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - self.offset;
        Self::profile(t)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.value_and_gradient(x, out).map(|_| ())
    }

    /// `U' = √(2F(U))` from the first integral of `U'' = −log U`.
    fn value_and_gradient(&self, x: &[f64], out: &mut [f64]) -> Result<f64> {
        let u = self.value(x)?;
        let du = if u > 0.0 {
            (2.0 * u * (1.0 - u.ln())).sqrt()
        } else {
            0.0
        };
        for (o, n) in out.iter_mut().zip(&self.normal) {
            *o = du * n;
        }
        Ok(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planar_profile_solves_the_ode() {
        // U'' = −log U checked by second differences
        let h = 1e-4;
        for t in [0.05, 0.2, 0.5] {
            let up = PlanarSolution::profile(t + h).unwrap();
            let u0 = PlanarSolution::profile(t).unwrap();
            let um = PlanarSolution::profile(t - h).unwrap();
            let lap = (up - 2.0 * u0 + um) / (h * h);
            assert!((lap + u0.ln()).abs() < 1e-4 * (1.0 + u0.ln().abs()), "t={t}");
            let du = (up - um) / (2.0 * h);
            assert!((du - (2.0 * u0 * (1.0 - u0.ln())).sqrt()).abs() < 1e-6);
        }
        assert_eq!(PlanarSolution::profile(-0.3).unwrap(), 0.0);
    }

    #[test]
    fn mu_field_gradient_matches_differences() {
        let q = QuadraticForm::from_diag(&[0.6, 0.4]).unwrap();
        let f = MuField::new(&[0.1, -0.2], Profile::Quadratic(q)).unwrap();
        let x = [0.35, 0.05];
        let mut g = [0.0; 2];
        f.value_and_gradient(&x, &mut g).unwrap();
        let h = 1e-6;
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fd = (f.value(&xp).unwrap() - f.value(&xm).unwrap()) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-7);
        }
    }

    #[test]
    fn halfspace_profile_gradient() {
        let f = MuField::new(&[0.0, 0.0, 0.0], Profile::HalfSpace(vec![0.0, 0.6, 0.8])).unwrap();
        let x = [0.1, 0.2, 0.3];
        let mut g = [0.0; 3];
        f.value_and_gradient(&x, &mut g).unwrap();
        let h = 1e-6;
        for k in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fd = (f.value(&xp).unwrap() - f.value(&xm).unwrap()) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-7);
        }
    }
}

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{gauss_legendre_interval, norm, sphere_area};
use crate::spherical::basis::Basis;
use crate::spherical::quadratic::QuadraticForm;
use crate::spherical::trace::SphereTrace;

/// `z = q_ν + Q_A + φ` on the unit sphere.
#[derive(Debug, Clone)]
pub struct ModeSplit {
    pub nu: Vec<f64>,
    pub a: QuadraticForm,
    pub phi: SphereTrace,
}

/// Plain-data view of a split for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSplitSummary {
    pub nu: Vec<f64>,
    pub a: QuadraticForm,
    pub phi_l2: f64,
    pub phi_grad_l2: f64,
}

impl ModeSplit {
    pub fn summary(&self) -> ModeSplitSummary {
        ModeSplitSummary {
            nu: self.nu.clone(),
            a: self.a.clone(),
            phi_l2: self.phi.coeff_norm_sq().sqrt(),
            phi_grad_l2: self.phi.gradient_norm_sq().sqrt(),
        }
    }

    /// Coefficients of `q_ν + Q_A + φ` up to the cutoff of `phi`.
    pub fn reconstruct(&self) -> Vec<f64> {
        let basis = self.phi.basis();
        let mut c = halfspace_coeffs(&basis, &self.nu);
        for (j, q) in QuadraticForm::mode_indices(basis.dim())
            .into_iter()
            .zip(self.a.mode_coeffs())
        {
            c[j] += q;
        }
        for (acc, p) in c.iter_mut().zip(self.phi.coeffs()) {
            *acc += p;
        }
        c
    }

    /// `q_ν(θ) = ½ (θ·ν)₊²`.
    pub fn q_nu(&self, theta: &[f64]) -> f64 {
        halfspace_value(&self.nu, theta)
    }
}

pub fn halfspace_value(nu: &[f64], x: &[f64]) -> f64 {
    let t: f64 = nu.iter().zip(x).map(|(a, b)| a * b).sum();
    0.5 * t.max(0.0).powi(2)
}

/// Zonal transform `F_k` of `t ↦ ½ t₊²`: the trace of `h_e` has coefficient
/// `F_k φ_j(e)` on every mode of degree `k`.
fn zonal_transform(dim: usize, degree: usize) -> f64 {
    let n = 24 + degree;
    if dim == 2 {
        let half = std::f64::consts::FRAC_PI_2;
        gauss_legendre_interval(n, -half, half)
            .into_iter()
            .map(|(t, w)| w * 0.5 * t.cos().powi(2) * (degree as f64 * t).cos())
            .sum()
    } else {
        // 2π ∫_0^1 ½ t² P_l(t) dt
        gauss_legendre_interval(n, 0.0, 1.0)
            .into_iter()
            .map(|(t, w)| w * 0.5 * t * t * legendre(degree, t))
            .sum::<f64>()
            * 2.0
            * std::f64::consts::PI
    }
}

fn legendre(l: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if l == 0 {
        return p0;
    }
    for k in 1..l {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Coefficients of the trace of `q_ν = ½(x·ν)₊²`, all modes up to the basis
/// cutoff. The kink of `q_ν` is handled in the one-dimensional zonal
/// integral, so the result is accurate for any direction.
pub fn halfspace_coeffs(basis: &Basis, nu: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; basis.len()];
    let r = norm(nu);
    if r == 0.0 {
        return out;
    }
    let unit: Vec<f64> = nu.iter().map(|v| v / r).collect();
    let mut phi = vec![0.0; basis.len()];
    basis.eval(&unit, &mut phi);
    for k in 0..=basis.cutoff() {
        let f = r * r * zonal_transform(basis.dim(), k);
        for j in basis.degree_range(k) {
            out[j] = f * phi[j];
        }
    }
    out
}

/// Splits a trace into half-space, quadratic and higher-mode parts.
///
/// `ν` reproduces the degree-one content exactly; `A` takes the remaining
/// constant and degree-two content; `φ` keeps every mode of degree ≥ 3.
pub fn split_modes(trace: &SphereTrace) -> Result<ModeSplit> {
    let dim = trace.dim();
    let basis = trace.basis();
    let c = trace.coeffs();
    let b: Vec<f64> = (0..dim).map(|i| c[basis.degree_one_mode(i)]).collect();
    let bn = norm(&b);
    // round-off in the degree-one modes would otherwise surface as |ν| ~ 1e-8
    let floor = 1e-13 * (1.0 + trace.coeff_norm_sq().sqrt());
    let nu = if bn > floor {
        // degree-one coefficient of q_ν is |ν|² F_1 ν̂_i / sqrt(ω/d)
        let scale = (sphere_area(dim) / dim as f64).sqrt();
        let amp = (bn * scale / zonal_transform(dim, 1)).sqrt();
        b.iter().map(|v| amp * v / bn).collect()
    } else {
        vec![0.0; dim]
    };
    let q = halfspace_coeffs(&basis, &nu);
    let idx = QuadraticForm::mode_indices(dim);
    let rest: Vec<f64> = idx.iter().map(|&j| c[j] - q[j]).collect();
    let a = QuadraticForm::from_mode_coeffs(dim, &rest)?;
    let mut phi = SphereTrace::zero(dim, trace.cutoff())?;
    {
        let pc = phi.coeffs_mut();
        for k in 3..=basis.cutoff() {
            for j in basis.degree_range(k) {
                pc[j] = c[j] - q[j];
            }
        }
    }
    phi.set_nonneg(false);
    Ok(ModeSplit { nu, a, phi })
}

/// Distance from the trace to the traces of `{Q_A : A ⪰ 0, tr A = 1}`.
///
/// Projects onto the constant and degree-two modes, clips negative
/// eigenvalues, renormalizes the trace (falling back to `I/d`) and measures
/// the remaining distance by Parseval, including energy above the cutoff.
pub fn dist_to_k(trace: &SphereTrace) -> Result<(f64, QuadraticForm)> {
    let dim = trace.dim();
    let c = trace.coeffs();
    let idx = QuadraticForm::mode_indices(dim);
    let proj: Vec<f64> = idx.iter().map(|&j| c[j]).collect();
    let a0 = QuadraticForm::from_mode_coeffs(dim, &proj)?;
    let (mut vals, vecs) = a0.eigen();
    vals.iter_mut().for_each(|v| *v = v.max(0.0));
    let total: f64 = vals.iter().sum();
    let a = if total > 0.0 {
        vals.iter_mut().for_each(|v| *v /= total);
        QuadraticForm::from_eigen(&vals, &vecs)?
    } else {
        QuadraticForm::isotropic(dim)?
    };
    let qa = a.mode_coeffs();
    let mut d2 = 0.0;
    let mut k = 0;
    for (j, cj) in c.iter().enumerate() {
        let q = if k < idx.len() && idx[k] == j {
            k += 1;
            qa[k - 1]
        } else {
            0.0
        };
        d2 += (cj - q) * (cj - q);
    }
    d2 += trace.tail_energy();
    Ok((d2.sqrt(), a))
}

/// `‖Q_{A₁} − Q_{A₂}‖_{L²(∂B₁)}`.
pub fn quadratic_distance(a1: &QuadraticForm, a2: &QuadraticForm) -> Result<f64> {
    let diff = a1.sub(a2)?;
    Ok(diff.mode_coeffs().iter().map(|c| c * c).sum::<f64>().sqrt())
}

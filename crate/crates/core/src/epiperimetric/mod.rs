//! Contraction parameters, the Fourier energy identity for homogeneous
//! extensions, the choice of `Q_B`, the competitor and the check of the
//! log-epiperimetric inequality.

mod competitor;
mod sweep;

pub use competitor::{
    build_competitor, check_inequality, higher_mode_ratio, Competitor, EpiConfig, EpiParts,
    EpiReport, IContext,
};
pub use sweep::{
    c4_measure, generate_family, sweep, C4Measure, FamilyMember, SweepConfig, SweepSummary,
};

use serde::{Deserialize, Serialize};

use crate::energy::{alpha as alpha_of, m_energy, Variant};
use crate::error::{domain, Error, Result};
use crate::geometry::QuadratureRule;
use crate::spherical::{HomogeneousExtension, QuadraticForm, SphereTrace};

/// Exponent `γ` of the inequality: 0 in the plane, `(d−1)/(d+3)` otherwise.
pub fn gamma(dim: usize) -> f64 {
    if dim == 2 {
        0.0
    } else {
        (dim as f64 - 1.0) / (dim as f64 + 3.0)
    }
}

/// Readings of `η_α` found in the text. `Statement` is
/// `−((α+2)(d+α)−4)/(2 log s)`; `Flipped` has the opposite sign; `Doubled`
/// drops the factor ½.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaVariant {
    #[default]
    Statement,
    Flipped,
    Doubled,
}

impl EtaVariant {
    pub fn eta(self, dim: usize, alpha: f64, s: f64) -> f64 {
        let d = dim as f64;
        let k = (alpha + 2.0) * (d + alpha) - 4.0;
        match self {
            EtaVariant::Statement => -k / (2.0 * s.ln()),
            EtaVariant::Flipped => k / (2.0 * s.ln()),
            EtaVariant::Doubled => -k / s.ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionParams {
    pub dim: usize,
    pub alpha: f64,
    pub s: f64,
    pub eps_alpha: f64,
    pub lambda_alpha: f64,
    pub eta_alpha: f64,
    /// `α(s)` of the energy module.
    pub alpha_s: f64,
    pub gamma: f64,
}

/// Parameters for `α ∈ (2, 5/2]`, `s ∈ (0,1)`, with `η_α` from `variant`.
pub fn contraction_params_with(
    dim: usize,
    alpha: f64,
    s: f64,
    variant: EtaVariant,
) -> Result<ContractionParams> {
    crate::geometry::check_dim(dim)?;
    if !(alpha > 2.0 && alpha <= 2.5) {
        return domain(format!("alpha must lie in (2, 5/2], got {alpha}"));
    }
    if !(s > 0.0 && s < 1.0) {
        return domain(format!("s must lie in (0, 1), got {s}"));
    }
    let d = dim as f64;
    Ok(ContractionParams {
        dim,
        alpha,
        s,
        eps_alpha: (alpha - 2.0) / (d + alpha),
        lambda_alpha: alpha * (alpha + d - 2.0),
        eta_alpha: variant.eta(dim, alpha, s),
        alpha_s: alpha_of(s)?,
        gamma: gamma(dim),
    })
}

pub fn contraction_params(dim: usize, alpha: f64, s: f64) -> Result<ContractionParams> {
    contraction_params_with(dim, alpha, s, EtaVariant::default())
}

/// `‖∇_θφ‖²`, or zero when `φ` is round-off relative to the trace.
pub(crate) fn phi_energy(phi: &SphereTrace, trace: &SphereTrace) -> f64 {
    if phi.coeff_norm_sq() <= 1e-24 * trace.coeff_norm_sq() {
        0.0
    } else {
        phi.gradient_norm_sq()
    }
}

/// Homogeneity `α` solving `(α−2)/(d+α) = ε_α`.
pub fn alpha_from_eps(dim: usize, eps_alpha: f64) -> f64 {
    (2.0 + eps_alpha * dim as f64) / (1.0 - eps_alpha)
}

/// Closed form of `M̃(s;φ̃) − (1−ε_α)M̃(s;φ)` for `φ` supported on modes with
/// `λ_j > 2d`:
/// `Σ c_j² ε_α/(2(d+2α−2)) (λ_α + η_α − α(s)λ_j)`.
///
/// The factor ½ follows from `M̃` carrying `½|∇v|²`; the quadrature oracle
/// [`fourier_identity_quadrature`] confirms it together with the
/// `Statement` reading of `η_α`.
pub fn fourier_identity(
    phi: &SphereTrace,
    alpha: f64,
    s: f64,
    variant: EtaVariant,
) -> Result<f64> {
    let dim = phi.dim();
    let p = contraction_params_with(dim, alpha, s, variant)?;
    let basis = phi.basis();
    let scale = phi.coeff_norm_sq().sqrt().max(f64::MIN_POSITIVE);
    let d = dim as f64;
    let pre = p.eps_alpha / (2.0 * (d + 2.0 * alpha - 2.0));
    let mut acc = 0.0;
    for (j, &c) in phi.coeffs().iter().enumerate() {
        let lam = basis.eigenvalue(j);
        if lam <= 2.0 * d + 1e-9 {
            if c.abs() > 1e-12 * scale {
                return domain(format!(
                    "mode {:?} with eigenvalue {lam} <= 2d carries coefficient {c}",
                    basis.mode(j)
                ));
            }
            continue;
        }
        acc += c * c * pre * (p.lambda_alpha + p.eta_alpha - p.alpha_s * lam);
    }
    Ok(acc)
}

/// Independent evaluation of `M̃(s;r^α φ) − (1−ε_α)M̃(s;r²φ)` by ball
/// quadrature of the two homogeneous extensions.
pub fn fourier_identity_quadrature(
    phi: &SphereTrace,
    alpha: f64,
    s: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    let p = contraction_params(phi.dim(), alpha, s)?;
    let tilde = HomogeneousExtension::new(phi.clone(), alpha)?;
    let two = HomogeneousExtension::new(phi.clone(), 2.0)?;
    let a = m_energy(Variant::MTilde, Some(s), &tilde, rule)?;
    let b = m_energy(Variant::MTilde, Some(s), &two, rule)?;
    Ok(a - (1.0 - p.eps_alpha) * b)
}

/// `B` from `A`: negative eigenvalues are zeroed and their total is taken
/// from the largest eigenvalue, so `Q_A − Q_B` is a traceless quadratic.
///
/// With `Q_A = Σ a_j x_j²` in the eigenbasis (`a_j = λ_j/2`) the construction
/// needs `a_d ≥ 1/(2d) ≥ Σ_{a_j<0} |a_j|`; otherwise the trace is rejected.
pub fn choose_qb(a: &QuadraticForm) -> Result<QuadraticForm> {
    let (mut vals, vecs) = a.eigen();
    let dim = a.dim();
    let tol = 1e-14 * (1.0 + vals.iter().map(|v| v.abs()).fold(0.0, f64::max));
    if vals.iter().all(|&v| v >= -tol) {
        return Ok(a.clone());
    }
    let neg: f64 = vals.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
    let top = *vals.last().unwrap();
    let bound = 1.0 / (2.0 * dim as f64);
    if !(top / 2.0 >= bound && bound >= neg / 2.0) {
        return Err(Error::Rejected(format!(
            "trace not delta-close to K: largest coefficient {:.6e}, negative mass {:.6e}, bound {bound:.6e}",
            top / 2.0,
            neg / 2.0
        )));
    }
    vals.iter_mut().for_each(|v| *v = v.max(0.0));
    *vals.last_mut().unwrap() -= neg;
    QuadraticForm::from_eigen(&vals, &vecs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spherical::Mode;

    #[test]
    fn params_examples() {
        let s = (-10.0f64).exp();
        let p = contraction_params(2, 2.5, s).unwrap();
        assert!((p.eps_alpha - 1.0 / 9.0).abs() < 1e-15);
        assert!((p.lambda_alpha - 6.25).abs() < 1e-15);
        assert!((p.eta_alpha - 0.8125).abs() < 1e-15);
        assert!((p.alpha_s - 1.05).abs() < 1e-15);
        let p = contraction_params(3, 2.5, 0.5).unwrap();
        assert!((p.eps_alpha - 1.0 / 11.0).abs() < 1e-15);
        assert!((p.lambda_alpha - 8.75).abs() < 1e-15);
        assert_eq!(p.gamma, 1.0 / 3.0);
        let p = contraction_params(2, 2.0 + 1e-12, 0.5).unwrap();
        assert!(p.eps_alpha < 1e-12 && (p.lambda_alpha - 4.0).abs() < 1e-11);
        assert!(contraction_params(2, 2.0, 0.5).is_err());
        assert!(contraction_params(2, 2.6, 0.5).is_err());
    }

    #[test]
    fn alpha_inverts_eps() {
        for d in [2, 3] {
            for a in [2.1, 2.3, 2.5] {
                let e = (a - 2.0) / (d as f64 + a);
                assert!((alpha_from_eps(d, e) - a).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn identity_single_mode_example() {
        let mut phi = SphereTrace::zero(2, 6).unwrap();
        let j = phi.basis().position(Mode { degree: 3, index: 0 }).unwrap();
        phi.coeffs_mut()[j] = 1.0;
        let s = (-10.0f64).exp();
        let v = fourier_identity(&phi, 2.5, s, EtaVariant::Statement).unwrap();
        // (1/9)/(2·5)·(6.25 + 0.8125 − 1.05·9)
        assert!((v + 0.0265277778).abs() < 1e-9, "{v}");
        assert_eq!(fourier_identity(&SphereTrace::zero(2, 6).unwrap(), 2.5, s, EtaVariant::Statement).unwrap(), 0.0);
    }

    #[test]
    fn identity_rejects_low_modes() {
        let mut phi = SphereTrace::zero(2, 6).unwrap();
        phi.coeffs_mut()[0] = 1.0;
        assert!(fourier_identity(&phi, 2.3, 0.01, EtaVariant::Statement).is_err());
    }

    #[test]
    fn qb_examples() {
        let a = QuadraticForm::from_diag(&[-0.1, 1.1]).unwrap();
        let b = choose_qb(&a).unwrap();
        assert!((b.matrix() - QuadraticForm::from_diag(&[0.0, 1.0]).unwrap().matrix()).abs().max() < 1e-14);
        let diff = a.sub(&b).unwrap();
        assert!(diff.trace().abs() < 1e-14);

        let psd = QuadraticForm::from_diag(&[0.7, 0.3]).unwrap();
        assert_eq!(choose_qb(&psd).unwrap(), psd);

        let a3 = QuadraticForm::from_diag(&[-0.04, 0.24, 0.8]).unwrap();
        let b3 = choose_qb(&a3).unwrap();
        let expect = QuadraticForm::from_diag(&[0.0, 0.24, 0.76]).unwrap();
        assert!((b3.matrix() - expect.matrix()).abs().max() < 1e-14);
        assert!(a3.sub(&b3).unwrap().trace().abs() < 1e-14);

        let far = QuadraticForm::from_diag(&[-0.6, 1.6]).unwrap();
        assert!(matches!(choose_qb(&far), Err(Error::Rejected(_))));
    }
}

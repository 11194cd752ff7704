use serde::{Deserialize, Serialize};

use crate::energy::{m_energy_nodes, t_term, theta, EnergyTable, Variant};
use crate::epiperimetric::{alpha_from_eps, choose_qb, contraction_params, gamma, EtaVariant};
use crate::error::{config, Error, Result};
use crate::geometry::{norm, Field, QuadratureRule};
use crate::spherical::{
    dist_to_k, halfspace_value, split_modes, Basis, ModeSplit, ModeSplitSummary, QuadraticForm,
    SphereTrace, TraceJson,
};

/// Source of `∫₀^s I(ρ) dρ` in `M_I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IContext {
    /// Pure spherical studies: `∫₀^s I = 0`.
    Zero,
    /// Cumulative integral tabulated at increasing radii, interpolated
    /// linearly in `log r`.
    Tabulated { radii: Vec<f64>, cumulative: Vec<f64> },
}

impl IContext {
    pub fn from_table(table: &EnergyTable) -> Self {
        IContext::Tabulated {
            radii: table.rows.iter().map(|r| r.r).collect(),
            cumulative: table.rows.iter().map(|r| r.int_i).collect(),
        }
    }

    pub fn integral(&self, s: f64) -> Result<f64> {
        match self {
            IContext::Zero => Ok(0.0),
            IContext::Tabulated { radii, cumulative } => {
                if radii.len() != cumulative.len() || radii.is_empty() {
                    return config("tabulated context needs matching, nonempty columns");
                }
                let lo = radii[0];
                let hi = *radii.last().unwrap();
                if !(s >= lo * (1.0 - 1e-12) && s <= hi * (1.0 + 1e-12)) {
                    return Err(Error::InsufficientData(format!(
                        "s = {s} outside the tabulated range [{lo}, {hi}]"
                    )));
                }
                if radii.len() == 1 {
                    return Ok(cumulative[0]);
                }
                let k = radii
                    .windows(2)
                    .position(|w| s <= w[1])
                    .unwrap_or(radii.len() - 2);
                let (a, b) = (radii[k].ln(), radii[k + 1].ln());
                let t = ((s.ln() - a) / (b - a)).clamp(0.0, 1.0);
                Ok(cumulative[k] + t * (cumulative[k + 1] - cumulative[k]))
            }
        }
    }
}

fn default_small() -> f64 {
    0.05
}
fn default_c4() -> f64 {
    1.0
}
fn default_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpiConfig {
    /// Admissible `L²(∂B₁)` distance to `𝕂`.
    #[serde(default = "default_small")]
    pub delta: f64,
    #[serde(default = "default_small")]
    pub epsilon: f64,
    /// Constant in `ε_α = ε (C₄ ‖∇_θφ‖²)^γ`.
    #[serde(default = "default_c4")]
    pub c4: f64,
    /// Absolute slack in the pass test, relative to `1 + |RHS|`.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub eta: EtaVariant,
}

impl Default for EpiConfig {
    fn default() -> Self {
        Self {
            delta: default_small(),
            epsilon: default_small(),
            c4: default_c4(),
            tol: default_tol(),
            eta: EtaVariant::default(),
        }
    }
}

impl EpiConfig {
    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.epsilon > 0.0 && self.epsilon < 1.0) {
            return config("delta must be positive and epsilon in (0, 1)");
        }
        if !(self.c4 >= 0.0 && self.c4.is_finite()) {
            return config("c4 must be finite and nonnegative");
        }
        if !(self.tol >= 0.0) {
            return config("tolerance must be nonnegative");
        }
        Ok(())
    }
}

/// `v = q_ν + Q_B + |x|^α ψ(x/|x|)` with `ψ = c − q_ν − Q_B` on the sphere,
/// so `v = c` on `∂B₁` pointwise.
#[derive(Debug, Clone)]
pub struct Competitor {
    alpha: f64,
    nu: Vec<f64>,
    b: QuadraticForm,
    trace: SphereTrace,
    basis: Basis,
}

impl Competitor {
    pub fn new(trace: &SphereTrace, nu: Vec<f64>, b: QuadraticForm, alpha: f64) -> Result<Self> {
        if nu.len() != trace.dim() || b.dim() != trace.dim() {
            return config("competitor pieces have mismatched dimensions");
        }
        if !(alpha >= 2.0) {
            return config(format!("homogeneity must be at least 2, got {alpha}"));
        }
        Ok(Self {
            alpha,
            nu,
            b,
            trace: trace.clone(),
            basis: trace.basis(),
        })
    }

    /// The 2-homogeneous extension `z` of the trace.
    pub fn extension(trace: &SphereTrace) -> Result<Self> {
        let d = trace.dim();
        Self::new(trace, vec![0.0; d], QuadraticForm::zero(d)?, 2.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.trace.dim()
    }

    /// `q_ν(x) + Q_B(x)` with its gradient.
    fn base(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.dim();
        let t: f64 = self.nu.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().max(0.0);
        self.b.gradient(x, &mut grad[..d]);
        for k in 0..d {
            grad[k] += t * self.nu[k];
        }
        halfspace_value(&self.nu, x) + self.b.value(x)
    }

    /// `c(θ)` with its tangential gradient.
    fn angular(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let n = self.basis.len();
        let d = self.dim();
        let mut v = vec![0.0; n];
        let mut dv = vec![0.0; n * d];
        self.basis.eval_with_gradient(theta, &mut v, &mut dv);
        grad[..d].iter_mut().for_each(|g| *g = 0.0);
        let c = self.trace.coeffs();
        let mut val = 0.0;
        for j in 0..n {
            val += c[j] * v[j];
            for k in 0..d {
                grad[k] += c[j] * dv[j * d + k];
            }
        }
        val
    }

    /// `ψ(θ)` and its tangential gradient.
    fn psi(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.dim();
        let mut gb = [0.0; 3];
        let b = self.base(theta, &mut gb);
        // tangential part of the gradient of a 2-homogeneous function
        for k in 0..d {
            gb[k] -= 2.0 * b * theta[k];
        }
        let c = self.angular(theta, grad);
        for k in 0..d {
            grad[k] -= gb[k];
        }
        c - b
    }

    /// `x ↦ |x|^p ψ(x/|x|)`.
    pub fn psi_extension(&self, p: f64) -> PsiExtension<'_> {
        PsiExtension { comp: self, p }
    }
}

fn homogeneous(
    x: &[f64],
    p: f64,
    out: &mut [f64],
    angular: impl FnOnce(&[f64], &mut [f64]) -> f64,
) -> f64 {
    let d = x.len();
    let r = norm(x);
    if r == 0.0 {
        out[..d].iter_mut().for_each(|g| *g = 0.0);
        return 0.0;
    }
    let mut theta = [0.0; 3];
    for k in 0..d {
        theta[k] = x[k] / r;
    }
    let mut g = [0.0; 3];
    let a = angular(&theta[..d], &mut g[..d]);
    let rp1 = r.powf(p - 1.0);
    for k in 0..d {
        out[k] = rp1 * (p * a * theta[k] + g[k]);
    }
    rp1 * r * a
}

impl Field for Competitor {
    fn dim(&self) -> usize {
        self.trace.dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let mut g = [0.0; 3];
        self.value_and_gradient(x, &mut g[..x.len()])
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.value_and_gradient(x, out).map(|_| ())
    }

    fn value_and_gradient(&self, x: &[f64], out: &mut [f64]) -> Result<f64> {
        let d = self.dim();
        let mut gb = [0.0; 3];
        let b = self.base(x, &mut gb);
        let p = homogeneous(x, self.alpha, out, |t, g| self.psi(t, g));
        for k in 0..d {
            out[k] += gb[k];
        }
        Ok(b + p)
    }
}

pub struct PsiExtension<'a> {
    comp: &'a Competitor,
    p: f64,
}

impl Field for PsiExtension<'_> {
    fn dim(&self) -> usize {
        self.comp.dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let mut g = [0.0; 3];
        self.value_and_gradient(x, &mut g[..x.len()])
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.value_and_gradient(x, out).map(|_| ())
    }

    fn value_and_gradient(&self, x: &[f64], out: &mut [f64]) -> Result<f64> {
        Ok(homogeneous(x, self.p, out, |t, g| self.comp.psi(t, g)))
    }
}

/// Angular profile `f(θ)` and its tangential gradient at the directions of a
/// ball rule.
struct Angular {
    values: Vec<f64>,
    grads: Vec<f64>,
}

impl Angular {
    fn sample(rule: &QuadratureRule, mut f: impl FnMut(&[f64], &mut [f64]) -> f64) -> Self {
        let d = rule.dim();
        let n = rule.direction_count();
        let mut values = Vec::with_capacity(n);
        let mut grads = vec![0.0; n * d];
        for j in 0..n {
            values.push(f(rule.direction(j), &mut grads[j * d..(j + 1) * d]));
        }
        Self { values, grads }
    }
}

/// `M`-type functional of `Σ |x|^p f_p(x/|x|)` on a radius-major ball rule,
/// counting (and clipping, for the potential) negative nodes.
fn m_energy_homogeneous(
    variant: Variant,
    s: Option<f64>,
    rule: &QuadratureRule,
    terms: &[(f64, &Angular)],
) -> Result<(f64, usize)> {
    let d = rule.dim();
    let n = rule.direction_count();
    let mut negatives = 0;
    let m = m_energy_nodes(
        variant,
        s,
        rule,
        |i| {
            let j = i % n;
            let r = norm(rule.point(i));
            let theta = rule.direction(j);
            let mut g = [0.0; 3];
            let mut val = 0.0;
            for &(p, a) in terms {
                let f = a.values[j];
                let rp1 = r.powf(p - 1.0);
                val += rp1 * r * f;
                for k in 0..d {
                    g[k] += rp1 * (p * f * theta[k] + a.grads[j * d + k]);
                }
            }
            if val < 0.0 {
                negatives += 1;
                val = 0.0;
            }
            Ok((val, g[..d].iter().map(|x| x * x).sum()))
        },
        |j| Ok(terms.iter().map(|(_, a)| a.values[j]).sum()),
    )?;
    Ok((m, negatives))
}

impl Competitor {
    fn angular_parts(&self, rule: &QuadratureRule) -> (Angular, Angular) {
        let base = Angular::sample(rule, |t, g| {
            let b = self.base(t, g);
            for k in 0..t.len() {
                g[k] -= 2.0 * b * t[k];
            }
            b
        });
        let psi = Angular::sample(rule, |t, g| self.psi(t, g));
        (base, psi)
    }
}

/// `M(s;z) − Θ` for the 2-homogeneous extension `z` of `c`, zero context.
pub(crate) fn extension_excess(c: &SphereTrace, s: f64, rule: &QuadratureRule) -> Result<f64> {
    let z = Competitor::extension(c)?;
    let (_, psi) = z.angular_parts(rule);
    Ok(m_energy_homogeneous(Variant::M, Some(s), rule, &[(2.0, &psi)])?.0 - theta(c.dim()))
}

/// Pieces of `M_I(s;v) − Θ − T − (1−ε_α)(M_I(s;z) − Θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpiParts {
    /// `−α(s)ε_αΘ((1−b−c₀)² + (1−b)²)/2`, never positive.
    pub part1: f64,
    /// Remainder, including `−T` and the logarithmic terms.
    pub part2: f64,
    /// `M̃(s;ψ̃) − (1−ε_α)M̃(s;ψ)`.
    pub part3: f64,
    pub total: f64,
    /// `b = tr B`.
    pub b_trace: f64,
    /// `c₀ = |ν|²`.
    pub c0: f64,
    pub m_v: f64,
    pub m_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpiReport {
    pub trace: TraceJson,
    pub dim: usize,
    pub s: f64,
    pub context_integral: f64,
    pub dist_to_k: f64,
    pub m0_excess: f64,
    /// `M_I(s;z) − Θ`.
    pub excess: f64,
    pub alpha: f64,
    pub eps_alpha: f64,
    pub alpha_clamped: bool,
    pub competitor_is_z: bool,
    pub grad_phi_norm: f64,
    pub t_value: f64,
    /// `M_I(s;v) − Θ`.
    pub lhs: f64,
    /// `excess (1 − ε|excess|^γ) + T`.
    pub rhs: f64,
    pub pass: bool,
    pub negative_samples: usize,
    pub boundary_error: f64,
    pub split: ModeSplitSummary,
    pub b: QuadraticForm,
    pub higher_mode_ratio: Option<f64>,
    pub parts: EpiParts,
}

/// `Σ_{a_j<0} a_j² / ‖∇_θφ‖^{2(1−γ)}` with `a_j` the coefficients of `Q_A`
/// in its eigenbasis; `None` when `φ = 0`.
pub fn higher_mode_ratio(split: &ModeSplit) -> Option<f64> {
    let g2 = split.phi.gradient_norm_sq();
    if split.phi.coeff_norm_sq() <= 1e-24 * split.a.matrix().norm_squared() {
        return None;
    }
    if g2 <= 0.0 {
        return None;
    }
    let neg: f64 = split
        .a
        .eigenvalues()
        .iter()
        .filter(|&&v| v < 0.0)
        .map(|v| 0.25 * v * v)
        .fold(0.0, |a, b| a + b);
    Some(neg / g2.powf(1.0 - gamma(split.phi.dim())))
}

struct Built {
    competitor: Competitor,
    split: ModeSplit,
    b: QuadraticForm,
    eps_alpha: f64,
    clamped: bool,
    is_z: bool,
    excess: f64,
    m_z: f64,
    j: f64,
    dist: f64,
    m0_excess: f64,
}

fn build(
    c: &SphereTrace,
    s: f64,
    cfg: &EpiConfig,
    ctx: &IContext,
    rule: &QuadratureRule,
) -> Result<Built> {
    cfg.validate()?;
    if !(s > 0.0 && s < 1.0) {
        return config(format!("s must lie in (0, 1), got {s}"));
    }
    let dim = c.dim();
    let sphere = QuadratureRule::default_sphere(dim)?;
    let mut min_c = f64::INFINITY;
    for j in 0..sphere.len() {
        min_c = min_c.min(c.synthesize(sphere.point(j)));
    }
    if min_c < -1e-10 {
        return Err(Error::Rejected(format!("trace is negative on the sphere (min {min_c:.3e})")));
    }
    let (dist, _) = dist_to_k(c)?;
    if dist > cfg.delta {
        return Err(Error::Rejected(format!(
            "trace not delta-close to K: distance {dist:.6e} > delta {}",
            cfg.delta
        )));
    }
    let z = Competitor::extension(c)?;
    let (_, zc) = z.angular_parts(rule);
    let m0_excess = m_energy_homogeneous(Variant::M0, None, rule, &[(2.0, &zc)])?.0 - theta(dim);
    if m0_excess > 1.0 {
        return Err(Error::Rejected(format!("M0(z) - Theta = {m0_excess:.6e} exceeds 1")));
    }
    let j = ctx.integral(s)?;
    let (m_z, _) = m_energy_homogeneous(Variant::M, Some(s), rule, &[(2.0, &zc)])?;
    let excess = m_z - j - theta(dim);
    let split = split_modes(c)?;
    let g2 = super::phi_energy(&split.phi, c);
    let eps0 = if g2 > 0.0 {
        cfg.epsilon * (cfg.c4 * g2).powf(gamma(dim))
    } else {
        0.0
    };
    if excess <= 0.0 || eps0 <= 0.0 {
        return Ok(Built {
            competitor: z,
            b: split.a.clone(),
            split,
            eps_alpha: 0.0,
            clamped: false,
            is_z: true,
            excess,
            m_z,
            j,
            dist,
            m0_excess,
        });
    }
    let mut alpha = alpha_from_eps(dim, eps0.min(0.999));
    let mut clamped = false;
    if alpha > 2.5 {
        alpha = 2.5;
        clamped = true;
    }
    let eps_alpha = contraction_params(dim, alpha, s)?.eps_alpha;
    let b = choose_qb(&split.a)?;
    let competitor = Competitor::new(c, split.nu.clone(), b.clone(), alpha)?;
    Ok(Built {
        competitor,
        split,
        b,
        eps_alpha,
        clamped,
        is_z: false,
        excess,
        m_z,
        j,
        dist,
        m0_excess,
    })
}

/// Competitor for the inequality at scale `s`, with its homogeneity.
pub fn build_competitor(
    c: &SphereTrace,
    s: f64,
    cfg: &EpiConfig,
    ctx: &IContext,
) -> Result<(Competitor, f64)> {
    let rule = QuadratureRule::default_ball(c.dim())?;
    let b = build(c, s, cfg, ctx, &rule)?;
    Ok((b.competitor, b.eps_alpha))
}

/// Evaluates both sides of the inequality and the three-part split.
pub fn check_inequality(
    c: &SphereTrace,
    s: f64,
    cfg: &EpiConfig,
    ctx: &IContext,
) -> Result<EpiReport> {
    let dim = c.dim();
    let rule = QuadratureRule::default_ball(dim)?;
    let built = build(c, s, cfg, ctx, &rule)?;
    let v = &built.competitor;
    let th = theta(dim);
    let (base, psi) = v.angular_parts(&rule);
    let (m_v, negatives) =
        m_energy_homogeneous(Variant::M, Some(s), &rule, &[(2.0, &base), (v.alpha(), &psi)])?;
    let t = t_term(s, c)?;
    let lhs = m_v - built.j - th;
    let e = built.excess;
    let rhs = e * (1.0 - cfg.epsilon * e.abs().powf(gamma(dim))) + t;
    let pass = negatives == 0 && lhs <= rhs + cfg.tol * (1.0 + rhs.abs());

    let mut be = 0.0;
    for j in 0..rule.direction_count() {
        let x = rule.direction(j);
        let diff = v.value(x)? - c.synthesize(x);
        be += rule.direction_weight(j) * diff * diff;
    }

    let ea = built.eps_alpha;
    let b_trace = built.b.trace();
    let c0 = built.split.nu.iter().map(|x| x * x).sum::<f64>();
    let alpha_s = crate::energy::alpha(s)?;
    let part1 = -alpha_s * ea * th * ((1.0 - b_trace - c0).powi(2) + (1.0 - b_trace).powi(2)) / 2.0;
    let part3 = if built.is_z {
        0.0
    } else {
        let tilde = m_energy_homogeneous(Variant::MTilde, Some(s), &rule, &[(v.alpha(), &psi)])?.0;
        let two = m_energy_homogeneous(Variant::MTilde, Some(s), &rule, &[(2.0, &psi)])?.0;
        tilde - (1.0 - ea) * two
    };
    let total = lhs - t - (1.0 - ea) * e;
    Ok(EpiReport {
        trace: c.to_json(),
        dim,
        s,
        context_integral: built.j,
        dist_to_k: built.dist,
        m0_excess: built.m0_excess,
        excess: e,
        alpha: v.alpha(),
        eps_alpha: ea,
        alpha_clamped: built.clamped,
        competitor_is_z: built.is_z,
        grad_phi_norm: super::phi_energy(&built.split.phi, c).sqrt(),
        t_value: t,
        lhs,
        rhs,
        pass,
        negative_samples: negatives,
        boundary_error: be.sqrt(),
        split: built.split.summary(),
        b: built.b.clone(),
        higher_mode_ratio: higher_mode_ratio(&built.split),
        parts: EpiParts {
            part1,
            part2: total - part1 - part3,
            part3,
            total,
            b_trace,
            c0,
            m_v,
            m_z: built.m_z,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::m_energy;
    use crate::epiperimetric::choose_qb;
    use crate::spherical::Mode;

    fn trace_of(dim: usize, f: impl FnMut(&[f64]) -> f64) -> SphereTrace {
        let rule = QuadratureRule::default_sphere(dim).unwrap();
        SphereTrace::analyze_fn(&rule, crate::spherical::default_cutoff(dim), f).unwrap()
    }

    #[test]
    fn pure_quadratic_gives_z() {
        let q = QuadraticForm::isotropic(2).unwrap();
        let c = trace_of(2, |x| q.value(x));
        let (v, eps) = build_competitor(&c, 1e-3, &EpiConfig::default(), &IContext::Zero).unwrap();
        assert_eq!(eps, 0.0);
        assert_eq!(v.alpha(), 2.0);
    }

    #[test]
    fn competitor_matches_trace_on_sphere() {
        let q = QuadraticForm::isotropic(2).unwrap();
        let mut c = trace_of(2, |x| q.value(x));
        let j = c.basis().position(Mode { degree: 3, index: 0 }).unwrap();
        c.coeffs_mut()[j] += 0.01;
        let rep = check_inequality(&c, 1e-3, &EpiConfig::default(), &IContext::Zero).unwrap();
        assert!(!rep.competitor_is_z);
        assert!(rep.alpha > 2.0 && rep.alpha <= 2.5);
        assert!(rep.boundary_error <= 1e-10, "{}", rep.boundary_error);
        assert!(rep.parts.part1 <= 0.0);
        assert_eq!(rep.negative_samples, 0);
    }

    #[test]
    fn cached_energy_matches_pointwise() {
        let q = QuadraticForm::from_diag(&[-0.1, 1.1]).unwrap();
        let mut c = trace_of(2, |x| q.value(x));
        let j = c.basis().position(Mode { degree: 4, index: 1 }).unwrap();
        c.coeffs_mut()[j] += 0.02;
        let split = split_modes(&c).unwrap();
        let b = choose_qb(&split.a).unwrap();
        let v = Competitor::new(&c, split.nu.clone(), b, 2.3).unwrap();
        let rule = QuadratureRule::default_ball(2).unwrap();
        let (base, psi) = v.angular_parts(&rule);
        let (fast, _) =
            m_energy_homogeneous(Variant::MTilde, Some(1e-3), &rule, &[(2.0, &base), (2.3, &psi)]).unwrap();
        let slow = m_energy(Variant::MTilde, Some(1e-3), &v, &rule).unwrap();
        assert!((fast - slow).abs() < 1e-12 * (1.0 + slow.abs()), "{fast} {slow}");
        let (fast, _) = m_energy_homogeneous(Variant::MTilde, Some(1e-3), &rule, &[(2.3, &psi)]).unwrap();
        let slow = m_energy(Variant::MTilde, Some(1e-3), &v.psi_extension(2.3), &rule).unwrap();
        assert!((fast - slow).abs() < 1e-12 * (1.0 + slow.abs()));
    }

    #[test]
    fn negative_excess_keeps_z() {
        let q = QuadraticForm::isotropic(2).unwrap();
        let mut c = trace_of(2, |x| q.value(x));
        let j = c.basis().position(Mode { degree: 3, index: 0 }).unwrap();
        c.coeffs_mut()[j] += 0.01;
        let ctx = IContext::Tabulated {
            radii: vec![1e-4, 1e-2],
            cumulative: vec![10.0, 10.0],
        };
        let rep = check_inequality(&c, 1e-3, &EpiConfig::default(), &ctx).unwrap();
        assert!(rep.excess < 0.0);
        assert!(rep.competitor_is_z);
    }

    #[test]
    fn rejects_far_traces() {
        let c = trace_of(2, |x| 0.5 * x[0] * x[0] + 0.2);
        let err = check_inequality(&c, 1e-3, &EpiConfig::default(), &IContext::Zero).unwrap_err();
        assert!(matches!(err, Error::Rejected(_)));
    }

    #[test]
    fn tabulated_context_interpolates() {
        let ctx = IContext::Tabulated {
            radii: vec![0.01, 0.1],
            cumulative: vec![1.0, 2.0],
        };
        assert!((ctx.integral(0.1f64.sqrt() * 0.1f64.sqrt()).unwrap() - 2.0).abs() < 1e-12);
        assert!((ctx.integral((0.001f64).sqrt()).unwrap() - 1.5).abs() < 1e-12);
        assert!(ctx.integral(0.5).is_err());
    }
}

//! Scalar energies: `μ`, `α`, `F`, `G`, the boundary-adjusted functionals
//! `M`, `M̃`, `M₀`, the Weiss energy `W`, its correction integrand `I`, and
//! the auxiliary term `T`.

mod table;

pub use table::{corrected_excess_table, integrate_correction, EnergyRow, EnergyTable, TailFit};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::geometry::{sphere_area, Domain, Field, QuadratureRule};
use crate::spherical::SphereTrace;

/// `μ(r)` and `α(r)` at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFactors {
    pub r: f64,
    pub mu: f64,
    pub alpha: f64,
}

/// `μ(r) = r²(1 − 2 log r)`, defined for `0 < r ≤ 1`.
pub fn mu(r: f64) -> Result<f64> {
    if !(r > 0.0 && r <= 1.0) {
        return domain(format!("mu needs 0 < r <= 1, got {r}"));
    }
    Ok(r * r * (1.0 - 2.0 * r.ln()))
}

/// `α(r) = 1 − 1/(2 log r)`, defined for `0 < r < 1`.
pub fn alpha(r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return domain(format!("alpha needs 0 < r < 1, got {r}"));
    }
    Ok(1.0 - 1.0 / (2.0 * r.ln()))
}

pub fn scaling_factors(r: f64) -> Result<ScalingFactors> {
    Ok(ScalingFactors {
        r,
        mu: mu(r)?,
        alpha: alpha(r)?,
    })
}

/// `Θ = ω_d / (4d(d+2))`.
pub fn theta(dim: usize) -> f64 {
    sphere_area(dim) / (4.0 * (dim * (dim + 2)) as f64)
}

/// `x log x` with the continuous extension at 0.
fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `F(u) = u(1 − log u)`, `F(0) = 0`.
pub fn potential_f(u: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return domain(format!("F needs u >= 0, got {u}"));
    }
    Ok(u - xlogx(u))
}

/// `G(r;v) = v/(1−2 log r) · (1 − log(v r²(1−2 log r)))`, `G(r;0) = 0`.
///
/// The logarithm is split as `log v + 2 log r + log(1 − 2 log r)`.
pub fn potential_g(r: f64, v: f64) -> Result<f64> {
    if !(v >= 0.0) {
        return domain(format!("G needs v >= 0, got {v}"));
    }
    if !(r > 0.0 && r < 1.0) {
        return domain(format!("G needs 0 < r < 1, got {r}"));
    }
    Ok(g_unchecked(r.ln(), v))
}

fn g_unchecked(log_r: f64, v: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    let l = 1.0 - 2.0 * log_r;
    let log_arg = v.ln() + 2.0 * log_r + l.ln();
    v / l * (1.0 - log_arg)
}

/// Which boundary-adjusted functional to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `α(r)∫(½|∇v|² + G(r;v)) − ∫_{∂B₁} v²`
    M,
    /// `α(r)∫½|∇v|² − ∫_{∂B₁} v²`
    MTilde,
    /// `∫(½|∇v|² + v) − ∫_{∂B₁} v²`
    M0,
}

/// Evaluates a functional from per-node data of a ball rule.
///
/// `interior(i)` returns `(v, |∇v|²)` at ball node `i`; `boundary(j)` returns
/// `v` at angular direction `j` on the unit sphere.
pub fn m_energy_nodes(
    variant: Variant,
    r: Option<f64>,
    rule: &QuadratureRule,
    mut interior: impl FnMut(usize) -> Result<(f64, f64)>,
    mut boundary: impl FnMut(usize) -> Result<f64>,
) -> Result<f64> {
    if rule.domain() != Domain::Ball {
        return domain("m_energy needs a ball rule");
    }
    let (a, log_r) = match (variant, r) {
        (Variant::M0, _) => (1.0, 0.0),
        (_, Some(r)) => (alpha(r)?, r.ln()),
        (_, None) => return domain("M and M_tilde need a radius"),
    };
    let mut vol = 0.0;
    for i in 0..rule.len() {
        let (v, g2) = interior(i)?;
        let pot = match variant {
            Variant::MTilde => 0.0,
            _ if v < 0.0 => {
                return domain(format!(
                    "negative value {v:e} at ball node {i} ({:?})",
                    rule.point(i)
                ))
            }
            Variant::M => g_unchecked(log_r, v),
            Variant::M0 => v,
        };
        vol += rule.weight(i) * (0.5 * g2 + pot);
    }
    let mut surf = 0.0;
    for j in 0..rule.direction_count() {
        let v = boundary(j)?;
        surf += rule.direction_weight(j) * v * v;
    }
    Ok(a * vol - surf)
}

/// [`m_energy_nodes`] for a [`Field`] on the unit ball.
pub fn m_energy<F: Field + ?Sized>(
    variant: Variant,
    r: Option<f64>,
    v: &F,
    rule: &QuadratureRule,
) -> Result<f64> {
    let d = v.dim();
    let mut g = [0.0; 3];
    m_energy_nodes(
        variant,
        r,
        rule,
        |i| {
            let val = v.value_and_gradient(rule.point(i), &mut g[..d])?;
            Ok((val, g[..d].iter().map(|x| x * x).sum()))
        },
        |j| v.value(rule.direction(j)),
    )
}

/// `x ↦ u(x⁰ + r x)/μ(r)`.
pub struct Rescaled<'a, F: Field + ?Sized> {
    u: &'a F,
    center: Vec<f64>,
    r: f64,
    mu: f64,
}

impl<'a, F: Field + ?Sized> Rescaled<'a, F> {
    pub fn new(u: &'a F, center: &[f64], r: f64) -> Result<Self> {
        if center.len() != u.dim() {
            return domain("center dimension does not match the field");
        }
        if !(r > 0.0 && r < 1.0) {
            return domain(format!("rescaling needs 0 < r < 1, got {r}"));
        }
        Ok(Self {
            u,
            center: center.to_vec(),
            r,
            mu: mu(r)?,
        })
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    fn map(&self, x: &[f64], out: &mut [f64; 3]) {
        for k in 0..self.center.len() {
            out[k] = self.center[k] + self.r * x[k];
        }
    }
}

impl<F: Field + ?Sized> Field for Rescaled<'_, F> {
    fn dim(&self) -> usize {
        self.u.dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let mut y = [0.0; 3];
        self.map(x, &mut y);
        Ok(self.u.value(&y[..self.dim()])? / self.mu)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.value_and_gradient(x, out).map(|_| ())
    }

    fn value_and_gradient(&self, x: &[f64], out: &mut [f64]) -> Result<f64> {
        let d = self.dim();
        let mut y = [0.0; 3];
        self.map(x, &mut y);
        let v = self.u.value_and_gradient(&y[..d], out)?;
        let s = self.r / self.mu;
        out[..d].iter_mut().for_each(|g| *g *= s);
        Ok(v / self.mu)
    }

    fn spacing(&self) -> Option<f64> {
        self.u.spacing().map(|h| h / self.r)
    }
}

/// Weiss energy evaluated directly on `B_r(x⁰)`:
/// `α(r)/(r^{d+2}L²) ∫_{B_r}(½|∇u|² + F(u)) − 1/(r^{d+3}L²) ∫_{∂B_r} u²`
/// with `L = 1 − 2 log r`.
pub fn weiss_energy<F: Field + ?Sized>(
    u: &F,
    center: &[f64],
    r: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    if rule.domain() != Domain::Ball {
        return domain("weiss_energy needs a ball rule");
    }
    let sf = scaling_factors(r)?;
    let d = u.dim();
    let l = 1.0 - 2.0 * r.ln();
    let mut g = [0.0; 3];
    let mut y = [0.0; 3];
    let mut vol = 0.0;
    for i in 0..rule.len() {
        let p = rule.point(i);
        for k in 0..d {
            y[k] = center[k] + r * p[k];
        }
        let v = u.value_and_gradient(&y[..d], &mut g[..d])?;
        let g2: f64 = g[..d].iter().map(|x| x * x).sum();
        let f = potential_f(v).map_err(|_| {
            crate::Error::Domain(format!("negative value {v:e} at ball node {i}"))
        })?;
        vol += rule.weight(i) * (0.5 * g2 + f);
    }
    vol *= r.powi(d as i32);
    let mut surf = 0.0;
    for j in 0..rule.direction_count() {
        let p = rule.direction(j);
        for k in 0..d {
            y[k] = center[k] + r * p[k];
        }
        let v = u.value(&y[..d])?;
        surf += rule.direction_weight(j) * v * v;
    }
    surf *= r.powi(d as i32 - 1);
    let rd2 = r.powi(d as i32 + 2) * l * l;
    Ok(sf.alpha * vol / rd2 - surf / (rd2 * r))
}

/// `I(r;u,x⁰)` evaluated on the rescaled field `u_r`.
pub fn i_correction<F: Field + ?Sized>(
    u: &F,
    center: &[f64],
    r: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    let ur = Rescaled::new(u, center, r)?;
    i_correction_rescaled(&ur, r, rule)
}

/// `I(r)` from an already rescaled field.
pub fn i_correction_rescaled<F: Field + ?Sized>(
    ur: &F,
    r: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    if rule.domain() != Domain::Ball {
        return domain("i_correction needs a ball rule");
    }
    let sf = scaling_factors(r)?;
    let lr = r.ln();
    let l = 1.0 - 2.0 * lr;
    let d = ur.dim();
    let mut g = [0.0; 3];
    let mut first = 0.0;
    let mut second = 0.0;
    for i in 0..rule.len() {
        let v = ur.value_and_gradient(rule.point(i), &mut g[..d])?;
        if v < 0.0 {
            return domain(format!("negative value {v:e} at ball node {i}"));
        }
        let g2: f64 = g[..d].iter().map(|x| x * x).sum();
        let w = rule.weight(i);
        first += w * (0.5 * g2 + g_unchecked(lr, v));
        if v > 0.0 {
            second += w * 2.0 * v / (r * l * l) * (1.0 - (v.ln() + l.ln()));
        }
    }
    Ok(first / (2.0 * r * lr * lr) + sf.alpha * second)
}

/// Right-hand side of the monotonicity identity:
/// `(α(r)/r) ∫_{∂B₁} (∇u_r·x − (2/α(r)) u_r)² + I(r)`.
pub fn monotonicity_rhs<F: Field + ?Sized>(
    u: &F,
    center: &[f64],
    r: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    let ur = Rescaled::new(u, center, r)?;
    let a = alpha(r)?;
    let d = u.dim();
    let mut g = [0.0; 3];
    let mut s = 0.0;
    for j in 0..rule.direction_count() {
        let x = rule.direction(j);
        let v = ur.value_and_gradient(x, &mut g[..d])?;
        let radial: f64 = g[..d].iter().zip(x).map(|(a, b)| a * b).sum();
        let t = radial - 2.0 / a * v;
        s += rule.direction_weight(j) * t * t;
    }
    Ok(a / r * s + i_correction_rescaled(&ur, r, rule)?)
}

/// `T(s;c) = (d+2)⁻² ∫_{∂B₁} c / log s`.
pub fn t_term(s: f64, trace: &SphereTrace) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return domain(format!("T needs 0 < s < 1, got {s}"));
    }
    let d = trace.dim() as f64;
    Ok(trace.integral() / (s.ln() * (d + 2.0) * (d + 2.0)))
}

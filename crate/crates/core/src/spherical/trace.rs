use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::geometry::{check_dim, dot, sphere_area, Domain, QuadratureRule};
use crate::spherical::basis::{Basis, Mode};

/// A function on the unit sphere, stored by its coefficients in the
/// orthonormal eigenbasis up to degree `cutoff`.
///
/// When built by [`SphereTrace::analyze`] the input samples are kept so that
/// pointwise values (including content above the cutoff) stay available.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereTrace {
    dim: usize,
    cutoff: usize,
    coeffs: Vec<f64>,
    samples: Option<Samples>,
    nonneg: bool,
}

/// Samples of a trace at the directions of a sphere rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub order: usize,
    pub values: Vec<f64>,
    /// `∫ c²` by the same rule.
    pub l2_sq: f64,
}

pub fn default_cutoff(dim: usize) -> usize {
    if dim == 2 {
        16
    } else {
        10
    }
}

impl SphereTrace {
    pub fn zero(dim: usize, cutoff: usize) -> Result<Self> {
        let n = Basis::new(dim, cutoff)?.len();
        Ok(Self {
            dim,
            cutoff,
            coeffs: vec![0.0; n],
            samples: None,
            nonneg: true,
        })
    }

    /// Trace from raw coefficients in basis order. The non-negativity flag is
    /// left unset.
    pub fn from_coeffs(dim: usize, cutoff: usize, coeffs: Vec<f64>) -> Result<Self> {
        let n = Basis::new(dim, cutoff)?.len();
        if coeffs.len() != n {
            return config(format!(
                "expected {n} coefficients for d={dim}, L={cutoff}, got {}",
                coeffs.len()
            ));
        }
        Ok(Self {
            dim,
            cutoff,
            coeffs,
            samples: None,
            nonneg: false,
        })
    }

    /// Projects samples taken at the directions of `rule` onto the basis.
    pub fn analyze(rule: &QuadratureRule, samples: &[f64], cutoff: usize) -> Result<Self> {
        if rule.domain() != Domain::Sphere {
            return config("analysis needs a sphere rule");
        }
        if 2 * cutoff > rule.exactness() {
            return config(format!(
                "cutoff {cutoff} needs a rule exact to degree {}, rule is exact to {}",
                2 * cutoff,
                rule.exactness()
            ));
        }
        if samples.len() != rule.len() {
            return config(format!(
                "{} samples for a rule with {} nodes",
                samples.len(),
                rule.len()
            ));
        }
        let dim = rule.dim();
        let basis = Basis::new(dim, cutoff)?;
        let mut coeffs = vec![0.0; basis.len()];
        let mut v = vec![0.0; basis.len()];
        let mut l2_sq = 0.0;
        for (i, &c) in samples.iter().enumerate() {
            basis.eval(rule.point(i), &mut v);
            let w = rule.weight(i);
            for (acc, phi) in coeffs.iter_mut().zip(&v) {
                *acc += w * c * phi;
            }
            l2_sq += w * c * c;
        }
        let nonneg = samples.iter().all(|&c| c >= 0.0);
        Ok(Self {
            dim,
            cutoff,
            coeffs,
            samples: Some(Samples {
                order: rule_order(rule),
                values: samples.to_vec(),
                l2_sq,
            }),
            nonneg,
        })
    }

    /// Samples `f` at the rule directions and analyzes.
    pub fn analyze_fn(
        rule: &QuadratureRule,
        cutoff: usize,
        mut f: impl FnMut(&[f64]) -> f64,
    ) -> Result<Self> {
        let samples: Vec<f64> = (0..rule.len()).map(|i| f(rule.point(i))).collect();
        Self::analyze(rule, &samples, cutoff)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn basis(&self) -> Basis {
        Basis::new(self.dim, self.cutoff).expect("validated at construction")
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        self.samples = None;
        &mut self.coeffs
    }

    pub fn coeff(&self, mode: Mode) -> f64 {
        self.basis()
            .position(mode)
            .map(|j| self.coeffs[j])
            .unwrap_or(0.0)
    }

    pub fn samples(&self) -> Option<&Samples> {
        self.samples.as_ref()
    }

    pub fn is_nonneg(&self) -> bool {
        self.nonneg
    }

    pub fn set_nonneg(&mut self, flag: bool) {
        self.nonneg = flag;
    }

    /// `Σ c_j φ_j(θ)`.
    pub fn synthesize(&self, theta: &[f64]) -> f64 {
        let basis = self.basis();
        let mut v = vec![0.0; basis.len()];
        basis.eval(theta, &mut v);
        dot(&self.coeffs, &v)
    }

    /// Value and tangential gradient of the truncated expansion.
    pub fn synthesize_with_gradient(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let basis = self.basis();
        let d = self.dim;
        let mut v = vec![0.0; basis.len()];
        let mut g = vec![0.0; basis.len() * d];
        basis.eval_with_gradient(theta, &mut v, &mut g);
        grad[..d].iter_mut().for_each(|x| *x = 0.0);
        for (j, c) in self.coeffs.iter().enumerate() {
            for k in 0..d {
                grad[k] += c * g[j * d + k];
            }
        }
        dot(&self.coeffs, &v)
    }

    /// `Σ c_j²`.
    pub fn coeff_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// `‖∇_θ c‖² = Σ λ_j c_j²`.
    pub fn gradient_norm_sq(&self) -> f64 {
        let basis = self.basis();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| basis.eigenvalue(j) * c * c)
            .sum()
    }

    /// `∫_{∂B₁} c` from the constant mode.
    pub fn integral(&self) -> f64 {
        self.coeffs[0] * sphere_area(self.dim).sqrt()
    }

    /// Energy of the sampled function above the cutoff, `∫c² − Σc_j²`.
    /// Differences at the level of round-off count as zero.
    pub fn tail_energy(&self) -> f64 {
        self.samples
            .as_ref()
            .map(|s| {
                let resolved = self.coeff_norm_sq();
                let gap = s.l2_sq - resolved;
                if gap <= 1e-12 * s.l2_sq.max(resolved) {
                    0.0
                } else {
                    gap
                }
            })
            .unwrap_or(0.0)
    }

    /// Coefficient-wise `self + t·other`.
    pub fn add_scaled(&self, other: &SphereTrace, t: f64) -> Result<Self> {
        if self.dim != other.dim || self.cutoff != other.cutoff {
            return config("traces differ in dimension or cutoff");
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + t * b)
            .collect();
        Self::from_coeffs(self.dim, self.cutoff, coeffs)
    }

    pub fn to_json(&self) -> TraceJson {
        let basis = self.basis();
        TraceJson {
            d: self.dim,
            cutoff: self.cutoff,
            coeffs: basis
                .modes()
                .iter()
                .zip(&self.coeffs)
                .map(|(m, &value)| CoeffEntry {
                    degree: m.degree,
                    index: m.index,
                    value,
                })
                .collect(),
        }
    }

    pub fn from_json(json: &TraceJson) -> Result<Self> {
        check_dim(json.d)?;
        let mut t = Self::zero(json.d, json.cutoff)?;
        t.nonneg = false;
        let basis = t.basis();
        for e in &json.coeffs {
            let j = basis
                .position(Mode {
                    degree: e.degree,
                    index: e.index,
                })
                .ok_or_else(|| {
                    Error::Parse(format!(
                        "mode (degree {}, index {}) outside basis with L={}",
                        e.degree, e.index, json.cutoff
                    ))
                })?;
            t.coeffs[j] = e.value;
        }
        Ok(t)
    }
}

fn rule_order(rule: &QuadratureRule) -> usize {
    if rule.dim() == 2 {
        rule.len()
    } else {
        rule.exactness().div_ceil(2)
    }
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceJson {
    pub d: usize,
    #[serde(rename = "L")]
    pub cutoff: usize,
    pub coeffs: Vec<CoeffEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffEntry {
    pub degree: usize,
    pub index: i64,
    pub value: f64,
}

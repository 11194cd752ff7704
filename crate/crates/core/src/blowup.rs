//! Rescalings `u_r(x) = u(x⁰ + r x)/μ(r)`, blow-up candidates, the
//! regular/singular classification of free-boundary points and strata of
//! singular points.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{mu, theta, weiss_energy, Rescaled};
use crate::error::{config, domain, Result};
use crate::geometry::{norm, Field, QuadratureRule};
use crate::solver::contact_density;
use crate::spherical::{
    default_cutoff, dist_to_k, halfspace_value, QuadraticForm, SphereTrace, TraceJson,
};

/// `x ↦ u(x⁰ + r x)/μ(r)`. Points outside the domain of `u` surface as
/// errors on evaluation.
pub fn rescale<'a, F: Field + ?Sized>(u: &'a F, center: &[f64], r: f64) -> Result<Rescaled<'a, F>> {
    Rescaled::new(u, center, r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Regular,
    Singular,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Candidate {
    Quadratic { a: QuadraticForm },
    /// `amplitude · ½(x·ν)₊²` with `|ν| = 1`.
    HalfSpace { nu: Vec<f64>, amplitude: f64 },
    Degenerate,
}

impl Candidate {
    pub fn value(&self, theta: &[f64]) -> f64 {
        match self {
            Candidate::Quadratic { a } => a.value(theta),
            Candidate::HalfSpace { nu, amplitude } => amplitude * halfspace_value(nu, theta),
            Candidate::Degenerate => 0.0,
        }
    }
}

fn default_tau() -> f64 {
    0.15
}
fn default_min_cells() -> f64 {
    8.0
}
fn default_stratum_tol() -> f64 {
    0.05
}
fn default_contact_singular() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupConfig {
    /// Half-width of the energy bands, in units of `Θ`.
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Radii below `min_cells · h` are unreliable.
    #[serde(default = "default_min_cells")]
    pub min_cells: f64,
    #[serde(default = "default_stratum_tol")]
    pub stratum_tol: f64,
    /// Contact density above which a point is not accepted as singular, and
    /// below which it is not accepted as regular.
    #[serde(default = "default_contact_singular")]
    pub contact_split: f64,
    /// Level defining the contact set of `u`. When absent, the contact set
    /// of `u_r` is `{u_r ≤ 1e-8 · max_{∂B₁} u_r}`.
    #[serde(default)]
    pub threshold: Option<f64>,
}

impl Default for BlowupConfig {
    fn default() -> Self {
        Self {
            tau: default_tau(),
            min_cells: default_min_cells(),
            stratum_tol: default_stratum_tol(),
            contact_split: default_contact_singular(),
            threshold: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusEntry {
    pub r: f64,
    pub reliable: bool,
    pub trace: TraceJson,
    pub dist_to_k: f64,
    /// `‖u_r − candidate‖_{L¹(∂B₁)}`.
    pub l1_distance: f64,
    pub weiss: f64,
    pub contact_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupRecord {
    pub center: Vec<f64>,
    pub config: BlowupConfig,
    /// Decreasing.
    pub entries: Vec<RadiusEntry>,
    pub candidate: Candidate,
    pub halfspace_residual: f64,
    pub quadratic_residual: f64,
    /// Distances nonincreasing over the last four reliable radii.
    pub monotone_tail: bool,
    pub classification: Classification,
    /// Energy used for the classification and its radius.
    pub energy: f64,
    pub energy_radius: f64,
    pub stratum: Option<usize>,
    pub diagnostics: Vec<String>,
}

impl BlowupRecord {
    /// `r,reliable,l1_distance,dist_to_k,W,contact_density,c_0,…`
    pub fn to_csv(&self) -> String {
        let n = self.entries.first().map_or(0, |e| e.trace.coeffs.len());
        let mut s = String::from("r,reliable,l1_distance,dist_to_k,W,contact_density");
        for j in 0..n {
            let _ = write!(s, ",c_{j}");
        }
        s.push('\n');
        for e in &self.entries {
            let _ = write!(
                s,
                "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e}",
                e.r, e.reliable, e.l1_distance, e.dist_to_k, e.weiss, e.contact_density
            );
            for c in &e.trace.coeffs {
                let _ = write!(s, ",{:.16e}", c.value);
            }
            s.push('\n');
        }
        s
    }
}

/// Number of eigenvalues of `A` within `tol` of zero.
pub fn stratum(a: &QuadraticForm, tol: f64) -> Result<usize> {
    if !(tol > 0.0) {
        return config("stratum tolerance must be positive");
    }
    if (a.trace() - 1.0).abs() > tol {
        return domain(format!("stratum needs tr A = 1, got {}", a.trace()));
    }
    let vals = a.eigenvalues();
    if vals[0] < -tol {
        return domain(format!("stratum needs A positive semidefinite, min eigenvalue {}", vals[0]));
    }
    Ok(vals.iter().filter(|v| v.abs() <= tol).count())
}

struct Sampled {
    r: f64,
    reliable: bool,
    samples: Vec<f64>,
    weiss: f64,
    contact: f64,
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return config("need at least one radius");
    }
    if radii.windows(2).any(|w| !(w[1] < w[0])) {
        return config("radii must be strictly decreasing");
    }
    if radii.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return config("radii must lie in (0, 1)");
    }
    Ok(())
}

fn l1(rule: &QuadratureRule, samples: &[f64], cand: &Candidate) -> f64 {
    (0..rule.len())
        .map(|j| rule.weight(j) * (samples[j] - cand.value(rule.point(j))).abs())
        .sum()
}

/// Best half-space candidate: direction from the degree-one modes, amplitude
/// by least squares. Returns the candidate and its `L²` residual.
fn halfspace_fit(rule: &QuadratureRule, trace: &SphereTrace, samples: &[f64]) -> (Candidate, f64) {
    let d = trace.dim();
    let basis = trace.basis();
    let b: Vec<f64> = (0..d).map(|i| trace.coeffs()[basis.degree_one_mode(i)]).collect();
    let n = norm(&b);
    if n == 0.0 {
        return (Candidate::Degenerate, f64::INFINITY);
    }
    let nu: Vec<f64> = b.iter().map(|v| v / n).collect();
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..rule.len() {
        let h = halfspace_value(&nu, rule.point(j));
        num += rule.weight(j) * h * samples[j];
        den += rule.weight(j) * h * h;
    }
    let amplitude = num / den;
    let cand = Candidate::HalfSpace { nu, amplitude };
    let res: f64 = (0..rule.len())
        .map(|j| {
            let e = samples[j] - cand.value(rule.point(j));
            rule.weight(j) * e * e
        })
        .sum();
    (cand, res.sqrt())
}

/// Traces of `u_r` at each radius, the limit candidate taken from the smallest
/// reliable radius, `L¹(∂B₁)` distances and the classification.
pub fn estimate_blowup<F: Field + Sync + ?Sized>(
    u: &F,
    center: &[f64],
    radii: &[f64],
    cfg: &BlowupConfig,
) -> Result<BlowupRecord> {
    check_radii(radii)?;
    let dim = u.dim();
    if center.len() != dim {
        return domain("center dimension does not match the field");
    }
    let sphere = QuadratureRule::default_sphere(dim)?;
    let ball = QuadratureRule::default_ball(dim)?;
    let th = theta(dim);
    let h = u.spacing();

    let largest = radii[0];
    let mut sup: f64 = 0.0;
    for j in 0..sphere.len() {
        let x: Vec<f64> = (0..dim).map(|k| center[k] + largest * sphere.point(j)[k]).collect();
        sup = sup.max(u.value(&x)?);
    }
    let thr = cfg.threshold.unwrap_or(1e-8 * sup);
    let here = u.value(center)?;
    // interpolation at a cell center off the discrete free boundary is O(h²|log h|)
    let slack = h.map_or(0.0, |h| dim as f64 * h * h * h.ln().abs());
    if here > thr + slack {
        return domain(format!(
            "u(x0) = {here:e} exceeds the contact threshold; not a free-boundary point"
        ));
    }

    let sampled: Vec<Sampled> = radii
        .par_iter()
        .map(|&r| -> Result<Sampled> {
            let ur = rescale(u, center, r)?;
            let samples = (0..sphere.len())
                .map(|j| ur.value(sphere.point(j)))
                .collect::<Result<Vec<f64>>>()?;
            let degenerate = sup == 0.0;
            // contact set of u_r, so the level follows the scale
            let level = match cfg.threshold {
                Some(t) => t / mu(r)?,
                None => 1e-8 * samples.iter().cloned().fold(0.0, f64::max),
            };
            let contact = if degenerate {
                1.0
            } else {
                contact_density(&ur, &vec![0.0; dim], 1.0, level)?
            };
            Ok(Sampled {
                r,
                reliable: h.is_none_or(|h| r >= cfg.min_cells * h),
                weiss: if degenerate { 0.0 } else { weiss_energy(u, center, r, &ball)? },
                contact,
                samples,
            })
        })
        .collect::<Result<_>>()?;

    let mut diagnostics = Vec::new();
    let cutoff = default_cutoff(dim);
    let traces = sampled
        .iter()
        .map(|s| SphereTrace::analyze(&sphere, &s.samples, cutoff))
        .collect::<Result<Vec<_>>>()?;
    let dists = traces
        .iter()
        .map(|t| dist_to_k(t).map(|(d, _)| d))
        .collect::<Result<Vec<_>>>()?;
    let pick = match sampled.iter().rposition(|s| s.reliable) {
        Some(k) => k,
        None => {
            diagnostics.push("no reliable radius; candidate from the smallest radius".into());
            sampled.len() - 1
        }
    };

    let (candidate, hres, qres) = if sup == 0.0 {
        diagnostics.push("degenerate".into());
        (Candidate::Degenerate, f64::INFINITY, f64::INFINITY)
    } else {
        let (hs, hres) = halfspace_fit(&sphere, &traces[pick], &sampled[pick].samples);
        let (qres, a) = dist_to_k(&traces[pick])?;
        if hres < qres {
            (hs, hres, qres)
        } else {
            (Candidate::Quadratic { a }, hres, qres)
        }
    };

    let entries: Vec<RadiusEntry> = sampled
        .iter()
        .zip(traces.iter().zip(&dists))
        .map(|(s, (t, &dk))| RadiusEntry {
            r: s.r,
            reliable: s.reliable,
            trace: t.to_json(),
            dist_to_k: dk,
            l1_distance: l1(&sphere, &s.samples, &candidate),
            weiss: s.weiss,
            contact_density: s.contact,
        })
        .collect();

    let tail: Vec<f64> = entries
        .iter()
        .filter(|e| e.reliable)
        .map(|e| e.l1_distance)
        .collect();
    let last = &tail[tail.len().saturating_sub(4)..];
    let monotone_tail =
        last.len() >= 2 && last.windows(2).all(|w| w[1] <= w[0] + 1e-12 * (1.0 + w[0]));

    let e = &entries[pick];
    let (energy, energy_radius) = (e.weiss, e.r);
    let tau = cfg.tau * th;
    let mut classification = if sup == 0.0 {
        Classification::Undecided
    } else if (energy - th).abs() <= tau {
        Classification::Singular
    } else if (energy - th / 2.0).abs() <= tau {
        Classification::Regular
    } else {
        diagnostics.push(format!(
            "W = {:.6}Θ outside both bands",
            energy / th
        ));
        Classification::Undecided
    };
    match classification {
        Classification::Singular if e.contact_density > cfg.contact_split => {
            diagnostics.push(format!(
                "energy near Θ but contact density {:.3}",
                e.contact_density
            ));
            classification = Classification::Undecided;
        }
        Classification::Regular if e.contact_density < cfg.contact_split => {
            diagnostics.push(format!(
                "energy near Θ/2 but contact density {:.3}",
                e.contact_density
            ));
            classification = Classification::Undecided;
        }
        _ => {}
    }
    let stratum = match (&classification, &candidate) {
        (Classification::Singular, Candidate::Quadratic { a }) => match stratum(a, cfg.stratum_tol) {
            Ok(k) => Some(k),
            Err(err) => {
                diagnostics.push(format!("stratum: {err}"));
                None
            }
        },
        _ => None,
    };

    Ok(BlowupRecord {
        center: center.to_vec(),
        config: cfg.clone(),
        entries,
        candidate,
        halfspace_residual: hres,
        quadratic_residual: qres,
        monotone_tail,
        classification,
        energy,
        energy_radius,
        stratum,
        diagnostics,
    })
}

/// Classification of `x⁰` from `W` at the smallest reliable radius, checked
/// against the contact density there.
pub fn classify_point<F: Field + Sync + ?Sized>(
    u: &F,
    center: &[f64],
    radii: &[f64],
    cfg: &BlowupConfig,
) -> Result<Classification> {
    Ok(estimate_blowup(u, center, radii, cfg)?.classification)
}

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::epiperimetric::competitor::{check_inequality, extension_excess, EpiConfig, EpiReport, IContext};
use crate::error::{config, Result};
use crate::geometry::QuadratureRule;
use crate::spherical::{default_cutoff, split_modes, QuadraticForm, SphereTrace};

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyMember {
    pub id: usize,
    pub a: QuadraticForm,
    /// `L²(∂B₁)` norm of the higher-mode perturbation.
    pub amplitude: f64,
    pub trace: SphereTrace,
}

fn random_rotation(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
    m.qr().q()
}

/// Traces `Q_A + φ` with `A` positive definite of trace 1 (eigenvalues at
/// least `1/(2d)`) and `φ` a random mix of degrees 3 and higher with
/// `‖φ‖_{L²} ≤ max_amplitude`. Members stay nonnegative on the sphere.
pub fn generate_family(
    dim: usize,
    count: usize,
    max_amplitude: f64,
    seed: u64,
) -> Result<Vec<FamilyMember>> {
    crate::geometry::check_dim(dim)?;
    if !(max_amplitude > 0.0) {
        return config("perturbation amplitude must be positive");
    }
    let cutoff = default_cutoff(dim);
    let top = cutoff.min(6);
    let sphere = QuadratureRule::default_sphere(dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for id in 0..count {
        let w: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.2..1.0)).collect();
        let total: f64 = w.iter().sum();
        let r = random_rotation(dim, &mut rng);
        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            dim,
            w.iter().map(|x| x / total),
        ));
        let m = DMatrix::identity(dim, dim) * (0.5 / dim as f64) + &r * diag * r.transpose() * 0.5;
        let m = (&m + m.transpose()) * 0.5;
        let a = QuadraticForm::new(m)?;

        let mut trace = SphereTrace::zero(dim, cutoff)?;
        let basis = trace.basis();
        for (j, q) in QuadraticForm::mode_indices(dim).into_iter().zip(a.mode_coeffs()) {
            trace.coeffs_mut()[j] = q;
        }
        let mut phi = vec![0.0; basis.len()];
        for k in 3..=top {
            for j in basis.degree_range(k) {
                phi[j] = rng.gen_range(-1.0..1.0);
            }
        }
        let norm = phi.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut amplitude = max_amplitude * rng.gen_range(0.1..1.0);
        let mut candidate;
        loop {
            candidate = trace.clone();
            for (c, p) in candidate.coeffs_mut().iter_mut().zip(&phi) {
                *c += amplitude * p / norm;
            }
            let min = (0..sphere.len())
                .map(|i| candidate.synthesize(sphere.point(i)))
                .fold(f64::INFINITY, f64::min);
            if min >= 0.0 {
                break;
            }
            amplitude *= 0.5;
        }
        candidate.set_nonneg(true);
        out.push(FamilyMember {
            id,
            a,
            amplitude,
            trace: candidate,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C4Measure {
    pub s: f64,
    /// `excess/‖∇_θφ‖²` per trace; `None` where `φ = 0`.
    pub ratios: Vec<Option<f64>>,
    pub max: f64,
    pub measured: usize,
    pub skipped: usize,
}

/// Empirical `max (M(s;z) − Θ)/‖∇_θφ‖²` over a family, zero context.
pub fn c4_measure(traces: &[SphereTrace], s: f64) -> Result<C4Measure> {
    let ratios: Vec<Option<f64>> = traces
        .par_iter()
        .map(|c| -> Result<Option<f64>> {
            let split = split_modes(c)?;
            let g2 = super::phi_energy(&split.phi, c);
            if g2 <= 0.0 {
                return Ok(None);
            }
            let rule = QuadratureRule::default_ball(c.dim())?;
            Ok(Some(extension_excess(c, s, &rule)? / g2))
        })
        .collect::<Result<_>>()?;
    let measured = ratios.iter().flatten().count();
    let max = ratios.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(C4Measure {
        s,
        max: if measured == 0 { 0.0 } else { max },
        measured,
        skipped: ratios.len() - measured,
        ratios,
    })
}

fn default_count() -> usize {
    200
}
fn default_scales() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4]
}
fn default_amplitude() -> f64 {
    0.045
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub dim: usize,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_scales")]
    pub scales: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub epi: EpiConfig,
    /// Fixed `C₄`; measured per scale from the family when absent.
    #[serde(default)]
    pub c4: Option<f64>,
}

impl SweepConfig {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            count: default_count(),
            scales: default_scales(),
            seed: 0,
            amplitude: default_amplitude(),
            epi: EpiConfig::default(),
            c4: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub trace_id: usize,
    pub s: f64,
    pub excess: f64,
    pub alpha: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub t: f64,
    pub pass: bool,
    /// Pass test with `T` replaced by `−T`; informational.
    pub pass_flipped_t: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub config: SweepConfig,
    pub c4: Vec<C4Measure>,
    pub rows: Vec<SweepRow>,
    /// Full reports of failing cases.
    pub failures: Vec<EpiReport>,
    pub total: usize,
    pub passed: usize,
    pub pass_rate: f64,
    pub pass_rate_flipped_t: f64,
    /// Empirical `C₃`: max of the higher-mode ratio.
    pub c3_max: f64,
}

impl SweepSummary {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("trace_id,s,excess,alpha,lhs,rhs,T,pass\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
                r.trace_id, r.s, r.excess, r.alpha, r.lhs, r.rhs, r.t, r.pass
            ));
        }
        s
    }
}

pub fn sweep(cfg: &SweepConfig) -> Result<SweepSummary> {
    if cfg.count == 0 || cfg.scales.is_empty() {
        return config("sweep needs at least one trace and one scale");
    }
    let family = generate_family(cfg.dim, cfg.count, cfg.amplitude, cfg.seed)?;
    let traces: Vec<SphereTrace> = family.iter().map(|m| m.trace.clone()).collect();
    let mut c4 = Vec::with_capacity(cfg.scales.len());
    for &s in &cfg.scales {
        c4.push(match cfg.c4 {
            Some(v) => C4Measure {
                s,
                ratios: Vec::new(),
                max: v,
                measured: 0,
                skipped: 0,
            },
            None => c4_measure(&traces, s)?,
        });
    }
    let jobs: Vec<(usize, usize)> = (0..cfg.scales.len())
        .flat_map(|k| (0..family.len()).map(move |i| (k, i)))
        .collect();
    let results: Vec<(SweepRow, Option<EpiReport>)> = jobs
        .par_iter()
        .map(|&(k, i)| {
            let s = cfg.scales[k];
            let epi = EpiConfig {
                c4: c4[k].max.max(0.0),
                ..cfg.epi.clone()
            };
            match check_inequality(&family[i].trace, s, &epi, &IContext::Zero) {
                Ok(rep) => {
                    let flipped = rep.rhs - 2.0 * rep.t_value;
                    let row = SweepRow {
                        trace_id: i,
                        s,
                        excess: rep.excess,
                        alpha: rep.alpha,
                        lhs: rep.lhs,
                        rhs: rep.rhs,
                        t: rep.t_value,
                        pass: rep.pass,
                        pass_flipped_t: rep.negative_samples == 0
                            && rep.lhs <= flipped + epi.tol * (1.0 + flipped.abs()),
                        error: None,
                    };
                    let keep = (!rep.pass).then_some(rep);
                    (row, keep)
                }
                Err(e) => (
                    SweepRow {
                        trace_id: i,
                        s,
                        excess: f64::NAN,
                        alpha: f64::NAN,
                        lhs: f64::NAN,
                        rhs: f64::NAN,
                        t: f64::NAN,
                        pass: false,
                        pass_flipped_t: false,
                        error: Some(e.to_string()),
                    },
                    None,
                ),
            }
        })
        .collect();
    let c3_max = family
        .par_iter()
        .map(|m| -> Result<f64> {
            let split = split_modes(&m.trace)?;
            Ok(super::higher_mode_ratio(&split).unwrap_or(0.0))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let (rows, failures): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let total = rows.len();
    let passed = rows.iter().filter(|r| r.pass).count();
    let flipped = rows.iter().filter(|r| r.pass_flipped_t).count();
    Ok(SweepSummary {
        config: cfg.clone(),
        c4,
        failures: failures.into_iter().flatten().collect(),
        total,
        passed,
        pass_rate: passed as f64 / total as f64,
        pass_rate_flipped_t: flipped as f64 / total as f64,
        c3_max,
        rows,
    })
}

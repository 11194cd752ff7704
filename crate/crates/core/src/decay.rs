//! Decay fits: the logarithmic model `e(r) = (−Cγ log(r/r₀))^{−1/γ}`, the
//! Hölder model `e(r) = C r^β`, blow-up convergence moduli and the modulus of
//! continuity of `x ↦ Q_{A(x)}` over singular points.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::blowup::{estimate_blowup, BlowupConfig, BlowupRecord, Classification};
use crate::energy::{corrected_excess_table, theta, EnergyTable};
use crate::error::{config, Error, Result};
use crate::geometry::{norm, Field, QuadratureRule};
use crate::spherical::{quadratic_distance, QuadraticForm};

/// Log-log RMS above which a fit is flagged.
pub const POOR_FIT_RMS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    LogPower,
    Holder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub model: DecayModel,
    pub c: f64,
    pub r0: Option<f64>,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    /// RMS of `log e − log model`.
    pub residual: f64,
    pub samples: usize,
    /// Samples dropped for being nonpositive.
    pub dropped: usize,
    pub poor: bool,
}

impl DecayFit {
    pub fn csv_header() -> &'static str {
        "model,c,r0,gamma,beta,residual,samples,dropped,poor"
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.16e}"));
        format!(
            "{},{:.16e},{},{},{},{:.16e},{},{},{}",
            match self.model {
                DecayModel::LogPower => "log_power",
                DecayModel::Holder => "holder",
            },
            self.c,
            opt(self.r0),
            opt(self.gamma),
            opt(self.beta),
            self.residual,
            self.samples,
            self.dropped,
            self.poor
        )
    }
}

fn positive(samples: &[(f64, f64)]) -> Result<(Vec<(f64, f64)>, usize)> {
    if samples.iter().any(|&(r, _)| !(r > 0.0 && r < 1.0)) {
        return config("sample radii must lie in (0, 1)");
    }
    let kept: Vec<(f64, f64)> = samples.iter().cloned().filter(|&(_, e)| e > 0.0).collect();
    let dropped = samples.len() - kept.len();
    if kept.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} usable samples ({} dropped as nonpositive), need at least 2",
            kept.len(),
            dropped
        )));
    }
    Ok((kept, dropped))
}

/// Least squares `y = a x + b`.
fn affine(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let a = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (a, my - a * mx)
}

fn log_rms(samples: &[(f64, f64)], model: impl Fn(f64) -> f64) -> f64 {
    let s: f64 = samples
        .iter()
        .map(|&(r, e)| {
            let m = model(r);
            if m > 0.0 && m.is_finite() {
                (e.ln() - m.ln()).powi(2)
            } else {
                f64::INFINITY
            }
        })
        .sum();
    (s / samples.len() as f64).sqrt()
}

/// Fits `e^{−γ} = Cγ(−log r) + Cγ log r₀`, affine in `−log r`. With
/// `fit_r0 = false`, `r₀ = 1`.
pub fn fit_log_decay(samples: &[(f64, f64)], gamma: f64, fit_r0: bool) -> Result<DecayFit> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return config(format!("gamma must lie in (0, 1), got {gamma}"));
    }
    let (kept, dropped) = positive(samples)?;
    let pts: Vec<(f64, f64)> = kept.iter().map(|&(r, e)| (-r.ln(), e.powf(-gamma))).collect();
    let (a, b) = if fit_r0 {
        affine(&pts)
    } else {
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        (sxy / sxx, 0.0)
    };
    let c = a / gamma;
    let r0 = if a > 0.0 { (b / a).exp() } else { f64::NAN };
    let residual = log_rms(&kept, |r| {
        let t = -c * gamma * (r / r0).ln();
        if t > 0.0 {
            t.powf(-1.0 / gamma)
        } else {
            f64::NAN
        }
    });
    let poor = !(residual <= POOR_FIT_RMS) || !(c > 0.0) || !(r0 > 0.0 && r0 <= 1.0);
    Ok(DecayFit {
        model: DecayModel::LogPower,
        c,
        r0: Some(r0),
        gamma: Some(gamma),
        beta: None,
        residual,
        samples: kept.len(),
        dropped,
        poor,
    })
}

/// Fits `log e = log C + β log r`.
pub fn fit_holder(samples: &[(f64, f64)]) -> Result<DecayFit> {
    let (kept, dropped) = positive(samples)?;
    let pts: Vec<(f64, f64)> = kept.iter().map(|&(r, e)| (r.ln(), e.ln())).collect();
    let (beta, logc) = affine(&pts);
    let c = logc.exp();
    let residual = log_rms(&kept, |r| c * r.powf(beta));
    Ok(DecayFit {
        model: DecayModel::Holder,
        c,
        r0: None,
        gamma: None,
        beta: Some(beta),
        residual,
        samples: kept.len(),
        dropped,
        poor: !(residual <= POOR_FIT_RMS) || !(beta > 0.0 && beta < 1.0),
    })
}

/// Fits `dist = C(−log r)^{−(1−γ)/(2γ)}` with the exponent fixed; `γ = 0`
/// routes to [`fit_holder`].
pub fn fit_modulus(samples: &[(f64, f64)], gamma: f64) -> Result<DecayFit> {
    if gamma == 0.0 {
        return fit_holder(samples);
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return config(format!("gamma must lie in [0, 1), got {gamma}"));
    }
    let (kept, dropped) = positive(samples)?;
    let p = -(1.0 - gamma) / (2.0 * gamma);
    let logc = kept
        .iter()
        .map(|&(r, e)| e.ln() - p * (-r.ln()).ln())
        .sum::<f64>()
        / kept.len() as f64;
    let c = logc.exp();
    let residual = log_rms(&kept, |r| c * (-r.ln()).powf(p));
    Ok(DecayFit {
        model: DecayModel::LogPower,
        c,
        r0: None,
        gamma: Some(gamma),
        beta: None,
        residual,
        samples: kept.len(),
        dropped,
        poor: !(residual <= POOR_FIT_RMS),
    })
}

/// Blow-up convergence modulus from the reliable `L¹(∂B₁)` distances.
pub fn blowup_modulus(record: &BlowupRecord, gamma: f64) -> Result<DecayFit> {
    let samples: Vec<(f64, f64)> = record
        .entries
        .iter()
        .filter(|e| e.reliable && e.l1_distance > 0.0)
        .map(|e| (e.r, e.l1_distance))
        .collect();
    if samples.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "{} reliable radii with positive distance, need at least 5",
            samples.len()
        )));
    }
    fit_modulus(&samples, gamma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcessSeries {
    /// `(r, e(r))`, increasing in `r`.
    pub samples: Vec<(f64, f64)>,
    pub limit: f64,
    pub classification: Classification,
    /// Set when the point is not classified singular or the field is
    /// degenerate.
    pub flagged: bool,
    pub note: Option<String>,
    pub table: EnergyTable,
}

/// `e(r) = W_I(r) − W_I(0+)` with `W_I(0+) = Θ` unless `limit` overrides it.
/// Degenerate fields use the limit 0.
pub fn excess_series<F: Field + Sync + ?Sized>(
    u: &F,
    center: &[f64],
    radii: &[f64],
    limit: Option<f64>,
    cfg: &BlowupConfig,
) -> Result<ExcessSeries> {
    let mut sorted = radii.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let decreasing: Vec<f64> = sorted.iter().rev().cloned().collect();
    let record = estimate_blowup(u, center, &decreasing, cfg)?;
    let degenerate = record.diagnostics.iter().any(|d| d == "degenerate");
    let (lim, note) = match (limit, degenerate, record.classification) {
        (Some(l), _, _) => (l, None),
        (None, true, _) => (0.0, Some("degenerate".to_string())),
        (None, false, Classification::Singular) => (theta(u.dim()), None),
        (None, false, c) => (theta(u.dim()), Some(format!("point classified {c:?}"))),
    };
    let rule = QuadratureRule::default_ball(u.dim())?;
    let table = corrected_excess_table(u, center, &sorted, lim, &rule)?;
    Ok(ExcessSeries {
        samples: table.rows.iter().map(|r| (r.r, r.excess)).collect(),
        limit: lim,
        classification: record.classification,
        flagged: degenerate || record.classification != Classification::Singular,
        note,
        table,
    })
}

/// Rate used by [`singular_modulus`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModulusRate {
    /// `(−log|x₁−x₂|)^{−(1−γ)/(2γ)}`
    Log { gamma: f64 },
    /// `|x₁−x₂|^β`
    Holder { beta: f64 },
}

impl ModulusRate {
    fn eval(self, sep: f64) -> Option<f64> {
        match self {
            ModulusRate::Log { gamma } => {
                (sep < 1.0).then(|| (-sep.ln()).powf(-(1.0 - gamma) / (2.0 * gamma)))
            }
            ModulusRate::Holder { beta } => Some(sep.powf(beta)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub i: usize,
    pub j: usize,
    pub separation: f64,
    pub distance: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusRecord {
    pub points: Vec<Vec<f64>>,
    pub forms: Vec<QuadraticForm>,
    pub rate: ModulusRate,
    pub pairs: Vec<PairEntry>,
    /// Empirical constant: the largest ratio.
    pub constant: f64,
    /// Pairs skipped as coincident or outside the domain of the rate.
    pub skipped: usize,
    /// Distance from each point to its nearest neighbour.
    pub nearest_neighbor: Vec<f64>,
}

impl ModulusRecord {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("i,j,separation,distance,ratio\n");
        for p in &self.pairs {
            let _ = writeln!(
                s,
                "{},{},{:.16e},{:.16e},{:.16e}",
                p.i, p.j, p.separation, p.distance, p.ratio
            );
        }
        s
    }
}

/// All pairwise `‖Q_{A₁} − Q_{A₂}‖_{L²(∂B₁)}` and their ratios to the rate.
pub fn singular_modulus(
    points: &[(Vec<f64>, QuadraticForm)],
    rate: ModulusRate,
) -> Result<ModulusRecord> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} singular points, need at least 2",
            points.len()
        )));
    }
    let mut pairs = Vec::new();
    let mut skipped = 0;
    let mut nearest = vec![f64::INFINITY; points.len()];
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let diff: Vec<f64> = points[i].0.iter().zip(&points[j].0).map(|(a, b)| a - b).collect();
            let sep = norm(&diff);
            nearest[i] = nearest[i].min(sep);
            nearest[j] = nearest[j].min(sep);
            let distance = quadratic_distance(&points[i].1, &points[j].1)?;
            match (sep > 0.0).then(|| rate.eval(sep)).flatten() {
                Some(w) if w > 0.0 => pairs.push(PairEntry {
                    i,
                    j,
                    separation: sep,
                    distance,
                    ratio: distance / w,
                }),
                _ => skipped += 1,
            }
        }
    }
    let constant = pairs.iter().map(|p| p.ratio).fold(0.0, f64::max);
    Ok(ModulusRecord {
        points: points.iter().map(|p| p.0.clone()).collect(),
        forms: points.iter().map(|p| p.1.clone()).collect(),
        rate,
        pairs,
        constant,
        skipped,
        nearest_neighbor: nearest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_model(c: f64, gamma: f64, r0: f64, r: f64) -> f64 {
        (-c * gamma * (r / r0).ln()).powf(-1.0 / gamma)
    }

    fn dyadic(from: i32, to: i32) -> Vec<f64> {
        (from..=to).map(|k| 2f64.powi(-k)).collect()
    }

    #[test]
    fn log_model_example_value() {
        let e = log_model(2.0, 1.0 / 3.0, 0.5, 0.05);
        assert!((e - 0.2765).abs() < 5e-5, "{e}");
    }

    #[test]
    fn log_roundtrip() {
        let s: Vec<(f64, f64)> = dyadic(2, 30).iter().map(|&r| (r, log_model(2.0, 1.0 / 3.0, 0.5, r))).collect();
        let f = fit_log_decay(&s, 1.0 / 3.0, true).unwrap();
        assert!((f.c - 2.0).abs() < 0.02 && (f.r0.unwrap() - 0.5).abs() < 0.01, "{f:?}");
        assert!(!f.poor && f.residual < 1e-10);
    }

    #[test]
    fn constant_samples_are_poor() {
        let s: Vec<(f64, f64)> = dyadic(2, 12).iter().map(|&r| (r, 0.3)).collect();
        let f = fit_log_decay(&s, 1.0 / 3.0, true).unwrap();
        assert!(f.poor);
        assert!(!(f.residual <= POOR_FIT_RMS));
    }

    #[test]
    fn nonpositive_samples_dropped() {
        let mut s: Vec<(f64, f64)> = dyadic(2, 10).iter().map(|&r| (r, log_model(2.0, 1.0 / 3.0, 0.5, r))).collect();
        s[0].1 = -1.0;
        s[1].1 = 0.0;
        assert_eq!(fit_log_decay(&s, 1.0 / 3.0, true).unwrap().dropped, 2);
        let zeros: Vec<(f64, f64)> = dyadic(2, 5).iter().map(|&r| (r, 0.0)).collect();
        assert!(matches!(fit_log_decay(&zeros, 1.0 / 3.0, true), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn holder_roundtrip_and_model_discrimination() {
        let s: Vec<(f64, f64)> = dyadic(1, 20).iter().map(|&r| (r, 3.0 * r.powf(0.4))).collect();
        let f = fit_holder(&s).unwrap();
        assert!((f.beta.unwrap() - 0.4).abs() < 1e-3 && (f.c - 3.0).abs() < 0.03);
        assert!(!f.poor);
        let s: Vec<(f64, f64)> = dyadic(1, 40).iter().map(|&r| (r, log_model(2.0, 1.0 / 3.0, 0.5, r))).collect();
        assert!(fit_holder(&s).unwrap().poor);
        assert!(matches!(fit_holder(&s[..1]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn modulus_roundtrip() {
        let p = -(1.0 - 1.0 / 3.0) / (2.0 / 3.0);
        let s: Vec<(f64, f64)> = dyadic(2, 12).iter().map(|&r| (r, 0.7 * (-r.ln()).powf(p))).collect();
        let f = fit_modulus(&s, 1.0 / 3.0).unwrap();
        assert!((f.c - 0.7).abs() < 7e-3);
    }

    #[test]
    fn singular_modulus_examples() {
        let a1 = QuadraticForm::from_diag(&[0.6, 0.4]).unwrap();
        let a2 = QuadraticForm::isotropic(2).unwrap();
        let pts = vec![(vec![0.0, 0.0], a1.clone()), (vec![0.1, 0.0], a2.clone()), (vec![0.0, 0.2], a2)];
        let rec = singular_modulus(&pts, ModulusRate::Holder { beta: 0.4 }).unwrap();
        assert!((rec.pairs[0].distance - (0.0025 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        assert_eq!(rec.pairs[2].distance, 0.0);
        assert!(rec.constant.is_finite() && rec.constant > 0.0);
        assert!(singular_modulus(&pts[..1], ModulusRate::Holder { beta: 0.4 }).is_err());
        let dup = vec![(vec![0.0, 0.0], a1.clone()), (vec![0.0, 0.0], a1)];
        assert_eq!(singular_modulus(&dup, ModulusRate::Log { gamma: 1.0 / 3.0 }).unwrap().skipped, 1);
    }
}

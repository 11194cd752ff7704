use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{i_correction, m_energy, weiss_energy, Rescaled, Variant};
use crate::error::{config, Result};
use crate::geometry::{Field, QuadratureRule};

/// One radius of an [`EnergyTable`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub r: f64,
    pub w: f64,
    pub i: f64,
    pub int_i: f64,
    pub w_i: f64,
    pub m: f64,
    pub excess: f64,
}

/// Least-squares fit of `I(ρ) ≈ C log(−log ρ)/(ρ log²ρ)` on the smallest
/// radii and the resulting estimate of `∫₀^{r_min} I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub constant: f64,
    pub r_min: f64,
    pub tail: f64,
    pub samples: usize,
}

impl TailFit {
    fn envelope(rho: f64) -> f64 {
        let t = -rho.ln();
        t.ln() / (rho * t * t)
    }

    /// Fits `C` on `(ρ, I)` pairs; the tail is `C (log t + 1)/t`, `t = −log r_min`.
    pub fn fit(samples: &[(f64, f64)]) -> Self {
        let r_min = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
        let (num, den) = samples.iter().fold((0.0, 0.0), |(n, d), &(rho, i)| {
            let e = Self::envelope(rho);
            (n + e * i, d + e * e)
        });
        let constant = if den > 0.0 { num / den } else { 0.0 };
        let t = -r_min.ln();
        let tail = if t > 0.0 && constant != 0.0 {
            constant * (t.ln() + 1.0) / t
        } else {
            0.0
        };
        Self {
            constant,
            r_min,
            tail,
            samples: samples.len(),
        }
    }
}

/// `W`, `I`, `∫₀^r I`, `W_I`, `M(r;u_r)` and the excess over a list of radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTable {
    pub center: Vec<f64>,
    pub limit: f64,
    pub tail: TailFit,
    pub rows: Vec<EnergyRow>,
}

impl EnergyTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,W,I,int_I,W_I,M,excess\n");
        for row in &self.rows {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                row.r, row.w, row.i, row.int_i, row.w_i, row.m, row.excess
            );
        }
        s
    }

    /// Largest drop of `W_I` between consecutive radii, relative to
    /// `1 + |W_I|`; zero when the column is nondecreasing.
    pub fn worst_monotonicity_violation(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|w| ((w[0].w_i - w[1].w_i) / (1.0 + w[1].w_i.abs())).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Number of log-spaced substeps per interval used for `∫ I`.
const SUBSTEPS: usize = 4;

/// `∫₀^{r_k} I` at every radius: trapezoid in `log ρ` with substeps between
/// consecutive radii, plus the fitted tail below the smallest radius.
pub fn integrate_correction(
    radii: &[f64],
    eval: impl Fn(f64) -> Result<f64> + Sync,
) -> Result<(Vec<f64>, Vec<f64>, TailFit)> {
    check_radii(radii)?;
    // I on a refined log grid, evaluated in parallel, collected in order
    let mut grid = Vec::with_capacity((radii.len() - 1) * SUBSTEPS + 1);
    for k in 0..radii.len() - 1 {
        let (a, b) = (radii[k].ln(), radii[k + 1].ln());
        for s in 0..SUBSTEPS {
            grid.push((a + (b - a) * s as f64 / SUBSTEPS as f64).exp());
        }
    }
    grid.push(*radii.last().unwrap());
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&rho| eval(rho))
        .collect::<Result<_>>()?;
    let fit_n = 3.min(radii.len());
    let fit_samples: Vec<(f64, f64)> = (0..fit_n)
        .map(|k| (radii[k], values[k * SUBSTEPS]))
        .collect();
    let tail = TailFit::fit(&fit_samples);
    let mut cumulative = Vec::with_capacity(radii.len());
    let mut acc = tail.tail;
    cumulative.push(acc);
    for k in 0..radii.len() - 1 {
        for s in 0..SUBSTEPS {
            let i0 = k * SUBSTEPS + s;
            let (r0, r1) = (grid[i0], grid[i0 + 1]);
            let h = r1.ln() - r0.ln();
            acc += 0.5 * h * (r0 * values[i0] + r1 * values[i0 + 1]);
        }
        cumulative.push(acc);
    }
    let at_radii = (0..radii.len()).map(|k| values[k * SUBSTEPS]).collect();
    Ok((at_radii, cumulative, tail))
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.len() < 2 {
        return config("need at least two radii");
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return config("radii must be strictly increasing");
    }
    if radii.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return config("radii must lie in (0, 1)");
    }
    Ok(())
}

/// Builds the energy table of `u` at `center`. `limit` is the assumed value
/// of `W_I(0+)`.
pub fn corrected_excess_table<F: Field + ?Sized>(
    u: &F,
    center: &[f64],
    radii: &[f64],
    limit: f64,
    rule: &QuadratureRule,
) -> Result<EnergyTable> {
    check_radii(radii)?;
    let (i_vals, int_i, tail) =
        integrate_correction(radii, |rho| i_correction(u, center, rho, rule))?;
    let pairs: Vec<(f64, f64)> = radii
        .par_iter()
        .map(|&r| {
            let w = weiss_energy(u, center, r, rule)?;
            let ur = Rescaled::new(u, center, r)?;
            let m = m_energy(Variant::M, Some(r), &ur, rule)?;
            Ok((w, m))
        })
        .collect::<Result<_>>()?;
    let rows = radii
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let (w, m) = pairs[k];
            let w_i = w - int_i[k];
            EnergyRow {
                r,
                w,
                i: i_vals[k],
                int_i: int_i[k],
                w_i,
                m,
                excess: w_i - limit,
            }
        })
        .collect();
    Ok(EnergyTable {
        center: center.to_vec(),
        limit,
        tail,
        rows,
    })
}

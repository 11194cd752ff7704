use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::geometry::{ball_volume, Field, QuadratureRule, ScalarField};

/// Centers of the grid cells whose corners straddle `threshold`.
pub fn extract_free_boundary(u: &ScalarField, threshold: f64) -> Result<Vec<Vec<f64>>> {
    if !(threshold > 0.0) {
        return domain("threshold must be positive");
    }
    let d = u.dim();
    let cells: Vec<usize> = u.extents().iter().map(|n| n - 1).collect();
    let count: usize = cells.iter().product();
    let values = u.values();
    let found: Vec<Option<Vec<f64>>> = (0..count)
        .into_par_iter()
        .map(|c| {
            let mut idx = vec![0usize; d];
            let mut rest = c;
            for k in (0..d).rev() {
                idx[k] = rest % cells[k];
                rest /= cells[k];
            }
            let base = u.flat(&idx);
            let (mut low, mut high) = (false, false);
            for corner in 0..(1usize << d) {
                let mut i = base;
                for k in 0..d {
                    if corner >> k & 1 == 1 {
                        i += u.stride(k);
                    }
                }
                if values[i] <= threshold {
                    low = true;
                } else {
                    high = true;
                }
            }
            (low && high).then(|| {
                (0..d)
                    .map(|k| u.origin()[k] + u.spacing()[k] * (idx[k] as f64 + 0.5))
                    .collect()
            })
        })
        .collect();
    Ok(found.into_iter().flatten().collect())
}

/// Interior node with `u ≤ threshold` and a neighbour above it, closest to
/// `target` (ties broken by node order).
pub fn anchor_point(u: &ScalarField, threshold: f64, target: &[f64]) -> Option<Vec<f64>> {
    let d = u.dim();
    let values = u.values();
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let mut best: Option<(f64, Vec<f64>)> = None;
    for i in 0..u.len() {
        if values[i] > threshold {
            continue;
        }
        u.unflat(i, &mut idx);
        if idx.iter().zip(u.extents()).any(|(&j, &n)| j == 0 || j + 1 == n) {
            continue;
        }
        let touches = (0..d).any(|k| {
            let s = u.stride(k);
            values[i + s] > threshold || values[i - s] > threshold
        });
        if !touches {
            continue;
        }
        u.node(&idx, &mut x);
        let dist: f64 = x.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(b, _)| dist < *b) {
            best = Some((dist, x.clone()));
        }
    }
    best.map(|(_, p)| p)
}

/// `lo · 2^k` for `k = 0, 1, …` while `≤ hi`.
pub fn dyadic_radii(lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut r = lo;
    while r <= hi * (1.0 + 1e-12) && lo > 0.0 {
        out.push(r);
        r *= 2.0;
    }
    out
}

/// `|B_r(x⁰) ∩ {u ≤ threshold}| / |B_r|` by ball quadrature.
pub fn contact_density<F: Field + ?Sized>(
    u: &F,
    center: &[f64],
    r: f64,
    threshold: f64,
) -> Result<f64> {
    let rule = QuadratureRule::default_ball(u.dim())?;
    let measure = rule.integrate(center, r, |x| {
        Ok(if u.value(x)? <= threshold { 1.0 } else { 0.0 })
    })?;
    Ok((measure / (ball_volume(u.dim()) * r.powi(u.dim() as i32))).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    pub ratios: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// `max/min`; infinite when some ratio vanishes.
    pub spread: f64,
    /// All ratios are zero.
    pub degenerate: bool,
}

/// `sup_{B_r(x⁰)} u / (r²|log r|)` at each radius. The supremum is taken over
/// the ball quadrature nodes and the sphere nodes at radius `r`.
pub fn growth_ratio<F: Field + ?Sized>(u: &F, center: &[f64], radii: &[f64]) -> Result<GrowthReport> {
    let d = u.dim();
    let ball = QuadratureRule::default_ball(d)?;
    let sphere = QuadratureRule::default_sphere(d)?;
    let mut ratios = Vec::with_capacity(radii.len());
    for &r in radii {
        if !(r > 0.0 && r < 1.0) {
            return domain(format!("growth radius {r} outside (0, 1)"));
        }
        let mut sup = u.value(center)?;
        let mut x = vec![0.0; d];
        for rule in [&ball, &sphere] {
            for i in 0..rule.len() {
                let p = rule.point(i);
                for k in 0..d {
                    x[k] = center[k] + r * p[k];
                }
                sup = sup.max(u.value(&x)?);
            }
        }
        ratios.push(sup / (r * r * r.ln().abs()));
    }
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    let degenerate = max == 0.0;
    let spread = if min > 0.0 { max / min } else { f64::INFINITY };
    Ok(GrowthReport {
        center: center.to_vec(),
        radii: radii.to_vec(),
        ratios,
        min,
        max,
        spread,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FnField;

    fn halfspace(n: usize) -> ScalarField {
        ScalarField::cube_from_fn(2, &[0.0, 0.0], 1.0, n, true, |x| 0.5 * x[0].max(0.0).powi(2)).unwrap()
    }

    #[test]
    fn free_boundary_of_halfspace() {
        let u = halfspace(33);
        let h = u.max_spacing();
        let pts = extract_free_boundary(&u, 1e-12).unwrap();
        assert!(!pts.is_empty());
        assert!(pts.iter().all(|p| p[0].abs() <= h));
    }

    #[test]
    fn constant_field_has_no_free_boundary() {
        let u = ScalarField::cube_from_fn(2, &[0.0, 0.0], 1.0, 17, true, |_| 1.0).unwrap();
        assert!(extract_free_boundary(&u, 1e-8).unwrap().is_empty());
        let z = ScalarField::cube_from_fn(2, &[0.0, 0.0], 1.0, 17, true, |_| 0.0).unwrap();
        assert!(extract_free_boundary(&z, 1e-8).unwrap().is_empty());
    }

    #[test]
    fn contact_density_examples() {
        let one = FnField::new(2, |_: &[f64]| 1.0, |_: &[f64], g: &mut [f64]| {
            g.fill(0.0);
        });
        assert_eq!(contact_density(&one, &[0.0, 0.0], 0.5, 1e-8).unwrap(), 0.0);
        let half = FnField::new(
            3,
            |x: &[f64]| 0.5 * x[0].max(0.0).powi(2),
            |x: &[f64], g: &mut [f64]| {
                g.fill(0.0);
                g[0] = x[0].max(0.0);
            },
        );
        let theta = contact_density(&half, &[0.0; 3], 0.25, 1e-12).unwrap();
        assert!((theta - 0.5).abs() < 0.05, "{theta}");
        let q = FnField::new(
            2,
            |x: &[f64]| 0.25 * (x[0] * x[0] + x[1] * x[1]),
            |x: &[f64], g: &mut [f64]| {
                g[0] = 0.5 * x[0];
                g[1] = 0.5 * x[1];
            },
        );
        assert_eq!(contact_density(&q, &[0.0, 0.0], 0.3, 1e-14).unwrap(), 0.0);
    }

    #[test]
    fn anchor_on_halfspace() {
        let u = halfspace(33);
        let p = anchor_point(&u, 1e-12, &[0.3, 0.1]).unwrap();
        assert!(p[0] <= 0.0 && p[0] > -u.max_spacing() - 1e-12);
        assert!((p[1] - 0.125).abs() < 1e-12);
        assert_eq!(dyadic_radii(0.1, 0.45), vec![0.1, 0.2, 0.4]);
    }

    #[test]
    fn growth_of_zero_is_degenerate() {
        let z = FnField::new(2, |_: &[f64]| 0.0, |_: &[f64], g: &mut [f64]| {
            g.fill(0.0);
        });
        let rep = growth_ratio(&z, &[0.0, 0.0], &[0.1, 0.2]).unwrap();
        assert!(rep.degenerate);
        assert!(rep.ratios.iter().all(|&r| r == 0.0));
    }
}

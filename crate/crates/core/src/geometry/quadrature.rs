//! Product quadrature rules on the unit ball and unit sphere.
//!
//! Sphere rules: equal-weight trapezoid on the circle (d = 2); Gauss–Legendre
//! in the height coordinate, split at the equator, times a trapezoid in
//! longitude (d = 3). Ball rules tensor a Gauss–Legendre rule in the radius
//! with a sphere rule. Nodes are stored for the unit domain and mapped to
//! `B_r(center)` / `∂B_r(center)` at integration time.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::geometry::check_dim;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending nodes.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_interval(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter()
        .zip(&w)
        .map(|(&xi, &wi)| (mid + half * xi, half * wi))
        .collect()
}

/// Surface measure `ω_d` of the unit sphere in `R^d`.
pub fn sphere_area(dim: usize) -> f64 {
    match dim {
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// Volume `ω_d / d` of the unit ball in `R^d`.
pub fn ball_volume(dim: usize) -> f64 {
    sphere_area(dim) / dim as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Ball,
    Sphere,
}

/// Quadrature rule on the unit ball or unit sphere.
///
/// Ball nodes are laid out radius-major: node `i * angular_count + j` sits at
/// radius `radial[i].0` in direction `j` of the underlying sphere rule.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    dim: usize,
    domain: Domain,
    points: Vec<f64>,
    weights: Vec<f64>,
    exactness: usize,
    radial: Vec<(f64, f64)>,
    directions: Vec<f64>,
    direction_weights: Vec<f64>,
}

impl QuadratureRule {
    /// Sphere rule. `order` is the number of circle points (d = 2) or the
    /// number of Gauss nodes per hemisphere in the height coordinate (d = 3).
    pub fn sphere(dim: usize, order: usize) -> Result<Self> {
        check_dim(dim)?;
        let (points, weights, exactness) = match dim {
            2 => {
                if order < 4 {
                    return config("circle rule needs at least 4 points");
                }
                let w = 2.0 * PI / order as f64;
                let mut pts = Vec::with_capacity(2 * order);
                for j in 0..order {
                    let t = 2.0 * PI * j as f64 / order as f64;
                    pts.push(t.cos());
                    pts.push(t.sin());
                }
                (pts, vec![w; order], order - 1)
            }
            _ => {
                if order < 2 {
                    return config("sphere rule needs at least 2 height nodes per hemisphere");
                }
                let n_phi = 4 * order;
                let mut heights = gauss_legendre_interval(order, -1.0, 0.0);
                heights.extend(gauss_legendre_interval(order, 0.0, 1.0));
                let wphi = 2.0 * PI / n_phi as f64;
                let mut pts = Vec::with_capacity(3 * heights.len() * n_phi);
                let mut wts = Vec::with_capacity(heights.len() * n_phi);
                for &(z, wz) in &heights {
                    let s = (1.0 - z * z).max(0.0).sqrt();
                    for k in 0..n_phi {
                        let phi = 2.0 * PI * k as f64 / n_phi as f64;
                        pts.push(s * phi.cos());
                        pts.push(s * phi.sin());
                        pts.push(z);
                        wts.push(wz * wphi);
                    }
                }
                (pts, wts, (2 * order - 1).min(n_phi - 1))
            }
        };
        Ok(Self {
            dim,
            domain: Domain::Sphere,
            directions: points.clone(),
            direction_weights: weights.clone(),
            points,
            weights,
            exactness,
            radial: Vec::new(),
        })
    }

    /// Ball rule: `radial_order` Gauss nodes in the radius times the sphere
    /// rule of the given angular order.
    pub fn ball(dim: usize, radial_order: usize, angular_order: usize) -> Result<Self> {
        let sphere = Self::sphere(dim, angular_order)?;
        if radial_order < 2 {
            return config("ball rule needs at least 2 radial nodes");
        }
        let radial: Vec<(f64, f64)> = gauss_legendre_interval(radial_order, 0.0, 1.0)
            .into_iter()
            .map(|(rho, w)| (rho, w * rho.powi(dim as i32 - 1)))
            .collect();
        let n_ang = sphere.len();
        let mut points = Vec::with_capacity(radial.len() * n_ang * dim);
        let mut weights = Vec::with_capacity(radial.len() * n_ang);
        for &(rho, wr) in &radial {
            for j in 0..n_ang {
                for k in 0..dim {
                    points.push(rho * sphere.points[j * dim + k]);
                }
                weights.push(wr * sphere.weights[j]);
            }
        }
        Ok(Self {
            dim,
            domain: Domain::Ball,
            points,
            weights,
            exactness: sphere.exactness.min(2 * radial_order - 1),
            radial,
            directions: sphere.points,
            direction_weights: sphere.weights,
        })
    }

    pub fn default_sphere(dim: usize) -> Result<Self> {
        match dim {
            2 => Self::sphere(2, 256),
            _ => Self::sphere(dim, 16),
        }
    }

    pub fn default_ball(dim: usize) -> Result<Self> {
        match dim {
            2 => Self::ball(2, 48, 128),
            _ => Self::ball(dim, 24, 12),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Highest polynomial (sphere: spherical-harmonic) degree integrated
    /// exactly.
    pub fn exactness(&self) -> usize {
        self.exactness
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Radial nodes and weights (weights include `ρ^{d-1}`); empty for sphere
    /// rules.
    pub fn radial(&self) -> &[(f64, f64)] {
        &self.radial
    }

    /// Unit directions of the angular factor.
    pub fn direction_count(&self) -> usize {
        self.direction_weights.len()
    }

    pub fn direction(&self, j: usize) -> &[f64] {
        &self.directions[j * self.dim..(j + 1) * self.dim]
    }

    pub fn direction_weight(&self, j: usize) -> f64 {
        self.direction_weights[j]
    }

    /// Measure of the unit domain.
    pub fn unit_measure(&self) -> f64 {
        match self.domain {
            Domain::Ball => ball_volume(self.dim),
            Domain::Sphere => sphere_area(self.dim),
        }
    }

    /// `Σ w_i f(center + r p_i)` scaled by `r^d` (ball) or `r^{d-1}` (sphere).
    /// Nodes are visited in index order.
    pub fn integrate<F>(&self, center: &[f64], r: f64, mut f: F) -> Result<f64>
    where
        F: FnMut(&[f64]) -> Result<f64>,
    {
        let d = self.dim;
        let mut x = [0.0; 3];
        let mut sum = 0.0;
        for i in 0..self.len() {
            let p = self.point(i);
            for k in 0..d {
                x[k] = center[k] + r * p[k];
            }
            sum += self.weights[i] * f(&x[..d])?;
        }
        let scale = match self.domain {
            Domain::Ball => r.powi(d as i32),
            Domain::Sphere => r.powi(d as i32 - 1),
        };
        Ok(sum * scale)
    }
}

/// `∫_{B_r(center)} f dx` with a ball rule.
pub fn integrate_ball<F>(f: F, center: &[f64], r: f64, rule: &QuadratureRule) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if rule.domain() != Domain::Ball {
        return config("integrate_ball needs a ball rule");
    }
    if !(r > 0.0) {
        return crate::error::domain(format!("ball radius must be positive, got {r}"));
    }
    rule.integrate(center, r, f)
}

/// `∫_{∂B_r(center)} f dH^{d-1}` with a sphere rule.
pub fn integrate_sphere<F>(f: F, center: &[f64], r: f64, rule: &QuadratureRule) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if rule.domain() != Domain::Sphere {
        return config("integrate_sphere needs a sphere rule");
    }
    if !(r > 0.0) {
        return crate::error::domain(format!("sphere radius must be positive, got {r}"));
    }
    rule.integrate(center, r, f)
}

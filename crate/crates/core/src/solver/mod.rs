//! Projected-gradient minimization of the discrete energy
//! `∫ ½|∇u|² + F(u)` over `u ≥ 0` with Dirichlet data on a box.

mod diagnostics;

pub use diagnostics::{
    anchor_point, contact_density, dyadic_radii, extract_free_boundary, growth_ratio, GrowthReport,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::geometry::{check_dim, norm, ScalarField};
use crate::synthetic::PlanarSolution;

const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    LogObstacle,
    ClassicalObstacle,
}

/// Boundary values on the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Datum {
    Constant {
        value: f64,
    },
    /// Exact radial solution of `Δu = χ_{u>0}` vanishing on `B_a(center)`.
    ClassicalRadial {
        a: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    /// Exact planar solution of the logarithmic problem, zero on
    /// `{x·e < offset}`.
    Planar {
        normal: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// `scale · ½ (x − center)·A(x − center) − shift`, clipped at zero.
    Quadratic {
        matrix: Vec<Vec<f64>>,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        shift: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
}

fn one() -> f64 {
    1.0
}

/// Exact radial solution of the classical obstacle problem with contact ball
/// `B_a`: `(ρ² − a²)/4 − (a²/2) log(ρ/a)` in the plane,
/// `ρ²/6 + a³/(3ρ) − a²/2` in space.
pub fn classical_radial(dim: usize, a: f64, rho: f64) -> f64 {
    if rho <= a {
        return 0.0;
    }
    if dim == 2 {
        (rho * rho - a * a) / 4.0 - 0.5 * a * a * (rho / a).ln()
    } else {
        rho * rho / 6.0 + a * a * a / (3.0 * rho) - 0.5 * a * a
    }
}

impl Datum {
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let d = x.len();
        let shifted = |c: &Option<Vec<f64>>| -> Vec<f64> {
            match c {
                Some(c) => x.iter().zip(c).map(|(a, b)| a - b).collect(),
                None => x.to_vec(),
            }
        };
        let v = match self {
            Datum::Constant { value } => *value,
            Datum::ClassicalRadial { a, center } => classical_radial(d, *a, norm(&shifted(center))),
            Datum::Planar { normal, offset } => {
                let n = norm(normal);
                let t: f64 = normal.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / n - offset;
                PlanarSolution::profile(t)?
            }
            Datum::Quadratic {
                matrix,
                scale,
                shift,
                center,
            } => {
                let y = shifted(center);
                let mut q = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        q += y[i] * matrix[i][j] * y[j];
                    }
                }
                (scale * 0.5 * q - shift).max(0.0)
            }
        };
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Domain(format!("boundary datum {v} at {x:?} is not a finite nonnegative value")));
        }
        Ok(v)
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Datum::Constant { value } if !(*value >= 0.0 && value.is_finite()) => {
                config("constant datum must be finite and nonnegative")
            }
            Datum::ClassicalRadial { a, center } => {
                if !(*a > 0.0) {
                    return config("contact radius must be positive");
                }
                match center {
                    Some(c) if c.len() != dim => config("datum center has wrong dimension"),
                    _ => Ok(()),
                }
            }
            Datum::Planar { normal, .. } => {
                if normal.len() != dim || !(norm(normal) > 0.0) {
                    return config("planar datum needs a nonzero normal of length d");
                }
                Ok(())
            }
            Datum::Quadratic { matrix, center, .. } => {
                if matrix.len() != dim || matrix.iter().any(|r| r.len() != dim) {
                    return config("quadratic datum matrix must be d x d");
                }
                match center {
                    Some(c) if c.len() != dim => config("datum center has wrong dimension"),
                    _ => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }
}

fn default_max_iter() -> usize {
    20_000
}
fn default_tol() -> f64 {
    1e-8
}
fn default_backtrack() -> f64 {
    2.0
}
fn default_true() -> bool {
    true
}
fn default_check_every() -> usize {
    10
}

/// Solver input, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub dim: usize,
    /// Box `center ± half_width` in every coordinate.
    pub center: Vec<f64>,
    pub half_width: f64,
    /// Nodes per axis.
    pub n: usize,
    pub datum: Datum,
    pub mode: Mode,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Tolerance on the max-norm of the projected gradient mapping,
    /// measured in PDE-residual units.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Factor applied to the Lipschitz estimate when the sufficient
    /// decrease test fails.
    #[serde(default = "default_backtrack")]
    pub backtrack: f64,
    #[serde(default = "default_true")]
    pub accelerate: bool,
    #[serde(default = "default_check_every")]
    pub check_every: usize,
    /// Initialization is deterministic; the seed is recorded for provenance.
    #[serde(default)]
    pub seed: u64,
}

impl SolveConfig {
    pub fn new(dim: usize, half_width: f64, n: usize, datum: Datum, mode: Mode) -> Self {
        Self {
            dim,
            center: vec![0.0; dim],
            half_width,
            n,
            datum,
            mode,
            max_iter: default_max_iter(),
            tol: default_tol(),
            backtrack: default_backtrack(),
            accelerate: true,
            check_every: default_check_every(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.dim)?;
        if self.center.len() != self.dim {
            return config("center must have length d");
        }
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return config("half_width must be positive");
        }
        if self.n < 17 {
            return config("resolution must be at least 17 nodes per axis");
        }
        if !(self.tol > 0.0) {
            return config("tolerance must be positive");
        }
        if !(self.backtrack > 1.0) {
            return config("backtrack factor must exceed 1");
        }
        if self.check_every == 0 {
            return config("check_every must be positive");
        }
        self.datum.validate(self.dim)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub threshold: f64,
    pub count: usize,
    pub max_abs: f64,
    pub rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub config: SolveConfig,
    pub label: String,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the iteration budget ran out before the tolerance was met.
    pub max_iter_hit: bool,
    pub energy: f64,
    /// `(iteration, projected-gradient norm)` at every check.
    pub pg_history: Vec<(usize, f64)>,
    /// Energy of the accepted iterate at every check.
    pub energy_history: Vec<f64>,
    pub reactivated: usize,
    pub residual: ResidualStats,
    pub min_value: f64,
    pub max_value: f64,
}

/// Uniform box grid with the interior/boundary split.
struct Grid {
    dim: usize,
    n: usize,
    h: f64,
    strides: Vec<usize>,
    interior: Vec<usize>,
    len: usize,
    node_weight: Vec<f64>,
    /// Transverse trapezoid weight of the edge `i → i + stride_k`, zero when
    /// there is no such edge.
    edge_weight: Vec<Vec<f64>>,
}

impl Grid {
    fn new(dim: usize, n: usize, h: f64) -> Self {
        let mut strides = vec![1usize; dim];
        for k in (0..dim - 1).rev() {
            strides[k] = strides[k + 1] * n;
        }
        let len = n.pow(dim as u32);
        let interior = (0..len)
            .filter(|&i| (0..dim).all(|k| (1..n - 1).contains(&(i / strides[k] % n))))
            .collect();
        let mut grid = Self {
            dim,
            n,
            h,
            strides,
            interior,
            len,
            node_weight: Vec::new(),
            edge_weight: Vec::new(),
        };
        grid.node_weight = (0..len).map(|i| trapezoid_weight(&grid, i, None)).collect();
        grid.edge_weight = (0..dim)
            .map(|k| {
                (0..len)
                    .map(|i| {
                        if grid.index(i, k) + 1 < n {
                            trapezoid_weight(&grid, i, Some(k))
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        grid
    }

    fn index(&self, i: usize, k: usize) -> usize {
        i / self.strides[k] % self.n
    }

    /// `Δ_h u` at an interior node.
    fn laplacian(&self, u: &[f64], i: usize) -> f64 {
        let mut s = 0.0;
        for &st in &self.strides {
            s += u[i + st] + u[i - st];
        }
        (s - 2.0 * self.dim as f64 * u[i]) / (self.h * self.h)
    }

}

fn trapezoid_weight(grid: &Grid, i: usize, skip: Option<usize>) -> f64 {
    let mut w = 1.0;
    for k in 0..grid.dim {
        if Some(k) == skip {
            continue;
        }
        let j = grid.index(i, k);
        if j == 0 || j == grid.n - 1 {
            w *= 0.5;
        }
    }
    w
}

fn potential(mode: Mode, u: f64) -> f64 {
    match mode {
        Mode::ClassicalObstacle => u,
        Mode::LogObstacle => {
            if u > 0.0 {
                u * (1.0 - u.ln())
            } else {
                0.0
            }
        }
    }
}

fn potential_derivative(mode: Mode, u: f64) -> f64 {
    match mode {
        Mode::ClassicalObstacle => 1.0,
        Mode::LogObstacle => {
            if u > 0.0 {
                -u.ln()
            } else {
                f64::INFINITY
            }
        }
    }
}

/// Trapezoid-weighted discrete energy; edges lying on a box face carry the
/// transverse half weights.
fn energy(grid: &Grid, mode: Mode, u: &[f64]) -> f64 {
    let hd = grid.h.powi(grid.dim as i32);
    let inv_h2 = 1.0 / (grid.h * grid.h);
    let partial: Vec<f64> = u
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut acc = 0.0;
            for (off, &ui) in chunk.iter().enumerate() {
                let i = c * CHUNK + off;
                for (k, &st) in grid.strides.iter().enumerate() {
                    let w = grid.edge_weight[k][i];
                    if w > 0.0 {
                        let diff = u[i + st] - ui;
                        acc += 0.5 * diff * diff * inv_h2 * w;
                    }
                }
                acc += grid.node_weight[i] * potential(mode, ui);
            }
            acc
        })
        .collect();
    hd * partial.iter().sum::<f64>()
}

/// Residual-scale gradient `−Δ_h u + F'(u)` at interior nodes.
fn gradient(grid: &Grid, mode: Mode, u: &[f64], out: &mut [f64]) {
    out.par_iter_mut()
        .zip(grid.interior.par_iter())
        .for_each(|(g, &i)| *g = -grid.laplacian(u, i) + potential_derivative(mode, u[i]));
}

/// Chunked sum with a fixed reduction order.
fn ordered_sum(values: impl IndexedParallelIterator<Item = f64>) -> f64 {
    let parts: Vec<f64> = values
        .chunks(CHUNK)
        .map(|c| c.iter().sum::<f64>())
        .collect();
    parts.iter().sum()
}

fn ordered_max(values: impl IndexedParallelIterator<Item = f64>) -> f64 {
    values.reduce(|| 0.0, f64::max)
}

/// Harmonic extension of the boundary values by conjugate gradients.
fn harmonic_extension(grid: &Grid, u: &mut [f64]) {
    let m = grid.interior.len();
    let lap_only = |v: &[f64], out: &mut [f64]| {
        out.par_iter_mut()
            .zip(grid.interior.par_iter())
            .for_each(|(o, &i)| *o = -grid.laplacian(v, i));
    };
    // residual r = −(−Δ u) for the current u (boundary included)
    let mut r = vec![0.0; m];
    lap_only(u, &mut r);
    r.iter_mut().for_each(|v| *v = -*v);
    let mut p = r.clone();
    let mut full = vec![0.0; grid.len];
    let mut ap = vec![0.0; m];
    let mut rr = ordered_sum(r.par_iter().map(|v| v * v));
    let stop = 1e-28 * (1.0 + rr);
    for _ in 0..4 * grid.n * grid.dim {
        if rr <= stop {
            break;
        }
        for (k, &i) in grid.interior.iter().enumerate() {
            full[i] = p[k];
        }
        lap_only(&full, &mut ap);
        let pap = ordered_sum(p.par_iter().zip(ap.par_iter()).map(|(a, b)| a * b));
        if !(pap > 0.0) {
            break;
        }
        let step = rr / pap;
        for (k, &i) in grid.interior.iter().enumerate() {
            u[i] += step * p[k];
            r[k] -= step * ap[k];
        }
        let rr_new = ordered_sum(r.par_iter().map(|v| v * v));
        let beta = rr_new / rr;
        rr = rr_new;
        p.iter_mut().zip(&r).for_each(|(pk, rk)| *pk = rk + beta * *pk);
    }
    for &i in &grid.interior {
        u[i] = u[i].max(0.0);
    }
}

/// Exact minimization over `v ≥ 0` of the energy restricted to one node with
/// all neighbors frozen, for nodes currently at zero. In the logarithmic
/// problem the one-sided derivative of `F` at zero is infinite, so gradient
/// steps cannot lift a node off zero; this sweep does.
fn reactivate(grid: &Grid, u: &mut [f64]) -> usize {
    let a = 2.0 * grid.dim as f64 / (grid.h * grid.h);
    let mut count = 0;
    for &i in &grid.interior {
        if u[i] > 0.0 {
            continue;
        }
        let b = grid.strides.iter().map(|&st| u[i + st] + u[i - st]).sum::<f64>() / (grid.h * grid.h);
        if b <= 0.0 {
            continue;
        }
        // φ(v) = a v²/2 − b v + v(1 − log v); φ' = a v − b − log v is convex
        // with minimum at 1/a
        if 1.0 - b + a.ln() >= 0.0 {
            continue;
        }
        let dphi = |v: f64| a * v - b - v.ln();
        let mut v = (2.0 / a).max(2.0 * b / a);
        while dphi(v) <= 0.0 {
            v *= 2.0;
        }
        for _ in 0..100 {
            let next = v - dphi(v) / (a - 1.0 / v);
            if (next - v).abs() <= 1e-15 * v {
                v = next;
                break;
            }
            v = next;
        }
        let phi = a * v * v / 2.0 - b * v + v * (1.0 - v.ln());
        if phi < 0.0 {
            u[i] = v;
            count += 1;
        }
    }
    count
}

/// One projected gradient step from `base`; returns the energy of the result
/// left in `z`. A step that already lowers the energy below `e_accept` is
/// taken as is; otherwise the sufficient decrease test against the quadratic
/// upper model at `base` drives backtracking on the Lipschitz estimate.
#[allow(clippy::too_many_arguments)]
fn prox_step(
    grid: &Grid,
    cfg: &SolveConfig,
    base: &[f64],
    e_accept: f64,
    lip0: f64,
    g: &mut [f64],
    z: &mut [f64],
    it: usize,
) -> Result<f64> {
    let hd = grid.h.powi(grid.dim as i32);
    gradient(grid, cfg.mode, base, g);
    let mut e_base = None;
    let mut lip = lip0;
    for _ in 0..60 {
        // boundary entries of z already hold the datum
        for (k, &i) in grid.interior.iter().enumerate() {
            z[i] = (base[i] - g[k] / lip).max(0.0);
        }
        let e_z = energy(grid, cfg.mode, z);
        check_finite(e_z, it)?;
        if e_z <= e_accept {
            return Ok(e_z);
        }
        let e_b = *e_base.get_or_insert_with(|| energy(grid, cfg.mode, base));
        let model = ordered_sum(g.par_iter().zip(grid.interior.par_iter()).map(|(&gk, &i)| {
            let dz = z[i] - base[i];
            if dz == 0.0 {
                0.0
            } else {
                gk * dz + 0.5 * lip * dz * dz
            }
        }));
        if e_z <= e_b + hd * model + 1e-13 * (1.0 + e_b.abs()) {
            return Ok(e_z);
        }
        lip *= cfg.backtrack;
    }
    Err(Error::Numerical {
        iteration: it,
        message: "backtracking failed to find a sufficient decrease".into(),
    })
}

/// Max-norm of `(u − P(u − g/L)) L`.
fn projected_gradient_norm(grid: &Grid, mode: Mode, u: &[f64], g: &mut [f64], lip: f64) -> f64 {
    gradient(grid, mode, u, g);
    ordered_max(g.par_iter().zip(grid.interior.par_iter()).map(|(&gi, &i)| {
        let z = (u[i] - gi / lip).max(0.0);
        ((u[i] - z) * lip).abs()
    }))
}

fn check_finite(e: f64, iteration: usize) -> Result<()> {
    if e.is_finite() {
        Ok(())
    } else {
        Err(Error::Numerical {
            iteration,
            message: format!("energy evaluated to {e}"),
        })
    }
}

/// Minimizes the discrete energy; the returned field is a candidate
/// minimizer (descent methods only certify stationarity).
pub fn minimize(cfg: &SolveConfig) -> Result<(ScalarField, SolveReport)> {
    cfg.validate()?;
    let h = cfg.spacing();
    let grid = Grid::new(cfg.dim, cfg.n, h);
    let origin: Vec<f64> = cfg.center.iter().map(|c| c - cfg.half_width).collect();

    let mut u = vec![0.0; grid.len];
    let mut x = vec![0.0; cfg.dim];
    for i in 0..grid.len {
        let on_boundary = (0..cfg.dim).any(|k| {
            let j = grid.index(i, k);
            j == 0 || j == cfg.n - 1
        });
        if on_boundary {
            for k in 0..cfg.dim {
                x[k] = origin[k] + h * grid.index(i, k) as f64;
            }
            u[i] = cfg.datum.value(&x)?;
        }
    }
    harmonic_extension(&grid, &mut u);

    let lip0 = 4.0 * cfg.dim as f64 / (h * h);
    let mut g = vec![0.0; grid.interior.len()];
    let mut y = u.clone();
    let mut z = u.clone();
    let mut prev = u.clone();
    let mut e = energy(&grid, cfg.mode, &u);
    check_finite(e, 0)?;
    let mut t = 1.0f64;
    let mut pg_history = Vec::new();
    let mut energy_history = vec![e];
    let mut reactivated = 0;
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=cfg.max_iter {
        iterations = it;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = if cfg.accelerate { (t - 1.0) / t_next } else { 0.0 };
        // round-off slack keeps near-converged momentum steps alive
        let slack = 1e-13 * (1.0 + e.abs());
        let mut e_z = if beta > 0.0 {
            for &i in &grid.interior {
                y[i] = (u[i] + beta * (u[i] - prev[i])).max(0.0);
            }
            let e_z = prox_step(&grid, cfg, &y, e + slack, lip0, &mut g, &mut z, it)?;
            t = t_next;
            e_z
        } else {
            f64::INFINITY
        };
        if e_z > e + slack {
            // plain projected step from the iterate; after a failed
            // extrapolation this is a function-value restart
            let restarted = beta > 0.0;
            e_z = prox_step(&grid, cfg, &u, e + slack, lip0, &mut g, &mut z, it)?;
            t = if restarted || !cfg.accelerate { 1.0 } else { t_next };
        }
        if e_z <= e + slack {
            std::mem::swap(&mut prev, &mut u);
            u.copy_from_slice(&z);
            e = e_z;
        }

        let check = it % cfg.check_every == 0 || it == cfg.max_iter;
        let mut pg = f64::INFINITY;
        if check {
            pg = projected_gradient_norm(&grid, cfg.mode, &u, &mut g, lip0);
        }
        let sweep = cfg.mode == Mode::LogObstacle
            && ((check && pg <= cfg.tol) || it % (20 * cfg.check_every) == 0);
        if sweep {
            let lifted = reactivate(&grid, &mut u);
            if lifted > 0 {
                reactivated += lifted;
                let e_new = energy(&grid, cfg.mode, &u);
                check_finite(e_new, it)?;
                e = e_new.min(e);
                prev.copy_from_slice(&u);
                t = 1.0;
                if check {
                    pg = projected_gradient_norm(&grid, cfg.mode, &u, &mut g, lip0);
                }
            }
        }
        if check {
            pg_history.push((it, pg));
            energy_history.push(e);
            if pg <= cfg.tol {
                converged = true;
                break;
            }
        }
    }

    let field = ScalarField::new(origin, vec![h; cfg.dim], vec![cfg.n; cfg.dim], u, true)?;
    let residual = residual_stats(&grid, cfg.mode, field.values(), default_threshold(&field));
    let report = SolveReport {
        config: cfg.clone(),
        label: "candidate minimizer".into(),
        iterations,
        converged,
        max_iter_hit: !converged,
        energy: e,
        pg_history,
        energy_history,
        reactivated,
        residual,
        min_value: field.values().iter().cloned().fold(f64::INFINITY, f64::min),
        max_value: field.max_value(),
    };
    Ok((field, report))
}

/// Default positivity threshold, `10⁻⁸ · max u`.
pub fn default_threshold(u: &ScalarField) -> f64 {
    1e-8 * u.max_value()
}

/// Residual of the Euler-Lagrange equation at interior nodes with
/// `u > threshold`: `−Δu − log u` or `Δu − 1`.
fn residual_stats(grid: &Grid, mode: Mode, u: &[f64], threshold: f64) -> ResidualStats {
    let vals: Vec<f64> = grid
        .interior
        .iter()
        .filter(|&&i| u[i] > threshold)
        .map(|&i| match mode {
            Mode::LogObstacle => -grid.laplacian(u, i) - u[i].ln(),
            Mode::ClassicalObstacle => grid.laplacian(u, i) - 1.0,
        })
        .collect();
    let count = vals.len();
    let max_abs = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rms = if count > 0 {
        (vals.iter().map(|v| v * v).sum::<f64>() / count as f64).sqrt()
    } else {
        0.0
    };
    ResidualStats {
        threshold,
        count,
        max_abs,
        rms,
    }
}

/// Discrete energy of a grid field with the solver's weights.
pub fn discrete_energy(u: &ScalarField, mode: Mode) -> Result<f64> {
    let n = u.extents()[0];
    let h = u.spacing()[0];
    if u.extents().iter().any(|&m| m != n) || u.spacing().iter().any(|&s| (s - h).abs() > 1e-12 * h) {
        return config("discrete energy needs a cubic grid with equal spacing");
    }
    let grid = Grid::new(u.dim(), n, h);
    Ok(energy(&grid, mode, u.values()))
}

//! Grid fields, interpolation and ball/sphere quadrature in two and three
//! dimensions.

pub mod field;
pub mod quadrature;

pub use field::{Field, FnField, GradientField, GridField, ScalarField};
pub use quadrature::{
    ball_volume, gauss_legendre, gauss_legendre_interval, integrate_ball, integrate_sphere,
    sphere_area, Domain, QuadratureRule,
};

use crate::error::{config, Result};

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        config(format!("dimension must be 2 or 3, got {dim}"))
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

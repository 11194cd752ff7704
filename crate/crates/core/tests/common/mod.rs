#![allow(dead_code)]

use loglab_core::geometry::{Field, FnField};
use loglab_core::spherical::QuadraticForm;

pub fn quadratic(q: QuadraticForm) -> impl Field {
    let q2 = q.clone();
    FnField::new(q.dim(), move |x| q.value(x), move |x, g| q2.gradient(x, g))
}

/// `½(x·e)₊²` for a unit vector `e`.
pub fn halfspace(e: Vec<f64>) -> impl Field {
    let e2 = e.clone();
    FnField::new(
        e.len(),
        move |x| {
            let t: f64 = e.iter().zip(x).map(|(a, b)| a * b).sum();
            0.5 * t.max(0.0).powi(2)
        },
        move |x, g| {
            let t: f64 = e2.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().max(0.0);
            for k in 0..g.len() {
                g[k] = t * e2[k];
            }
        },
    )
}

pub fn dyadic(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| 2f64.powi(-k)).collect()
}

pub fn unit(dim: usize, axis: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    e[axis] = 1.0;
    e
}

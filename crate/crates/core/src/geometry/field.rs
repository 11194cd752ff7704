use std::fmt::Write as _;

use crate::error::{config, domain, Error, Result};
use crate::geometry::check_dim;

/// A function on (a subset of) `R^d` that can be sampled with its gradient.
///
/// Every energy and blow-up routine is written against this trait so that
/// grid solutions and closed-form synthetic fields go through the same code.
pub trait Field: Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<f64>;

    /// Writes `∇f(x)` into `out[..dim]`.
    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()>;

    fn value_and_gradient(&self, x: &[f64], out: &mut [f64]) -> Result<f64> {
        self.gradient(x, out)?;
        self.value(x)
    }

    /// Grid spacing when the field is backed by samples.
    fn spacing(&self) -> Option<f64> {
        None
    }
}

impl<F: Field + ?Sized> Field for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).gradient(x, out)
    }
    fn value_and_gradient(&self, x: &[f64], out: &mut [f64]) -> Result<f64> {
        (**self).value_and_gradient(x, out)
    }
    fn spacing(&self) -> Option<f64> {
        (**self).spacing()
    }
}

/// Closed-form field from value and gradient closures.
pub struct FnField<V, G> {
    dim: usize,
    value: V,
    gradient: G,
}

impl<V, G> FnField<V, G>
where
    V: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64], &mut [f64]) + Sync,
{
    pub fn new(dim: usize, value: V, gradient: G) -> Self {
        Self {
            dim,
            value,
            gradient,
        }
    }
}

impl<V, G> Field for FnField<V, G>
where
    V: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64], &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok((self.value)(x))
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (self.gradient)(x, out);
        Ok(())
    }
}

/// Samples of a function on a uniform rectangular grid, row-major with the
/// last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    dim: usize,
    origin: Vec<f64>,
    spacing: Vec<f64>,
    extents: Vec<usize>,
    values: Vec<f64>,
    nonneg: bool,
}

impl ScalarField {
    pub fn new(
        origin: Vec<f64>,
        spacing: Vec<f64>,
        extents: Vec<usize>,
        values: Vec<f64>,
        nonneg: bool,
    ) -> Result<Self> {
        let dim = origin.len();
        check_dim(dim)?;
        if spacing.len() != dim || extents.len() != dim {
            return config("origin, spacing and extents must all have length d");
        }
        if spacing.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return config("grid spacing must be strictly positive");
        }
        if extents.iter().any(|&n| n < 2) {
            return config("grid extents must be at least 2 per axis");
        }
        let count: usize = extents.iter().product();
        if values.len() != count {
            return config(format!(
                "expected {count} samples for extents {extents:?}, got {}",
                values.len()
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return domain(format!("non-finite sample at flat index {i}"));
        }
        if nonneg {
            if let Some(i) = values.iter().position(|&v| v < 0.0) {
                return domain(format!(
                    "negative sample {} at flat index {i} in a non-negative field",
                    values[i]
                ));
            }
        }
        Ok(Self {
            dim,
            origin,
            spacing,
            extents,
            values,
            nonneg,
        })
    }

    /// Samples `f` at every node.
    pub fn from_fn(
        origin: Vec<f64>,
        spacing: Vec<f64>,
        extents: Vec<usize>,
        nonneg: bool,
        mut f: impl FnMut(&[f64]) -> f64,
    ) -> Result<Self> {
        let dim = origin.len();
        check_dim(dim)?;
        if spacing.len() != dim || extents.len() != dim {
            return config("origin, spacing and extents must all have length d");
        }
        let count: usize = extents.iter().product();
        let mut values = Vec::with_capacity(count);
        let mut idx = vec![0usize; dim];
        let mut x = vec![0.0; dim];
        for _ in 0..count {
            for k in 0..dim {
                x[k] = origin[k] + spacing[k] * idx[k] as f64;
            }
            values.push(f(&x));
            for k in (0..dim).rev() {
                idx[k] += 1;
                if idx[k] < extents[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Self::new(origin, spacing, extents, values, nonneg)
    }

    /// Cube `[center - half, center + half]^d` with `n` nodes per axis.
    pub fn cube_from_fn(
        dim: usize,
        center: &[f64],
        half_width: f64,
        n: usize,
        nonneg: bool,
        f: impl FnMut(&[f64]) -> f64,
    ) -> Result<Self> {
        check_dim(dim)?;
        if n < 2 {
            return config("need at least 2 nodes per axis");
        }
        let h = 2.0 * half_width / (n - 1) as f64;
        let origin = center.iter().map(|c| c - half_width).collect();
        Self::from_fn(origin, vec![h; dim], vec![n; dim], nonneg, f)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn origin(&self) -> &[f64] {
        &self.origin
    }
    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }
    pub fn extents(&self) -> &[usize] {
        &self.extents
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn is_nonneg(&self) -> bool {
        self.nonneg
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Flat index of a multi-index.
    pub fn flat(&self, idx: &[usize]) -> usize {
        let mut f = 0;
        for k in 0..self.dim {
            f = f * self.extents[k] + idx[k];
        }
        f
    }

    /// Multi-index of a flat index.
    pub fn unflat(&self, mut flat: usize, out: &mut [usize]) {
        for k in (0..self.dim).rev() {
            out[k] = flat % self.extents[k];
            flat /= self.extents[k];
        }
    }

    pub fn node(&self, idx: &[usize], out: &mut [f64]) {
        for k in 0..self.dim {
            out[k] = self.origin[k] + self.spacing[k] * idx[k] as f64;
        }
    }

    /// Stride of axis `k` in the flat layout.
    pub fn stride(&self, k: usize) -> usize {
        self.extents[k + 1..].iter().product()
    }

    /// Checks that `p` lies in the bounding box shrunk by one cell.
    pub fn contains_interior(&self, p: &[f64]) -> bool {
        (0..self.dim).all(|k| {
            let lo = self.origin[k] + self.spacing[k];
            let hi = self.origin[k] + self.spacing[k] * (self.extents[k] as f64 - 2.0);
            let slack = 1e-12 * self.spacing[k];
            p[k] >= lo - slack && p[k] <= hi + slack
        })
    }

    /// Checks that the closed ball `B_r(center)` stays one cell inside the box.
    pub fn contains_ball(&self, center: &[f64], r: f64) -> bool {
        (0..self.dim).all(|k| {
            let lo = self.origin[k] + self.spacing[k];
            let hi = self.origin[k] + self.spacing[k] * (self.extents[k] as f64 - 2.0);
            let slack = 1e-12 * self.spacing[k];
            center[k] - r >= lo - slack && center[k] + r <= hi + slack
        })
    }

    /// Multilinear interpolation. Exact on fields that are affine along each
    /// axis; reproduces node values exactly.
    pub fn interpolate(&self, p: &[f64]) -> Result<f64> {
        if p.len() != self.dim {
            return domain(format!("point has {} coordinates, field is {}-d", p.len(), self.dim));
        }
        if !self.contains_interior(p) {
            return domain(format!(
                "point {p:?} outside the field box shrunk by one cell"
            ));
        }
        Ok(multilinear(self, &self.values, p))
    }

    /// Central differences in the interior, second-order one-sided
    /// differences on the faces.
    pub fn gradient_field(&self) -> Result<GradientField> {
        if self.extents.iter().any(|&n| n < 3) {
            return config("gradient_field needs at least 3 nodes per axis");
        }
        let mut comps = vec![vec![0.0; self.len()]; self.dim];
        let mut idx = vec![0usize; self.dim];
        for flat in 0..self.len() {
            self.unflat(flat, &mut idx);
            for k in 0..self.dim {
                let s = self.stride(k);
                let h = self.spacing[k];
                let n = self.extents[k];
                let v = &self.values;
                comps[k][flat] = if idx[k] == 0 {
                    (-3.0 * v[flat] + 4.0 * v[flat + s] - v[flat + 2 * s]) / (2.0 * h)
                } else if idx[k] == n - 1 {
                    (3.0 * v[flat] - 4.0 * v[flat - s] + v[flat - 2 * s]) / (2.0 * h)
                } else {
                    (v[flat + s] - v[flat - s]) / (2.0 * h)
                };
            }
        }
        Ok(GradientField {
            grid: self.clone_geometry(),
            components: comps,
        })
    }

    fn clone_geometry(&self) -> ScalarField {
        ScalarField {
            dim: self.dim,
            origin: self.origin.clone(),
            spacing: self.spacing.clone(),
            extents: self.extents.clone(),
            values: Vec::new(),
            nonneg: false,
        }
    }

    /// Serializes to the `FLD1` text snapshot.
    pub fn to_fld1(&self) -> String {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:.16e}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut s = String::with_capacity(self.len() * 24 + 128);
        let _ = writeln!(
            s,
            "FLD1 d={} n={} h={} o={} flags={}",
            self.dim,
            self.extents
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(","),
            join(&self.spacing),
            join(&self.origin),
            if self.nonneg { "nonneg" } else { "none" }
        );
        let last = *self.extents.last().unwrap();
        for (i, v) in self.values.iter().enumerate() {
            let _ = write!(s, "{v:.16e}");
            s.push(if (i + 1) % last == 0 { '\n' } else { ' ' });
        }
        s
    }

    /// Parses an `FLD1` snapshot.
    pub fn from_fld1(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty FLD1 input".into()))?;
        let mut tokens = header.split_whitespace();
        if tokens.next() != Some("FLD1") {
            return Err(Error::Parse("missing FLD1 magic".into()));
        }
        let mut dim = None;
        let mut extents = None;
        let mut spacing = None;
        let mut origin = None;
        let mut nonneg = None;
        for tok in tokens {
            let (key, val) = tok
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header token {tok:?}")))?;
            let floats = |v: &str| -> Result<Vec<f64>> {
                v.split(',')
                    .map(|x| {
                        x.parse::<f64>()
                            .map_err(|e| Error::Parse(format!("bad number {x:?}: {e}")))
                    })
                    .collect()
            };
            match key {
                "d" => {
                    dim = Some(
                        val.parse::<usize>()
                            .map_err(|e| Error::Parse(format!("bad d: {e}")))?,
                    )
                }
                "n" => {
                    extents = Some(
                        val.split(',')
                            .map(|x| {
                                x.parse::<usize>()
                                    .map_err(|e| Error::Parse(format!("bad extent {x:?}: {e}")))
                            })
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                "h" => spacing = Some(floats(val)?),
                "o" => origin = Some(floats(val)?),
                "flags" => {
                    nonneg = Some(match val {
                        "nonneg" => true,
                        "none" => false,
                        other => return Err(Error::Parse(format!("unknown flags {other:?}"))),
                    })
                }
                other => return Err(Error::Parse(format!("unknown header key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::Parse(format!("FLD1 header missing {k}"));
        let dim = dim.ok_or_else(|| missing("d"))?;
        let extents = extents.ok_or_else(|| missing("n"))?;
        let spacing = spacing.ok_or_else(|| missing("h"))?;
        let origin = origin.ok_or_else(|| missing("o"))?;
        let nonneg = nonneg.ok_or_else(|| missing("flags"))?;
        if origin.len() != dim {
            return Err(Error::Parse(format!("d={dim} but origin has {} entries", origin.len())));
        }
        let values = lines
            .flat_map(|l| l.split_whitespace())
            .map(|x| {
                x.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad value {x:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(origin, spacing, extents, values, nonneg)
    }
}

fn multilinear(grid: &ScalarField, values: &[f64], p: &[f64]) -> f64 {
    let d = grid.dim;
    let mut base = [0usize; 3];
    let mut t = [0.0; 3];
    for k in 0..d {
        let mut s = (p[k] - grid.origin[k]) / grid.spacing[k];
        if (s - s.round()).abs() < 1e-10 {
            s = s.round();
        }
        let i = (s.floor().max(0.0) as usize).min(grid.extents[k] - 2);
        base[k] = i;
        t[k] = (s - i as f64).clamp(0.0, 1.0);
    }
    let mut corners = [0.0; 8];
    for (corner, slot) in corners.iter_mut().enumerate().take(1 << d) {
        let mut flat = 0;
        for k in 0..d {
            let bit = (corner >> (d - 1 - k)) & 1;
            flat = flat * grid.extents[k] + base[k] + bit;
        }
        *slot = values[flat];
    }
    // collapse the last axis first; a + t(b - a) keeps constants exact
    let mut n = 1 << d;
    for k in (0..d).rev() {
        n /= 2;
        for i in 0..n {
            let a = corners[2 * i];
            let b = corners[2 * i + 1];
            corners[i] = if a == b || t[k] == 0.0 {
                a
            } else if t[k] == 1.0 {
                b
            } else {
                a + t[k] * (b - a)
            };
        }
    }
    corners[0]
}

/// Per-axis derivative samples on the grid of a [`ScalarField`].
#[derive(Debug, Clone)]
pub struct GradientField {
    grid: ScalarField,
    components: Vec<Vec<f64>>,
}

impl GradientField {
    pub fn component(&self, k: usize) -> &[f64] {
        &self.components[k]
    }

    /// Multilinear interpolation of each component.
    pub fn interpolate(&self, p: &[f64], out: &mut [f64]) -> Result<()> {
        if !self.grid.contains_interior(p) {
            return domain(format!(
                "point {p:?} outside the field box shrunk by one cell"
            ));
        }
        for (k, comp) in self.components.iter().enumerate() {
            out[k] = multilinear(&self.grid, comp, p);
        }
        Ok(())
    }
}

/// A grid field together with its difference gradient, usable as a
/// [`Field`].
#[derive(Debug, Clone)]
pub struct GridField {
    field: ScalarField,
    gradient: GradientField,
}

impl GridField {
    pub fn new(field: ScalarField) -> Result<Self> {
        let gradient = field.gradient_field()?;
        Ok(Self { field, gradient })
    }

    pub fn scalar(&self) -> &ScalarField {
        &self.field
    }

    pub fn into_scalar(self) -> ScalarField {
        self.field
    }
}

impl Field for GridField {
    fn dim(&self) -> usize {
        self.field.dim
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        self.field.interpolate(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.gradient.interpolate(x, out)
    }
    fn spacing(&self) -> Option<f64> {
        Some(self.field.max_spacing())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit_square(n: usize, f: impl FnMut(&[f64]) -> f64) -> ScalarField {
        let h = 1.0 / (n - 1) as f64;
        ScalarField::from_fn(vec![0.0, 0.0], vec![h, h], vec![n, n], false, f).unwrap()
    }

    #[test]
    fn constant_field_interpolates_to_constant() {
        let f = unit_square(9, |_| 3.0);
        assert_eq!(f.interpolate(&[0.41, 0.77]).unwrap(), 3.0);
    }

    #[test]
    fn affine_field_is_reproduced() {
        let f = unit_square(11, |x| x[0]);
        assert_relative_eq!(f.interpolate(&[0.37, 0.5]).unwrap(), 0.37, epsilon = 1e-15);
    }

    #[test]
    fn quadratic_interpolation_error_bound() {
        for k in 3..8 {
            let n = (1usize << k) + 1;
            let h = 1.0 / (n - 1) as f64;
            let f = unit_square(n, |x| x[0] * x[0]);
            // shift off the node so the bound is exercised
            let p = [0.5 + 0.37 * h, 0.5];
            let exact = p[0] * p[0];
            let err = (f.interpolate(&p).unwrap() - exact).abs();
            assert!(err <= h * h / 4.0 + 1e-15, "k={k} err={err}");
            assert!((f.interpolate(&[0.5, 0.5]).unwrap() - 0.25).abs() <= h * h / 4.0);
        }
    }

    #[test]
    fn out_of_domain_point_is_rejected() {
        let f = unit_square(9, |_| 1.0);
        assert!(matches!(f.interpolate(&[0.05, 0.5]), Err(Error::Domain(_))));
        assert!(matches!(f.interpolate(&[0.5, 1.2]), Err(Error::Domain(_))));
    }

    #[test]
    fn gradient_of_affine_and_constant() {
        let f = unit_square(7, |x| 2.0 * x[0] + x[1]);
        let g = f.gradient_field().unwrap();
        assert!(g.component(0).iter().all(|v| (v - 2.0).abs() < 1e-12));
        assert!(g.component(1).iter().all(|v| (v - 1.0).abs() < 1e-12));
        let c = unit_square(7, |_| 5.0);
        let g = c.gradient_field().unwrap();
        assert!(g.component(0).iter().chain(g.component(1)).all(|v| *v == 0.0));
    }

    #[test]
    fn central_difference_exact_on_quadratic() {
        let f = unit_square(9, |x| x[0] * x[0]);
        let g = f.gradient_field().unwrap();
        let idx = f.flat(&[4, 3]); // x = 0.5
        assert_relative_eq!(g.component(0)[idx], 1.0, epsilon = 1e-13);
    }

    #[test]
    fn fld1_round_trip_is_bit_exact() {
        let f = ScalarField::from_fn(
            vec![-0.5, 0.25, 1.0],
            vec![0.125, 0.1, 0.3],
            vec![3, 4, 2],
            true,
            |x| (x[0] * x[1]).abs() + 1e-300 * x[2].abs() + std::f64::consts::PI,
        )
        .unwrap();
        let text = f.to_fld1();
        assert!(text.starts_with("FLD1 d=3 n=3,4,2 "));
        let back = ScalarField::from_fld1(&text).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn fld1_rejects_bad_counts() {
        let text = "FLD1 d=2 n=2,2 h=1,1 o=0,0 flags=none\n1 2 3\n";
        assert!(ScalarField::from_fld1(text).is_err());
        let text = "FLD1 d=2 n=2,2 h=1,1 o=0,0 flags=nonneg\n1 2 3 -4\n";
        assert!(ScalarField::from_fld1(text).is_err());
    }

    proptest! {
        #[test]
        fn interpolation_reproduces_nodes(i in 1usize..8, j in 1usize..8, seed in 0u64..1000) {
            let s = seed as f64;
            let f = unit_square(10, |x| (s * x[0]).sin() + x[1] * x[1] * s);
            let p = [i as f64 / 9.0, j as f64 / 9.0];
            let v = f.interpolate(&p).unwrap();
            prop_assert!((v - f.values()[f.flat(&[i, j])]).abs() <= 1e-12 * (1.0 + v.abs()));
        }
    }
}

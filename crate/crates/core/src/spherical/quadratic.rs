use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::geometry::{check_dim, QuadratureRule};
use crate::spherical::basis::Basis;

/// `Q_A(x) = ½ x·Ax` for a symmetric `d × d` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct QuadraticForm {
    a: DMatrix<f64>,
}

impl QuadraticForm {
    /// Symmetrizes `matrix`; rejects inputs that are far from symmetric.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let d = matrix.nrows();
        check_dim(d)?;
        if matrix.ncols() != d {
            return config("quadratic form needs a square matrix");
        }
        let asym = (&matrix - matrix.transpose()).abs().max();
        if asym > 1e-12 * (1.0 + matrix.abs().max()) {
            return config(format!("matrix is not symmetric (|A - Aᵀ| = {asym:e})"));
        }
        let a = (&matrix + matrix.transpose()) * 0.5;
        Ok(Self { a })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return config("quadratic form rows must form a square matrix");
        }
        Self::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn from_diag(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(diag)))
    }

    /// `A = I/d`, the isotropic member of the quadratic blow-up family.
    pub fn isotropic(dim: usize) -> Result<Self> {
        Self::from_diag(&vec![1.0 / dim as f64; dim])
    }

    pub fn zero(dim: usize) -> Result<Self> {
        Self::from_diag(&vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn trace(&self) -> f64 {
        self.a.trace()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += x[i] * self.a[(i, j)] * x[j];
            }
        }
        0.5 * s
    }

    /// `∇Q_A = Ax`.
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            out[i] = (0..d).map(|j| self.a[(i, j)] * x[j]).sum();
        }
    }

    /// Eigenvalues in ascending order with matching unit eigenvectors as
    /// columns.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        let eig = SymmetricEigen::new(self.a.clone());
        let d = self.dim();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])]);
        (values, vectors)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen().0
    }

    /// Rebuilds `V diag(λ) Vᵀ`.
    pub fn from_eigen(values: &[f64], vectors: &DMatrix<f64>) -> Result<Self> {
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(values));
        Self::new(vectors * lam * vectors.transpose())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Self::new(&self.a - &other.a)
    }

    /// Coefficients of the trace of `Q_A` on the constant and degree-two
    /// modes, in basis order.
    pub fn mode_coeffs(&self) -> Vec<f64> {
        let map = ModeMap::get(self.dim());
        let v = nalgebra::DVector::from_vec(pack(&self.a));
        (&map.forward * v).iter().cloned().collect()
    }

    /// Inverse of [`QuadraticForm::mode_coeffs`]: the unique symmetric `A`
    /// whose trace has the given constant and degree-two coefficients.
    pub fn from_mode_coeffs(dim: usize, coeffs: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        let map = ModeMap::get(dim);
        if coeffs.len() != map.forward.nrows() {
            return config("wrong number of degree 0/2 coefficients");
        }
        let v = nalgebra::DVector::from_row_slice(coeffs);
        let packed = &map.inverse * v;
        Self::new(unpack(dim, packed.as_slice()))
    }

    /// Basis indices of the constant and degree-two modes, matching
    /// [`QuadraticForm::mode_coeffs`].
    pub fn mode_indices(dim: usize) -> Vec<usize> {
        let basis = Basis::new(dim, 2).expect("valid dimension");
        let mut idx: Vec<usize> = basis.degree_range(0).collect();
        idx.extend(basis.degree_range(2));
        idx
    }
}

impl TryFrom<Vec<Vec<f64>>> for QuadraticForm {
    type Error = crate::error::Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<QuadraticForm> for Vec<Vec<f64>> {
    fn from(q: QuadraticForm) -> Self {
        let d = q.dim();
        (0..d).map(|i| (0..d).map(|j| q.a[(i, j)]).collect()).collect()
    }
}

/// Upper-triangular packing: diagonal first, then off-diagonal pairs.
fn pack(a: &DMatrix<f64>) -> Vec<f64> {
    let d = a.nrows();
    let mut v: Vec<f64> = (0..d).map(|i| a[(i, i)]).collect();
    for i in 0..d {
        for j in (i + 1)..d {
            v.push(a[(i, j)]);
        }
    }
    v
}

fn unpack(dim: usize, v: &[f64]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        a[(i, i)] = v[i];
    }
    let mut k = dim;
    for i in 0..dim {
        for j in (i + 1)..dim {
            a[(i, j)] = v[k];
            a[(j, i)] = v[k];
            k += 1;
        }
    }
    a
}

/// Linear map from packed symmetric matrices to degree 0/2 coefficients.
struct ModeMap {
    forward: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl ModeMap {
    fn get(dim: usize) -> &'static ModeMap {
        static MAPS: [OnceLock<ModeMap>; 2] = [OnceLock::new(), OnceLock::new()];
        MAPS[dim - 2].get_or_init(|| Self::build(dim))
    }

    fn build(dim: usize) -> ModeMap {
        let basis = Basis::new(dim, 2).expect("valid dimension");
        let rule = QuadratureRule::sphere(dim, if dim == 2 { 16 } else { 4 }).expect("valid rule");
        let idx = QuadraticForm::mode_indices(dim);
        let n = idx.len();
        let mut forward = DMatrix::zeros(n, n);
        let mut v = vec![0.0; basis.len()];
        for col in 0..n {
            let mut e = vec![0.0; n];
            e[col] = 1.0;
            let a = unpack(dim, &e);
            for i in 0..rule.len() {
                let x = rule.point(i);
                basis.eval(x, &mut v);
                let mut q = 0.0;
                for r in 0..dim {
                    for c in 0..dim {
                        q += x[r] * a[(r, c)] * x[c];
                    }
                }
                q *= 0.5;
                for (row, &j) in idx.iter().enumerate() {
                    forward[(row, col)] += rule.weight(i) * q * v[j];
                }
            }
        }
        let inverse = forward
            .clone()
            .try_inverse()
            .expect("degree 0/2 map of quadratic forms is invertible");
        ModeMap { forward, inverse }
    }
}

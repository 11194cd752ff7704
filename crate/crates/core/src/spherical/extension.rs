use crate::error::{config, Result};
use crate::geometry::{norm, Field};
use crate::spherical::basis::Basis;
use crate::spherical::trace::SphereTrace;

/// `x ↦ |x|^α c(x/|x|)` built from the truncated expansion of a trace.
#[derive(Debug, Clone)]
pub struct HomogeneousExtension {
    trace: SphereTrace,
    basis: Basis,
    alpha: f64,
}

impl HomogeneousExtension {
    pub fn new(trace: SphereTrace, alpha: f64) -> Result<Self> {
        if !(alpha >= 2.0) {
            return config(format!("homogeneity degree must be at least 2, got {alpha}"));
        }
        let basis = trace.basis();
        Ok(Self {
            trace,
            basis,
            alpha,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn trace(&self) -> &SphereTrace {
        &self.trace
    }

    fn angular(&self, theta: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let n = self.basis.len();
        let d = self.basis.dim();
        let mut v = vec![0.0; n];
        let c = self.trace.coeffs();
        match grad {
            None => {
                self.basis.eval(theta, &mut v);
                c.iter().zip(&v).map(|(a, b)| a * b).sum()
            }
            Some(g) => {
                let mut dv = vec![0.0; n * d];
                self.basis.eval_with_gradient(theta, &mut v, &mut dv);
                g[..d].iter_mut().for_each(|x| *x = 0.0);
                for j in 0..n {
                    for k in 0..d {
                        g[k] += c[j] * dv[j * d + k];
                    }
                }
                c.iter().zip(&v).map(|(a, b)| a * b).sum()
            }
        }
    }
}

impl Field for HomogeneousExtension {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let r = norm(x);
        if r == 0.0 {
            return Ok(0.0);
        }
        let theta: Vec<f64> = x.iter().map(|v| v / r).collect();
        Ok(r.powf(self.alpha) * self.angular(&theta, None))
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.value_and_gradient(x, out).map(|_| ())
    }

    /// `∇(r^α c) = α r^{α-1} c θ + r^{α-1} ∇_θ c`.
    fn value_and_gradient(&self, x: &[f64], out: &mut [f64]) -> Result<f64> {
        let d = self.basis.dim();
        let r = norm(x);
        if r == 0.0 {
            out[..d].iter_mut().for_each(|v| *v = 0.0);
            return Ok(0.0);
        }
        let theta: Vec<f64> = x.iter().map(|v| v / r).collect();
        let mut g = [0.0; 3];
        let c = self.angular(&theta, Some(&mut g[..d]));
        let ra1 = r.powf(self.alpha - 1.0);
        for k in 0..d {
            out[k] = ra1 * (self.alpha * c * theta[k] + g[k]);
        }
        Ok(ra1 * r * c)
    }
}

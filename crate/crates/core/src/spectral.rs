//! Fourier differentiation on a (possibly oblique) periodic lattice.
//!
//! Samples live on the uniform grid of the reduced coordinates `s ∈ [0,1)^d`
//! with `x = Mᵀ s`. A Fourier mode `exp(2πi k·s)` has physical wavevector
//! `K = 2π M⁻¹ k`. Modes with any index at the Nyquist frequency get a zero
//! derivative so that derivative multipliers stay skew-Hermitian.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::domain::{lattice_matrix, DomainSpec, Mesh};
use crate::error::{Error, Result};
use crate::sym::SymMat;

pub struct Spectral {
    shape: Vec<usize>,
    strides: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    /// Physical wavevector per flat Fourier index; `None` for Nyquist modes.
    wavevectors: Vec<Option<Vec<f64>>>,
}

impl Spectral {
    pub fn for_mesh(mesh: &Mesh) -> Result<Self> {
        match &mesh.domain {
            DomainSpec::Torus { basis } => {
                let minv = lattice_matrix(basis)
                    .try_inverse()
                    .ok_or(Error::SingularLattice { det: 0.0 })?;
                Ok(Self::new(&mesh.grid.shape, &minv))
            }
            other => Err(Error::UnsupportedDomain {
                op: "spectral differentiation",
                domain: other.name().into(),
            }),
        }
    }

    pub fn new(shape: &[usize], minv: &DMatrix<f64>) -> Self {
        let d = shape.len();
        let mut planner = FftPlanner::new();
        let forward = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let mut strides = vec![1; d];
        for a in (0..d.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * shape[a + 1];
        }
        let total: usize = shape.iter().product();
        let mut wavevectors = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut k = vec![0.0; d];
            let mut nyquist = false;
            for a in 0..d {
                let i = rem / strides[a];
                rem %= strides[a];
                let n = shape[a];
                if n.is_multiple_of(2) && i == n / 2 {
                    nyquist = true;
                }
                k[a] = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
            }
            if nyquist {
                wavevectors.push(None);
            } else {
                let kv: Vec<f64> = (0..d)
                    .map(|j| 2.0 * PI * (0..d).map(|a| minv[(j, a)] * k[a]).sum::<f64>())
                    .collect();
                wavevectors.push(Some(kv));
            }
        }
        Spectral {
            shape: shape.to_vec(),
            strides,
            forward,
            inverse,
            wavevectors,
        }
    }

    pub fn len(&self) -> usize {
        self.wavevectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavevectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn wavevector(&self, flat: usize) -> Option<&[f64]> {
        self.wavevectors[flat].as_deref()
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let plans = if inverse { &self.inverse } else { &self.forward };
        let total = data.len();
        for (a, plan) in plans.iter().enumerate() {
            let n = self.shape[a];
            let stride = self.strides[a];
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            for start in 0..total {
                // first element of each line along axis `a`
                if !(start / stride).is_multiple_of(n) {
                    continue;
                }
                for i in 0..n {
                    line[i] = data[start + i * stride];
                }
                plan.process(&mut line);
                for i in 0..n {
                    data[start + i * stride] = line[i];
                }
            }
        }
        if inverse {
            let scale = 1.0 / total as f64;
            for v in data.iter_mut() {
                *v *= scale;
            }
        }
    }

    pub fn forward(&self, v: &[f64]) -> Vec<Complex64> {
        let mut c: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform(&mut c, false);
        c
    }

    pub fn inverse_real(&self, mut c: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut c, true);
        c.into_iter().map(|z| z.re).collect()
    }

    /// Applies a Fourier multiplier given as a function of the wavevector.
    pub fn apply(&self, hat: &[Complex64], mult: impl Fn(Option<&[f64]>) -> Complex64) -> Vec<f64> {
        let c: Vec<Complex64> = hat
            .iter()
            .zip(&self.wavevectors)
            .map(|(h, k)| h * mult(k.as_deref()))
            .collect();
        self.inverse_real(c)
    }

    pub fn derivative(&self, v: &[f64], j: usize) -> Vec<f64> {
        let hat = self.forward(v);
        self.derivative_hat(&hat, j)
    }

    pub fn derivative_hat(&self, hat: &[Complex64], j: usize) -> Vec<f64> {
        self.apply(hat, |k| match k {
            Some(k) => Complex64::new(0.0, k[j]),
            None => Complex64::new(0.0, 0.0),
        })
    }

    pub fn gradient(&self, v: &[f64]) -> Vec<Vec<f64>> {
        let hat = self.forward(v);
        (0..self.dim()).map(|j| self.derivative_hat(&hat, j)).collect()
    }

    /// Hessian of a periodic scalar at each sample.
    pub fn hessian(&self, v: &[f64]) -> Vec<SymMat> {
        let d = self.dim();
        let hat = self.forward(v);
        let mut parts = vec![vec![]; d * d];
        for i in 0..d {
            for j in i..d {
                parts[i * d + j] = self.apply(&hat, |k| match k {
                    Some(k) => Complex64::new(-k[i] * k[j], 0.0),
                    None => Complex64::new(0.0, 0.0),
                });
            }
        }
        (0..v.len()).map(|c| SymMat::from_fn(d, |i, j| parts[i * d + j][c])).collect()
    }

    /// Solves `div(C ∇u) = rhs` for a constant SPD `C`, returning the mean-zero solution.
    pub fn solve_constant_elliptic(&self, rhs_hat: &[Complex64], c: &SymMat) -> Vec<Complex64> {
        rhs_hat
            .iter()
            .zip(&self.wavevectors)
            .map(|(r, k)| match k {
                Some(k) => {
                    let q = c.quad_form(k);
                    if q > 0.0 {
                        -r / q
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                }
                None => Complex64::new(0.0, 0.0),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::GridSpec;

    #[test]
    fn derivative_of_sine() {
        let mesh = Mesh::new(DomainSpec::unit_torus(2), GridSpec::uniform(2, 32)).unwrap();
        let sp = Spectral::for_mesh(&mesh).unwrap();
        let f: Vec<f64> = (0..mesh.len()).map(|k| (2.0 * PI * mesh.point(k)[0]).sin()).collect();
        let df = sp.derivative(&f, 0);
        let dy = sp.derivative(&f, 1);
        for k in 0..mesh.len() {
            let x = mesh.point(k)[0];
            assert!((df[k] - 2.0 * PI * (2.0 * PI * x).cos()).abs() < 1e-11);
            assert!(dy[k].abs() < 1e-11);
        }
    }

    #[test]
    fn oblique_lattice_derivative() {
        // x = Mᵀ s with rows (1, 0), (0.5, 2)
        let basis = vec![vec![1.0, 0.0], vec![0.5, 2.0]];
        let mesh = Mesh::new(DomainSpec::Torus { basis: basis.clone() }, GridSpec::uniform(2, 24)).unwrap();
        let sp = Spectral::for_mesh(&mesh).unwrap();
        // periodic function: cos(2π s_2) with s = M^{-T} x, s_2 = x_2 / 2
        let f: Vec<f64> = (0..mesh.len()).map(|k| (PI * mesh.point(k)[1]).cos()).collect();
        let g = sp.gradient(&f);
        for k in 0..mesh.len() {
            let y = mesh.point(k)[1];
            assert!(g[0][k].abs() < 1e-11);
            assert!((g[1][k] + PI * (PI * y).sin()).abs() < 1e-11);
        }
    }

    #[test]
    fn hessian_of_product() {
        let mesh = Mesh::new(DomainSpec::unit_torus(2), GridSpec::uniform(2, 16)).unwrap();
        let sp = Spectral::for_mesh(&mesh).unwrap();
        let tp = 2.0 * PI;
        let f: Vec<f64> = (0..mesh.len())
            .map(|k| {
                let p = mesh.point(k);
                (tp * p[0]).cos() * (tp * p[1]).cos()
            })
            .collect();
        let h = sp.hessian(&f);
        for k in 0..mesh.len() {
            let p = mesh.point(k);
            let (c0, c1, s0, s1) = ((tp * p[0]).cos(), (tp * p[1]).cos(), (tp * p[0]).sin(), (tp * p[1]).sin());
            assert!((h[k].get(0, 0) + tp * tp * c0 * c1).abs() < 1e-10);
            assert!((h[k].get(0, 1) - tp * tp * s0 * s1).abs() < 1e-10);
        }
    }
}

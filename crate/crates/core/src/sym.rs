//! Small dense symmetric matrices.
//!
//! [`SymMat`] stores the upper triangle packed row by row, so a `d x d`
//! matrix holds `d(d+1)/2` values and is symmetric by construction.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative tolerance for positive semi-definiteness.
pub const PSD_TOL: f64 = 1e-10;

/// Serialized as full rows, e.g. `[[2, 1], [1, 3]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMat {
    dim: usize,
    data: Vec<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for SymMat {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("matrix must have at least one row"));
        }
        SymMat::from_rows(&rows)
    }
}

impl From<SymMat> for Vec<Vec<f64>> {
    fn from(m: SymMat) -> Self {
        m.rows()
    }
}

#[inline]
fn packed_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * dim - i * (i + 1) / 2 + j
}

impl SymMat {
    pub fn zeros(dim: usize) -> Self {
        SymMat {
            dim,
            data: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, 1.0)
    }

    pub fn scalar(dim: usize, s: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, s);
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m.set(i, i, e);
        }
        m
    }

    /// Builds from the packed upper triangle.
    pub fn from_packed(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * (dim + 1) / 2 {
            return Err(Error::DimensionMismatch {
                expected: dim * (dim + 1) / 2,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("symmetric matrix entries must be finite"));
        }
        Ok(SymMat { dim, data })
    }

    /// Builds from full rows, rejecting asymmetric input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            for j in i..dim {
                let (a, b) = (row[j], rows[j][i]);
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::invalid("symmetric matrix entries must be finite"));
                }
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::invalid(format!("matrix is not symmetric at ({i}, {j})")));
                }
                m.set(i, j, 0.5 * (a + b));
            }
        }
        Ok(m)
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Symmetric part of a square matrix.
    pub fn from_dmatrix(a: &DMatrix<f64>) -> Self {
        assert_eq!(a.nrows(), a.ncols());
        Self::from_fn(a.nrows(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
    }

    /// `u uᵀ`.
    pub fn outer(u: &[f64]) -> Self {
        Self::from_fn(u.len(), |i, j| u[i] * u[j])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn packed(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[packed_index(self.dim, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = packed_index(self.dim, i, j);
        self.data[k] = v;
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn add(&self, other: &SymMat) -> SymMat {
        assert_eq!(self.dim, other.dim);
        SymMat {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &SymMat) -> SymMat {
        assert_eq!(self.dim, other.dim);
        SymMat {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> SymMat {
        SymMat {
            dim: self.dim,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &SymMat) {
        assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Trace of the product `self * other`.
    pub fn trace_product(&self, other: &SymMat) -> f64 {
        let mut t = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                t += self.get(i, j) * other.get(j, i);
            }
        }
        t
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.get(i, j).powi(2);
            }
        }
        s.sqrt()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        match self.dim {
            0 => vec![],
            1 => vec![self.data[0]],
            2 => {
                let (a, b, c) = (self.data[0], self.data[1], self.data[2]);
                let mean = 0.5 * (a + c);
                let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
                vec![mean - r, mean + r]
            }
            _ => {
                let mut ev: Vec<f64> = self.to_dmatrix().symmetric_eigen().eigenvalues.iter().copied().collect();
                ev.sort_by(|a, b| a.total_cmp(b));
                ev
            }
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Spectral norm.
    pub fn norm2(&self) -> f64 {
        self.eigenvalues().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn det(&self) -> f64 {
        match self.dim {
            0 => 1.0,
            1 => self.data[0],
            2 => self.data[0] * self.data[2] - self.data[1] * self.data[1],
            3 => {
                let g = |i, j| self.get(i, j);
                g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(1, 2)) - g(0, 1) * (g(0, 1) * g(2, 2) - g(1, 2) * g(0, 2))
                    + g(0, 2) * (g(0, 1) * g(1, 2) - g(1, 1) * g(0, 2))
            }
            _ => self.to_dmatrix().determinant(),
        }
    }

    /// Cofactor matrix Â, with `Â A = det(A) I`.
    pub fn cofactor(&self) -> SymMat {
        let d = self.dim;
        match d {
            0 => SymMat::zeros(0),
            1 => SymMat::identity(1),
            2 => SymMat {
                dim: 2,
                data: vec![self.data[2], -self.data[1], self.data[0]],
            },
            _ => {
                let full = self.to_dmatrix();
                SymMat::from_fn(d, |i, j| {
                    let minor = full.clone().remove_row(j).remove_column(i);
                    let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                    sign * minor.determinant()
                })
            }
        }
    }

    pub fn inverse(&self) -> Option<SymMat> {
        let inv = self.to_dmatrix().try_inverse()?;
        Some(SymMat::from_dmatrix(&inv))
    }

    /// `P A Pᵀ` for a square `P`.
    pub fn congruent(&self, p: &DMatrix<f64>) -> SymMat {
        let a = self.to_dmatrix();
        SymMat::from_dmatrix(&(p * a * p.transpose()))
    }
}

/// True iff the smallest eigenvalue is at least `-tol (1 + |a|₂)`.
pub fn psd_check(a: &SymMat, tol: f64) -> bool {
    let ev = a.eigenvalues();
    let norm = ev.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    ev.first().is_none_or(|&lo| lo >= -tol * (1.0 + norm))
}

pub fn cofactor(a: &SymMat) -> SymMat {
    a.cofactor()
}

/// `max(det a, 0)^alpha` for a PSD matrix.
pub fn det_power(a: &SymMat, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!("exponent must be positive, got {alpha}")));
    }
    if !psd_check(a, PSD_TOL) {
        return Err(Error::NotPsd {
            min_eigenvalue: a.min_eigenvalue(),
        });
    }
    Ok(a.det().max(0.0).powf(alpha))
}

/// `x^(p/q)`-style powers of large positive numbers, evaluated in log space.
pub fn pow_log(x: f64, e: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (e * x.ln()).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn packed_layout() {
        let m = SymMat::from_fn(4, |i, j| (10 * i + j) as f64);
        for i in 0..4 {
            for j in i..4 {
                assert_eq!(m.get(i, j), (10 * i + j) as f64);
                assert_eq!(m.get(j, i), (10 * i + j) as f64);
            }
        }
        assert_eq!(m.packed().len(), 10);
    }

    #[test]
    fn cofactor_examples() {
        assert_eq!(SymMat::diag(&[2.0, 3.0]).cofactor(), SymMat::diag(&[3.0, 2.0]));
        let c = SymMat::identity(3).cofactor();
        for i in 0..3 {
            for j in 0..3 {
                assert!(close(c.get(i, j), if i == j { 1.0 } else { 0.0 }, 1e-15));
            }
        }
        let a = SymMat::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let c = a.cofactor();
        assert_eq!(c, SymMat::from_rows(&[vec![3.0, -1.0], vec![-1.0, 2.0]]).unwrap());
        let prod = c.to_dmatrix() * a.to_dmatrix();
        assert!((prod - DMatrix::identity(2, 2) * 5.0).norm() < 1e-14);
    }

    #[test]
    fn cofactor_identity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let d = rng.random_range(2..=5);
            let a = SymMat::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
            let c = a.cofactor();
            let lhs = c.to_dmatrix() * a.to_dmatrix();
            let err = (lhs - DMatrix::identity(d, d) * a.det()).norm();
            let scale = 1.0 + a.frobenius_norm().powi(d as i32);
            assert!(err <= 1e-10 * scale, "d={d} err={err}");
            // det Â = det(A)^(d-1)
            let dc = c.det();
            let expect = a.det().powi(d as i32 - 1);
            assert!((dc - expect).abs() <= 1e-9 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn det_power_examples() {
        assert!(close(det_power(&SymMat::diag(&[4.0, 9.0]), 1.0).unwrap(), 36.0, 1e-12));
        let v = det_power(&SymMat::diag(&[1.0, 2.0, 3.0]), 0.5).unwrap();
        assert!(close(v, 6f64.sqrt(), 1e-12));
        assert!(close(v, 2.449490, 1e-6));
        assert_eq!(det_power(&SymMat::zeros(3), 0.7).unwrap(), 0.0);
        let bad = SymMat::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(det_power(&bad, 1.0), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn det_power_clamps_roundoff() {
        // rank-one with a tiny negative determinant from roundoff
        let u = [0.1, 0.7, 0.3];
        let a = SymMat::outer(&u);
        assert!(det_power(&a, 0.5).unwrap() >= 0.0);
    }

    #[test]
    fn psd_examples() {
        assert!(psd_check(&SymMat::identity(2), 0.0));
        let bad = SymMat::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(!psd_check(&bad, 1e-10));
        assert!(psd_check(&SymMat::diag(&[1e-16, 1.0]), 1e-10));
        assert!(psd_check(&SymMat::diag(&[-1e-16, 1.0]), 1e-10));
    }

    #[test]
    fn asymmetric_rows_rejected() {
        assert!(SymMat::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).is_err());
        assert!(SymMat::from_packed(2, vec![1.0, f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn eigenvalues_match_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let a = SymMat::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
            let mut ev: Vec<f64> = a.to_dmatrix().symmetric_eigen().eigenvalues.iter().copied().collect();
            ev.sort_by(|x, y| x.total_cmp(y));
            let ours = a.eigenvalues();
            assert!(close(ev[0], ours[0], 1e-12) && close(ev[1], ours[1], 1e-12));
        }
    }
}

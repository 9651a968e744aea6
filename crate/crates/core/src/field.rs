//! Cell-sampled scalar, vector and symmetric-tensor fields.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::domain::{lattice_matrix, pairwise_sum, DomainSpec, Mesh};
use crate::error::{Error, Result};
use crate::sym::{psd_check, SymMat};

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub mesh: Arc<Mesh>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub mesh: Arc<Mesh>,
    pub values: Vec<Vec<f64>>,
}

/// `x ↦ A(x)` sampled on a mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    pub mesh: Arc<Mesh>,
    pub values: Vec<SymMat>,
    /// Constructor tag, carried through I/O.
    pub tag: String,
}

impl ScalarField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::DimensionMismatch {
                expected: mesh.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("scalar field values must be finite"));
        }
        Ok(ScalarField { mesh, values })
    }

    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..mesh.len()).map(|k| f(mesh.point(k))).collect();
        ScalarField { mesh, values }
    }

    pub fn constant(mesh: Arc<Mesh>, c: f64) -> Self {
        let values = vec![c; mesh.len()];
        ScalarField { mesh, values }
    }

    /// Quadrature of the field over the domain.
    pub fn integral(&self) -> f64 {
        weighted_sum(&self.mesh, &self.values)
    }

    pub fn mean(&self) -> f64 {
        self.integral() / self.mesh.total_weight()
    }
}

impl VectorField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::DimensionMismatch {
                expected: mesh.len(),
                got: values.len(),
            });
        }
        let n = values.first().map_or(0, |v| v.len());
        if values.iter().any(|v| v.len() != n || v.iter().any(|x| !x.is_finite())) {
            return Err(Error::invalid("vector field values must be finite with a common length"));
        }
        Ok(VectorField { mesh, values })
    }

    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let values = (0..mesh.len()).map(|k| f(mesh.point(k))).collect();
        VectorField { mesh, values }
    }

    pub fn norms(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect()
    }

    /// `Σ |v| w` over the samples.
    pub fn l1_norm(&self) -> f64 {
        weighted_sum(&self.mesh, &self.norms())
    }
}

impl TensorField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<SymMat>, tag: impl Into<String>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::DimensionMismatch {
                expected: mesh.len(),
                got: values.len(),
            });
        }
        let d = mesh.dim();
        if let Some(bad) = values.iter().find(|v| v.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bad.dim(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("tensor field values must be finite"));
        }
        Ok(TensorField {
            mesh,
            values,
            tag: tag.into(),
        })
    }

    pub fn from_fn(mesh: Arc<Mesh>, tag: impl Into<String>, f: impl Fn(&[f64]) -> SymMat) -> Self {
        let values = (0..mesh.len()).map(|k| f(mesh.point(k))).collect();
        TensorField {
            mesh,
            values,
            tag: tag.into(),
        }
    }

    pub fn constant(mesh: Arc<Mesh>, a: &SymMat) -> Self {
        let values = vec![a.clone(); mesh.len()];
        TensorField {
            mesh,
            values,
            tag: "constant".into(),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Samples of the `(i, j)` entry.
    pub fn component(&self, i: usize, j: usize) -> Vec<f64> {
        self.values.iter().map(|a| a.get(i, j)).collect()
    }

    pub fn map(&self, tag: impl Into<String>, f: impl Fn(&SymMat) -> SymMat) -> TensorField {
        TensorField {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(f).collect(),
            tag: tag.into(),
        }
    }

    pub fn add(&self, other: &TensorField) -> Result<TensorField> {
        same_mesh(&self.mesh, &other.mesh)?;
        Ok(TensorField {
            mesh: self.mesh.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a.add(b)).collect(),
            tag: format!("{}+{}", self.tag, other.tag),
        })
    }

    /// First cell that fails the PSD test, with its smallest eigenvalue.
    pub fn worst_non_psd(&self, tol: f64) -> Option<(usize, f64)> {
        let mut worst: Option<(usize, f64)> = None;
        for (k, a) in self.values.iter().enumerate() {
            if !psd_check(a, tol) {
                let m = a.min_eigenvalue();
                if worst.is_none_or(|(_, w)| m < w) {
                    worst = Some((k, m));
                }
            }
        }
        worst
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.values.iter().all(|a| psd_check(a, tol))
    }

    pub fn det_powers(&self, alpha: f64) -> Result<Vec<f64>> {
        self.values.iter().map(|a| crate::sym::det_power(a, alpha)).collect()
    }
}

pub(crate) fn same_mesh(a: &Arc<Mesh>, b: &Arc<Mesh>) -> Result<()> {
    if Arc::ptr_eq(a, b) || (a.domain == b.domain && a.grid == b.grid) {
        Ok(())
    } else {
        Err(Error::DomainMismatch("fields live on different meshes".into()))
    }
}

/// `Σ_k w_k v_k` with a fixed summation order.
pub fn weighted_sum(mesh: &Mesh, values: &[f64]) -> f64 {
    let terms: Vec<f64> = values.iter().zip(mesh.weights()).map(|(v, w)| v * w).collect();
    pairwise_sum(&terms)
}

pub fn weighted_mean(mesh: &Mesh, values: &[f64]) -> f64 {
    weighted_sum(mesh, values) / mesh.total_weight()
}

/// Quadrature mean `⨍ A`.
pub fn field_average(field: &TensorField) -> SymMat {
    let d = field.dim();
    let total = field.mesh.total_weight();
    let len = d * (d + 1) / 2;
    let packed: Vec<f64> = (0..len)
        .map(|c| {
            let terms: Vec<f64> = field
                .values
                .iter()
                .zip(field.mesh.weights())
                .map(|(a, w)| a.packed()[c] * w)
                .collect();
            pairwise_sum(&terms) / total
        })
        .collect();
    SymMat::from_packed(d, packed).expect("average of finite values")
}

/// `y ↦ P A(P⁻¹ y) Pᵀ` on the image torus (lattice rows `γ_j ↦ P γ_j`).
///
/// Sample order is preserved: the reduced coordinates of `P x` on the image
/// lattice equal those of `x`, so no resampling is needed.
pub fn congruence(field: &TensorField, p: &DMatrix<f64>) -> Result<TensorField> {
    let d = field.dim();
    if p.nrows() != d || p.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: p.nrows(),
        });
    }
    let det = p.determinant();
    if !(det.abs() >= 1e-12) {
        return Err(Error::SingularTransform { det });
    }
    let basis = match &field.mesh.domain {
        DomainSpec::Torus { basis } => basis,
        other => {
            return Err(Error::UnsupportedDomain {
                op: "congruence",
                domain: other.name().into(),
            })
        }
    };
    let m = lattice_matrix(basis);
    let image = m * p.transpose();
    let new_basis: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| image[(i, j)]).collect()).collect();
    let mesh = Mesh::new(DomainSpec::Torus { basis: new_basis }, field.mesh.grid.clone())?;
    let values = field.values.iter().map(|a| a.congruent(p)).collect();
    Ok(TensorField {
        mesh,
        values,
        tag: format!("congruence({})", field.tag),
    })
}

//! Concrete DPT families and the fluid stress tensors.

use std::f64::consts::PI;
use std::ops::{Add, Div, Mul, Sub};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::domain::{lattice_matrix, DomainSpec, Mesh};
use crate::error::{Error, Result};
use crate::field::{ScalarField, TensorField, VectorField};
use crate::spectral::Spectral;
use crate::sym::{psd_check, SymMat, PSD_TOL};

pub use crate::kinetic::kinetic_moment_tensor;

/// One term `cos_coef cos(2π k·s) + sin_coef sin(2π k·s)` in reduced coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub k: Vec<i64>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// Trigonometric polynomial on a torus, written in reduced coordinates
/// `s = M⁻ᵀ x` so that every term is periodic on the lattice.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigPoly {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub terms: Vec<TrigTerm>,
}

impl TrigPoly {
    pub fn constant(c: f64) -> Self {
        TrigPoly {
            constant: c,
            terms: vec![],
        }
    }

    pub fn with_term(mut self, k: Vec<i64>, cos: f64, sin: f64) -> Self {
        self.terms.push(TrigTerm { k, cos, sin });
        self
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        match self.terms.iter().find(|t| t.k.len() != d) {
            Some(t) => Err(Error::DimensionMismatch {
                expected: d,
                got: t.k.len(),
            }),
            None => Ok(()),
        }
    }

    fn phase(t: &TrigTerm, s: &[f64]) -> f64 {
        2.0 * PI * t.k.iter().zip(s).map(|(k, s)| *k as f64 * s).sum::<f64>()
    }

    pub fn eval(&self, s: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|t| {
                    let ph = Self::phase(t, s);
                    t.cos * ph.cos() + t.sin * ph.sin()
                })
                .sum::<f64>()
    }

    /// Physical Hessian: `-Σ K Kᵀ (c cos + s sin)` with `K = 2π M⁻¹ k`.
    pub fn hessian(&self, s: &[f64], minv: &DMatrix<f64>) -> SymMat {
        let d = s.len();
        let mut h = SymMat::zeros(d);
        for t in &self.terms {
            let ph = Self::phase(t, s);
            let kk: Vec<f64> = (0..d)
                .map(|i| 2.0 * PI * (0..d).map(|a| minv[(i, a)] * t.k[a] as f64).sum::<f64>())
                .collect();
            h.axpy(-(t.cos * ph.cos() + t.sin * ph.sin()), &SymMat::outer(&kk));
        }
        h
    }

    /// Whether the polynomial is independent of reduced coordinate `j`.
    pub fn ignores(&self, j: usize) -> bool {
        self.terms.iter().all(|t| t.k[j] == 0 || (t.cos == 0.0 && t.sin == 0.0))
    }
}

/// Lattice inverse and reduced coordinates of every sample; boxes and balls use `M = I`.
fn reduced(mesh: &Mesh) -> Result<(DMatrix<f64>, Vec<Vec<f64>>)> {
    let d = mesh.dim();
    let minv = match &mesh.domain {
        DomainSpec::Torus { basis } => {
            let m = lattice_matrix(basis);
            m.clone()
                .try_inverse()
                .ok_or(Error::SingularLattice { det: m.determinant() })?
        }
        _ => DMatrix::identity(d, d),
    };
    let s = (0..mesh.len())
        .map(|k| {
            let x = mesh.point(k);
            // s = M⁻ᵀ x
            (0..d).map(|a| (0..d).map(|j| minv[(j, a)] * x[j]).sum()).collect()
        })
        .collect();
    Ok((minv, s))
}

/// `A = diag(g_1, …, g_d)` with `g_j` independent of `x_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagonalSpec {
    pub g: Vec<TrigPoly>,
}

impl DiagonalSpec {
    /// Samples of each `g_j`, after checking the independence structure.
    pub fn sample(&self, mesh: &Arc<Mesh>) -> Result<Vec<ScalarField>> {
        let d = mesh.dim();
        if self.g.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: self.g.len(),
            });
        }
        let (_, s) = reduced(mesh)?;
        self.g
            .iter()
            .enumerate()
            .map(|(j, g)| {
                g.check_dim(d)?;
                if !g.ignores(j) {
                    return Err(Error::invalid(format!("g_{} must not depend on coordinate {}", j + 1, j + 1)));
                }
                Ok(ScalarField {
                    mesh: mesh.clone(),
                    values: s.iter().map(|s| g.eval(s)).collect(),
                })
            })
            .collect()
    }
}

pub fn diagonal_dpt(g: &[ScalarField]) -> Result<TensorField> {
    let mesh = g
        .first()
        .ok_or_else(|| Error::invalid("no diagonal entries given"))?
        .mesh
        .clone();
    let d = mesh.dim();
    if g.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: g.len(),
        });
    }
    for (j, gj) in g.iter().enumerate() {
        crate::field::same_mesh(&mesh, &gj.mesh)?;
        if let Some((cell, &value)) = gj.values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeEntry { index: j, cell, value });
        }
    }
    let values = (0..mesh.len())
        .map(|k| SymMat::diag(&g.iter().map(|gj| gj.values[k]).collect::<Vec<_>>()))
        .collect();
    TensorField::new(mesh, values, "diagonal")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    Zero,
    /// `½ xᵀ H x`.
    Quadratic {
        h: SymMat,
    },
    Trig {
        poly: TrigPoly,
    },
    /// `amplitude · exp(-1 / (1 - |x - c|²/r²))` inside the ball, 0 outside.
    Bump {
        center: Vec<f64>,
        radius: f64,
        amplitude: f64,
    },
    /// Periodic samples on the torus grid, differentiated spectrally.
    Sampled {
        values: Vec<f64>,
    },
}

/// `A = cof(S + ∇²ψ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub s: SymMat,
    pub psi: Potential,
}

fn bump_hessian(x: &[f64], center: &[f64], radius: f64, amplitude: f64) -> SymMat {
    let d = x.len();
    let y: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
    let q = y.iter().map(|v| v * v).sum::<f64>() / (radius * radius);
    if q >= 1.0 {
        return SymMat::zeros(d);
    }
    let w = 1.0 - q;
    let u = (-1.0 / w).exp();
    let u1 = -u / (w * w);
    let u2 = u * (1.0 / w.powi(4) - 2.0 / w.powi(3));
    let r2 = radius * radius;
    let mut h = SymMat::outer(&y).scale(4.0 * u2 / (r2 * r2));
    h.axpy(2.0 * u1 / r2, &SymMat::identity(d));
    h.scale(amplitude)
}

/// `S + ∇²ψ` at every sample.
pub fn potential_hessian(spec: &PotentialSpec, mesh: &Arc<Mesh>) -> Result<Vec<SymMat>> {
    let d = mesh.dim();
    if spec.s.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: spec.s.dim(),
        });
    }
    let hess: Vec<SymMat> = match &spec.psi {
        Potential::Zero => vec![SymMat::zeros(d); mesh.len()],
        Potential::Quadratic { h } => {
            if h.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: h.dim(),
                });
            }
            vec![h.clone(); mesh.len()]
        }
        Potential::Trig { poly } => {
            poly.check_dim(d)?;
            let (minv, s) = reduced(mesh)?;
            s.iter().map(|s| poly.hessian(s, &minv)).collect()
        }
        Potential::Bump {
            center,
            radius,
            amplitude,
        } => {
            if center.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: center.len(),
                });
            }
            if !(*radius > 0.0) || !amplitude.is_finite() {
                return Err(Error::invalid("bump needs a positive radius and finite amplitude"));
            }
            (0..mesh.len())
                .map(|k| bump_hessian(mesh.point(k), center, *radius, *amplitude))
                .collect()
        }
        Potential::Sampled { values } => {
            if values.len() != mesh.len() {
                return Err(Error::DimensionMismatch {
                    expected: mesh.len(),
                    got: values.len(),
                });
            }
            Spectral::for_mesh(mesh)?.hessian(values)
        }
    };
    Ok(hess.iter().map(|h| spec.s.add(h)).collect())
}

pub fn hessian_cofactor(spec: &PotentialSpec, mesh: &Arc<Mesh>) -> Result<TensorField> {
    let h = potential_hessian(spec, mesh)?;
    let worst = h
        .iter()
        .enumerate()
        .filter(|(_, m)| !psd_check(m, PSD_TOL))
        .map(|(k, m)| (k, m.min_eigenvalue()))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    if let Some((cell, min_eigenvalue)) = worst {
        return Err(Error::NotConvex { cell, min_eigenvalue });
    }
    let values = h.iter().map(SymMat::cofactor).collect();
    TensorField::new(mesh.clone(), values, "hessian_cofactor")
}

/// `g(x·ξ) B + (1 − g(x·ξ)) C` with `g` the indicator of `[a_i, b_i)` modulo `period`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaminateSpec {
    pub b: SymMat,
    pub c: SymMat,
    pub xi: Vec<f64>,
    /// Sorted pairs `[a_0, b_0, a_1, b_1, …]` inside `[0, period]`.
    pub breakpoints: Vec<f64>,
    #[serde(default = "unit")]
    pub period: f64,
    /// Optional declared mean of the profile, checked against the breakpoints.
    #[serde(default)]
    pub theta: Option<f64>,
}

fn unit() -> f64 {
    1.0
}

impl LaminateSpec {
    pub fn two_state(b: SymMat, c: SymMat, xi: Vec<f64>, theta: f64) -> Self {
        LaminateSpec {
            b,
            c,
            xi,
            breakpoints: vec![0.0, theta],
            period: 1.0,
            theta: Some(theta),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.b.dim();
        if self.c.dim() != d || self.xi.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: self.c.dim().max(self.xi.len()),
            });
        }
        for m in [&self.b, &self.c] {
            if !psd_check(m, PSD_TOL) {
                return Err(Error::NotPsd {
                    min_eigenvalue: m.min_eigenvalue(),
                });
            }
        }
        let diff = self.c.sub(&self.b);
        let r = diff.mul_vec(&self.xi);
        let residual = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if residual > 1e-12 * diff.frobenius_norm() {
            return Err(Error::IncompatiblePair { residual });
        }
        if !(self.period > 0.0) || !self.breakpoints.len().is_multiple_of(2) {
            return Err(Error::invalid(
                "laminate profile needs a positive period and an even number of breakpoints",
            ));
        }
        let mut prev = 0.0;
        for &t in &self.breakpoints {
            if !(t >= prev && t <= self.period) {
                return Err(Error::invalid("laminate breakpoints must be sorted inside [0, period]"));
            }
            prev = t;
        }
        if let Some(theta) = self.theta {
            if !(0.0..=1.0).contains(&theta) || (theta - self.mean()).abs() > 1e-12 {
                return Err(Error::invalid(format!(
                    "declared theta {theta} does not match the profile mean {}",
                    self.mean()
                )));
            }
        }
        Ok(())
    }

    /// Exact mean of the profile from interval lengths.
    pub fn mean(&self) -> f64 {
        self.breakpoints.chunks(2).map(|p| p[1] - p[0]).sum::<f64>() / self.period
    }

    pub fn profile(&self, t: f64) -> f64 {
        let t = t.rem_euclid(self.period);
        let inside = self.breakpoints.chunks(2).any(|p| t >= p[0] && t < p[1]);
        if inside {
            1.0
        } else {
            0.0
        }
    }

    pub fn value_at(&self, x: &[f64]) -> SymMat {
        let t: f64 = x.iter().zip(&self.xi).map(|(a, b)| a * b).sum();
        if self.profile(t) == 1.0 {
            self.b.clone()
        } else {
            self.c.clone()
        }
    }

    /// `θ B + (1 − θ) C`.
    pub fn exact_average(&self) -> SymMat {
        let th = self.mean();
        self.b.scale(th).add(&self.c.scale(1.0 - th))
    }

    /// `(θ det(B)^α + (1−θ) det(C)^α, det(⨍A)^α)` with `α = 1/(d−1)`.
    pub fn exact_periodic_sides(&self) -> Result<(f64, f64)> {
        self.validate()?;
        let d = self.b.dim();
        let alpha = 1.0 / (d as f64 - 1.0);
        let th = self.mean();
        let lhs = th * crate::sym::det_power(&self.b, alpha)? + (1.0 - th) * crate::sym::det_power(&self.c, alpha)?;
        let rhs = crate::sym::det_power(&self.exact_average(), alpha)?;
        Ok((lhs, rhs))
    }
}

/// Samples the laminate at cell midpoints.
pub fn laminate(spec: &LaminateSpec, mesh: &Arc<Mesh>) -> Result<TensorField> {
    spec.validate()?;
    if spec.b.dim() != mesh.dim() {
        return Err(Error::DimensionMismatch {
            expected: mesh.dim(),
            got: spec.b.dim(),
        });
    }
    let values = (0..mesh.len()).map(|k| spec.value_at(mesh.point(k))).collect();
    TensorField::new(mesh.clone(), values, "laminate")
}

/// `[[ρ, ρuᵀ], [ρu, ρ u⊗u + p I_n]]`.
pub fn euler_matrix(rho: f64, u: &[f64], p: f64) -> Result<SymMat> {
    if !(rho >= 0.0) {
        return Err(Error::NegativeDensity { cell: 0, value: rho });
    }
    if !(p >= 0.0) {
        return Err(Error::NegativePressure { cell: 0, value: p });
    }
    let n = u.len();
    Ok(SymMat::from_fn(n + 1, |i, j| match (i, j) {
        (0, 0) => rho,
        (0, j) => rho * u[j - 1],
        (i, 0) => rho * u[i - 1],
        (i, j) => rho * u[i - 1] * u[j - 1] + if i == j { p } else { 0.0 },
    }))
}

fn with_cell(e: Error, cell: usize) -> Error {
    match e {
        Error::NegativeDensity { value, .. } => Error::NegativeDensity { cell, value },
        Error::NegativePressure { value, .. } => Error::NegativePressure { cell, value },
        other => other,
    }
}

/// Space-time tensor of a gas on a `(t, y)` mesh.
pub fn euler_tensor(rho: &ScalarField, u: &VectorField, p: &ScalarField) -> Result<TensorField> {
    crate::field::same_mesh(&rho.mesh, &u.mesh)?;
    crate::field::same_mesh(&rho.mesh, &p.mesh)?;
    let d = rho.mesh.dim();
    let values = (0..rho.values.len())
        .map(|k| {
            if u.values[k].len() + 1 != d {
                return Err(Error::DimensionMismatch {
                    expected: d - 1,
                    got: u.values[k].len(),
                });
            }
            euler_matrix(rho.values[k], &u.values[k], p.values[k]).map_err(|e| with_cell(e, k))
        })
        .collect::<Result<Vec<_>>>()?;
    TensorField::new(rho.mesh.clone(), values, "euler")
}

/// Stress-energy tensor of a relativistic perfect fluid; `det = ρ pⁿ`.
pub fn relativistic_tensor(rho: f64, v: &[f64], p: f64, c: f64) -> Result<SymMat> {
    if !(rho >= 0.0) {
        return Err(Error::NegativeDensity { cell: 0, value: rho });
    }
    if !(p >= 0.0) {
        return Err(Error::NegativePressure { cell: 0, value: p });
    }
    let speed = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(c > 0.0) || !(speed < c) {
        return Err(Error::SuperluminalVelocity { speed, c });
    }
    let e = relativistic_entries(rho, v, p, c);
    Ok(SymMat::from_fn(v.len() + 1, |i, j| e[i][j]))
}

/// Arithmetic needed by [`relativistic_entries`]; lets the same formula run
/// in extended precision.
pub trait Arith: Copy + From<f64> + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> {}

impl<T> Arith for T where T: Copy + From<f64> + Add<Output = T> + Sub<Output = T> + Mul<Output = T> + Div<Output = T> {}

/// Entries of the relativistic tensor without validation, rows in the order
/// `(t, x₁, …, xₙ)`.
pub fn relativistic_entries<T: Arith>(rho: T, v: &[T], p: T, c: T) -> Vec<Vec<T>> {
    let c2 = c * c;
    let s2 = v.iter().fold(T::from(0.0), |acc, &x| acc + x * x);
    let h = (rho * c2 + p) / (c2 - s2);
    let n = v.len();
    (0..=n)
        .map(|i| {
            (0..=n)
                .map(|j| match (i, j) {
                    (0, 0) => h - p / c2,
                    (0, j) => h * v[j - 1],
                    (i, 0) => h * v[i - 1],
                    (i, j) if i == j => h * v[i - 1] * v[j - 1] + p,
                    (i, j) => h * v[i - 1] * v[j - 1],
                })
                .collect()
        })
        .collect()
}

/// `A = ρ v⊗v + p I_n` and the source `-(n+1) ρ v` of the reduced self-similar system.
pub fn selfsimilar_tensor(rho: &ScalarField, v: &VectorField, p: &ScalarField) -> Result<(TensorField, VectorField)> {
    crate::field::same_mesh(&rho.mesh, &v.mesh)?;
    crate::field::same_mesh(&rho.mesh, &p.mesh)?;
    let n = rho.mesh.dim();
    let mut values = Vec::with_capacity(rho.values.len());
    let mut source = Vec::with_capacity(rho.values.len());
    for k in 0..rho.values.len() {
        let (r, pk, vk) = (rho.values[k], p.values[k], &v.values[k]);
        if !(r >= 0.0) {
            return Err(Error::NegativeDensity { cell: k, value: r });
        }
        if !(pk >= 0.0) {
            return Err(Error::NegativePressure { cell: k, value: pk });
        }
        if vk.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: vk.len(),
            });
        }
        let mut a = SymMat::outer(vk).scale(r);
        a.axpy(pk, &SymMat::identity(n));
        values.push(a);
        source.push(vk.iter().map(|x| -(n as f64 + 1.0) * r * x).collect());
    }
    Ok((
        TensorField::new(rho.mesh.clone(), values, "selfsimilar")?,
        VectorField::new(rho.mesh.clone(), source)?,
    ))
}

/// JSON constructor documents: `{"tag": ..., ...parameters}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstructorSpec {
    Constant {
        a: SymMat,
    },
    Diagonal {
        g: Vec<TrigPoly>,
    },
    HessianCofactor {
        s: SymMat,
        psi: Potential,
    },
    Laminate {
        b: SymMat,
        c: SymMat,
        xi: Vec<f64>,
        breakpoints: Vec<f64>,
        #[serde(default = "unit")]
        period: f64,
    },
}

impl ConstructorSpec {
    pub fn build(&self, mesh: &Arc<Mesh>) -> Result<TensorField> {
        match self {
            ConstructorSpec::Constant { a } => {
                if a.dim() != mesh.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: mesh.dim(),
                        got: a.dim(),
                    });
                }
                Ok(TensorField::constant(mesh.clone(), a))
            }
            ConstructorSpec::Diagonal { g } => diagonal_dpt(&DiagonalSpec { g: g.clone() }.sample(mesh)?),
            ConstructorSpec::HessianCofactor { s, psi } => hessian_cofactor(
                &PotentialSpec {
                    s: s.clone(),
                    psi: psi.clone(),
                },
                mesh,
            ),
            ConstructorSpec::Laminate {
                b,
                c,
                xi,
                breakpoints,
                period,
            } => laminate(
                &LaminateSpec {
                    b: b.clone(),
                    c: c.clone(),
                    xi: xi.clone(),
                    breakpoints: breakpoints.clone(),
                    period: *period,
                    theta: None,
                },
                mesh,
            ),
        }
    }
}

pub fn parse_constructor(text: &str) -> Result<ConstructorSpec> {
    serde_json::from_str(text).map_err(crate::io::json_error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::divergence_mass;
    use crate::domain::GridSpec;
    use crate::field::field_average;

    fn torus(d: usize, n: usize) -> Arc<Mesh> {
        Mesh::new(DomainSpec::unit_torus(d), GridSpec::uniform(d, n)).unwrap()
    }

    fn wavy() -> PotentialSpec {
        PotentialSpec {
            s: SymMat::identity(2),
            psi: Potential::Trig {
                poly: TrigPoly::default()
                    .with_term(vec![1, 1], 0.005, 0.0)
                    .with_term(vec![1, -1], 0.005, 0.0),
            },
        }
    }

    #[test]
    fn diagonal_examples() {
        let m = torus(2, 8);
        let g = DiagonalSpec {
            g: vec![TrigPoly::constant(2.0), TrigPoly::constant(3.0)],
        }
        .sample(&m)
        .unwrap();
        let f = diagonal_dpt(&g).unwrap();
        assert!(f.values.iter().all(|a| *a == SymMat::diag(&[2.0, 3.0])));

        let m3 = torus(3, 16);
        let spec = DiagonalSpec {
            g: vec![
                TrigPoly::constant(1.0).with_term(vec![0, 1, 0], 0.0, 0.5),
                TrigPoly::constant(1.0),
                TrigPoly::constant(1.0),
            ],
        };
        let f = diagonal_dpt(&spec.sample(&m3).unwrap()).unwrap();
        assert!(f.is_psd(PSD_TOL));
        assert!(divergence_mass(&f).unwrap() <= 1e-8);

        let zero = DiagonalSpec {
            g: vec![TrigPoly::constant(0.0), TrigPoly::constant(3.0)],
        };
        let f = diagonal_dpt(&zero.sample(&m).unwrap()).unwrap();
        assert!(f.values.iter().all(|a| a.det() == 0.0));

        let dependent = DiagonalSpec {
            g: vec![
                TrigPoly::constant(1.0).with_term(vec![1, 0], 0.1, 0.0),
                TrigPoly::constant(1.0),
            ],
        };
        assert!(dependent.sample(&m).is_err());
        let neg = DiagonalSpec {
            g: vec![TrigPoly::constant(-1.0), TrigPoly::constant(1.0)],
        };
        assert!(matches!(
            diagonal_dpt(&neg.sample(&m).unwrap()),
            Err(Error::NegativeEntry { .. })
        ));
    }

    #[test]
    fn hessian_cofactor_examples() {
        let m = torus(2, 64);
        let flat = PotentialSpec {
            s: SymMat::identity(2),
            psi: Potential::Zero,
        };
        let f = hessian_cofactor(&flat, &m).unwrap();
        assert!(f.values.iter().all(|a| *a == SymMat::identity(2)));

        // 0.01 cos 2πx cos 2πy written as two plane waves
        let f = hessian_cofactor(&wavy(), &m).unwrap();
        assert!(f.is_psd(PSD_TOL));
        assert!(divergence_mass(&f).unwrap() <= 1e-8);

        // the sampled path agrees with the closed form
        let samples: Vec<f64> = (0..m.len())
            .map(|k| {
                let x = m.point(k);
                0.01 * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).cos()
            })
            .collect();
        let g = hessian_cofactor(
            &PotentialSpec {
                s: SymMat::identity(2),
                psi: Potential::Sampled { values: samples },
            },
            &m,
        )
        .unwrap();
        for (a, b) in f.values.iter().zip(&g.values) {
            assert!(a.sub(b).frobenius_norm() < 1e-12);
        }

        let ball = Mesh::new(DomainSpec::ball(vec![0.0, 0.0], 1.0), GridSpec::new(vec![6, 12])).unwrap();
        let radial = PotentialSpec {
            s: SymMat::zeros(2),
            psi: Potential::Quadratic { h: SymMat::identity(2) },
        };
        let f = hessian_cofactor(&radial, &ball).unwrap();
        assert!(f.values.iter().all(|a| *a == SymMat::identity(2)));

        let steep = PotentialSpec {
            s: SymMat::identity(2),
            psi: Potential::Trig {
                poly: TrigPoly::default().with_term(vec![1, 0], 1.0, 0.0),
            },
        };
        assert!(matches!(hessian_cofactor(&steep, &m), Err(Error::NotConvex { .. })));
    }

    #[test]
    fn bump_hessian_matches_differences() {
        let (c, r, a) = ([0.1, -0.2], 0.7, 0.3);
        let psi = |x: &[f64]| {
            let q = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / (r * r);
            if q < 1.0 {
                a * (-1.0 / (1.0 - q)).exp()
            } else {
                0.0
            }
        };
        let h = 1e-4;
        for x in [[0.2, 0.1], [-0.3, -0.4], [0.5, -0.1]] {
            let hess = bump_hessian(&x, &c, r, a);
            for i in 0..2 {
                for j in 0..2 {
                    let mut e = [[0.0; 2]; 2];
                    e[0][i] += h;
                    e[1][j] += h;
                    let sh = |si: f64, sj: f64| psi(&[x[0] + si * e[0][0] + sj * e[1][0], x[1] + si * e[0][1] + sj * e[1][1]]);
                    let fd = (sh(1.0, 1.0) - sh(1.0, -1.0) - sh(-1.0, 1.0) + sh(-1.0, -1.0)) / (4.0 * h * h);
                    assert!((fd - hess.get(i, j)).abs() < 1e-5, "{fd} {}", hess.get(i, j));
                }
            }
        }
    }

    #[test]
    fn laminate_examples() {
        let m = torus(3, 8);
        let spec = LaminateSpec::two_state(SymMat::identity(3), SymMat::diag(&[2.0, 5.0, 1.0]), vec![0.0, 0.0, 1.0], 0.5);
        let f = laminate(&spec, &m).unwrap();
        let avg = field_average(&f);
        assert!(avg.sub(&SymMat::diag(&[1.5, 3.0, 1.0])).frobenius_norm() < 1e-14);
        assert!(spec.exact_average().sub(&avg).frobenius_norm() < 1e-14);

        let same = LaminateSpec::two_state(SymMat::identity(3), SymMat::identity(3), vec![0.0, 0.0, 1.0], 0.5);
        assert!(laminate(&same, &m).unwrap().values.iter().all(|a| *a == SymMat::identity(3)));

        let bad = LaminateSpec::two_state(SymMat::identity(3), SymMat::diag(&[2.0, 5.0, 1.0]), vec![1.0, 0.0, 0.0], 0.5);
        assert!(matches!(laminate(&bad, &m), Err(Error::IncompatiblePair { .. })));

        // rank-one difference in d = 2 keeps det affine: lhs = rhs
        let rank1 = LaminateSpec::two_state(SymMat::identity(2), SymMat::diag(&[2.0, 1.0]), vec![0.0, 1.0], 0.5);
        let (l, r) = rank1.exact_periodic_sides().unwrap();
        assert!((l - r).abs() < 1e-15);
        assert!(divergence_mass(&laminate(&rank1, &torus(2, 16)).unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn euler_and_relativistic_examples() {
        let a = euler_matrix(1.0, &[0.0], 2.0).unwrap();
        assert_eq!(a, SymMat::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap());
        let a = euler_matrix(2.0, &[3.0], 5.0).unwrap();
        assert_eq!(a, SymMat::from_rows(&[vec![2.0, 6.0], vec![6.0, 23.0]]).unwrap());
        assert!((a.det() - 10.0).abs() < 1e-12);
        assert_eq!(euler_matrix(0.0, &[1.0, 2.0], 3.0).unwrap().det(), 0.0);
        assert!(matches!(euler_matrix(-1.0, &[0.0], 1.0), Err(Error::NegativeDensity { .. })));

        assert_eq!(relativistic_tensor(1.0, &[0.0], 1.0, 1.0).unwrap(), SymMat::identity(2));
        let r = relativistic_tensor(1.0, &[0.5], 2.0, 1.0).unwrap();
        assert_eq!(r, SymMat::from_rows(&[vec![2.0, 2.0], vec![2.0, 3.0]]).unwrap());
        assert!(matches!(
            relativistic_tensor(1.0, &[1.0], 1.0, 1.0),
            Err(Error::SuperluminalVelocity { .. })
        ));
    }

    #[test]
    fn selfsimilar_examples() {
        let m = Mesh::new(DomainSpec::ball(vec![0.0, 0.0], 1.0), GridSpec::new(vec![8, 16])).unwrap();
        let zero = ScalarField::constant(m.clone(), 0.0);
        let one = ScalarField::constant(m.clone(), 1.0);
        let v = VectorField::from_fn(m.clone(), |x| vec![x[0], x[1]]);
        let (a, s) = selfsimilar_tensor(&zero, &v, &one).unwrap();
        assert!(a.values.iter().all(|a| *a == SymMat::identity(2)));
        assert!(s.values.iter().all(|s| s.iter().all(|x| *x == 0.0)));

        let v = VectorField::from_fn(m.clone(), |_| vec![1.0, 0.0]);
        let two = ScalarField::constant(m, 2.0);
        let (a, _) = selfsimilar_tensor(&one, &v, &two).unwrap();
        assert_eq!(a.values[0], SymMat::diag(&[3.0, 2.0]));
        assert!((a.values[0].det() - 6.0).abs() < 1e-14);
    }

    #[test]
    fn constructor_json() {
        let spec =
            parse_constructor(r#"{"tag":"laminate","b":[[1,0],[0,1]],"c":[[2,0],[0,1]],"xi":[0,1],"breakpoints":[0,0.5]}"#)
                .unwrap();
        let f = spec.build(&torus(2, 8)).unwrap();
        assert_eq!(f.tag, "laminate");
        assert!(parse_constructor(r#"{"tag":"laminate","b":[[1,2],[0,1]]}"#).is_err());
        assert!(parse_constructor(r#"{"tag":"nope"}"#).is_err());
        let round = serde_json::to_string(&spec).unwrap();
        assert_eq!(parse_constructor(&round).unwrap(), spec);
    }
}

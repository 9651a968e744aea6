//! Row-wise divergence, its total mass, and boundary normal traces.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::domain::{lattice_matrix, pairwise_sum, polygon_vertices, DomainSpec, Mesh};
use crate::error::{Error, Result};
use crate::field::{weighted_sum, TensorField, VectorField};
use crate::quadrature::{gauss_legendre, gauss_legendre_on, Interpolant};
use crate::spectral::Spectral;
use crate::sym::SymMat;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DerivativeMethod {
    /// Fourier on tori, Legendre/Fourier on disks, 4th-order differences on boxes.
    #[default]
    Spectral,
    /// 4th-order centred differences (periodic wrap on tori).
    FiniteDifference4,
}

pub fn discrete_divergence(field: &TensorField) -> Result<VectorField> {
    discrete_divergence_with(field, DerivativeMethod::Spectral)
}

pub fn discrete_divergence_with(field: &TensorField, method: DerivativeMethod) -> Result<VectorField> {
    let d = field.dim();
    let mesh = &field.mesh;
    // grads[i][j] = ∂_j a_ij, accumulated into rows
    let mut div = vec![vec![0.0; d]; field.len()];
    let mut accumulate = |i: usize, dj: &[f64]| {
        for (k, v) in dj.iter().enumerate() {
            div[k][i] += v;
        }
    };
    match (&mesh.domain, method) {
        (DomainSpec::Torus { .. }, DerivativeMethod::Spectral) => {
            let sp = Spectral::for_mesh(mesh)?;
            for i in 0..d {
                for j in 0..d {
                    accumulate(i, &sp.derivative(&field.component(i, j), j));
                }
            }
        }
        (DomainSpec::Torus { basis }, DerivativeMethod::FiniteDifference4) => {
            let minv = lattice_matrix(basis)
                .try_inverse()
                .ok_or(Error::SingularLattice { det: 0.0 })?;
            for i in 0..d {
                for j in 0..d {
                    let comp = field.component(i, j);
                    for a in 0..d {
                        let c = minv[(j, a)];
                        if c == 0.0 {
                            continue;
                        }
                        let h = 1.0 / mesh.grid.shape[a] as f64;
                        let ds = fd4_axis(&comp, &mesh.grid.shape, a, h, true);
                        accumulate(i, &ds.iter().map(|v| c * v).collect::<Vec<_>>());
                    }
                }
            }
        }
        (DomainSpec::Box { lo, hi }, _) => {
            for i in 0..d {
                for j in 0..d {
                    let h = (hi[j] - lo[j]) / mesh.grid.shape[j] as f64;
                    accumulate(i, &fd4_axis(&field.component(i, j), &mesh.grid.shape, j, h, false));
                }
            }
        }
        (DomainSpec::Ball { radius, .. }, _) if d == 2 => {
            let polar = PolarDerivative::new(mesh, *radius);
            for i in 0..d {
                let (dx0, _) = polar.cartesian(&field.component(i, 0));
                let (_, dy1) = polar.cartesian(&field.component(i, 1));
                accumulate(i, &dx0);
                accumulate(i, &dy1);
            }
        }
        (other, _) => {
            return Err(Error::UnsupportedDomain {
                op: "discrete_divergence",
                domain: format!("{} (d = {d})", other.name()),
            })
        }
    }
    VectorField::new(mesh.clone(), div)
}

/// `Σ |Div A| w`, the discrete total mass of the divergence measure.
pub fn divergence_mass(field: &TensorField) -> Result<f64> {
    Ok(discrete_divergence(field)?.l1_norm())
}

pub fn divergence_mass_with(field: &TensorField, method: DerivativeMethod) -> Result<f64> {
    Ok(discrete_divergence_with(field, method)?.l1_norm())
}

/// 4th-order first derivative along one axis of a row-major array.
fn fd4_axis(v: &[f64], shape: &[usize], axis: usize, h: f64, periodic: bool) -> Vec<f64> {
    let n = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let mut out = vec![0.0; v.len()];
    for start in 0..v.len() {
        if !(start / stride).is_multiple_of(n) {
            continue;
        }
        let at = |i: usize| v[start + i * stride];
        for i in 0..n {
            let val = if periodic {
                let p = |o: isize| at(((i as isize + o).rem_euclid(n as isize)) as usize);
                (-p(2) + 8.0 * p(1) - 8.0 * p(-1) + p(-2)) / (12.0 * h)
            } else if i == 0 {
                (-25.0 * at(0) + 48.0 * at(1) - 36.0 * at(2) + 16.0 * at(3) - 3.0 * at(4)) / (12.0 * h)
            } else if i == 1 {
                (-3.0 * at(0) - 10.0 * at(1) + 18.0 * at(2) - 6.0 * at(3) + at(4)) / (12.0 * h)
            } else if i == n - 1 {
                (25.0 * at(n - 1) - 48.0 * at(n - 2) + 36.0 * at(n - 3) - 16.0 * at(n - 4) + 3.0 * at(n - 5)) / (12.0 * h)
            } else if i == n - 2 {
                (3.0 * at(n - 1) + 10.0 * at(n - 2) - 18.0 * at(n - 3) + 6.0 * at(n - 4) - at(n - 5)) / (12.0 * h)
            } else {
                (-at(i + 2) + 8.0 * at(i + 1) - 8.0 * at(i - 1) + at(i - 2)) / (12.0 * h)
            };
            out[start + i * stride] = val;
        }
    }
    out
}

/// Cartesian derivatives on the disk grid: Legendre in r, Fourier in θ.
struct PolarDerivative {
    nr: usize,
    nt: usize,
    r: Vec<f64>,
    dr: Vec<Vec<f64>>,
}

impl PolarDerivative {
    fn new(mesh: &Mesh, radius: f64) -> Self {
        let (nr, nt) = (mesh.grid.shape[0], mesh.grid.shape[1]);
        let (r, _) = gauss_legendre_on(nr, 0.0, radius);
        let dr = Interpolant::new(&r).diff_matrix();
        PolarDerivative { nr, nt, r, dr }
    }

    fn cartesian(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (nr, nt) = (self.nr, self.nt);
        let mut fr = vec![0.0; f.len()];
        for j in 0..nt {
            for i in 0..nr {
                fr[i * nt + j] = (0..nr).map(|m| self.dr[i][m] * f[m * nt + j]).sum();
            }
        }
        let mut ft = vec![0.0; f.len()];
        let mut planner = FftPlanner::new();
        let (fwd, inv) = (planner.plan_fft_forward(nt), planner.plan_fft_inverse(nt));
        for i in 0..nr {
            let mut line: Vec<Complex64> = (0..nt).map(|j| Complex64::new(f[i * nt + j], 0.0)).collect();
            fwd.process(&mut line);
            for (k, c) in line.iter_mut().enumerate() {
                let kk = if nt % 2 == 0 && k == nt / 2 {
                    0.0
                } else if k <= nt / 2 {
                    k as f64
                } else {
                    k as f64 - nt as f64
                };
                *c *= Complex64::new(0.0, kk / nt as f64);
            }
            inv.process(&mut line);
            for j in 0..nt {
                ft[i * nt + j] = line[j].re;
            }
        }
        let mut dx = vec![0.0; f.len()];
        let mut dy = vec![0.0; f.len()];
        for i in 0..nr {
            for j in 0..nt {
                let th = 2.0 * PI * j as f64 / nt as f64;
                let k = i * nt + j;
                let (c, s) = (th.cos(), th.sin());
                dx[k] = c * fr[k] - s / self.r[i] * ft[k];
                dy[k] = s * fr[k] + c / self.r[i] * ft[k];
            }
        }
        (dx, dy)
    }
}

/// A boundary quadrature node: extrapolated value, outward normal and weight.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySample {
    pub value: SymMat,
    pub normal: Vec<f64>,
    pub weight: f64,
}

/// `∫_{∂Ω} |A n̄| ds` for bounded domains.
pub fn boundary_trace_norm(field: &TensorField) -> Result<f64> {
    let terms: Vec<f64> = boundary_samples(field)?
        .iter()
        .map(|b| b.weight * b.value.mul_vec(&b.normal).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Boundary quadrature of the field's normal trace.
///
/// Boxes extrapolate linearly from the two cells next to each face; balls
/// evaluate the radial Legendre interpolant at `r = R`; polytopes use an
/// 8-point Gauss rule per edge with nearest-cell values.
pub fn boundary_samples(field: &TensorField) -> Result<Vec<BoundarySample>> {
    let d = field.dim();
    let mesh = &field.mesh;
    let mut out = Vec::new();
    match &mesh.domain {
        DomainSpec::Torus { .. } => {
            return Err(Error::UnsupportedDomain {
                op: "boundary trace",
                domain: "torus".into(),
            })
        }
        DomainSpec::Box { lo, hi } => {
            let shape = &mesh.grid.shape;
            let h: Vec<f64> = (0..d).map(|a| (hi[a] - lo[a]) / shape[a] as f64).collect();
            let strides = mesh.grid.strides();
            for a in 0..d {
                let area: f64 = (0..d).filter(|&b| b != a).map(|b| h[b]).product();
                for side in [0usize, 1] {
                    let mut normal = vec![0.0; d];
                    normal[a] = if side == 0 { -1.0 } else { 1.0 };
                    let edge = if side == 0 { 0 } else { shape[a] - 1 };
                    for k in 0..field.len() {
                        if (k / strides[a]) % shape[a] != edge {
                            continue;
                        }
                        let inner = if side == 0 { k + strides[a] } else { k - strides[a] };
                        out.push(BoundarySample {
                            value: field.values[k].scale(1.5).sub(&field.values[inner].scale(0.5)),
                            normal: normal.clone(),
                            weight: area,
                        });
                    }
                }
            }
        }
        DomainSpec::Ball { radius, .. } => {
            let nr = mesh.grid.shape[0];
            let (r, _) = gauss_legendre_on(nr, 0.0, *radius);
            let ext = Interpolant::new(&r).eval_weights(*radius);
            let outer = |first: usize, stride: usize| -> SymMat {
                let mut a = SymMat::zeros(d);
                for (m, c) in ext.iter().enumerate() {
                    a.axpy(*c, &field.values[first + m * stride]);
                }
                a
            };
            match d {
                2 => {
                    let nt = mesh.grid.shape[1];
                    for j in 0..nt {
                        let th = 2.0 * PI * j as f64 / nt as f64;
                        out.push(BoundarySample {
                            value: outer(j, nt),
                            normal: vec![th.cos(), th.sin()],
                            weight: radius * 2.0 * PI / nt as f64,
                        });
                    }
                }
                3 => {
                    let (nm, nt) = (mesh.grid.shape[1], mesh.grid.shape[2]);
                    let (mu, wmu) = gauss_legendre_on(nm, -1.0, 1.0);
                    for i in 0..nm {
                        let s = (1.0 - mu[i] * mu[i]).sqrt();
                        for j in 0..nt {
                            let th = 2.0 * PI * j as f64 / nt as f64;
                            out.push(BoundarySample {
                                value: outer(i * nt + j, nm * nt),
                                normal: vec![s * th.cos(), s * th.sin(), mu[i]],
                                weight: radius * radius * wmu[i] * 2.0 * PI / nt as f64,
                            });
                        }
                    }
                }
                _ => {
                    return Err(Error::UnsupportedDomain {
                        op: "boundary trace",
                        domain: format!("ball (d = {d})"),
                    })
                }
            }
        }
        DomainSpec::ConvexPolytope { halfspaces } => {
            let verts = polygon_vertices(halfspaces)?;
            let (t, w) = gauss_legendre(8);
            let inside: Vec<usize> = (0..mesh.len()).filter(|&k| mesh.weights()[k] > 0.0).collect();
            if inside.is_empty() {
                return Err(Error::TraceUnavailable("no grid cell inside the polytope".into()));
            }
            for e in 0..verts.len() {
                let (p, q) = (verts[e], verts[(e + 1) % verts.len()]);
                let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
                let normal = vec![(q[1] - p[1]) / len, -(q[0] - p[0]) / len];
                for (ti, wi) in t.iter().zip(&w) {
                    let s = 0.5 * (1.0 + ti);
                    let x = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
                    let nearest = inside
                        .iter()
                        .copied()
                        .min_by(|&a, &b| dist2(mesh.point(a), &x).total_cmp(&dist2(mesh.point(b), &x)))
                        .expect("nonempty");
                    out.push(BoundarySample {
                        value: field.values[nearest].clone(),
                        normal: normal.clone(),
                        weight: 0.5 * wi * len,
                    });
                }
            }
        }
    }
    Ok(out)
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// `∫_Ω f` helper for derived quantities on a field's mesh.
pub fn integrate(mesh: &Mesh, values: &[f64]) -> f64 {
    weighted_sum(mesh, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{GridSpec, Halfspace};
    use std::sync::Arc;

    fn mesh(dom: DomainSpec, shape: Vec<usize>) -> Arc<Mesh> {
        Mesh::new(dom, GridSpec::new(shape)).unwrap()
    }

    #[test]
    fn constant_field_has_zero_divergence() {
        for m in [
            mesh(DomainSpec::unit_torus(2), vec![16, 16]),
            mesh(DomainSpec::unit_box(3), vec![8, 8, 8]),
            mesh(DomainSpec::ball(vec![0.0, 0.0], 1.0), vec![10, 16]),
        ] {
            let d = m.dim();
            let a = SymMat::from_fn(d, |i, j| if i == j { 2.0 + i as f64 } else { 0.5 });
            let f = TensorField::constant(m, &a);
            assert!(divergence_mass(&f).unwrap() < 1e-12);
        }
    }

    #[test]
    fn divergence_examples() {
        let m = mesh(DomainSpec::unit_torus(2), vec![64, 64]);
        let tp = 2.0 * PI;
        let f = TensorField::from_fn(m.clone(), "diag", |x| SymMat::diag(&[(tp * x[1]).sin(), (tp * x[0]).sin()]));
        assert!(divergence_mass(&f).unwrap() < 1e-12);
        let g = TensorField::from_fn(m.clone(), "row", |x| SymMat::diag(&[(tp * x[0]).sin(), 0.0]));
        let div = discrete_divergence(&g).unwrap();
        for k in 0..m.len() {
            let x = m.point(k)[0];
            assert!((div.values[k][0] - tp * (tp * x).cos()).abs() < 1e-10);
            assert!(div.values[k][1].abs() < 1e-12);
        }
    }

    #[test]
    fn fd4_converges_at_fourth_order() {
        let tp = 2.0 * PI;
        let mut errs = vec![];
        for n in [16usize, 32, 64] {
            let m = mesh(DomainSpec::unit_box(2), vec![n, n]);
            let g = TensorField::from_fn(m.clone(), "row", |x| SymMat::diag(&[(tp * x[0]).sin(), 0.0]));
            let div = discrete_divergence(&g).unwrap();
            let err = (0..m.len())
                .map(|k| (div.values[k][0] - tp * (tp * m.point(k)[0]).cos()).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        // one-sided edge stencils carry larger constants; third order would give 8
        assert!(errs[0] / errs[1] > 10.0 && errs[1] / errs[2] > 14.0, "{errs:?}");
    }

    #[test]
    fn polar_divergence_of_quadratic() {
        // A = ξ⊗ξ + I on the unit disk: Div A = 3ξ
        let m = mesh(DomainSpec::ball(vec![0.0, 0.0], 1.0), vec![12, 32]);
        let f = TensorField::from_fn(m.clone(), "q", |x| SymMat::outer(x).add(&SymMat::identity(2)));
        let div = discrete_divergence(&f).unwrap();
        for k in 0..m.len() {
            let x = m.point(k);
            assert!((div.values[k][0] - 3.0 * x[0]).abs() < 1e-10);
            assert!((div.values[k][1] - 3.0 * x[1]).abs() < 1e-10);
        }
        let mass = divergence_mass(&f).unwrap();
        assert!((mass - 2.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn trace_examples() {
        let disk = mesh(DomainSpec::ball(vec![0.0, 0.0], 1.0), vec![8, 32]);
        let one = TensorField::constant(disk.clone(), &SymMat::identity(2));
        assert!((boundary_trace_norm(&one).unwrap() - 2.0 * PI).abs() < 1e-12);
        let two = TensorField::constant(disk, &SymMat::scalar(2, 2.0));
        assert!((boundary_trace_norm(&two).unwrap() - 4.0 * PI).abs() < 1e-12);
        let sq = mesh(DomainSpec::unit_box(2), vec![8, 8]);
        let one = TensorField::constant(sq, &SymMat::identity(2));
        assert!((boundary_trace_norm(&one).unwrap() - 4.0).abs() < 1e-12);
        let ball3 = mesh(DomainSpec::ball(vec![0.0; 3], 1.0), vec![6, 8, 16]);
        let one = TensorField::constant(ball3, &SymMat::identity(3));
        assert!((boundary_trace_norm(&one).unwrap() - 4.0 * PI).abs() < 1e-12);
        let tri = mesh(
            DomainSpec::ConvexPolytope {
                halfspaces: vec![
                    Halfspace {
                        normal: vec![-1.0, 0.0],
                        offset: 0.0,
                    },
                    Halfspace {
                        normal: vec![0.0, -1.0],
                        offset: 0.0,
                    },
                    Halfspace {
                        normal: vec![1.0, 1.0],
                        offset: 1.0,
                    },
                ],
            },
            vec![16, 16],
        );
        let one = TensorField::constant(tri, &SymMat::identity(2));
        assert!((boundary_trace_norm(&one).unwrap() - (2.0 + 2f64.sqrt())).abs() < 1e-12);
        let t = TensorField::constant(mesh(DomainSpec::unit_torus(2), vec![8, 8]), &SymMat::identity(2));
        assert!(matches!(boundary_trace_norm(&t), Err(Error::UnsupportedDomain { .. })));
    }

    #[test]
    fn linear_field_trace_on_box_is_exact() {
        // A = diag(1 + x, 1 + y) on the unit square; linear extrapolation is exact
        let m = mesh(DomainSpec::unit_box(2), vec![10, 10]);
        let f = TensorField::from_fn(m, "lin", |x| SymMat::diag(&[1.0 + x[0], 1.0 + x[1]]));
        // faces: x=0: ∫|A(-e1)| = ∫ 1 dy = 1 ; x=1: 2 ; same for y
        assert!((boundary_trace_norm(&f).unwrap() - 6.0).abs() < 1e-12);
    }
}

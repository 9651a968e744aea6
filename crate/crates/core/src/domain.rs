//! Domains, grids and the sample layout shared by all fields.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_on;

/// Half-space `normal · x <= offset`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    /// `R^d / Γ`, with the rows of `basis` spanning the lattice Γ.
    Torus {
        basis: Vec<Vec<f64>>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// Intersection of half-spaces (d = 2).
    ConvexPolytope {
        halfspaces: Vec<Halfspace>,
    },
}

impl DomainSpec {
    pub fn unit_torus(d: usize) -> Self {
        DomainSpec::Torus {
            basis: (0..d)
                .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
        }
    }

    pub fn unit_box(d: usize) -> Self {
        DomainSpec::Box {
            lo: vec![0.0; d],
            hi: vec![1.0; d],
        }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        DomainSpec::Ball { center, radius }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DomainSpec::Torus { .. } => "torus",
            DomainSpec::Ball { .. } => "ball",
            DomainSpec::Box { .. } => "box",
            DomainSpec::ConvexPolytope { .. } => "convex_polytope",
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, DomainSpec::Torus { .. })
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Torus { basis } => basis.len(),
            DomainSpec::Ball { center, .. } => center.len(),
            DomainSpec::Box { lo, .. } => lo.len(),
            DomainSpec::ConvexPolytope { halfspaces } => halfspaces.first().map_or(0, |h| h.normal.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d < 1 {
            return Err(Error::InvalidDomain("dimension must be at least 1".into()));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            DomainSpec::Torus { basis } => {
                if basis.iter().any(|r| r.len() != d || !finite(r)) {
                    return Err(Error::InvalidDomain("lattice basis must be square and finite".into()));
                }
                let det = lattice_matrix(basis).determinant();
                if !(det.abs() > 1e-12) {
                    return Err(Error::SingularLattice { det });
                }
            }
            DomainSpec::Ball { center, radius } => {
                if !finite(center) || !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidDomain("ball needs a finite center and radius > 0".into()));
                }
            }
            DomainSpec::Box { lo, hi } => {
                if hi.len() != d || !finite(lo) || !finite(hi) || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return Err(Error::InvalidDomain("box needs lo < hi componentwise".into()));
                }
            }
            DomainSpec::ConvexPolytope { halfspaces } => {
                if d != 2 {
                    return Err(Error::InvalidDomain("polytopes are supported in d = 2 only".into()));
                }
                if halfspaces
                    .iter()
                    .any(|h| h.normal.len() != 2 || !finite(&h.normal) || !h.offset.is_finite())
                {
                    return Err(Error::InvalidDomain("half-space normals must be finite 2-vectors".into()));
                }
                polygon_vertices(halfspaces)?;
            }
        }
        Ok(())
    }

    /// Lebesgue measure of the domain (fundamental cell for a torus).
    pub fn volume(&self) -> f64 {
        match self {
            DomainSpec::Torus { basis } => lattice_matrix(basis).determinant().abs(),
            DomainSpec::Ball { center, radius } => {
                let d = center.len();
                sphere_area(d) * radius.powi(d as i32) / d as f64
            }
            DomainSpec::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| b - a).product(),
            DomainSpec::ConvexPolytope { halfspaces } => polygon_vertices(halfspaces).map(|v| polygon_area(&v)).unwrap_or(0.0),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            DomainSpec::Torus { .. } => true,
            DomainSpec::Ball { center, radius } => {
                x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum::<f64>() < radius * radius
            }
            DomainSpec::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| v > a && v < b),
            DomainSpec::ConvexPolytope { halfspaces } => halfspaces
                .iter()
                .all(|h| h.normal.iter().zip(x).map(|(n, v)| n * v).sum::<f64>() < h.offset),
        }
    }
}

/// The matrix whose rows are the lattice basis vectors.
pub fn lattice_matrix(basis: &[Vec<f64>]) -> DMatrix<f64> {
    let d = basis.len();
    DMatrix::from_fn(d, d, |i, j| basis[i][j])
}

/// `|S^{d-1}| = 2 π^{d/2} / Γ(d/2)`.
pub fn sphere_area(d: usize) -> f64 {
    assert!(d >= 1);
    // Γ(d/2) by the half-integer recursion
    let half_gamma = |d: usize| -> f64 {
        let mut g = if d.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
        let mut x = if d.is_multiple_of(2) { 1.0 } else { 0.5 };
        while x + 1e-9 < d as f64 / 2.0 {
            g *= x;
            x += 1.0;
        }
        g
    };
    2.0 * PI.powf(d as f64 / 2.0) / half_gamma(d)
}

/// Vertices of a bounded 2-D polygon given by half-spaces, counter-clockwise.
pub fn polygon_vertices(halfspaces: &[Halfspace]) -> Result<Vec<[f64; 2]>> {
    let bad = |m: &str| Error::InvalidDomain(format!("polytope: {m}"));
    if halfspaces.len() < 3 {
        return Err(bad("at least three half-spaces are required"));
    }
    // bounded iff the normals leave no angular gap of π or more
    let mut angles: Vec<f64> = Vec::new();
    for h in halfspaces {
        let n = (h.normal[0].powi(2) + h.normal[1].powi(2)).sqrt();
        if !(n > 0.0) {
            return Err(bad("zero normal"));
        }
        angles.push(h.normal[1].atan2(h.normal[0]));
    }
    angles.sort_by(|a, b| a.total_cmp(b));
    let mut max_gap = angles[0] + 2.0 * PI - angles[angles.len() - 1];
    for w in angles.windows(2) {
        max_gap = max_gap.max(w[1] - w[0]);
    }
    if max_gap >= PI - 1e-12 {
        return Err(bad("unbounded"));
    }
    let mut verts: Vec<[f64; 2]> = Vec::new();
    for i in 0..halfspaces.len() {
        for j in i + 1..halfspaces.len() {
            let (a, b) = (&halfspaces[i], &halfspaces[j]);
            let det = a.normal[0] * b.normal[1] - a.normal[1] * b.normal[0];
            if det.abs() < 1e-14 {
                continue;
            }
            let x = (a.offset * b.normal[1] - a.normal[1] * b.offset) / det;
            let y = (a.normal[0] * b.offset - a.offset * b.normal[0]) / det;
            let scale = 1.0 + x.abs() + y.abs();
            let feasible = halfspaces
                .iter()
                .all(|h| h.normal[0] * x + h.normal[1] * y <= h.offset + 1e-10 * scale);
            if feasible && !verts.iter().any(|v| (v[0] - x).abs() + (v[1] - y).abs() < 1e-10 * scale) {
                verts.push([x, y]);
            }
        }
    }
    if verts.len() < 3 {
        return Err(bad("empty interior"));
    }
    let cx = verts.iter().map(|v| v[0]).sum::<f64>() / verts.len() as f64;
    let cy = verts.iter().map(|v| v[1]).sum::<f64>() / verts.len() as f64;
    verts.sort_by(|a, b| (a[1] - cy).atan2(a[0] - cx).total_cmp(&(b[1] - cy).atan2(b[0] - cx)));
    if polygon_area(&verts) <= 1e-14 {
        return Err(bad("empty interior"));
    }
    Ok(verts)
}

pub fn polygon_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub shape: Vec<usize>,
}

impl GridSpec {
    pub fn new(shape: Vec<usize>) -> Self {
        GridSpec { shape }
    }

    pub fn uniform(d: usize, n: usize) -> Self {
        GridSpec { shape: vec![n; d] }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.shape.len() != d {
            return Err(Error::InvalidGrid(format!(
                "grid has {} axes, domain has dimension {d}",
                self.shape.len()
            )));
        }
        if self.shape.iter().any(|&n| n < 4) {
            return Err(Error::InvalidGrid("every axis needs at least 4 cells".into()));
        }
        if self
            .shape
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .is_none_or(|n| n > 1 << 26)
        {
            return Err(Error::InvalidGrid("grid too large".into()));
        }
        Ok(())
    }

    /// Row-major multi-index of a flat index (last axis fastest).
    pub fn unravel(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        for a in (0..self.shape.len()).rev() {
            idx[a] = k % self.shape[a];
            k /= self.shape[a];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.shape.len()];
        for a in (0..self.shape.len().saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.shape[a + 1];
        }
        s
    }
}

/// Sample points and quadrature weights of a domain/grid pair.
///
/// Torus and box grids are cell-centred. Balls use Gauss–Legendre radial
/// nodes and uniform angles (d = 2) or Gauss–Legendre in cos φ (d = 3).
/// Polytopes use the bounding-box grid with zero weight outside.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub domain: DomainSpec,
    pub grid: GridSpec,
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl Mesh {
    pub fn new(domain: DomainSpec, grid: GridSpec) -> Result<Arc<Mesh>> {
        domain.validate()?;
        let d = domain.dim();
        grid.validate(d)?;
        let n = grid.len();
        let mut points = Vec::with_capacity(n * d);
        let mut weights = Vec::with_capacity(n);
        match &domain {
            DomainSpec::Torus { basis } => {
                let w = lattice_matrix(basis).determinant().abs() / n as f64;
                for k in 0..n {
                    let idx = grid.unravel(k);
                    for j in 0..d {
                        let x: f64 = (0..d)
                            .map(|a| (idx[a] as f64 + 0.5) / grid.shape[a] as f64 * basis[a][j])
                            .sum();
                        points.push(x);
                    }
                    weights.push(w);
                }
            }
            DomainSpec::Box { lo, hi } => {
                let h: Vec<f64> = (0..d).map(|a| (hi[a] - lo[a]) / grid.shape[a] as f64).collect();
                let w: f64 = h.iter().product();
                for k in 0..n {
                    let idx = grid.unravel(k);
                    for a in 0..d {
                        points.push(lo[a] + (idx[a] as f64 + 0.5) * h[a]);
                    }
                    weights.push(w);
                }
            }
            DomainSpec::Ball { center, radius } => {
                let (r, wr) = gauss_legendre_on(grid.shape[0], 0.0, *radius);
                match d {
                    2 => {
                        let nt = grid.shape[1];
                        for k in 0..n {
                            let idx = grid.unravel(k);
                            let th = 2.0 * PI * idx[1] as f64 / nt as f64;
                            let rr = r[idx[0]];
                            points.push(center[0] + rr * th.cos());
                            points.push(center[1] + rr * th.sin());
                            weights.push(wr[idx[0]] * rr * 2.0 * PI / nt as f64);
                        }
                    }
                    3 => {
                        let (mu, wmu) = gauss_legendre_on(grid.shape[1], -1.0, 1.0);
                        let nt = grid.shape[2];
                        for k in 0..n {
                            let idx = grid.unravel(k);
                            let th = 2.0 * PI * idx[2] as f64 / nt as f64;
                            let (rr, m) = (r[idx[0]], mu[idx[1]]);
                            let s = (1.0 - m * m).sqrt();
                            points.push(center[0] + rr * s * th.cos());
                            points.push(center[1] + rr * s * th.sin());
                            points.push(center[2] + rr * m);
                            weights.push(wr[idx[0]] * rr * rr * wmu[idx[1]] * 2.0 * PI / nt as f64);
                        }
                    }
                    _ => {
                        return Err(Error::InvalidGrid("ball grids are supported for d = 2, 3".into()));
                    }
                }
            }
            DomainSpec::ConvexPolytope { halfspaces } => {
                let verts = polygon_vertices(halfspaces)?;
                let (lo, hi) = bounding_box(&verts);
                let h = [(hi[0] - lo[0]) / grid.shape[0] as f64, (hi[1] - lo[1]) / grid.shape[1] as f64];
                for k in 0..n {
                    let idx = grid.unravel(k);
                    let x = [lo[0] + (idx[0] as f64 + 0.5) * h[0], lo[1] + (idx[1] as f64 + 0.5) * h[1]];
                    points.extend_from_slice(&x);
                    weights.push(if domain.contains(&x) { h[0] * h[1] } else { 0.0 });
                }
            }
        }
        Ok(Arc::new(Mesh {
            domain,
            grid,
            dim: d,
            points,
            weights,
        }))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    /// Representative mesh width.
    pub fn spacing(&self) -> f64 {
        match &self.domain {
            DomainSpec::Torus { basis } => (0..self.dim)
                .map(|a| basis[a].iter().map(|v| v * v).sum::<f64>().sqrt() / self.grid.shape[a] as f64)
                .fold(0.0, f64::max),
            DomainSpec::Box { lo, hi } => (0..self.dim)
                .map(|a| (hi[a] - lo[a]) / self.grid.shape[a] as f64)
                .fold(0.0, f64::max),
            DomainSpec::Ball { radius, .. } => {
                let nr = self.grid.shape[0] as f64;
                let nt = *self.grid.shape.last().unwrap() as f64;
                (radius / nr).max(2.0 * PI * radius / nt)
            }
            DomainSpec::ConvexPolytope { halfspaces } => {
                let verts = polygon_vertices(halfspaces).unwrap_or_default();
                let (lo, hi) = bounding_box(&verts);
                ((hi[0] - lo[0]) / self.grid.shape[0] as f64).max((hi[1] - lo[1]) / self.grid.shape[1] as f64)
            }
        }
    }
}

pub(crate) fn bounding_box(verts: &[[f64; 2]]) -> ([f64; 2], [f64; 2]) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for v in verts {
        for a in 0..2 {
            lo[a] = lo[a].min(v[a]);
            hi[a] = hi[a].max(v[a]);
        }
    }
    (lo, hi)
}

/// Pairwise summation with a fixed tree, independent of thread count.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

//! Periodic homogenization: cell problems, effective tensors and their bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::divergence_mass;
use crate::domain::{GridSpec, Mesh};
use crate::error::{Error, Result};
use crate::field::{field_average, weighted_mean, ScalarField, TensorField};
use crate::report::CheckReport;
use crate::spectral::Spectral;
use crate::sym::SymMat;
use crate::transport::pcg;

/// Relative tolerance of the cell-problem solves.
pub const CELL_TOL: f64 = 1e-12;
/// Tolerance used when comparing effective tensors with their bounds.
pub const HOMOG_TOL: f64 = 1e-8;

/// Periodic corrector `u_ξ` with `div(A(ξ + ∇u_ξ)) = 0`.
#[derive(Clone, Debug)]
pub struct CellCorrector {
    pub xi: Vec<f64>,
    pub u: ScalarField,
    /// `max |div(A(ξ + ∇u))|` over the cells.
    pub residual: f64,
    /// `⨍ (ξ + ∇u)ᵀ A (ξ + ∇u)`.
    pub energy: f64,
    pub max_gradient: f64,
}

#[derive(Clone, Debug)]
pub struct Homogenized {
    pub a_eff: SymMat,
    pub a_minus: SymMat,
    pub a_plus: SymMat,
    pub alpha: f64,
    pub beta: f64,
    pub correctors: Vec<CellCorrector>,
}

/// Extreme eigenvalues of the field over the grid.
pub fn ellipticity(field: &TensorField) -> (f64, f64) {
    field.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), a| {
        let e = a.eigenvalues();
        (lo.min(e[0]), hi.max(e[e.len() - 1]))
    })
}

/// `(⨍ A⁻¹)⁻¹`.
pub fn harmonic_mean(field: &TensorField) -> Result<SymMat> {
    let d = field.dim();
    let mut inv = SymMat::zeros(d);
    let w = field.mesh.weights();
    let total = field.mesh.total_weight();
    for (a, wk) in field.values.iter().zip(w) {
        let ai = a.inverse().ok_or(Error::NotElliptic {
            alpha: a.min_eigenvalue(),
        })?;
        inv.axpy(wk / total, &ai);
    }
    inv.inverse().ok_or(Error::NotElliptic { alpha: 0.0 })
}

fn solve_corrector(sp: &Spectral, field: &TensorField, xi: &[f64]) -> Result<CellCorrector> {
    let d = field.dim();
    let n = field.len();
    let mut b = vec![0.0; n];
    for i in 0..d {
        let flux: Vec<f64> = field
            .values
            .iter()
            .map(|a| (0..d).map(|j| a.get(i, j) * xi[j]).sum())
            .collect();
        for (bk, v) in b.iter_mut().zip(sp.derivative(&flux, i)) {
            *bk += v;
        }
    }
    let (u, _) = pcg(sp, &field.values, &b, CELL_TOL, 1e-14 * (n as f64).sqrt(), 5000)?;
    let grad = sp.gradient(&u);
    let total: Vec<Vec<f64>> = (0..n).map(|k| (0..d).map(|j| xi[j] + grad[j][k]).collect()).collect();
    let energy_density: Vec<f64> = (0..n).map(|k| field.values[k].quad_form(&total[k])).collect();
    let mut div = vec![0.0; n];
    for i in 0..d {
        let flux: Vec<f64> = (0..n)
            .map(|k| (0..d).map(|j| field.values[k].get(i, j) * total[k][j]).sum())
            .collect();
        for (dk, v) in div.iter_mut().zip(sp.derivative(&flux, i)) {
            *dk += v;
        }
    }
    let max_gradient = (0..n)
        .map(|k| (0..d).map(|j| grad[j][k] * grad[j][k]).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    Ok(CellCorrector {
        xi: xi.to_vec(),
        u: ScalarField::new(field.mesh.clone(), u)?,
        residual: div.iter().fold(0.0, |m, v| m.max(v.abs())),
        energy: weighted_mean(&field.mesh, &energy_density),
        max_gradient,
    })
}

/// Solves the cell problems for `e₁`, `e₂` and `e₁ + e₂` and assembles
/// `A_eff` from the energies (the off-diagonal entry by polarization).
pub fn homogenize(field: &TensorField) -> Result<Homogenized> {
    let mesh = &field.mesh;
    if !mesh.domain.is_periodic() {
        return Err(Error::DomainMismatch("homogenization needs a torus".into()));
    }
    if field.dim() != 2 {
        return Err(Error::UnsupportedDomain {
            op: "homogenization",
            domain: format!("torus (d = {})", field.dim()),
        });
    }
    let (alpha, beta) = ellipticity(field);
    if !(alpha > 0.0) {
        return Err(Error::NotElliptic { alpha });
    }
    let sp = Spectral::for_mesh(mesh)?;
    let xis = [vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
    let correctors = xis
        .par_iter()
        .map(|xi| solve_corrector(&sp, field, xi))
        .collect::<Result<Vec<_>>>()?;
    let (e1, e2, e12) = (correctors[0].energy, correctors[1].energy, correctors[2].energy);
    let a_eff = SymMat::from_packed(2, vec![e1, 0.5 * (e12 - e1 - e2), e2])?;
    Ok(Homogenized {
        a_eff,
        a_minus: harmonic_mean(field)?,
        a_plus: field_average(field),
        alpha,
        beta,
        correctors,
    })
}

pub fn effective_tensor(field: &TensorField) -> Result<SymMat> {
    Ok(homogenize(field)?.a_eff)
}

/// Closed-form effective tensor of a field that depends on `x₁` only, given
/// equally weighted layer values.
pub fn layered_effective_tensor(layers: &[SymMat]) -> Result<SymMat> {
    let n = layers.len() as f64;
    let (mut inv11, mut r12, mut schur) = (0.0, 0.0, 0.0);
    for a in layers {
        if a.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: a.dim(),
            });
        }
        let a11 = a.get(0, 0);
        if !(a11 > 0.0) || !(a.det() > 0.0) {
            return Err(Error::NotElliptic {
                alpha: a.min_eigenvalue(),
            });
        }
        inv11 += 1.0 / (a11 * n);
        r12 += a.get(0, 1) / (a11 * n);
        schur += a.det() / (a11 * n);
    }
    let h = 1.0 / inv11;
    SymMat::from_packed(2, vec![h, r12 * h, schur + r12 * r12 * h])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HomogMode {
    Bounds,
    DptEquivalence,
    TemptFalsifier,
}

fn finish(report: CheckReport, h: &Homogenized, field: &TensorField) -> CheckReport {
    let worst = h.correctors.iter().map(|c| c.residual).fold(0.0, f64::max);
    report
        .with_grid(&field.mesh.grid)
        .with_extra("corrector_residual", worst)
        .with_extra("alpha", h.alpha)
        .with_extra("beta", h.beta)
        .with_extra("a_eff_11", h.a_eff.get(0, 0))
        .with_extra("a_eff_12", h.a_eff.get(0, 1))
        .with_extra("a_eff_22", h.a_eff.get(1, 1))
}

pub fn homog_checks(field: &TensorField, mode: HomogMode, budget: usize, seed: u64) -> Result<CheckReport> {
    match mode {
        HomogMode::Bounds => {
            let h = homogenize(field)?;
            let lower = h.a_eff.sub(&h.a_minus).min_eigenvalue();
            let upper = h.a_plus.sub(&h.a_eff).min_eigenvalue();
            // lhs ≤ rhs ⇔ both differences are PSD up to the tolerance
            let r = CheckReport::new("homog_bounds", 0.0 - lower.min(upper), 0.0, HOMOG_TOL)
                .with_extra("lower_margin", lower)
                .with_extra("upper_margin", upper);
            Ok(finish(r, &h, field))
        }
        HomogMode::DptEquivalence => {
            let h = homogenize(field)?;
            let gap = h.a_eff.sub(&h.a_plus).frobenius_norm();
            let mass = divergence_mass(field)?;
            let scale = 1.0 + h.a_plus.frobenius_norm();
            let is_dpt = mass <= 1e-6 * scale;
            let at_upper = gap <= HOMOG_TOL * scale;
            let mut r = CheckReport::new("homog_dpt_equivalence", gap, 0.0, HOMOG_TOL * scale)
                .with_extra("divergence_mass", mass)
                .with_extra(
                    "max_corrector_gradient",
                    h.correctors.iter().map(|c| c.max_gradient).fold(0.0, f64::max),
                );
            r.pass = is_dpt == at_upper;
            let r = r.with_notes(if is_dpt {
                "divergence-free input"
            } else {
                "input has divergence"
            });
            Ok(finish(r, &h, field))
        }
        HomogMode::TemptFalsifier => tempt_falsifier(field.mesh.grid.shape[0], budget, seed),
    }
}

/// Witness of the search for `⨍ det A > det A_eff` (d = 2).
#[derive(Clone, Debug, PartialEq)]
pub struct TemptWitness {
    pub layers: Vec<SymMat>,
    /// `⨍ det A − det A_eff` from the closed form.
    pub margin: f64,
}

fn random_spd(rng: &mut impl Rng) -> SymMat {
    let a: f64 = rng.random_range(0.2..5.0);
    let c: f64 = rng.random_range(0.2..5.0);
    let b = rng.random_range(-0.95..0.95) * (a * c).sqrt();
    SymMat::from_packed(2, vec![a, b, c]).expect("2x2 packed")
}

fn tempt_margin(layers: &[SymMat]) -> Result<f64> {
    let eff = layered_effective_tensor(layers)?;
    let mean_det = layers.iter().map(SymMat::det).sum::<f64>() / layers.len() as f64;
    Ok(mean_det - eff.det())
}

/// Random search over two-state laminates and smooth layered fields with `n`
/// layers, scored by the closed form; the best witness is re-solved with the
/// spectral cell solver on an `n × n` grid.
pub fn tempt_search(n: usize, budget: usize, seed: u64) -> Result<TemptWitness> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::InvalidGrid(format!(
            "falsifier grid must be even and at least 4, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<TemptWitness> = None;
    for it in 0..budget.max(1) {
        let layers: Vec<SymMat> = if it % 10 == 9 {
            // smooth SPD perturbation M₀ + M₁ cos 2πx₁
            let m0 = random_spd(&mut rng);
            let m1 = random_spd(&mut rng).scale(rng.random_range(0.0..0.9) * m0.min_eigenvalue() / 5.0);
            (0..n)
                .map(|i| m0.add(&m1.scale((2.0 * std::f64::consts::PI * (i as f64 + 0.5) / n as f64).cos())))
                .collect()
        } else {
            let b = random_spd(&mut rng);
            let c = random_spd(&mut rng);
            // even block widths keep the layers orthogonal to the grid's
            // Nyquist mode, where the collocation operator matches the closed form
            let k = 2 * rng.random_range(1..n / 2);
            (0..n).map(|i| if i < k { b.clone() } else { c.clone() }).collect()
        };
        let margin = tempt_margin(&layers)?;
        if best.as_ref().is_none_or(|w| margin > w.margin) {
            best = Some(TemptWitness { layers, margin });
        }
    }
    Ok(best.expect("budget is at least one"))
}

fn tempt_falsifier(n: usize, budget: usize, seed: u64) -> Result<CheckReport> {
    let witness = tempt_search(n, budget, seed)?;
    let mesh = Mesh::new(crate::domain::DomainSpec::unit_torus(2), GridSpec::uniform(2, n))?;
    let layers = witness.layers.clone();
    let field = TensorField::from_fn(mesh.clone(), "tempt_witness", move |x| {
        layers[((x[0] * n as f64).floor() as usize).min(n - 1)].clone()
    });
    let h = homogenize(&field)?;
    let lhs = weighted_mean(&mesh, &field.values.iter().map(SymMat::det).collect::<Vec<_>>());
    let rhs = h.a_eff.det();
    let closed = layered_effective_tensor(&witness.layers)?;
    let r = CheckReport::new("tempt_falsifier", lhs, rhs, HOMOG_TOL)
        .with_extra("closed_form_margin", witness.margin)
        .with_extra("closed_form_gap", h.a_eff.sub(&closed).frobenius_norm())
        .with_extra("budget", budget as f64)
        .with_notes(if witness.margin > 0.0 {
            "counterexample found: the mean of det A exceeds det A_eff"
        } else {
            "no counterexample within the budget"
        });
    Ok(finish(r, &h, &field))
}

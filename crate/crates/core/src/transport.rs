//! Periodic Monge–Ampère solutions and the arithmetic-geometric proof step.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::divergence_mass;
use crate::domain::{lattice_matrix, DomainSpec, Mesh};
use crate::error::{Error, Result};
use crate::field::{field_average, weighted_mean, ScalarField, TensorField};
use crate::report::CheckReport;
use crate::spectral::Spectral;
use crate::sym::{det_power, psd_check, SymMat, PSD_TOL};

pub const MA_TOL: f64 = 1e-10;
const MA_MAX_ITERS: usize = 40;
const MIN_DAMPING: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaIterate {
    pub iteration: usize,
    pub residual: f64,
    pub damping: f64,
    pub cg_iterations: usize,
}

/// Convex periodic solution `ψ = ½ xᵀSx + φ` of `det ∇²ψ = f`.
#[derive(Clone, Debug)]
pub struct MaSolution {
    pub s: SymMat,
    /// Mean-zero periodic part.
    pub phi: ScalarField,
    /// `max |det(S + ∇²φ) − f|` over the cells.
    pub residual: f64,
    pub newton_iters: usize,
    pub history: Vec<MaIterate>,
}

impl MaSolution {
    pub fn hessians(&self) -> Result<Vec<SymMat>> {
        let sp = Spectral::for_mesh(&self.phi.mesh)?;
        Ok(sp.hessian(&self.phi.values).iter().map(|h| self.s.add(h)).collect())
    }

    pub fn max_gradient(&self) -> Result<f64> {
        let sp = Spectral::for_mesh(&self.phi.mesh)?;
        let g = sp.gradient(&self.phi.values);
        Ok((0..self.phi.values.len())
            .map(|k| g.iter().map(|c| c[k] * c[k]).sum::<f64>().sqrt())
            .fold(0.0, f64::max))
    }
}

/// CSV with columns `iteration,residual,damping,cg_iterations`.
pub fn ma_diagnostics_csv(sol: &MaSolution) -> String {
    let mut out = String::from("iteration,residual,damping,cg_iterations\n");
    for it in &sol.history {
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{}\n",
            it.iteration, it.residual, it.damping, it.cg_iterations
        ));
    }
    out
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `−div(C ∇u)` with spectral derivatives; symmetric positive semi-definite.
fn apply_operator(sp: &Spectral, c: &[SymMat], u: &[f64]) -> Vec<f64> {
    let d = sp.dim();
    let grad = sp.gradient(u);
    let mut out = vec![0.0; u.len()];
    for i in 0..d {
        let flux: Vec<f64> = (0..u.len())
            .map(|k| (0..d).map(|j| c[k].get(i, j) * grad[j][k]).sum())
            .collect();
        let di = sp.derivative(&flux, i);
        for (o, v) in out.iter_mut().zip(di) {
            *o -= v;
        }
    }
    out
}

fn project_mean_zero(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= m;
    }
}

/// Preconditioned CG for `−div(C ∇u) = b` on mean-zero functions; the
/// preconditioner inverts the operator with the averaged coefficient.
/// Stops once `‖r‖₂ ≤ max(rtol ‖b‖₂, atol)`.
pub(crate) fn pcg(sp: &Spectral, c: &[SymMat], b: &[f64], rtol: f64, atol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    let cbar = {
        let d = sp.dim();
        let mut m = SymMat::zeros(d);
        for ck in c {
            m.axpy(1.0 / c.len() as f64, ck);
        }
        m
    };
    let precond = |r: &[f64]| -> Vec<f64> {
        let hat = sp.forward(r);
        // −div(C̄∇u) has symbol kᵀC̄k
        let sol: Vec<Complex64> = sp.solve_constant_elliptic(&hat, &cbar).iter().map(|z| -z).collect();
        let mut v = sp.inverse_real(sol);
        project_mean_zero(&mut v);
        v
    };
    let mut rhs = b.to_vec();
    project_mean_zero(&mut rhs);
    let bnorm = dot(&rhs, &rhs).sqrt();
    let mut x = vec![0.0; b.len()];
    if bnorm <= atol {
        return Ok((x, 0));
    }
    let mut r = rhs;
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let ap = apply_operator(sp, c, &p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverDiverged(format!("operator lost positivity at CG step {it}")));
        }
        let alpha = rz / pap;
        for k in 0..x.len() {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        if dot(&r, &r).sqrt() <= (rtol * bnorm).max(atol) {
            return Ok((x, it));
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..p.len() {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::MaxIterations {
        iterations: max_iter,
        residual: dot(&r, &r).sqrt() / bnorm,
    })
}

fn require_torus_2d(mesh: &Mesh, op: &str) -> Result<()> {
    if !mesh.domain.is_periodic() {
        return Err(Error::DomainMismatch(format!("{op} needs a torus")));
    }
    if mesh.dim() != 2 {
        return Err(Error::UnsupportedDomain {
            op: "periodic Monge-Ampere solver",
            domain: format!("torus (d = {})", mesh.dim()),
        });
    }
    Ok(())
}

/// Damped Newton for `det(S + ∇²φ) = f`, `d = 2`, starting from `φ = 0`.
pub fn solve_periodic_ma(f: &ScalarField, s: &SymMat) -> Result<MaSolution> {
    let mesh = &f.mesh;
    require_torus_2d(mesh, "solve_periodic_ma")?;
    if s.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: s.dim(),
        });
    }
    if !psd_check(s, PSD_TOL) || s.det() <= 0.0 {
        return Err(Error::NotPsd {
            min_eigenvalue: s.min_eigenvalue(),
        });
    }
    if let Some((cell, &value)) = f.values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::InvalidInput(format!("f must be positive, got {value} at cell {cell}")));
    }
    let mean_f = f.mean();
    let det_s = s.det();
    if (mean_f - det_s).abs() > MA_TOL * (1.0 + det_s) {
        return Err(Error::CompatibilityViolated { mean_f, det_s });
    }
    let sp = Spectral::for_mesh(mesh)?;
    let n = f.values.len();
    let mut phi = vec![0.0; n];
    let hess_of = |phi: &[f64]| -> Vec<SymMat> { sp.hessian(phi).iter().map(|h| s.add(h)).collect() };
    let residual_of = |h: &[SymMat]| -> Vec<f64> { h.iter().zip(&f.values).map(|(h, f)| f - h.det()).collect() };
    let mut h = hess_of(&phi);
    let mut r = residual_of(&h);
    let mut history = vec![MaIterate {
        iteration: 0,
        residual: max_abs(&r),
        damping: 0.0,
        cg_iterations: 0,
    }];
    for iter in 1..=MA_MAX_ITERS {
        let res = max_abs(&r);
        if res <= MA_TOL {
            log::debug!("Monge-Ampere converged in {} Newton steps", iter - 1);
            return Ok(MaSolution {
                s: s.clone(),
                phi: ScalarField::new(mesh.clone(), phi)?,
                residual: res,
                newton_iters: iter - 1,
                history,
            });
        }
        // linearization: tr(cof(H) ∇²δ) = div(cof(H) ∇δ) = r
        let cof: Vec<SymMat> = h.iter().map(SymMat::cofactor).collect();
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        // inexact Newton: the linear tolerance tracks the nonlinear residual
        // min/max rather than clamp: a NaN residual must not panic here
        #[allow(clippy::manual_clamp)]
        let eta = res.min(1e-4).max(1e-12);
        // the absolute floor sits well below MA_TOL per cell but above roundoff
        let atol = 1e-3 * MA_TOL * (n as f64).sqrt();
        let (delta, cg_its) = pcg(&sp, &cof, &neg_r, eta, atol, 500)?;
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = phi.iter().zip(&delta).map(|(p, d)| p + t * d).collect();
            let ht = hess_of(&trial);
            if ht.iter().all(|m| m.det() > 0.0 && m.trace() > 0.0) {
                phi = trial;
                h = ht;
                r = residual_of(&h);
                break;
            }
            t *= 0.5;
            if t < MIN_DAMPING {
                return Err(Error::NotConvexIterate { step: t });
            }
        }
        history.push(MaIterate {
            iteration: iter,
            residual: max_abs(&r),
            damping: t,
            cg_iterations: cg_its,
        });
    }
    Err(Error::MaxIterations {
        iterations: MA_MAX_ITERS,
        residual: max_abs(&r),
    })
}

/// `S = λ Â₊` with `λ^d (det A₊)^{d−1} = f̄`, the minimizer of `Tr(A₊S)` under `det S = f̄`.
pub fn optimal_shape_matrix(a_plus: &SymMat, fbar: f64) -> Result<SymMat> {
    let d = a_plus.dim() as f64;
    let det = a_plus.det();
    if !(det > 0.0) || !(a_plus.min_eigenvalue() > 0.0) {
        return Err(Error::SingularAPlus { det });
    }
    if !(fbar > 0.0) {
        return Err(Error::invalid(format!("mean of f must be positive, got {fbar}")));
    }
    let lambda = ((fbar.ln() - (d - 1.0) * det.ln()) / d).exp();
    Ok(a_plus.cofactor().scale(lambda))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientBound {
    /// `‖M⁻¹‖_{ℓ∞→ℓ²} · max_j ½ γ_jᵀ S γ_j`, a bound on `sup |∇φ_S|`.
    pub bound: f64,
    /// `‖M⁻¹‖_{ℓ∞→ℓ²} · max_j ½ |γ_j|²`, so that `bound ≤ c_Γ ‖S‖` for every `S`.
    pub c_gamma: f64,
    /// `bound / ‖S‖₂` (0 when `S = 0`).
    pub bound_over_norm: f64,
}

/// `‖M⁻¹‖_{ℓ∞→ℓ²}`: the maximum over the cube's vertices.
pub fn linf_to_l2_norm(minv: &nalgebra::DMatrix<f64>) -> f64 {
    let d = minv.nrows();
    (0..1usize << d)
        .map(|mask| {
            let x: Vec<f64> = (0..d).map(|a| if mask >> a & 1 == 1 { 1.0 } else { -1.0 }).collect();
            (0..d)
                .map(|i| (0..d).map(|a| minv[(i, a)] * x[a]).sum::<f64>().powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

pub fn lattice_gradient_constant(basis: &[Vec<f64>], s: &SymMat) -> Result<GradientBound> {
    let m = lattice_matrix(basis);
    let det = m.determinant();
    let minv = m
        .try_inverse()
        .filter(|_| det.abs() > 1e-14)
        .ok_or(Error::SingularLattice { det })?;
    if s.dim() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            got: s.dim(),
        });
    }
    if !psd_check(s, PSD_TOL) {
        return Err(Error::NotPsd {
            min_eigenvalue: s.min_eigenvalue(),
        });
    }
    let norm = linf_to_l2_norm(&minv);
    let bound = norm * basis.iter().map(|g| 0.5 * s.quad_form(g)).fold(0.0, f64::max);
    let c_gamma = norm
        * basis
            .iter()
            .map(|g| 0.5 * g.iter().map(|x| x * x).sum::<f64>())
            .fold(0.0, f64::max);
    let sn = s.norm2();
    Ok(GradientBound {
        bound,
        c_gamma,
        bound_over_norm: if sn > 0.0 { bound / sn } else { 0.0 },
    })
}

/// Pointwise record of the arithmetic-geometric step `f ≤ (1/d) Tr(A ∇²ψ_S)`.
#[derive(Clone, Debug)]
pub struct ProofTrace {
    /// `(1/d) Tr(A (S + ∇²φ)) − f` per cell.
    pub slack: ScalarField,
    pub mean_slack: f64,
    /// `(1/d) Tr(A₊S) − ⨍f`, the value the proof's accounting predicts for `mean_slack`.
    pub predicted_mean_slack: f64,
    /// `R − L` of the periodic inequality, for comparison.
    pub periodic_gap: f64,
    /// `|⨍ (1/d) Tr(A ∇²φ)|`, which vanishes for divergence-free `A`.
    pub div_residual: f64,
    pub ma: MaSolution,
}

/// Relative positivity floor applied to `f` before the Monge–Ampère solve.
pub const F_FLOOR: f64 = 1e-8;

pub fn proof_trace_periodic(field: &TensorField) -> Result<ProofTrace> {
    let mesh = &field.mesh;
    require_torus_2d(mesh, "proof_trace_periodic")?;
    let d = field.dim() as f64;
    let raw = field.det_powers(1.0 / (d - 1.0))?;
    let fmax = raw.iter().fold(0.0_f64, |m, v| m.max(*v));
    if !(fmax > 0.0) {
        return Err(Error::InvalidInput("det A vanishes identically".into()));
    }
    let f: Vec<f64> = raw.iter().map(|v| v.max(F_FLOOR * fmax)).collect();
    let f = ScalarField::new(mesh.clone(), f)?;
    let fbar = f.mean();
    let a_plus = field_average(field);
    let s = optimal_shape_matrix(&a_plus, fbar)?;
    let ma = solve_periodic_ma(&f, &s)?;
    let hess = ma.hessians()?;
    let slack: Vec<f64> = (0..f.values.len())
        .map(|k| field.values[k].trace_product(&hess[k]) / d - f.values[k])
        .collect();
    let mean_slack = weighted_mean(mesh, &slack);
    let predicted = a_plus.trace_product(&s) / d - fbar;
    let div_terms: Vec<f64> = (0..f.values.len())
        .map(|k| field.values[k].trace_product(&hess[k].sub(&s)) / d)
        .collect();
    let div_residual = weighted_mean(mesh, &div_terms).abs();
    let lhs = weighted_mean(mesh, &raw);
    let rhs = det_power(&a_plus, 1.0 / (d - 1.0))?;
    Ok(ProofTrace {
        slack: ScalarField::new(mesh.clone(), slack)?,
        mean_slack,
        predicted_mean_slack: predicted,
        periodic_gap: rhs - lhs,
        div_residual,
        ma,
    })
}

/// `⨍(det A)^{1/(d−1)} ≤ (det(⨍A + c_Γ ‖Div A‖_M / |Ω| · I))^{1/(d−1)}` on a torus.
pub fn nondiv_bound(field: &TensorField) -> Result<CheckReport> {
    let mesh = &field.mesh;
    let basis = match &mesh.domain {
        DomainSpec::Torus { basis } => basis,
        other => {
            return Err(Error::DomainMismatch(format!(
                "nondiv_bound needs a torus, got {}",
                other.name()
            )))
        }
    };
    let d = field.dim();
    let alpha = 1.0 / (d as f64 - 1.0);
    let lhs = weighted_mean(mesh, &field.det_powers(alpha)?);
    let mass = divergence_mass(field)?;
    let mass_mean = mass / mesh.total_weight();
    let g = lattice_gradient_constant(basis, &SymMat::identity(d))?;
    let mut b = field_average(field);
    b.axpy(g.c_gamma * mass_mean, &SymMat::identity(d));
    let rhs = det_power(&b, alpha)?;
    Ok(CheckReport::new("nondiv_bound", lhs, rhs, crate::inequality::DEFAULT_TOL)
        .with_grid(&mesh.grid)
        .with_extra("divergence_mass", mass)
        .with_extra("c_gamma", g.c_gamma))
}

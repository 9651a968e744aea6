//! Both sides of the determinant inequalities, evaluated on fields.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calculus::{boundary_samples, boundary_trace_norm, divergence_mass};
use crate::constructors::DiagonalSpec;
use crate::domain::{polygon_area, polygon_vertices, sphere_area, DomainSpec, Mesh};
use crate::error::{Error, Result};
use crate::field::{field_average, weighted_mean, weighted_sum, TensorField};
use crate::report::CheckReport;
use crate::sym::{det_power, pow_log, psd_check, SymMat, PSD_TOL};

/// Default pass tolerance for exact theorems evaluated by quadrature.
pub const DEFAULT_TOL: f64 = 1e-7;

/// Constant in the vanishing-trace bound `max |A| ≤ C (ε + h²)`. It is an
/// artifact choice; the underlying statement is qualitative.
pub const VANISHING_TRACE_C: f64 = 10.0;

fn exponent(d: usize) -> f64 {
    1.0 / (d as f64 - 1.0)
}

fn require_torus(field: &TensorField, op: &str) -> Result<()> {
    if field.mesh.domain.is_periodic() {
        Ok(())
    } else {
        Err(Error::DomainMismatch(format!(
            "{op} needs a torus, got {}",
            field.mesh.domain.name()
        )))
    }
}

fn require_bounded(field: &TensorField, op: &str) -> Result<()> {
    if field.mesh.domain.is_periodic() {
        Err(Error::DomainMismatch(format!("{op} needs a bounded domain, got a torus")))
    } else {
        Ok(())
    }
}

/// `⨍ (det A)^{1/(d−1)}` against `(det ⨍A)^{1/(d−1)}` on a torus.
pub fn verify_periodic(field: &TensorField) -> Result<CheckReport> {
    verify_periodic_with(field, DEFAULT_TOL)
}

pub fn verify_periodic_with(field: &TensorField, tol: f64) -> Result<CheckReport> {
    require_torus(field, "verify_periodic")?;
    let alpha = exponent(field.dim());
    let lhs = weighted_mean(&field.mesh, &field.det_powers(alpha)?);
    let rhs = det_power(&field_average(field), alpha)?;
    Ok(CheckReport::new("verify_periodic", lhs, rhs, tol).with_grid(&field.mesh.grid))
}

/// `1 / (d |S^{d−1}|^{1/(d−1)}) · m^{d/(d−1)}`, evaluated in log space.
pub fn convex_rhs(d: usize, mass: f64) -> f64 {
    let df = d as f64;
    pow_log(mass, df / (df - 1.0)) / (df * pow_log(sphere_area(d), 1.0 / (df - 1.0)))
}

/// `∫_Ω (det A)^{1/(d−1)}` against the trace (and optionally divergence-mass) bound.
pub fn verify_convex(field: &TensorField, include_measure: bool) -> Result<CheckReport> {
    verify_convex_with(field, include_measure, DEFAULT_TOL)
}

pub fn verify_convex_with(field: &TensorField, include_measure: bool, tol: f64) -> Result<CheckReport> {
    require_bounded(field, "verify_convex")?;
    let d = field.dim();
    let lhs = weighted_sum(&field.mesh, &field.det_powers(exponent(d))?);
    let trace = boundary_trace_norm(field)?;
    let mass = if include_measure { divergence_mass(field)? } else { 0.0 };
    let name = if include_measure {
        "verify_convex_measure"
    } else {
        "verify_convex"
    };
    Ok(CheckReport::new(name, lhs, convex_rhs(d, trace + mass), tol)
        .with_grid(&field.mesh.grid)
        .with_extra("trace_norm", trace)
        .with_extra("divergence_mass", mass))
}

/// Gagliardo: `⨍ Π g_j^{1/(d−1)} ≤ Π (⨍ g_j)^{1/(d−1)}`.
pub fn gagliardo_check(spec: &DiagonalSpec, mesh: &std::sync::Arc<Mesh>) -> Result<CheckReport> {
    let g = spec.sample(mesh)?;
    let d = mesh.dim();
    let alpha = exponent(d);
    for (j, gj) in g.iter().enumerate() {
        if let Some((cell, &value)) = gj.values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeEntry { index: j, cell, value });
        }
    }
    let prod: Vec<f64> = (0..mesh.len())
        .map(|k| g.iter().map(|gj| gj.values[k].powf(alpha)).product())
        .collect();
    let lhs = weighted_mean(mesh, &prod);
    let rhs: f64 = g.iter().map(|gj| gj.mean().powf(alpha)).product();
    Ok(CheckReport::new("gagliardo", lhs, rhs, DEFAULT_TOL).with_grid(&mesh.grid))
}

/// Outcome of sampling `t ↦ det(a + t b)^α` on `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcavityProbe {
    pub concave: bool,
    /// `(t₀, t₁, t₂)` with `t₁` the midpoint and `g(t₁) < (g(t₀) + g(t₂))/2`.
    pub witness: Option<[f64; 3]>,
    /// Largest midpoint violation `(g(t₀) + g(t₂))/2 − g(t₁)`.
    pub max_violation: f64,
}

/// Midpoint-concavity test along a singular direction.
pub fn lambda_concavity_probe(a: &SymMat, b: &SymMat, alpha: f64, samples: usize) -> Result<ConcavityProbe> {
    let d = a.dim();
    if b.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: b.dim(),
        });
    }
    if samples < 3 {
        return Err(Error::invalid("at least 3 samples are needed"));
    }
    let det_b = b.det();
    if det_b.abs() > 1e-10 * (1.0 + b.norm2().powi(d as i32)) {
        return Err(Error::NotSingularDirection { det: det_b });
    }
    for m in [a.clone(), a.add(b)] {
        if !psd_check(&m, PSD_TOL) {
            return Err(Error::NotPsd {
                min_eigenvalue: m.min_eigenvalue(),
            });
        }
    }
    let n = samples - 1;
    let g: Vec<f64> = (0..=n)
        .map(|i| {
            let mut m = a.clone();
            m.axpy(i as f64 / n as f64, b);
            m.det().max(0.0).powf(alpha)
        })
        .collect();
    let scale = g.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale;
    let mut worst = (0.0, None);
    for h in 1..=n / 2 {
        for i in 0..=n - 2 * h {
            let v = 0.5 * (g[i] + g[i + 2 * h]) - g[i + h];
            if v > worst.0 {
                let t = |k: usize| k as f64 / n as f64;
                worst = (v, Some([t(i), t(i + h), t(i + 2 * h)]));
            }
        }
    }
    let concave = worst.0 <= tol;
    Ok(ConcavityProbe {
        concave,
        witness: if concave { None } else { worst.1 },
        max_violation: worst.0,
    })
}

/// A random positive definite `a` and a random singular symmetric `b` with `a + b` PSD.
pub fn random_singular_segment(d: usize, rng: &mut impl Rng) -> (SymMat, SymMat) {
    let rand_matrix = |rng: &mut dyn rand::RngCore| nalgebra::DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let g = rand_matrix(rng);
    let a = SymMat::from_dmatrix(&(&g * g.transpose() + nalgebra::DMatrix::identity(d, d) * 0.5));
    let q = rand_matrix(rng).qr().q();
    let mut lam: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    lam[d - 1] = 0.0;
    let mut b = SymMat::from_dmatrix(&(&q * nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lam)) * q.transpose()));
    // shrink until a + b stays positive definite
    let amin = a.min_eigenvalue();
    let bnorm = b.norm2();
    if bnorm > 0.9 * amin {
        b = b.scale(0.9 * amin / bnorm);
    }
    (a, b)
}

/// Mean of a field that equals `abar` near the boundary.
pub fn compact_support_mean(field: &TensorField, abar: &SymMat) -> Result<CheckReport> {
    let mesh = &field.mesh;
    match &mesh.domain {
        DomainSpec::Box { .. } | DomainSpec::Torus { .. } => {}
        other => {
            return Err(Error::UnsupportedDomain {
                op: "compact_support_mean",
                domain: other.name().into(),
            })
        }
    }
    if abar.dim() != field.dim() {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            got: abar.dim(),
        });
    }
    let shape = &mesh.grid.shape;
    let scale = 1.0 + abar.frobenius_norm();
    for k in 0..field.len() {
        let idx = mesh.grid.unravel(k);
        let margin = idx.iter().zip(shape).any(|(&i, &n)| i == 0 || i + 1 == n);
        if margin && field.values[k].sub(abar).frobenius_norm() > 1e-12 * scale {
            return Err(Error::SupportTouchesBoundary { cell: k });
        }
    }
    let avg = field_average(field);
    let err = avg.sub(abar).frobenius_norm();
    let alpha = exponent(field.dim());
    let lhs_ineq = weighted_mean(mesh, &field.det_powers(alpha)?);
    let rhs_ineq = det_power(abar, alpha)?;
    let mut r = CheckReport::new("compact_support_mean", err, 0.0, 1e-8)
        .with_grid(&mesh.grid)
        .with_extra("mean_det_power", lhs_ineq)
        .with_extra("det_abar_power", rhs_ineq);
    let ineq_ok = lhs_ineq <= rhs_ineq + DEFAULT_TOL;
    r.pass = r.pass && ineq_ok;
    if !ineq_ok {
        r = r.with_notes("determinant inequality against abar failed");
    }
    Ok(r)
}

/// A field with small normal trace and no divergence must be small.
pub fn vanishing_trace_check(field: &TensorField, eps: f64) -> Result<CheckReport> {
    require_bounded(field, "vanishing_trace_check")?;
    let h = field.mesh.spacing();
    let name = "vanishing_trace";
    let mass = divergence_mass(field)?;
    let mass_tol = 1e-6 * h * h + 1e-12;
    let note_c = format!("C = {VANISHING_TRACE_C} is an artifact constant");
    if mass > mass_tol {
        return Ok(
            CheckReport::not_applicable(name, format!("divergence mass {mass:.3e} exceeds {mass_tol:.3e}; {note_c}"))
                .with_grid(&field.mesh.grid)
                .with_extra("divergence_mass", mass),
        );
    }
    let nn = boundary_samples(field)?
        .iter()
        .map(|b| b.value.quad_form(&b.normal))
        .fold(0.0_f64, f64::max);
    if nn > eps {
        return Ok(
            CheckReport::not_applicable(name, format!("normal trace {nn:.3e} exceeds epsilon {eps:.3e}; {note_c}"))
                .with_grid(&field.mesh.grid)
                .with_extra("normal_trace_max", nn),
        );
    }
    let max = field
        .values
        .iter()
        .map(|a| if a.frobenius_norm() == 0.0 { 0.0 } else { a.norm2() })
        .fold(0.0_f64, f64::max);
    Ok(CheckReport::new(name, max, VANISHING_TRACE_C * (eps + h * h), 0.0)
        .with_grid(&field.mesh.grid)
        .with_extra("divergence_mass", mass)
        .with_extra("normal_trace_max", nn)
        .with_notes(note_c))
}

/// `|E|` against `per(E)^{d/(d−1)} / (d |S^{d−1}|^{1/(d−1)})` for a ball, box or polygon `E`.
pub fn isoperimetric_check(e: &DomainSpec) -> Result<CheckReport> {
    e.validate()?;
    let d = e.dim();
    let perimeter = match e {
        DomainSpec::Ball { radius, .. } => sphere_area(d) * radius.powi(d as i32 - 1),
        DomainSpec::Box { lo, hi } => {
            let sides: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| b - a).collect();
            (0..d)
                .map(|a| 2.0 * (0..d).filter(|&b| b != a).map(|b| sides[b]).product::<f64>())
                .sum()
        }
        DomainSpec::ConvexPolytope { halfspaces } => {
            let v = polygon_vertices(halfspaces)?;
            (0..v.len())
                .map(|i| {
                    let (p, q) = (v[i], v[(i + 1) % v.len()]);
                    ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt()
                })
                .sum()
        }
        DomainSpec::Torus { .. } => {
            return Err(Error::DomainMismatch("a torus has no boundary".into()));
        }
    };
    let volume = match e {
        DomainSpec::ConvexPolytope { halfspaces } => polygon_area(&polygon_vertices(halfspaces)?),
        other => other.volume(),
    };
    Ok(
        CheckReport::new("isoperimetric", volume, convex_rhs(d, perimeter), 1e-12 * (1.0 + volume))
            .with_extra("perimeter", perimeter),
    )
}

/// Runs [`lambda_concavity_probe`] on random singular segments and on the
/// `diag(1, …, 1, 0)` direction just above the threshold.
pub fn concavity_threshold_study(d: usize, segments: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = exponent(d);
    let mut worst: f64 = 0.0;
    let mut all_concave = true;
    for _ in 0..segments {
        let (a, b) = random_singular_segment(d, &mut rng);
        let p = lambda_concavity_probe(&a, &b, alpha, 41)?;
        all_concave &= p.concave;
        worst = worst.max(p.max_violation);
    }
    let mut diag = vec![1.0; d];
    diag[d - 1] = 0.0;
    let above = lambda_concavity_probe(&SymMat::identity(d), &SymMat::diag(&diag), alpha + 0.05, 41)?;
    let witness = above.witness.is_some();
    let mut r = CheckReport::new(format!("lambda_concavity_d{d}"), worst, 0.0, 1e-12)
        .with_extra("violation_above_threshold", above.max_violation);
    r.pass = all_concave && witness;
    Ok(r.with_notes(format!(
        "{segments} random segments concave at alpha = 1/(d-1): {all_concave}; witness above threshold: {witness}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructors::{hessian_cofactor, laminate, LaminateSpec, Potential, PotentialSpec, TrigPoly};
    use crate::domain::{GridSpec, Halfspace};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn mesh(dom: DomainSpec, shape: Vec<usize>) -> Arc<Mesh> {
        Mesh::new(dom, GridSpec::new(shape)).unwrap()
    }

    #[test]
    fn periodic_examples() {
        let m = mesh(DomainSpec::unit_torus(2), vec![8, 8]);
        let r = verify_periodic(&TensorField::constant(m, &SymMat::diag(&[1.0, 2.0]))).unwrap();
        assert!((r.lhs - 2.0).abs() < 1e-14 && (r.rhs - 2.0).abs() < 1e-14 && r.pass);

        let m3 = mesh(DomainSpec::unit_torus(3), vec![4, 4, 8]);
        let spec = LaminateSpec::two_state(SymMat::identity(3), SymMat::diag(&[2.0, 5.0, 1.0]), vec![0.0, 0.0, 1.0], 0.5);
        let r = verify_periodic(&laminate(&spec, &m3).unwrap()).unwrap();
        let (lhs, rhs) = ((1.0 + 10f64.sqrt()) / 2.0, 4.5f64.sqrt());
        assert!((r.lhs - lhs).abs() < 1e-14 && (r.rhs - rhs).abs() < 1e-14);
        assert!((r.slack - 0.04018).abs() < 1e-5);

        let bx = TensorField::constant(mesh(DomainSpec::unit_box(2), vec![4, 4]), &SymMat::identity(2));
        assert!(matches!(verify_periodic(&bx), Err(Error::DomainMismatch(_))));
    }

    #[test]
    fn hessian_cofactor_is_an_equality_case() {
        let m = mesh(DomainSpec::unit_torus(2), vec![64, 64]);
        let spec = PotentialSpec {
            s: SymMat::identity(2),
            psi: Potential::Trig {
                poly: TrigPoly::default()
                    .with_term(vec![1, 1], 0.005, 0.0)
                    .with_term(vec![1, -1], 0.005, 0.0),
            },
        };
        let r = verify_periodic(&hessian_cofactor(&spec, &m).unwrap()).unwrap();
        assert!(r.slack.abs() <= 1e-8, "{}", r.slack);
    }

    #[test]
    fn convex_examples() {
        let disk = mesh(DomainSpec::ball(vec![0.0, 0.0], 1.0), vec![8, 32]);
        let r = verify_convex(&TensorField::constant(disk, &SymMat::identity(2)), false).unwrap();
        assert!((r.lhs - PI).abs() < 1e-12 && (r.rhs - PI).abs() < 1e-12);
        let sq = mesh(DomainSpec::unit_box(2), vec![8, 8]);
        let r = verify_convex(&TensorField::constant(sq, &SymMat::identity(2)), false).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-14 && (r.rhs - 4.0 / PI).abs() < 1e-14);
        let t = TensorField::constant(mesh(DomainSpec::unit_torus(2), vec![4, 4]), &SymMat::identity(2));
        assert!(verify_convex(&t, false).is_err());
    }

    #[test]
    fn gagliardo_examples() {
        let m = mesh(DomainSpec::unit_torus(3), vec![8, 32, 8]);
        let ones = DiagonalSpec {
            g: vec![TrigPoly::constant(1.0); 3],
        };
        let r = gagliardo_check(&ones, &m).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-15 && (r.rhs - 1.0).abs() < 1e-15);

        let wavy = DiagonalSpec {
            g: vec![
                TrigPoly::constant(1.0).with_term(vec![0, 1, 0], 0.0, 0.5),
                TrigPoly::constant(1.0),
                TrigPoly::constant(1.0),
            ],
        };
        let r = gagliardo_check(&wavy, &m).unwrap();
        // oracle: ∫₀¹ √(1 + ½ sin 2πt) dt by composite Simpson on 4000 panels
        let n = 4000;
        let f = |t: f64| (1.0 + 0.5 * (2.0 * PI * t).sin()).sqrt();
        let h = 1.0 / n as f64;
        let oracle = (0..n)
            .map(|i| {
                let a = i as f64 * h;
                h / 6.0 * (f(a) + 4.0 * f(a + 0.5 * h) + f(a + h))
            })
            .sum::<f64>();
        assert!((r.lhs - oracle).abs() < 1e-10, "{} {oracle}", r.lhs);
        assert!(r.lhs < 1.0 && (r.rhs - 1.0).abs() < 1e-14);

        let m2 = mesh(DomainSpec::unit_torus(2), vec![16, 16]);
        let two = DiagonalSpec {
            g: vec![
                TrigPoly::constant(2.0).with_term(vec![0, 1], 0.7, 0.3),
                TrigPoly::constant(1.5).with_term(vec![2, 0], 0.0, 0.9),
            ],
        };
        let r = gagliardo_check(&two, &m2).unwrap();
        assert!((r.lhs - r.rhs).abs() < 1e-13);
    }

    #[test]
    fn concavity_examples() {
        let p = lambda_concavity_probe(&SymMat::identity(2), &SymMat::diag(&[1.0, 0.0]), 1.0, 21).unwrap();
        assert!(p.concave);
        let p = lambda_concavity_probe(&SymMat::identity(2), &SymMat::diag(&[1.0, 0.0]), 1.2, 21).unwrap();
        assert!(!p.concave && p.witness.is_some());
        let b = SymMat::diag(&[1.0, 2.0, 0.0]);
        assert!(lambda_concavity_probe(&SymMat::identity(3), &b, 0.5, 21).unwrap().concave);
        assert!(!lambda_concavity_probe(&SymMat::identity(3), &b, 0.55, 21).unwrap().concave);
        assert!(matches!(
            lambda_concavity_probe(&SymMat::identity(2), &SymMat::identity(2), 1.0, 21),
            Err(Error::NotSingularDirection { .. })
        ));
    }

    #[test]
    fn compact_mean_examples() {
        // the bump is steep near its edge; 128² resolves the mean to ~5e-10
        let m = mesh(DomainSpec::unit_box(2), vec![128, 128]);
        let spec = PotentialSpec {
            s: SymMat::identity(2),
            psi: Potential::Bump {
                center: vec![0.5, 0.5],
                radius: 0.45,
                amplitude: 0.002,
            },
        };
        let f = hessian_cofactor(&spec, &m).unwrap();
        let r = compact_support_mean(&f, &SymMat::identity(2)).unwrap();
        assert!(r.pass && r.lhs < 1e-8, "{r:?}");
        let c = TensorField::constant(m.clone(), &SymMat::identity(2));
        assert!(compact_support_mean(&c, &SymMat::identity(2)).unwrap().lhs == 0.0);
        let lam = LaminateSpec::two_state(SymMat::identity(2), SymMat::diag(&[2.0, 1.0]), vec![0.0, 1.0], 0.5);
        let lf = laminate(&lam, &m).unwrap();
        assert!(matches!(
            compact_support_mean(&lf, &SymMat::identity(2)),
            Err(Error::SupportTouchesBoundary { .. })
        ));
    }

    #[test]
    fn vanishing_trace_examples() {
        let sq = mesh(DomainSpec::unit_box(2), vec![16, 16]);
        let r = vanishing_trace_check(&TensorField::constant(sq.clone(), &SymMat::zeros(2)), 1e-3).unwrap();
        assert!(r.applicable && r.pass && r.lhs == 0.0);
        let r = vanishing_trace_check(&TensorField::constant(sq, &SymMat::identity(2)), 1e-3).unwrap();
        assert!(!r.applicable);
    }

    #[test]
    fn isoperimetric_examples() {
        let r = isoperimetric_check(&DomainSpec::ball(vec![0.0, 0.0], 2.0)).unwrap();
        assert!((r.lhs - r.rhs).abs() < 1e-12 && r.pass);
        let r = isoperimetric_check(&DomainSpec::ball(vec![0.0; 3], 1.0)).unwrap();
        assert!((r.lhs - r.rhs).abs() < 1e-12);
        let r = isoperimetric_check(&DomainSpec::unit_box(2)).unwrap();
        assert!((r.slack - (4.0 / PI - 1.0)).abs() < 1e-14);
        let tri = DomainSpec::ConvexPolytope {
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
        };
        let r = isoperimetric_check(&tri).unwrap();
        assert!(r.pass && r.slack > 0.0);
    }

    #[test]
    fn threshold_study() {
        for d in 2..=4 {
            let r = concavity_threshold_study(d, 10, 7).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }
}

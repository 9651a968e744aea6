use dpt_core::constructors::{relativistic_tensor, LaminateSpec};
use dpt_core::hexfloat::{format_hex, parse_hex};
use dpt_core::homog::{harmonic_mean, layered_effective_tensor};
use dpt_core::inequality::{lambda_concavity_probe, random_singular_segment};
use dpt_core::io::{field_from_json, field_to_json};
use dpt_core::kinetic::{andreiev_det, Atom, DefectSample};
use dpt_core::report::CheckReport;
use dpt_core::suite::{emit_report, parse_config, parse_reports, ReportFormat};
use dpt_core::{field_average, DomainSpec, GridSpec, Mesh, SymMat, TensorField};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SPD matrix `L Lᵀ + shift I` from a random `d × d` factor `L`.
fn spd(d: usize) -> impl Strategy<Value = SymMat> {
    (prop::collection::vec(-2.0..2.0f64, d * d), 0.05..1.0f64).prop_map(move |(l, shift)| {
        let mut a = SymMat::from_fn(d, |i, j| (0..d).map(|k| l[i * d + k] * l[j * d + k]).sum());
        for i in 0..d {
            a.set(i, i, a.get(i, i) + shift);
        }
        a
    })
}

fn psd(d: usize) -> impl Strategy<Value = SymMat> {
    prop::collection::vec(-1.0..1.0f64, d * d)
        .prop_map(move |l| SymMat::from_fn(d, |i, j| (0..d).map(|k| l[i * d + k] * l[j * d + k]).sum()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cofactor_identity(a in (2usize..=4).prop_flat_map(spd)) {
        let d = a.dim();
        let prod = a.cofactor().to_dmatrix() * a.to_dmatrix();
        let scale = a.det().abs().max(1.0);
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { a.det() } else { 0.0 };
                prop_assert!((prod[(i, j)] - target).abs() <= 1e-10 * scale * 10f64.powi(d as i32));
            }
        }
    }

    #[test]
    fn compatible_laminates_satisfy_the_inequality(
        b in spd(3),
        m in psd(2),
        theta in 0.05..0.95f64,
    ) {
        // (C − B) e₁ = 0 keeps the pair rank-one compatible
        let mut c = b.clone();
        for i in 0..2 {
            for j in i..2 {
                c.set(i + 1, j + 1, c.get(i + 1, j + 1) + m.get(i, j));
            }
        }
        let spec = LaminateSpec::two_state(b, c, vec![1.0, 0.0, 0.0], theta);
        let (lhs, rhs) = spec.exact_periodic_sides().unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12), "{lhs} > {rhs}");
    }

    #[test]
    fn hexfloat_round_trip(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        let back = parse_hex(&format_hex(x)).unwrap();
        if x.is_nan() {
            prop_assert!(back.is_nan());
        } else {
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn field_json_round_trip(values in prop::collection::vec(spd(2), 16)) {
        let mesh = Mesh::new(DomainSpec::unit_torus(2), GridSpec::uniform(2, 4)).unwrap();
        let f = TensorField::new(mesh, values, "random").unwrap();
        let back = field_from_json(&field_to_json(&f)).unwrap();
        prop_assert_eq!(back.values, f.values);
    }

    #[test]
    fn defect_margin_is_nonnegative(
        atoms in prop::collection::vec((0.0..1.0f64, -2.0..2.0f64, -2.0..2.0f64), 1..6),
        sigma in psd(2),
    ) {
        let mut s = DefectSample { rho: 0.0, m: vec![0.0, 0.0], t: SymMat::zeros(2), sigma };
        for (w, v1, v2) in atoms {
            s.rho += w;
            s.m[0] += w * v1;
            s.m[1] += w * v2;
            s.t = s.t.add(&SymMat::outer(&[v1, v2]).scale(w));
        }
        let scale = 1.0 + s.rho * s.sigma.det();
        prop_assert!(s.margin() >= -1e-12 * scale, "{}", s.margin());
    }

    #[test]
    fn andreiev_agrees_with_enumeration(atoms in prop::collection::vec((-1.0..1.0f64, 0.0..1.0f64), 1..7)) {
        let set: Vec<Atom> = atoms.iter().map(|&(v, w)| Atom { v: vec![v], w }).collect();
        let r = andreiev_det(&set, 1).unwrap();
        prop_assert!((r.direct - r.bruteforce).abs() <= 1e-12 * (1.0 + r.direct.abs()));
        prop_assert!(r.direct >= -1e-15);
    }

    #[test]
    fn layered_tensor_lies_between_the_means(layers in prop::collection::vec(spd(2), 2..8)) {
        let n = layers.len();
        let eff = layered_effective_tensor(&layers).unwrap();
        let mesh = Mesh::new(DomainSpec::unit_torus(2), GridSpec::new(vec![2 * n, 4])).unwrap();
        let field = TensorField::from_fn(mesh, "layers", |x| layers[((x[0] * n as f64).floor() as usize).min(n - 1)].clone());
        let lower = eff.sub(&harmonic_mean(&field).unwrap()).min_eigenvalue();
        let upper = field_average(&field).sub(&eff).min_eigenvalue();
        prop_assert!(lower >= -1e-10 && upper >= -1e-10, "{lower} {upper}");
        // det A_eff = ⟨det A / a₁₁⟩ / ⟨1 / a₁₁⟩
        let num: f64 = layers.iter().map(|a| a.det() / a.get(0, 0)).sum();
        let den: f64 = layers.iter().map(|a| 1.0 / a.get(0, 0)).sum();
        prop_assert!((eff.det() - num / den).abs() <= 1e-10 * (1.0 + eff.det()));
    }

    #[test]
    fn concavity_holds_at_the_threshold(d in 2usize..=4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = random_singular_segment(d, &mut rng);
        let p = lambda_concavity_probe(&a, &b, 1.0 / (d as f64 - 1.0), 21).unwrap();
        prop_assert!(p.concave, "violation {}", p.max_violation);
    }

    #[test]
    fn relativistic_tensor_is_psd(rho in 0.0..5.0f64, p in 0.0..5.0f64, v in -0.98..0.98f64, w in -0.1..0.1f64) {
        let a = relativistic_tensor(rho, &[v, w], p, 1.0).unwrap();
        prop_assert!(a.min_eigenvalue() >= -1e-9 * (1.0 + a.frobenius_norm()));
    }

    #[test]
    fn config_parser_never_panics(text in ".{0,200}") {
        let _ = parse_config(&text);
    }

    #[test]
    fn reports_survive_both_formats(lhs in any::<f64>(), rhs in any::<f64>(), name in "[a-z_,\"]{1,12}") {
        prop_assume!(lhs.is_finite() && rhs.is_finite());
        let r = vec![CheckReport::new(name, lhs, rhs, 1e-9)];
        prop_assert_eq!(parse_reports(&emit_report(&r, ReportFormat::Json)).unwrap(), r.clone());
        let csv = emit_report(&r, ReportFormat::Csv);
        let row = csv.lines().nth(1).unwrap();
        // quoted names may contain commas; numbers come after the last name field
        let tail: Vec<&str> = row.rsplitn(7, ',').collect();
        prop_assert_eq!(tail[5].parse::<f64>().unwrap(), lhs);
        prop_assert_eq!(tail[4].parse::<f64>().unwrap(), rhs);
    }
}

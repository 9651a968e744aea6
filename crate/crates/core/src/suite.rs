//! Check suites: strict JSON configuration, job execution and report emission.
//!
//! A suite document looks like
//!
//! ```json
//! {"jobs": [{"module": "verify", "operation": "periodic", "grid": [64, 64],
//!            "parameters": {"constructor": {"tag": "constant", "a": [[1, 0], [0, 1]]}}}]}
//! ```
//!
//! Unknown keys anywhere are rejected so that a misspelt tolerance cannot be
//! silently ignored.

use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::calculus::divergence_mass;
use crate::constructors::{ConstructorSpec, DiagonalSpec, TrigPoly};
use crate::domain::{DomainSpec, GridSpec, Mesh};
use crate::error::{Error, Result};
use crate::field::{ScalarField, TensorField, VectorField};
use crate::fluid::{
    euler_bound_check, euler_run_1d, flow_invariants, relativistic_bound_check, selfsimilar_bound_check, Eos, FluidState,
};
use crate::homog::{homog_checks, HomogMode};
use crate::inequality::{
    compact_support_mean, concavity_threshold_study, gagliardo_check, isoperimetric_check, vanishing_trace_check,
    verify_convex_with, verify_periodic_with, DEFAULT_TOL,
};
use crate::io::json_error;
use crate::kinetic::{
    andreiev_random_study, bgk_run_1d, defect_schur_check, kinetic_bound_check, kinetic_invariants, uniform_velocity_grid,
    DefectSample, KineticState,
};
use crate::report::CheckReport;
use crate::sym::SymMat;
use crate::transport::{nondiv_bound, proof_trace_periodic, solve_periodic_ma, MA_TOL};

pub const DEFAULT_GRID: usize = 64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::invalid(format!("unknown report format `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldParams {
    pub constructor: ConstructorSpec,
    /// Defaults to the unit torus of the grid's dimension.
    #[serde(default)]
    pub domain: Option<DomainSpec>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvexParams {
    pub constructor: ConstructorSpec,
    pub domain: DomainSpec,
    #[serde(default = "yes")]
    pub include_measure: bool,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GagliardoParams {
    pub g: Vec<TrigPoly>,
    #[serde(default)]
    pub domain: Option<DomainSpec>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcavityParams {
    pub d: usize,
    #[serde(default = "fifty")]
    pub segments: usize,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainParams {
    pub domain: DomainSpec,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompactMeanParams {
    pub constructor: ConstructorSpec,
    #[serde(default)]
    pub domain: Option<DomainSpec>,
    pub abar: SymMat,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceParams {
    pub constructor: ConstructorSpec,
    pub domain: DomainSpec,
    pub eps: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaParams {
    pub f: TrigPoly,
    pub s: SymMat,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FluidInit {
    GaussianBump { amplitude: f64, width: f64, half: f64 },
    Sod,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EulerParams {
    pub init: FluidInit,
    #[serde(default = "default_eos")]
    pub eos: Eos,
    pub cells: usize,
    pub t_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfSimilarParams {
    pub domain: DomainSpec,
    pub rho: TrigPoly,
    pub v: Vec<TrigPoly>,
    pub p: TrigPoly,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelativisticParams {
    pub domain: DomainSpec,
    pub rho: TrigPoly,
    pub v: Vec<TrigPoly>,
    pub c: f64,
    pub a: f64,
}

/// Gaussian beam `amplitude · exp(−(y/width)²) · exp(−(v − velocity)²/temperature)`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Beam {
    pub amplitude: f64,
    pub width: f64,
    pub velocity: f64,
    pub temperature: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BgkParams {
    pub beams: Vec<Beam>,
    pub cells: usize,
    #[serde(default = "ten")]
    pub half: f64,
    #[serde(default = "four")]
    pub v_max: f64,
    #[serde(default = "thirty_two")]
    pub nodes: usize,
    pub tau: f64,
    pub t_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AndreievParams {
    pub n: usize,
    pub atoms: usize,
    pub draws: usize,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchurParams {
    pub sample: DefectSample,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomogParams {
    #[serde(default)]
    pub constructor: Option<ConstructorSpec>,
    #[serde(default)]
    pub domain: Option<DomainSpec>,
    #[serde(default = "thousand")]
    pub budget: usize,
}

fn yes() -> bool {
    true
}
fn fifty() -> usize {
    50
}
fn thousand() -> usize {
    1000
}
fn thirty_two() -> usize {
    32
}
fn ten() -> f64 {
    10.0
}
fn four() -> f64 {
    4.0
}
fn default_cfl() -> f64 {
    0.9
}
fn default_eos() -> Eos {
    Eos::polytropic(1.4, 1.0)
}

/// Every operation the suite can run, keyed as `module.operation`.
#[derive(Clone, Debug, PartialEq)]
pub enum Operation {
    ConstructField(FieldParams),
    VerifyPeriodic(FieldParams),
    VerifyConvex(ConvexParams),
    VerifyGagliardo(GagliardoParams),
    VerifyConcavity(ConcavityParams),
    VerifyIsoperimetric(DomainParams),
    VerifyCompactMean(CompactMeanParams),
    VerifyVanishingTrace(TraceParams),
    ProveProofTrace(FieldParams),
    ProveNondiv(FieldParams),
    ProveMongeAmpere(MaParams),
    FluidEuler(EulerParams),
    FluidSelfSimilar(SelfSimilarParams),
    FluidRelativistic(RelativisticParams),
    KineticBgk(BgkParams),
    KineticAndreiev(AndreievParams),
    KineticDefectSchur(SchurParams),
    Homog(HomogMode, HomogParams),
}

/// `(module, operation, accepts a tolerance override)`.
pub const OPERATIONS: &[(&str, &str, bool)] = &[
    ("construct", "field", true),
    ("verify", "periodic", true),
    ("verify", "convex", true),
    ("verify", "gagliardo", false),
    ("verify", "concavity", false),
    ("verify", "isoperimetric", false),
    ("verify", "compact_mean", false),
    ("verify", "vanishing_trace", false),
    ("prove", "proof_trace", true),
    ("prove", "nondiv", false),
    ("prove", "monge_ampere", true),
    ("fluid", "euler", false),
    ("fluid", "selfsimilar", false),
    ("fluid", "relativistic", false),
    ("kinetic", "bgk", false),
    ("kinetic", "andreiev", false),
    ("kinetic", "defect_schur", false),
    ("homog", "bounds", true),
    ("homog", "dpt_equivalence", false),
    ("homog", "tempt_falsifier", false),
];

#[derive(Clone, Debug, PartialEq)]
pub struct Job {
    pub name: Option<String>,
    pub module: String,
    pub operation: Operation,
    pub grid: Option<Vec<usize>>,
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteConfig {
    pub jobs: Vec<Job>,
    pub output: Option<String>,
    pub format: Option<ReportFormat>,
    /// Seed for jobs that do not set their own.
    pub seed: u64,
}

fn check_keys(obj: &Map<String, Value>, allowed: &[&str], context: &str) -> Result<()> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::UnknownKey {
            key: k.clone(),
            context: context.into(),
        }),
        None => Ok(()),
    }
}

/// Typed deserialization that reports unknown fields as [`Error::UnknownKey`].
fn typed<T: DeserializeOwned>(v: Value, context: &str) -> Result<T> {
    serde_json::from_value(v).map_err(|e| {
        let msg = e.to_string();
        match msg.strip_prefix("unknown field `").and_then(|r| r.split('`').next()) {
            Some(key) => Error::UnknownKey {
                key: key.into(),
                context: context.into(),
            },
            None => Error::Parse(format!("{context}: {msg}")),
        }
    })
}

fn parse_operation(module: &str, op: &str, params: Value, context: &str) -> Result<Operation> {
    let p = params;
    Ok(match (module, op) {
        ("construct", "field") => Operation::ConstructField(typed(p, context)?),
        ("verify", "periodic") => Operation::VerifyPeriodic(typed(p, context)?),
        ("verify", "convex") => Operation::VerifyConvex(typed(p, context)?),
        ("verify", "gagliardo") => Operation::VerifyGagliardo(typed(p, context)?),
        ("verify", "concavity") => Operation::VerifyConcavity(typed(p, context)?),
        ("verify", "isoperimetric") => Operation::VerifyIsoperimetric(typed(p, context)?),
        ("verify", "compact_mean") => Operation::VerifyCompactMean(typed(p, context)?),
        ("verify", "vanishing_trace") => Operation::VerifyVanishingTrace(typed(p, context)?),
        ("prove", "proof_trace") => Operation::ProveProofTrace(typed(p, context)?),
        ("prove", "nondiv") => Operation::ProveNondiv(typed(p, context)?),
        ("prove", "monge_ampere") => Operation::ProveMongeAmpere(typed(p, context)?),
        ("fluid", "euler") => Operation::FluidEuler(typed(p, context)?),
        ("fluid", "selfsimilar") => Operation::FluidSelfSimilar(typed(p, context)?),
        ("fluid", "relativistic") => Operation::FluidRelativistic(typed(p, context)?),
        ("kinetic", "bgk") => Operation::KineticBgk(typed(p, context)?),
        ("kinetic", "andreiev") => Operation::KineticAndreiev(typed(p, context)?),
        ("kinetic", "defect_schur") => Operation::KineticDefectSchur(typed(p, context)?),
        ("homog", "bounds") => Operation::Homog(HomogMode::Bounds, typed(p, context)?),
        ("homog", "dpt_equivalence") => Operation::Homog(HomogMode::DptEquivalence, typed(p, context)?),
        ("homog", "tempt_falsifier") => Operation::Homog(HomogMode::TemptFalsifier, typed(p, context)?),
        _ => {
            return Err(Error::UnknownOperation {
                module: module.into(),
                operation: op.into(),
            })
        }
    })
}

fn string_field(obj: &Map<String, Value>, key: &str, context: &str) -> Result<String> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(Error::Parse(format!("{context}: `{key}` must be a string"))),
        None => Err(Error::Parse(format!("{context}: missing `{key}`"))),
    }
}

fn parse_job(v: Value, index: usize) -> Result<Job> {
    let context = format!("jobs[{index}]");
    let Value::Object(mut obj) = v else {
        return Err(Error::Parse(format!("{context} must be an object")));
    };
    check_keys(
        &obj,
        &["name", "module", "operation", "parameters", "grid", "tolerance", "seed"],
        &context,
    )?;
    let module = string_field(&obj, "module", &context)?;
    let op = string_field(&obj, "operation", &context)?;
    let params = obj.remove("parameters").unwrap_or(Value::Object(Map::new()));
    let operation = parse_operation(&module, &op, params, &format!("{context}.parameters"))?;
    let opt = |key: &str| obj.get(key).cloned().filter(|v| !v.is_null());
    let name: Option<String> = opt("name").map(|v| typed(v, &context)).transpose()?;
    let grid: Option<Vec<usize>> = opt("grid").map(|v| typed(v, &context)).transpose()?;
    let tolerance: Option<f64> = opt("tolerance").map(|v| typed(v, &context)).transpose()?;
    let seed: Option<u64> = opt("seed").map(|v| typed(v, &context)).transpose()?;
    if let Some(t) = tolerance {
        let accepts = OPERATIONS.iter().any(|(m, o, tol)| *m == module && *o == op && *tol);
        if !accepts {
            return Err(Error::invalid(format!("{context}: `{module}.{op}` has a fixed tolerance")));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::invalid(format!(
                "{context}: tolerance must be finite and non-negative, got {t}"
            )));
        }
    }
    Ok(Job {
        name,
        module,
        operation,
        grid,
        tolerance,
        seed,
    })
}

pub fn parse_config(text: &str) -> Result<SuiteConfig> {
    let v: Value = serde_json::from_str(text).map_err(json_error)?;
    let Value::Object(mut obj) = v else {
        return Err(Error::Parse("suite configuration must be a JSON object".into()));
    };
    check_keys(&obj, &["jobs", "output", "format", "seed"], "suite configuration")?;
    let jobs = match obj.remove("jobs") {
        Some(Value::Array(jobs)) => jobs
            .into_iter()
            .enumerate()
            .map(|(i, j)| parse_job(j, i))
            .collect::<Result<Vec<_>>>()?,
        Some(_) => return Err(Error::Parse("`jobs` must be an array".into())),
        None => return Err(Error::MissingJobs),
    };
    let output: Option<String> = obj.remove("output").map(|v| typed(v, "output")).transpose()?;
    let format: Option<ReportFormat> = obj.remove("format").map(|v| typed(v, "format")).transpose()?;
    let seed: u64 = obj.remove("seed").map(|v| typed(v, "seed")).transpose()?.unwrap_or(0);
    Ok(SuiteConfig {
        jobs,
        output,
        format,
        seed,
    })
}

fn mesh_for(domain: &Option<DomainSpec>, grid: &Option<Vec<usize>>) -> Result<Arc<Mesh>> {
    let shape = match (grid, domain) {
        (Some(g), _) => g.clone(),
        (None, Some(d)) => vec![DEFAULT_GRID; d.dim()],
        (None, None) => vec![DEFAULT_GRID; 2],
    };
    let domain = domain.clone().unwrap_or_else(|| DomainSpec::unit_torus(shape.len()));
    Mesh::new(domain, GridSpec::new(shape))
}

fn build(constructor: &ConstructorSpec, domain: &Option<DomainSpec>, grid: &Option<Vec<usize>>) -> Result<TensorField> {
    constructor.build(&mesh_for(domain, grid)?)
}

/// The tensor field a job works on, if it has one.
pub fn job_field(job: &Job) -> Option<Result<TensorField>> {
    let g = &job.grid;
    match &job.operation {
        Operation::ConstructField(p)
        | Operation::VerifyPeriodic(p)
        | Operation::ProveProofTrace(p)
        | Operation::ProveNondiv(p) => Some(build(&p.constructor, &p.domain, g)),
        Operation::VerifyConvex(p) => Some(build(&p.constructor, &Some(p.domain.clone()), g)),
        Operation::VerifyCompactMean(p) => Some(build(&p.constructor, &p.domain, g)),
        Operation::VerifyVanishingTrace(p) => Some(build(&p.constructor, &Some(p.domain.clone()), g)),
        Operation::Homog(_, p) => p.constructor.as_ref().map(|c| build(c, &p.domain, g)),
        _ => None,
    }
}

fn sample_scalar(mesh: &Arc<Mesh>, f: &TrigPoly) -> ScalarField {
    ScalarField::from_fn(mesh.clone(), |x| f.eval(x))
}

fn sample_vector(mesh: &Arc<Mesh>, v: &[TrigPoly]) -> Result<VectorField> {
    if v.len() != mesh.dim() && v.len() + 1 != mesh.dim() {
        return Err(Error::DimensionMismatch {
            expected: mesh.dim(),
            got: v.len(),
        });
    }
    Ok(VectorField::from_fn(mesh.clone(), |x| v.iter().map(|f| f.eval(x)).collect()))
}

fn rejudge(mut r: CheckReport, tol: Option<f64>) -> CheckReport {
    if let Some(t) = tol {
        r.tolerance = t;
        r.pass = r.lhs <= r.rhs + t;
    }
    r
}

fn run_operation(job: &Job, seed: u64) -> Result<CheckReport> {
    let g = &job.grid;
    let tol = job.tolerance;
    match &job.operation {
        Operation::ConstructField(p) => {
            let f = build(&p.constructor, &p.domain, g)?;
            let mass = divergence_mass(&f)?;
            let min_eig = f.values.iter().map(SymMat::min_eigenvalue).fold(f64::INFINITY, f64::min);
            Ok(
                CheckReport::new(format!("construct_{}", f.tag), mass, 0.0, tol.unwrap_or(DEFAULT_TOL))
                    .with_grid(&f.mesh.grid)
                    .with_extra("divergence_mass", mass)
                    .with_extra("min_eigenvalue", min_eig),
            )
        }
        Operation::VerifyPeriodic(p) => verify_periodic_with(&build(&p.constructor, &p.domain, g)?, tol.unwrap_or(DEFAULT_TOL)),
        Operation::VerifyConvex(p) => verify_convex_with(
            &build(&p.constructor, &Some(p.domain.clone()), g)?,
            p.include_measure,
            tol.unwrap_or(DEFAULT_TOL),
        ),
        Operation::VerifyGagliardo(p) => {
            let mesh = mesh_for(&p.domain, g)?;
            gagliardo_check(&DiagonalSpec { g: p.g.clone() }, &mesh)
        }
        Operation::VerifyConcavity(p) => concavity_threshold_study(p.d, p.segments, seed),
        Operation::VerifyIsoperimetric(p) => isoperimetric_check(&p.domain),
        Operation::VerifyCompactMean(p) => compact_support_mean(&build(&p.constructor, &p.domain, g)?, &p.abar),
        Operation::VerifyVanishingTrace(p) => vanishing_trace_check(&build(&p.constructor, &Some(p.domain.clone()), g)?, p.eps),
        Operation::ProveProofTrace(p) => {
            let f = build(&p.constructor, &p.domain, g)?;
            let t = proof_trace_periodic(&f)?;
            let min_slack = t.slack.values.iter().copied().fold(f64::INFINITY, f64::min);
            Ok(CheckReport::new(
                "proof_trace",
                (t.mean_slack - t.predicted_mean_slack).abs(),
                0.0,
                tol.unwrap_or(DEFAULT_TOL),
            )
            .with_grid(&f.mesh.grid)
            .with_extra("mean_slack", t.mean_slack)
            .with_extra("predicted_mean_slack", t.predicted_mean_slack)
            .with_extra("min_slack", min_slack)
            .with_extra("periodic_gap", t.periodic_gap)
            .with_extra("div_residual", t.div_residual)
            .with_extra("newton_iterations", t.ma.newton_iters as f64))
        }
        Operation::ProveNondiv(p) => nondiv_bound(&build(&p.constructor, &p.domain, g)?),
        Operation::ProveMongeAmpere(p) => {
            let mesh = mesh_for(&None, g)?;
            let f = sample_scalar(&mesh, &p.f);
            let sol = solve_periodic_ma(&f, &p.s)?;
            Ok(CheckReport::new("monge_ampere", sol.residual, 0.0, tol.unwrap_or(MA_TOL))
                .with_grid(&mesh.grid)
                .with_extra("newton_iterations", sol.newton_iters as f64)
                .with_extra("max_gradient", sol.max_gradient()?))
        }
        Operation::FluidEuler(p) => {
            let init = match &p.init {
                FluidInit::GaussianBump { amplitude, width, half } => {
                    FluidState::gaussian_bump(p.eos, *amplitude, *width, *half, p.cells)?
                }
                FluidInit::Sod => FluidState::sod(p.cells)?,
            };
            let diag = flow_invariants(&init)?;
            euler_bound_check(&euler_run_1d(&init, p.t_end, p.cfl)?, &diag)
        }
        Operation::FluidSelfSimilar(p) => {
            let mesh = mesh_for(&Some(p.domain.clone()), g)?;
            selfsimilar_bound_check(
                &sample_scalar(&mesh, &p.rho),
                &sample_vector(&mesh, &p.v)?,
                &sample_scalar(&mesh, &p.p),
            )
        }
        Operation::FluidRelativistic(p) => {
            let mesh = mesh_for(&Some(p.domain.clone()), g)?;
            relativistic_bound_check(&sample_scalar(&mesh, &p.rho), &sample_vector(&mesh, &p.v)?, p.c, p.a)
        }
        Operation::KineticBgk(p) => {
            let beams = p.beams.clone();
            let init = KineticState::from_fn(
                -p.half,
                p.half,
                p.cells,
                uniform_velocity_grid(p.v_max, p.nodes),
                p.tau,
                |y, v| {
                    beams
                        .iter()
                        .map(|b| b.amplitude * (-(y / b.width).powi(2)).exp() * (-(v - b.velocity).powi(2) / b.temperature).exp())
                        .sum()
                },
            )?;
            let diag = kinetic_invariants(&init)?;
            kinetic_bound_check(&bgk_run_1d(&init, p.t_end, p.cfl)?, &diag)
        }
        Operation::KineticAndreiev(p) => {
            let worst = andreiev_random_study(p.n, p.atoms, p.draws, seed)?;
            Ok(CheckReport::new("andreiev_identity", worst, 0.0, 1e-12)
                .with_extra("draws", p.draws as f64)
                .with_extra("atoms", p.atoms as f64))
        }
        Operation::KineticDefectSchur(p) => defect_schur_check(&p.sample, p.count, seed),
        Operation::Homog(mode, p) => {
            let field = match &p.constructor {
                Some(c) => build(c, &p.domain, g)?,
                None if *mode == HomogMode::TemptFalsifier => {
                    TensorField::constant(mesh_for(&p.domain, g)?, &SymMat::identity(2))
                }
                None => return Err(Error::invalid("homogenization needs a constructor")),
            };
            Ok(rejudge(homog_checks(&field, *mode, p.budget, seed)?, tol))
        }
    }
}

/// Runs one job; errors become a failed report carrying the message.
pub fn run_job(job: &Job, default_seed: u64) -> CheckReport {
    let seed = job.seed.unwrap_or(default_seed);
    let mut report = match run_operation(job, seed) {
        Ok(r) => r,
        Err(e) => CheckReport::failed(format!("{}_error", job.module), format!("error: {e}")),
    };
    if let Some(name) = &job.name {
        report.name = name.clone();
    }
    report
}

/// Runs the jobs concurrently on the current rayon pool; reports come back
/// in declaration order.
pub fn run_suite(config: &SuiteConfig) -> Vec<CheckReport> {
    use rayon::prelude::*;
    config.jobs.par_iter().map(|j| run_job(j, config.seed)).collect()
}

pub fn all_passed(reports: &[CheckReport]) -> bool {
    reports.iter().all(|r| r.pass)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const CSV_HEADER: &str = "name,lhs,rhs,slack,pass,resolution,tolerance";

pub fn emit_report(reports: &[CheckReport], format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(reports).expect("reports serialize to JSON");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut s = String::from(CSV_HEADER);
            s.push('\n');
            for r in reports {
                let res: Vec<String> = r.resolution.iter().map(|n| n.to_string()).collect();
                s.push_str(&format!(
                    "{},{:.16e},{:.16e},{:.16e},{},{},{:.16e}\n",
                    csv_field(&r.name),
                    r.lhs,
                    r.rhs,
                    r.slack,
                    r.pass,
                    res.join("x"),
                    r.tolerance
                ));
            }
            s
        }
    }
}

pub fn parse_reports(text: &str) -> Result<Vec<CheckReport>> {
    serde_json::from_str(text).map_err(json_error)
}

//! Divergence-free positive symmetric tensors (DPT): constructors, determinant
//! inequalities, a periodic Monge–Ampère prover, and fluid, kinetic and
//! homogenization estimates built on them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// index loops mirror the formulas they implement
#![allow(clippy::needless_range_loop)]

pub mod calculus;
pub mod constructors;
pub mod domain;
pub mod error;
pub mod field;
pub mod fluid;
pub mod hexfloat;
pub mod homog;
pub mod inequality;
pub mod io;
pub mod kinetic;
pub mod quadrature;
pub mod report;
pub mod spectral;
pub mod suite;
pub mod sym;
pub mod transport;

pub use calculus::{boundary_trace_norm, discrete_divergence, divergence_mass, DerivativeMethod};
pub use domain::{DomainSpec, GridSpec, Halfspace, Mesh};
pub use error::{Error, Result};
pub use field::{congruence, field_average, ScalarField, TensorField, VectorField};
pub use homog::{effective_tensor, homog_checks, HomogMode};
pub use report::CheckReport;
pub use suite::{emit_report, parse_config, run_suite, ReportFormat, SuiteConfig};
pub use sym::{cofactor, det_power, psd_check, SymMat, PSD_TOL};

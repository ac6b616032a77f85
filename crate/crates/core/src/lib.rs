//! Variable-metric forward–backward–forward splitting for monotone
//! inclusions in finite-dimensional real Hilbert spaces.
//!
//! The solver finds `x` with `0 ∈ Ax + Bx`, where `A` is maximally monotone
//! and accessed only through its resolvent and `B` is monotone and
//! Lipschitzian. Metrics are diagonal and may change between iterations.
//! A structured primal–dual instance reduces to the same iteration on a
//! product space.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fbf;
pub mod linear;
pub mod metric;
pub mod operators;
pub mod point;
pub mod primal_dual;
pub mod resolvent;
pub mod vi;

pub use error::{Error, Result};
pub use fbf::{
    fbf_solve, fbf_step, fejer_certificate, gamma_bounds, summability_certificate, ErrorSchedule,
    ErrorSequence, FbfConfig, FbfProblem, FbfStep, FejerCertificate, GammaInterval, GammaRule,
    IterateTrace, IterationRecord, RunStatus, SummabilityCertificate,
};
pub use linear::{operator_norm, LinearMap, NormEstimate};
pub use metric::{
    loewner_geq, metric_inner, metric_norm, schedule_validate, DiagonalMetric, MetricSchedule,
    ValidationReport, Violation, ViolationKind,
};
pub use operators::{monotonicity_probe, AffineMap, FnMap, LipschitzMonotoneMap, ProbeReport};
pub use point::Point;
pub use primal_dual::{
    assemble_product, beta_compute, equivalence_check, kkt_residual, pd_solve, pd_step, DualBlock,
    EquivalenceReport, PdConfig, PdErrors, PdOutcome, PdState, PdStep, StructuredProblem,
};
pub use resolvent::{
    inverse_resolvent_scaled, resolvent_scaled, soft_threshold, ProxCatalogEntry,
    ResolventOracle, ScalarMonotone,
};
pub use vi::{vi_check, vi_solve, ViCheck, ViOutcome};

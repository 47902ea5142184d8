//! Continuation-based differential IK.
//!
//! Each control step builds, per limb segment, a family of QPs whose target
//! displacement is `α_j e(q)`, solves them against one shared factorisation,
//! accepts candidates that pass the Lyapunov progress certificate on the
//! final-goal error and applies the largest accepted `α`. Segment
//! increments are composed with averaging on shared joints.

mod certificate;
mod config;
mod continuation;
mod controller;
mod qp;
mod segments;
mod task;

pub use certificate::{
    certify, lyapunov_value, predicted_lyapunov, select_candidate, CertificateParams,
};
pub use config::{ControllerConfig, GridConfig, SegmentConfig};
pub use continuation::{continuation_targets, ContinuationGrid, GridMode};
pub use controller::{
    control_step, task_jacobian, CandidateDiagnostics, Controller, SegmentAction,
    SegmentDiagnostics, StepFlags, StepResult,
};
pub use qp::{build_candidate_qp, SegmentQp};
pub use segments::SegmentEmbedding;
pub use task::{TaskSpec, TaskTarget};

/// Joint-name-free composition entry point.
pub fn compose_segments(
    parts: &[nalgebra::DVector<f64>],
    embedding: &SegmentEmbedding,
) -> crate::Result<nalgebra::DVector<f64>> {
    embedding.compose(parts)
}

//! Continuation-based parallel differential inverse kinematics.
//!
//! The crate is organised bottom-up:
//!
//! * [`rigidbody`]: kinematic model, model-file loader, forward kinematics
//!   and point Jacobians for a fixed-base upper body.
//! * [`perception`]: keypoint filtering, demonstrator selection and command
//!   scaling.
//! * [`safety`]: sphere-based self-collision barrier functions and their
//!   linearised constraint rows.
//! * [`qpsolve`]: dense ADMM solver for box/inequality constrained QPs,
//!   batched evaluation with a shared factorisation, and an exact
//!   active-set enumeration solver used as a reference.
//! * [`retarget`]: the continuation family of per-segment QPs, the
//!   Lyapunov progress certificate, largest-α selection and segment
//!   composition.
//! * [`baselines`]: global Gauss-Newton SQP IK and single-shot differential IK.
//! * [`harness`]: closed-loop ablation trials, failure detectors, reports and
//!   the escape-probability Monte Carlo.

// Negated comparisons reject NaN parameters along with out-of-range ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod harness;
pub mod models;
pub mod perception;
pub mod qpsolve;
pub mod retarget;
pub mod rigidbody;
pub mod safety;

pub use error::{Error, Result};
pub use nalgebra::{DMatrix, DVector, Matrix3, Matrix3xX, Vector3};
pub use qpsolve::{QpProblem, QpSettings, QpSolution, QpStatus};
pub use retarget::{
    CertificateParams, ContinuationGrid, Controller, ControllerConfig, StepResult, TaskSpec,
    TaskTarget,
};
pub use rigidbody::{
    forward_kinematics, load_model, point_jacobian, JointVector, Pose, RobotModel,
};
pub use safety::{CbfPair, CbfRow, CollisionSphere};

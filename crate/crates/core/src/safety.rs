//! Sphere-based self-collision barrier functions.
//!
//! For a tracked point `x` and a body sphere with center `c`, the barrier is
//! `h = |x - c|^2 - rho^2` with `rho = R + r + m` (sphere radius, limb
//! thickness, safety margin). Safety means `h >= 0`. Linearised at `q`, the
//! discrete-time barrier condition for an increment `dq` reads
//! `grad_h(q)^T dq >= -gamma * h(q)`.

use nalgebra::{DVector, Vector3};

use crate::rigidbody::{KinematicState, RobotModel};
use crate::{Error, Result};

/// Bounding sphere attached to a joint (or the base).
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionSphere {
    pub name: String,
    pub parent_joint: Option<usize>,
    pub offset: Vector3<f64>,
    pub radius: f64,
}

/// A tracked frame checked against one sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct CbfPair {
    pub frame: String,
    pub sphere: String,
    pub limb_radius: f64,
    pub margin: f64,
}

/// One linearised barrier constraint `gradient^T dq >= bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct CbfRow {
    pub gradient: DVector<f64>,
    pub bound: f64,
    pub h: f64,
    /// Tracked point coincides with the sphere center; the gradient is zero.
    pub degenerate: bool,
}

impl CbfRow {
    pub fn satisfied_by(&self, dq: &DVector<f64>, tol: f64) -> bool {
        self.gradient.dot(dq) >= self.bound - tol
    }
}

pub const DEFAULT_GAMMA: f64 = 0.5;

struct Resolved {
    frame: usize,
    sphere: usize,
    rho: f64,
}

fn resolve(model: &RobotModel, pair: &CbfPair) -> Result<Resolved> {
    let frame = model.frame_index(&pair.frame)?;
    let sphere = model.sphere_index(&pair.sphere)?;
    let rho = model.spheres()[sphere].radius + pair.limb_radius + pair.margin;
    Ok(Resolved { frame, sphere, rho })
}

/// Barrier value at a precomputed kinematic state.
pub fn barrier_at(model: &RobotModel, state: &KinematicState, pair: &CbfPair) -> Result<f64> {
    let r = resolve(model, pair)?;
    let d = state.frame_position(model, r.frame) - state.sphere_center(model, r.sphere);
    Ok(d.norm_squared() - r.rho * r.rho)
}

/// Barrier value and gradient at a precomputed kinematic state.
pub fn barrier_and_gradient_at(
    model: &RobotModel,
    state: &KinematicState,
    pair: &CbfPair,
) -> Result<(f64, DVector<f64>)> {
    let r = resolve(model, pair)?;
    let x = state.frame_position(model, r.frame);
    let c = state.sphere_center(model, r.sphere);
    let d = x - c;
    let h = d.norm_squared() - r.rho * r.rho;

    let frame_parent = model.frames()[r.frame].parent_joint;
    let sphere_parent = model.spheres()[r.sphere].parent_joint;
    let mut jac = state.point_jacobian(model, frame_parent, &x);
    if sphere_parent.is_some() {
        jac -= state.point_jacobian(model, sphere_parent, &c);
    }
    let grad = jac.tr_mul(&DVector::from_column_slice((2.0 * d).as_slice()));
    Ok((h, grad))
}

pub fn cbf_value(model: &RobotModel, q: &DVector<f64>, pair: &CbfPair) -> Result<f64> {
    let state = model.kinematics(q)?;
    barrier_at(model, &state, pair)
}

pub fn cbf_gradient(model: &RobotModel, q: &DVector<f64>, pair: &CbfPair) -> Result<DVector<f64>> {
    let state = model.kinematics(q)?;
    Ok(barrier_and_gradient_at(model, &state, pair)?.1)
}

/// One constraint row per pair, in pair order.
pub fn build_cbf_rows(
    model: &RobotModel,
    q: &DVector<f64>,
    pairs: &[CbfPair],
    gamma: f64,
) -> Result<Vec<CbfRow>> {
    let state = model.kinematics(q)?;
    rows_at(model, &state, pairs, gamma)
}

pub fn rows_at(
    model: &RobotModel,
    state: &KinematicState,
    pairs: &[CbfPair],
    gamma: f64,
) -> Result<Vec<CbfRow>> {
    if !(gamma > 0.0) {
        return Err(Error::Config(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    pairs
        .iter()
        .map(|pair| {
            let (h, gradient) = barrier_and_gradient_at(model, state, pair)?;
            let degenerate = gradient.iter().all(|&g| g == 0.0);
            Ok(CbfRow {
                gradient,
                bound: -gamma * h,
                h,
                degenerate,
            })
        })
        .collect()
}

/// Barrier values of every pair declared in the model.
pub fn model_barriers(model: &RobotModel, q: &DVector<f64>) -> Result<Vec<f64>> {
    let state = model.kinematics(q)?;
    model
        .cbf_pairs()
        .iter()
        .map(|p| barrier_at(model, &state, p))
        .collect()
}

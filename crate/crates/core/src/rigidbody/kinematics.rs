use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Vector3};

use super::{Pose, RobotModel};
use crate::{Error, Result};

/// World poses of every joint frame at one configuration.
///
/// Computed once per configuration and shared by all frame, sphere and
/// Jacobian queries at that configuration.
#[derive(Debug, Clone)]
pub struct KinematicState {
    joint_world: Vec<Pose>,
}

impl KinematicState {
    pub fn new(model: &RobotModel, q: &DVector<f64>) -> Result<Self> {
        model.check_dim(q)?;
        let mut joint_world: Vec<Pose> = Vec::with_capacity(model.dof());
        for (i, joint) in model.joints().iter().enumerate() {
            let parent = match joint.parent {
                Some(p) => joint_world[p],
                None => Pose::identity(),
            };
            let mut pose = parent.compose(&joint.origin);
            pose.rotation *= Pose::rotation_about(&joint.axis, q[i]);
            joint_world.push(pose);
        }
        Ok(Self { joint_world })
    }

    pub fn joint_pose(&self, joint: usize) -> &Pose {
        &self.joint_world[joint]
    }

    /// World position of a point given in the local frame of `body`.
    pub fn body_point(&self, body: Option<usize>, local: &Vector3<f64>) -> Vector3<f64> {
        match body {
            Some(j) => self.joint_world[j].transform_point(local),
            None => *local,
        }
    }

    pub fn frame_pose(&self, model: &RobotModel, frame: usize) -> Pose {
        let spec = &model.frames()[frame];
        let local = Pose::from_translation(spec.offset);
        match spec.parent_joint {
            Some(j) => self.joint_world[j].compose(&local),
            None => local,
        }
    }

    pub fn frame_position(&self, model: &RobotModel, frame: usize) -> Vector3<f64> {
        let spec = &model.frames()[frame];
        self.body_point(spec.parent_joint, &spec.offset)
    }

    pub fn sphere_center(&self, model: &RobotModel, sphere: usize) -> Vector3<f64> {
        let spec = &model.spheres()[sphere];
        self.body_point(spec.parent_joint, &spec.offset)
    }

    /// Position Jacobian (3 × dof) of a world point rigidly attached to `body`.
    pub fn point_jacobian(
        &self,
        model: &RobotModel,
        body: Option<usize>,
        point: &Vector3<f64>,
    ) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(3, model.dof());
        if let Some(b) = body {
            for a in model.chain(Some(b)) {
                let pose = &self.joint_world[a];
                let axis = pose.rotation * model.joints()[a].axis.into_inner();
                let col = axis.cross(&(point - pose.translation));
                jac.fixed_view_mut::<3, 1>(0, a).copy_from(&col);
            }
        }
        jac
    }

    pub fn frame_jacobian(&self, model: &RobotModel, frame: usize) -> DMatrix<f64> {
        let spec = &model.frames()[frame];
        let p = self.frame_position(model, frame);
        self.point_jacobian(model, spec.parent_joint, &p)
    }

    pub fn sphere_jacobian(&self, model: &RobotModel, sphere: usize) -> DMatrix<f64> {
        let spec = &model.spheres()[sphere];
        let c = self.sphere_center(model, sphere);
        self.point_jacobian(model, spec.parent_joint, &c)
    }
}

/// World pose of every named frame.
pub fn forward_kinematics(model: &RobotModel, q: &DVector<f64>) -> Result<BTreeMap<String, Pose>> {
    let state = KinematicState::new(model, q)?;
    Ok(model
        .frames()
        .iter()
        .enumerate()
        .map(|(i, f)| (f.name.clone(), state.frame_pose(model, i)))
        .collect())
}

/// Position Jacobian of a named frame origin with respect to all joints.
pub fn point_jacobian(model: &RobotModel, q: &DVector<f64>, frame: &str) -> Result<DMatrix<f64>> {
    let idx = model.frame_index(frame)?;
    let state = KinematicState::new(model, q)?;
    Ok(state.frame_jacobian(model, idx))
}

/// Smallest singular value of `jac`; `0.0` for an empty or zero matrix.
pub fn min_singular_value(jac: &DMatrix<f64>) -> f64 {
    if jac.is_empty() {
        return 0.0;
    }
    let svd = jac.clone().svd(false, false);
    svd.singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
        .max(0.0)
}

impl RobotModel {
    pub fn kinematics(&self, q: &DVector<f64>) -> Result<KinematicState> {
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel(
                "configuration has non-finite entries".into(),
            ));
        }
        KinematicState::new(self, q)
    }
}

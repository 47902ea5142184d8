//! Fixed-base kinematic trees of revolute joints.

mod kinematics;
mod model;
mod parse;
mod pose;

pub use kinematics::{forward_kinematics, min_singular_value, point_jacobian, KinematicState};
pub use model::{FrameSpec, JointSpec, RobotModel};
pub use parse::load_model;
pub use pose::Pose;

use nalgebra::DVector;

/// Joint configuration (radians) or per-step increment (radians per step).
pub type JointVector = DVector<f64>;

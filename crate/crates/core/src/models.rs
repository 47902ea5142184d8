//! Bundled robot descriptions used by tests, benchmarks and the CLI.

use nalgebra::DVector;

use crate::harness::{TrialConfig, Variant};
use crate::retarget::{ControllerConfig, SegmentConfig};
use crate::rigidbody::{load_model, RobotModel};
use crate::Result;

pub const PLANAR_2R: &str = include_str!("../../../models/planar2r.model");
pub const ARM7: &str = include_str!("../../../models/arm7.model");
pub const TWO_BRANCH: &str = include_str!("../../../models/two_branch.model");
pub const DESK_DUAL_ARM: &str = include_str!("../../../models/desk_dual_arm.model");

/// Arm joint suffixes in chain order.
pub const ARM_JOINTS: [&str; 7] = [
    "shoulder_pitch",
    "shoulder_roll",
    "shoulder_yaw",
    "elbow",
    "wrist_yaw",
    "wrist_pitch",
    "wrist_roll",
];

pub fn planar_2r() -> RobotModel {
    load_model(PLANAR_2R).expect("bundled model parses")
}

pub fn arm7() -> RobotModel {
    load_model(ARM7).expect("bundled model parses")
}

pub fn two_branch() -> RobotModel {
    load_model(TWO_BRANCH).expect("bundled model parses")
}

pub fn desk_dual_arm() -> RobotModel {
    load_model(DESK_DUAL_ARM).expect("bundled model parses")
}

/// Left and right segments, each holding the torso joint and one arm.
pub fn dual_arm_segments() -> Vec<SegmentConfig> {
    ["l", "r"]
        .iter()
        .map(|side| SegmentConfig {
            name: if *side == "l" {
                "left".into()
            } else {
                "right".into()
            },
            joints: std::iter::once("torso_yaw".to_string())
                .chain(ARM_JOINTS.iter().map(|j| format!("{side}_{j}")))
                .collect(),
        })
        .collect()
}

/// Distributed controller configuration for the dual-arm model.
pub fn dual_arm_config() -> ControllerConfig {
    ControllerConfig {
        segments: dual_arm_segments(),
        ..ControllerConfig::default()
    }
}

/// Lyapunov weight that expresses `V` in squared millimetres.
pub const LYAPUNOV_MM: f64 = 1e6;

/// Frames tracked in the dual-arm ablation.
pub const DESK_HANDS: [&str; 2] = ["l_hand", "r_hand"];

/// Ablation trial settings for the dual-arm model: both hands tracked,
/// distributed segments, starting from the ready pose, certificate
/// evaluated in millimetres.
pub fn desk_trial_template(model: &RobotModel, variant: Variant) -> Result<TrialConfig> {
    Ok(TrialConfig::new(
        variant,
        0,
        dual_arm_config(),
        DESK_HANDS.iter().map(|s| s.to_string()).collect(),
        dual_arm_ready_pose(model)?,
    )
    .with_lyapunov_weight(LYAPUNOV_MM))
}

/// Elbows bent, hands in front of the torso.
pub fn dual_arm_ready_pose(model: &RobotModel) -> Result<DVector<f64>> {
    let mut q = model.neutral();
    for (side, s) in [("l", 1.0), ("r", -1.0)] {
        for (joint, value) in [
            ("shoulder_pitch", -0.35),
            ("shoulder_roll", 0.15 * s),
            ("shoulder_yaw", -0.9 * s),
            ("elbow", -1.6),
            ("wrist_pitch", 0.2),
        ] {
            q[model.joint_index(&format!("{side}_{joint}"))?] = value;
        }
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::safety::model_barriers;

    #[test]
    fn bundled_models_load() {
        assert_eq!(planar_2r().dof(), 2);
        assert_eq!(arm7().dof(), 7);
        assert_eq!(two_branch().dof(), 2);
        let desk = desk_dual_arm();
        assert_eq!(desk.dof(), 15);
        assert_eq!(desk.cbf_pairs().len(), 12);
        assert_eq!(dual_arm_segments()[0].joints.len(), 8);
    }

    #[test]
    fn ready_pose_is_safe() {
        let model = desk_dual_arm();
        let q = dual_arm_ready_pose(&model).unwrap();
        assert!(model.within_limits(&q));
        assert!(model_barriers(&model, &q).unwrap().iter().all(|&h| h > 0.0));
    }
}

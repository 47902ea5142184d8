use nalgebra::{DVector, Unit, Vector3};

use super::Pose;
use crate::safety::{CbfPair, CollisionSphere};
use crate::{Error, Result};

/// A revolute joint. `parent == None` attaches the joint to the fixed base.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSpec {
    pub name: String,
    pub parent: Option<usize>,
    pub axis: Unit<Vector3<f64>>,
    /// Fixed transform from the parent joint frame to this joint's frame at
    /// zero angle.
    pub origin: Pose,
    pub lower: f64,
    pub upper: f64,
    pub velocity_limit: f64,
}

/// A named point rigidly attached to a joint (or the base).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSpec {
    pub name: String,
    pub parent_joint: Option<usize>,
    pub offset: Vector3<f64>,
}

/// Immutable, validated kinematic tree.
#[derive(Debug, Clone)]
pub struct RobotModel {
    joints: Vec<JointSpec>,
    frames: Vec<FrameSpec>,
    spheres: Vec<CollisionSphere>,
    cbf_pairs: Vec<CbfPair>,
    /// `support[j][a]` is true when joint `a` moves joint `j` (a is `j` or one
    /// of its ancestors).
    support: Vec<Vec<bool>>,
}

impl RobotModel {
    pub fn new(
        joints: Vec<JointSpec>,
        frames: Vec<FrameSpec>,
        spheres: Vec<CollisionSphere>,
        cbf_pairs: Vec<CbfPair>,
    ) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::InvalidModel("model has no joints".into()));
        }
        for (i, j) in joints.iter().enumerate() {
            if let Some(p) = j.parent {
                if p >= i {
                    return Err(Error::Topology {
                        joint: j.name.clone(),
                        message: format!("parent index {p} is not before own index {i}"),
                    });
                }
            }
            if (j.axis.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidModel(format!(
                    "joint `{}` axis is not unit",
                    j.name
                )));
            }
            if !(j.lower < j.upper) {
                return Err(Error::Limits {
                    joint: j.name.clone(),
                    lower: j.lower,
                    upper: j.upper,
                });
            }
            if !(j.velocity_limit > 0.0) || !j.velocity_limit.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "joint `{}` velocity limit must be positive",
                    j.name
                )));
            }
            if !j.origin.is_rigid(1e-9) {
                return Err(Error::InvalidModel(format!(
                    "joint `{}` origin is not rigid",
                    j.name
                )));
            }
            if joints[..i].iter().any(|other| other.name == j.name) {
                return Err(Error::InvalidModel(format!("duplicate joint `{}`", j.name)));
            }
        }
        let n = joints.len();
        let check_parent = |what: &str, name: &str, parent: Option<usize>| -> Result<()> {
            match parent {
                Some(p) if p >= n => Err(Error::InvalidModel(format!(
                    "{what} `{name}` references missing joint {p}"
                ))),
                _ => Ok(()),
            }
        };
        for (i, f) in frames.iter().enumerate() {
            check_parent("frame", &f.name, f.parent_joint)?;
            if !f.offset.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "frame `{}` offset not finite",
                    f.name
                )));
            }
            if frames[..i].iter().any(|o| o.name == f.name) {
                return Err(Error::InvalidModel(format!("duplicate frame `{}`", f.name)));
            }
        }
        for (i, s) in spheres.iter().enumerate() {
            check_parent("sphere", &s.name, s.parent_joint)?;
            if !(s.radius > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "sphere `{}` radius must be positive",
                    s.name
                )));
            }
            if spheres[..i].iter().any(|o| o.name == s.name) {
                return Err(Error::InvalidModel(format!(
                    "duplicate sphere `{}`",
                    s.name
                )));
            }
        }

        let mut support = vec![vec![false; n]; n];
        for j in 0..n {
            if let Some(p) = joints[j].parent {
                let (head, tail) = support.split_at_mut(j);
                tail[0].copy_from_slice(&head[p]);
            }
            support[j][j] = true;
        }

        let model = Self {
            joints,
            frames,
            spheres,
            cbf_pairs,
            support,
        };
        for pair in &model.cbf_pairs {
            let sphere = model.sphere_index(&pair.sphere)?;
            model.frame_index(&pair.frame)?;
            if pair.limb_radius < 0.0 || pair.margin < 0.0 {
                return Err(Error::InvalidModel(format!(
                    "cbf pair `{}`/`{}` has negative radius or margin",
                    pair.frame, pair.sphere
                )));
            }
            if model.spheres[sphere].radius + pair.limb_radius + pair.margin <= 0.0 {
                return Err(Error::InvalidModel("cbf pair has non-positive rho".into()));
            }
        }
        Ok(model)
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn frames(&self) -> &[FrameSpec] {
        &self.frames
    }

    pub fn spheres(&self) -> &[CollisionSphere] {
        &self.spheres
    }

    pub fn cbf_pairs(&self) -> &[CbfPair] {
        &self.cbf_pairs
    }

    pub fn joint_index(&self, name: &str) -> Result<usize> {
        self.joints
            .iter()
            .position(|j| j.name == name)
            .ok_or_else(|| Error::UnknownJoint(name.to_string()))
    }

    pub fn frame_index(&self, name: &str) -> Result<usize> {
        self.frames
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| Error::UnknownFrame(name.to_string()))
    }

    pub fn sphere_index(&self, name: &str) -> Result<usize> {
        self.spheres
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| Error::UnknownSphere(name.to_string()))
    }

    pub fn frame(&self, name: &str) -> Result<&FrameSpec> {
        Ok(&self.frames[self.frame_index(name)?])
    }

    /// True when `joint` moves points attached to `body` (`None` = base).
    pub fn moves(&self, joint: usize, body: Option<usize>) -> bool {
        body.is_some_and(|b| self.support[b][joint])
    }

    /// Joints that move points attached to `body`, root first.
    pub fn chain(&self, body: Option<usize>) -> Vec<usize> {
        match body {
            None => Vec::new(),
            Some(b) => (0..=b).filter(|&a| self.support[b][a]).collect(),
        }
    }

    pub fn lower_limits(&self) -> DVector<f64> {
        DVector::from_iterator(self.dof(), self.joints.iter().map(|j| j.lower))
    }

    pub fn upper_limits(&self) -> DVector<f64> {
        DVector::from_iterator(self.dof(), self.joints.iter().map(|j| j.upper))
    }

    pub fn velocity_limits(&self) -> DVector<f64> {
        DVector::from_iterator(self.dof(), self.joints.iter().map(|j| j.velocity_limit))
    }

    /// Mid-range configuration.
    pub fn neutral(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.dof(),
            self.joints.iter().map(|j| 0.5 * (j.lower + j.upper)),
        )
    }

    pub fn within_limits(&self, q: &DVector<f64>) -> bool {
        q.len() == self.dof()
            && self
                .joints
                .iter()
                .zip(q.iter())
                .all(|(j, &v)| v >= j.lower && v <= j.upper)
    }

    pub fn check_dim(&self, q: &DVector<f64>) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::DimensionMismatch {
                expected: self.dof(),
                found: q.len(),
            });
        }
        Ok(())
    }
}

use nalgebra::{DMatrix, DVector, Vector3};

use crate::rigidbody::{KinematicState, RobotModel};
use crate::{Error, Result};

/// Desired world position of one named frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskTarget {
    pub frame: String,
    pub position: Vector3<f64>,
    /// Diagonal block of `W_x` (the same weight on all three axes).
    pub weight: f64,
    /// Block of the Lyapunov weight `W`; `None` uses `weight`.
    pub lyapunov_weight: Option<f64>,
}

impl TaskTarget {
    pub fn new(frame: impl Into<String>, position: Vector3<f64>) -> Self {
        Self {
            frame: frame.into(),
            position,
            weight: 1.0,
            lyapunov_weight: None,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }
}

/// Position targets; the task vector stacks their coordinates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TaskSpec {
    pub targets: Vec<TaskTarget>,
}

impl TaskSpec {
    pub fn new(targets: Vec<TaskTarget>) -> Self {
        Self { targets }
    }

    pub fn dim(&self) -> usize {
        3 * self.targets.len()
    }

    /// Frame index of every target; checks weights.
    pub fn resolve(&self, model: &RobotModel) -> Result<Vec<usize>> {
        self.targets
            .iter()
            .map(|t| {
                let w = t.lyapunov_weight.unwrap_or(t.weight);
                if !(t.weight > 0.0 && w > 0.0 && t.weight.is_finite() && w.is_finite()) {
                    return Err(Error::Config(format!(
                        "target {}: weights must be positive",
                        t.frame
                    )));
                }
                if t.position.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config(format!(
                        "target {}: non-finite position",
                        t.frame
                    )));
                }
                model.frame_index(&t.frame)
            })
            .collect()
    }

    /// Current task vector `x(q)`.
    pub fn positions(
        &self,
        model: &RobotModel,
        state: &KinematicState,
        frames: &[usize],
    ) -> DVector<f64> {
        let mut x = DVector::zeros(self.dim());
        for (i, &f) in frames.iter().enumerate() {
            x.fixed_rows_mut::<3>(3 * i)
                .copy_from(&state.frame_position(model, f));
        }
        x
    }

    /// Desired task vector `x_d`.
    pub fn desired(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.dim());
        for (i, t) in self.targets.iter().enumerate() {
            x.fixed_rows_mut::<3>(3 * i).copy_from(&t.position);
        }
        x
    }

    /// `e(q) = x_d − x(q)`.
    pub fn error(
        &self,
        model: &RobotModel,
        state: &KinematicState,
        frames: &[usize],
    ) -> DVector<f64> {
        self.desired() - self.positions(model, state, frames)
    }

    /// Stacked `3n × dof` task Jacobian.
    pub fn jacobian(
        &self,
        model: &RobotModel,
        state: &KinematicState,
        frames: &[usize],
    ) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.dim(), model.dof());
        for (i, &f) in frames.iter().enumerate() {
            jac.rows_mut(3 * i, 3)
                .copy_from(&state.frame_jacobian(model, f));
        }
        jac
    }

    /// Diagonal of `W_x`.
    pub fn task_weights(&self) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.targets.iter().flat_map(|t| [t.weight; 3]))
    }

    /// Diagonal of the Lyapunov weight `W`.
    pub fn lyapunov_weights(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.targets
                .iter()
                .flat_map(|t| [t.lyapunov_weight.unwrap_or(t.weight); 3]),
        )
    }

    /// Euclidean error of each target.
    pub fn target_errors(&self, model: &RobotModel, q: &DVector<f64>) -> Result<Vec<f64>> {
        let frames = self.resolve(model)?;
        let state = model.kinematics(q)?;
        Ok(frames
            .iter()
            .zip(&self.targets)
            .map(|(&f, t)| (t.position - state.frame_position(model, f)).norm())
            .collect())
    }
}

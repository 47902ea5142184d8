//! Comparison methods: global Gauss-Newton SQP on the regularised nonlinear
//! objective and single-shot differential IK.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::qpsolve::{solve, QpSettings, QpSolution};
use crate::retarget::{Controller, ControllerConfig, SegmentQp, StepResult, TaskSpec};
use crate::rigidbody::RobotModel;
use crate::safety::rows_at;
use crate::{Error, Result};

/// Weights of the global objective
/// `F(q) = ½‖x(q) − x_d‖²_{W_x} + ½ w_q‖q − q_ref‖²`.
/// `W_x` comes from the task target weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveWeights {
    pub w_q: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self { w_q: 1e-4 }
    }
}

pub fn objective_f(
    model: &RobotModel,
    q: &DVector<f64>,
    task: &TaskSpec,
    q_ref: &DVector<f64>,
    weights: &ObjectiveWeights,
) -> Result<f64> {
    model.check_dim(q_ref)?;
    let frames = task.resolve(model)?;
    let state = model.kinematics(q)?;
    let e = task.error(model, &state, &frames);
    let w = task.task_weights();
    let task_term: f64 = e.iter().zip(w.iter()).map(|(v, wi)| wi * v * v).sum();
    Ok(0.5 * task_term + 0.5 * weights.w_q * (q - q_ref).norm_squared())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SqpSettings {
    pub max_outer_iter: usize,
    /// Backtracking shrink factor in (0, 1).
    pub shrink: f64,
    /// Armijo sufficient-decrease constant in (0, 1).
    pub armijo: f64,
    /// Stop when the subproblem step falls below this infinity norm.
    pub convergence_tol: f64,
    /// Smallest step length tried before the line search gives up.
    pub t_min: f64,
    pub t_max: f64,
    /// Per-joint trust region on the subproblem step.
    pub max_joint_step: f64,
    /// Levenberg damping added to the Gauss-Newton Hessian.
    pub damping: f64,
    pub gamma: f64,
    pub cbf: bool,
    pub weights: ObjectiveWeights,
    pub solver: QpSettings,
}

impl Default for SqpSettings {
    fn default() -> Self {
        Self {
            max_outer_iter: 100,
            shrink: 0.5,
            armijo: 1e-4,
            convergence_tol: 1e-9,
            t_min: 1e-6,
            t_max: 1.0,
            max_joint_step: 0.5,
            damping: 1e-6,
            gamma: crate::safety::DEFAULT_GAMMA,
            cbf: true,
            weights: ObjectiveWeights::default(),
            solver: QpSettings::precise(),
        }
    }
}

impl SqpSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::Config("shrink must lie in (0, 1)".into()));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(Error::Config("armijo constant must lie in (0, 1)".into()));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::Config("convergence_tol must be positive".into()));
        }
        if !(self.t_min > 0.0 && self.t_min <= self.t_max && self.t_max <= 1.0) {
            return Err(Error::Config(
                "step bounds must satisfy 0 < t_min <= t_max <= 1".into(),
            ));
        }
        if !(self.max_joint_step > 0.0) || !(self.damping >= 0.0) || !(self.weights.w_q >= 0.0) {
            return Err(Error::Config(
                "trust region, damping and w_q must be non-negative".into(),
            ));
        }
        if self.weights.w_q + self.damping <= 0.0 {
            return Err(Error::Config("w_q + damping must be positive".into()));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalIkResult {
    pub q_star: DVector<f64>,
    pub f_final: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value at every accepted iterate, starting with `q0`.
    pub f_history: Vec<f64>,
    pub q_history: Vec<DVector<f64>>,
}

/// Constrained Gauss-Newton iteration with Armijo backtracking on `F`.
/// Joint limits and (optionally) the model's barrier rows are hard
/// constraints of every subproblem.
pub fn global_ik_sqp(
    model: &RobotModel,
    task: &TaskSpec,
    q0: &DVector<f64>,
    q_ref: &DVector<f64>,
    settings: &SqpSettings,
) -> Result<GlobalIkResult> {
    settings.validate()?;
    model.check_dim(q0)?;
    let frames = task.resolve(model)?;
    let weights = settings.weights;
    let joints: Vec<usize> = (0..model.dof()).collect();
    let trust = DVector::from_element(model.dof(), settings.max_joint_step);
    let w_x = task.task_weights();

    let mut q = q0.clone();
    let mut f = objective_f(model, &q, task, q_ref, &weights)?;
    let mut f_history = vec![f];
    let mut q_history = vec![q.clone()];
    let mut warm: Option<QpSolution> = None;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < settings.max_outer_iter {
        let state = model.kinematics(&q)?;
        let e = task.error(model, &state, &frames);
        let jac = task.jacobian(model, &state, &frames);
        let rows = if settings.cbf {
            rows_at(model, &state, model.cbf_pairs(), settings.gamma)?
        } else {
            Vec::new()
        };
        let sq = SegmentQp::new(
            model,
            &q,
            &joints,
            &jac,
            &w_x,
            weights.w_q + settings.damping,
            &rows,
            Some(&trust),
        )?;
        let mut problem = sq.problem(&e)?;
        // ∇F = −Jᵀ W e + w_q (q − q_ref)
        problem.g += (&q - q_ref) * weights.w_q;
        let grad = problem.g.clone();
        let sol = solve(&problem, &settings.solver, warm.as_ref())?;
        if !sol.is_usable() {
            break;
        }
        let dq = sol.z.clone();
        warm = Some(sol);
        if dq.amax() < settings.convergence_tol {
            converged = true;
            break;
        }
        let slope = grad.dot(&dq);
        if slope >= 0.0 {
            converged = true;
            break;
        }
        let mut t = settings.t_max;
        let mut accepted = None;
        while t >= settings.t_min {
            let trial = &q + &dq * t;
            let ft = objective_f(model, &trial, task, q_ref, &weights)?;
            if ft <= f + settings.armijo * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= settings.shrink;
        }
        iterations += 1;
        match accepted {
            Some((trial, ft)) => {
                let small = (f - ft) <= settings.convergence_tol * settings.convergence_tol;
                q = trial;
                f = ft;
                f_history.push(f);
                q_history.push(q.clone());
                if small && (dq.amax() * t) < settings.convergence_tol.sqrt() {
                    converged = true;
                    break;
                }
            }
            None => {
                converged = true;
                break;
            }
        }
    }

    Ok(GlobalIkResult {
        q_star: q,
        f_final: f,
        iterations,
        converged,
        f_history,
        q_history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingleShotMode {
    Monolithic,
    Distributed,
}

/// `base` with one candidate at α = 1, no certificate and no feasibility
/// screening. The monolithic mode drops the segment split.
pub fn single_shot_config(base: &ControllerConfig, mode: SingleShotMode) -> ControllerConfig {
    let mut cfg = base.clone();
    cfg.grid.values = vec![1.0];
    cfg.certificate.enabled = false;
    cfg.require_feasible = false;
    cfg.solver = QpSettings::reference();
    if mode == SingleShotMode::Monolithic {
        cfg.segments.clear();
    }
    cfg
}

pub fn single_shot_step(
    model: &RobotModel,
    q: &DVector<f64>,
    task: &TaskSpec,
    mode: SingleShotMode,
    base: &ControllerConfig,
) -> Result<StepResult> {
    Controller::new(model, single_shot_config(base, mode))?.step(model, q, task)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retarget::TaskTarget;
    use crate::rigidbody::load_model;
    use nalgebra::Vector3;

    const PLANAR: &str = "
        joint { name = j1, parent = base, axis = [0, 0, 1], limits = [-3.1, 3.1], vel_limit = 10 }
        joint { name = j2, parent = j1, axis = [0, 0, 1], origin_xyz = [0.3, 0, 0], limits = [-3.1, 3.1], vel_limit = 10 }
        frame { name = tip, parent_joint = j2, offset_xyz = [0.3, 0, 0] }";

    #[test]
    fn objective_examples() {
        let model = load_model(PLANAR).unwrap();
        let q = DVector::from_vec(vec![0.0, 0.0]);
        let at = TaskSpec::new(vec![TaskTarget::new("tip", Vector3::new(0.6, 0.0, 0.0))]);
        let w = ObjectiveWeights { w_q: 1.0 };
        assert!(objective_f(&model, &q, &at, &q, &w).unwrap().abs() < 1e-15);
        let off = TaskSpec::new(vec![TaskTarget::new("tip", Vector3::new(0.6, 0.1, 0.0))]);
        let w0 = ObjectiveWeights { w_q: 0.0 };
        assert!((objective_f(&model, &q, &off, &q, &w0).unwrap() - 0.005).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_returns_immediately() {
        let model = load_model(PLANAR).unwrap();
        let q = DVector::from_vec(vec![0.3, 0.9]);
        let x = model.kinematics(&q).unwrap().frame_position(&model, 0);
        let task = TaskSpec::new(vec![TaskTarget::new("tip", x)]);
        let res = global_ik_sqp(&model, &task, &q, &q, &SqpSettings::default()).unwrap();
        assert!(res.iterations <= 1);
        assert!(res.converged);
    }

    #[test]
    fn settings_validation() {
        let bad = SqpSettings {
            shrink: 1.0,
            ..SqpSettings::default()
        };
        assert!(bad.validate().is_err());
        let bad = SqpSettings {
            t_min: 2.0,
            ..SqpSettings::default()
        };
        assert!(bad.validate().is_err());
    }
}

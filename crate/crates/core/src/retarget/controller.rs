use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::certificate::lyapunov_diag;
use super::{
    certify, select_candidate, ContinuationGrid, ControllerConfig, GridMode, SegmentEmbedding,
    SegmentQp, TaskSpec,
};
use crate::qpsolve::{row_violation, AdmmSolver, QpSolution, QpStatus};
use crate::rigidbody::RobotModel;
use crate::safety::{rows_at, CbfRow};
use crate::Result;

/// Tolerance on `∇hᵀΔq − bound` below which a barrier row counts as active.
const ACTIVE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateDiagnostics {
    pub alpha: f64,
    pub feasible: bool,
    /// Predicted segment Lyapunov value after the candidate step.
    pub v_pred: f64,
    pub accepted: bool,
    pub dq_norm: f64,
    /// Largest constraint violation of the returned iterate.
    pub violation: f64,
    pub status: QpStatus,
}

/// What a segment contributed to the composed step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentAction {
    /// Certified candidate at this index.
    Certified(usize),
    /// Uncertified feasible candidate with the lowest predicted value.
    Fallback(usize),
    Hold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentDiagnostics {
    pub name: String,
    /// Number of task targets handled by the segment.
    pub targets: usize,
    /// Segment Lyapunov value at the current configuration.
    pub v: f64,
    /// Largest accepted candidate before composition checks.
    pub selected: Option<usize>,
    pub action: SegmentAction,
    pub candidates: Vec<CandidateDiagnostics>,
}

impl SegmentDiagnostics {
    pub fn applied_alpha(&self) -> Option<f64> {
        match self.action {
            SegmentAction::Certified(i) | SegmentAction::Fallback(i) => {
                Some(self.candidates[i].alpha)
            }
            SegmentAction::Hold => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepFlags {
    /// Some segment with targets applied no certified candidate.
    pub no_certified_candidate: bool,
    /// Some applied candidate stopped at the iteration cap.
    pub qp_inexact: bool,
    /// Some barrier row is active at the applied step.
    pub cbf_active: bool,
    /// The composed step violated a barrier row and was reduced.
    pub composition_fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub q_next: DVector<f64>,
    pub dq: DVector<f64>,
    /// `dq / dt`.
    pub qdot: DVector<f64>,
    /// Smallest certified α applied by any segment.
    pub selected_alpha: Option<f64>,
    pub segments: Vec<SegmentDiagnostics>,
    pub v_before: f64,
    pub v_after: f64,
    pub flags: StepFlags,
}

struct SegmentSpec {
    name: String,
    joints: Vec<usize>,
}

/// Continuation controller. Holds warm starts and the random-grid stream;
/// the model is shared and immutable.
pub struct Controller {
    config: ControllerConfig,
    segments: Vec<SegmentSpec>,
    embedding: SegmentEmbedding,
    fixed_grid: Option<ContinuationGrid>,
    rng: ChaCha8Rng,
    warm: Vec<Vec<Option<QpSolution>>>,
    dof: usize,
}

impl Controller {
    pub fn new(model: &RobotModel, config: ControllerConfig) -> Result<Self> {
        config.validate()?;
        let dof = model.dof();
        let segments: Vec<SegmentSpec> = if config.segments.is_empty() {
            vec![SegmentSpec {
                name: "whole".into(),
                joints: (0..dof).collect(),
            }]
        } else {
            config
                .segments
                .iter()
                .map(|s| {
                    let joints = s
                        .joints
                        .iter()
                        .map(|j| model.joint_index(j))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(SegmentSpec {
                        name: s.name.clone(),
                        joints,
                    })
                })
                .collect::<Result<_>>()?
        };
        let embedding =
            SegmentEmbedding::new(dof, segments.iter().map(|s| s.joints.clone()).collect())?;
        let fixed_grid = if !config.grid.values.is_empty() {
            Some(ContinuationGrid::from_values(config.grid.values.clone())?)
        } else if config.grid.mode == GridMode::DeterministicGrid {
            Some(ContinuationGrid::deterministic(config.grid.k)?)
        } else {
            None
        };
        let rng = ChaCha8Rng::seed_from_u64(config.grid.seed);
        let warm = segments.iter().map(|_| Vec::new()).collect();
        Ok(Self {
            config,
            segments,
            embedding,
            fixed_grid,
            rng,
            warm,
            dof,
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn embedding(&self) -> &SegmentEmbedding {
        &self.embedding
    }

    pub fn segment_names(&self) -> Vec<&str> {
        self.segments.iter().map(|s| s.name.as_str()).collect()
    }

    /// Drop warm starts and restart the random grid stream.
    pub fn reset(&mut self) {
        self.rng = ChaCha8Rng::seed_from_u64(self.config.grid.seed);
        for w in &mut self.warm {
            w.clear();
        }
    }

    fn next_grid(&mut self) -> Result<ContinuationGrid> {
        match &self.fixed_grid {
            Some(g) => Ok(g.clone()),
            None => ContinuationGrid::uniform_random(self.config.grid.k, &mut self.rng),
        }
    }

    pub fn step(
        &mut self,
        model: &RobotModel,
        q: &DVector<f64>,
        task: &TaskSpec,
    ) -> Result<StepResult> {
        let cfg = self.config.clone();
        model.check_dim(q)?;
        let state = model.kinematics(q)?;
        let frames = task.resolve(model)?;
        let e = task.error(model, &state, &frames);
        let jac = task.jacobian(model, &state, &frames);
        let w_x = task.task_weights();
        let w_v = task.lyapunov_weights();
        let cbf_rows = if cfg.cbf {
            rows_at(model, &state, model.cbf_pairs(), cfg.gamma)?
        } else {
            Vec::new()
        };
        let pair_parents: Vec<Option<usize>> = if cfg.cbf {
            model
                .cbf_pairs()
                .iter()
                .map(|p| Ok(model.frame(&p.frame)?.parent_joint))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        let step_bounds = model.velocity_limits() * cfg.dt;
        let grid = self.next_grid()?;

        let mut diags = Vec::with_capacity(self.segments.len());
        let mut solutions: Vec<Vec<QpSolution>> = Vec::with_capacity(self.segments.len());
        for (s, seg) in self.segments.iter().enumerate() {
            let in_seg = |j: Option<usize>| j.is_some_and(|j| seg.joints.contains(&j));
            let targets: Vec<usize> = (0..frames.len())
                .filter(|&t| in_seg(model.frames()[frames[t]].parent_joint))
                .collect();
            if targets.is_empty() {
                diags.push(SegmentDiagnostics {
                    name: seg.name.clone(),
                    targets: 0,
                    v: 0.0,
                    selected: None,
                    action: SegmentAction::Hold,
                    candidates: Vec::new(),
                });
                solutions.push(Vec::new());
                continue;
            }
            let rows: Vec<usize> = targets.iter().flat_map(|&t| 3 * t..3 * t + 3).collect();
            let e_s = e.select_rows(&rows);
            let w_xs = w_x.select_rows(&rows);
            let w_vs = w_v.select_rows(&rows);
            let jac_rows = jac.select_rows(&rows);
            let seg_cbf: Vec<CbfRow> = cbf_rows
                .iter()
                .zip(&pair_parents)
                .filter(|(_, &p)| in_seg(p))
                .map(|(r, _)| r.clone())
                .collect();
            let sq = SegmentQp::new(
                model,
                q,
                &seg.joints,
                &jac_rows,
                &w_xs,
                cfg.w_q,
                &seg_cbf,
                Some(&step_bounds),
            )?;
            let solver = AdmmSolver::new(&sq.h, &sq.a, cfg.solver)?;
            let gs: Vec<DVector<f64>> = grid
                .values
                .iter()
                .map(|&a| sq.linear_term(&(&e_s * a)))
                .collect();
            let warms: Vec<Option<&QpSolution>> = (0..gs.len())
                .map(|i| self.warm[s].get(i).and_then(|w| w.as_ref()))
                .collect();
            let sols = solver.solve_many(&gs, &sq.lower, &sq.upper, &warms)?;

            let v = lyapunov_diag(&e_s, &w_vs);
            let candidates: Vec<CandidateDiagnostics> = sols
                .iter()
                .zip(&grid.values)
                .map(|(sol, &alpha)| {
                    let violation = row_violation(&sq.a, &sq.lower, &sq.upper, &sol.z);
                    let feasible = sol.is_usable() && violation <= cfg.certificate.feas_tol;
                    let v_pred = lyapunov_diag(&(&e_s - &sq.jac * &sol.z), &w_vs);
                    let dq_norm = sol.z.norm();
                    let admissible = if cfg.certificate.enabled || cfg.require_feasible {
                        feasible
                    } else {
                        sol.is_usable()
                    };
                    let accepted = certify(admissible, dq_norm, v, v_pred, &cfg.certificate);
                    CandidateDiagnostics {
                        alpha,
                        feasible,
                        v_pred,
                        accepted,
                        dq_norm,
                        violation,
                        status: sol.status,
                    }
                })
                .collect();
            let accepted: Vec<bool> = candidates.iter().map(|c| c.accepted).collect();
            let selected = select_candidate(&accepted);
            let action = match selected {
                Some(i) => SegmentAction::Certified(i),
                None if cfg.fallback => candidates
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.feasible && c.v_pred < v)
                    .min_by(|a, b| a.1.v_pred.total_cmp(&b.1.v_pred))
                    .map_or(SegmentAction::Hold, |(i, _)| SegmentAction::Fallback(i)),
                None => SegmentAction::Hold,
            };
            diags.push(SegmentDiagnostics {
                name: seg.name.clone(),
                targets: targets.len(),
                v,
                selected,
                action,
                candidates,
            });
            solutions.push(sols);
        }

        let compose = |diags: &[SegmentDiagnostics]| -> Result<DVector<f64>> {
            let parts: Vec<DVector<f64>> = diags
                .iter()
                .zip(&solutions)
                .zip(&self.segments)
                .map(|((d, sols), seg)| match d.action {
                    SegmentAction::Certified(i) | SegmentAction::Fallback(i) => sols[i].z.clone(),
                    SegmentAction::Hold => DVector::zeros(seg.joints.len()),
                })
                .collect();
            self.embedding.compose(&parts)
        };
        let violates = |dq: &DVector<f64>| {
            cbf_rows
                .iter()
                .any(|r| !r.satisfied_by(dq, cfg.certificate.feas_tol))
        };

        let mut flags = StepFlags::default();
        let mut dq = compose(&diags)?;
        if self.segments.len() > 1 && violates(&dq) {
            flags.composition_fallback = true;
            let alpha_min = diags
                .iter()
                .filter_map(|d| match d.action {
                    SegmentAction::Certified(i) => Some(d.candidates[i].alpha),
                    _ => None,
                })
                .fold(f64::INFINITY, f64::min);
            for d in &mut diags {
                d.action = d
                    .candidates
                    .iter()
                    .rposition(|c| c.accepted && c.alpha <= alpha_min)
                    .map_or(SegmentAction::Hold, SegmentAction::Certified);
            }
            dq = compose(&diags)?;
            if violates(&dq) {
                for d in &mut diags {
                    d.action = SegmentAction::Hold;
                }
                dq = DVector::zeros(self.dof);
            }
        }

        let (ql, qu) = (model.lower_limits(), model.upper_limits());
        let mut q_next = q + &dq;
        for i in 0..self.dof {
            // Guards only against rounding in q + (q_max − q).
            q_next[i] = q_next[i].clamp(ql[i].min(q[i]), qu[i].max(q[i]));
        }

        flags.no_certified_candidate = diags
            .iter()
            .any(|d| d.targets > 0 && !matches!(d.action, SegmentAction::Certified(_)));
        flags.qp_inexact = diags.iter().any(|d| match d.action {
            SegmentAction::Certified(i) | SegmentAction::Fallback(i) => {
                d.candidates[i].status == QpStatus::MaxIterReached
            }
            SegmentAction::Hold => false,
        });
        flags.cbf_active = cbf_rows
            .iter()
            .any(|r| r.gradient.dot(&dq) - r.bound <= ACTIVE_TOL);
        let selected_alpha = diags
            .iter()
            .filter_map(|d| match d.action {
                SegmentAction::Certified(i) => Some(d.candidates[i].alpha),
                _ => None,
            })
            .reduce(f64::min);

        for (s, sols) in solutions.into_iter().enumerate() {
            if !sols.is_empty() {
                self.warm[s] = sols.into_iter().map(Some).collect();
            }
        }

        let v_before = lyapunov_diag(&e, &w_v);
        let state_next = model.kinematics(&q_next)?;
        let v_after = lyapunov_diag(&task.error(model, &state_next, &frames), &w_v);
        let qdot = &dq / cfg.dt;
        Ok(StepResult {
            q_next,
            dq,
            qdot,
            selected_alpha,
            segments: diags,
            v_before,
            v_after,
            flags,
        })
    }
}

/// One step of a freshly constructed controller (no warm start).
pub fn control_step(
    model: &RobotModel,
    q: &DVector<f64>,
    task: &TaskSpec,
    config: &ControllerConfig,
) -> Result<StepResult> {
    Controller::new(model, config.clone())?.step(model, q, task)
}

/// Full task Jacobian at `q` (rows follow the task targets).
pub fn task_jacobian(
    model: &RobotModel,
    q: &DVector<f64>,
    task: &TaskSpec,
) -> Result<DMatrix<f64>> {
    let frames = task.resolve(model)?;
    let state = model.kinematics(q)?;
    Ok(task.jacobian(model, &state, &frames))
}

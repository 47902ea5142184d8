use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::detectors::{detect_collision, detect_singularity, detect_stagnation};
use super::targets::{generate_targets, TargetGenerator};
use crate::baselines::{global_ik_sqp, single_shot_config, SingleShotMode, SqpSettings};
use crate::retarget::{task_jacobian, Controller, ControllerConfig, SegmentAction, StepResult};
use crate::rigidbody::RobotModel;
use crate::safety::model_barriers;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    GlobalSqp,
    MonolithicQp,
    DistributedQp,
    ParallelDist,
    ParallelMono,
}

/// One row of the ablation: a method with its batch size, threshold and
/// certificate switch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub method: Method,
    pub k: usize,
    pub eta: Option<f64>,
    pub certificate: bool,
}

impl Variant {
    pub fn global_sqp() -> Self {
        Self {
            method: Method::GlobalSqp,
            k: 1,
            eta: None,
            certificate: false,
        }
    }

    pub fn monolithic_qp() -> Self {
        Self {
            method: Method::MonolithicQp,
            k: 1,
            eta: None,
            certificate: false,
        }
    }

    pub fn distributed_qp() -> Self {
        Self {
            method: Method::DistributedQp,
            k: 1,
            eta: None,
            certificate: false,
        }
    }

    pub fn parallel_dist(k: usize, eta: Option<f64>) -> Self {
        Self {
            method: Method::ParallelDist,
            k,
            certificate: eta.is_some(),
            eta,
        }
    }

    pub fn parallel_mono(k: usize, eta: f64) -> Self {
        Self {
            method: Method::ParallelMono,
            k,
            eta: Some(eta),
            certificate: true,
        }
    }

    pub fn method_name(&self) -> &'static str {
        match self.method {
            Method::GlobalSqp => "Global IK (SQP)",
            Method::MonolithicQp => "Monolithic QP",
            Method::DistributedQp => "Distributed QP",
            Method::ParallelDist if self.certificate => "Parallel Dist. QPs",
            Method::ParallelDist => "Parallel Dist. QPs (no certificate)",
            Method::ParallelMono => "Parallel Mono. QPs",
        }
    }

    /// Controller configuration of a differential-IK variant; `None` for
    /// the global SQP.
    pub fn controller_config(&self, base: &ControllerConfig) -> Option<ControllerConfig> {
        let mut cfg = match self.method {
            Method::GlobalSqp => return None,
            Method::MonolithicQp => {
                return Some(single_shot_config(base, SingleShotMode::Monolithic))
            }
            Method::DistributedQp => {
                return Some(single_shot_config(base, SingleShotMode::Distributed))
            }
            Method::ParallelDist => base.clone().with_k(self.k),
            Method::ParallelMono => {
                let mut c = base.clone().with_k(self.k);
                c.segments.clear();
                c
            }
        };
        cfg.certificate.enabled = self.certificate;
        if let Some(eta) = self.eta {
            cfg.certificate.eta = eta;
        }
        Some(cfg)
    }
}

impl fmt::Display for Variant {
    /// Round-trips through [`FromStr`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.method {
            Method::GlobalSqp => write!(f, "global_sqp"),
            Method::MonolithicQp => write!(f, "mono_qp"),
            Method::DistributedQp => write!(f, "dist_qp"),
            Method::ParallelDist => match self.eta {
                Some(eta) => write!(f, "par_dist:{}:{}", self.k, eta),
                None => write!(f, "par_dist_nocert:{}", self.k),
            },
            Method::ParallelMono => {
                write!(f, "par_mono:{}:{}", self.k, self.eta.unwrap_or_default())
            }
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    /// `global_sqp`, `mono_qp`, `dist_qp`, `par_dist_nocert:K`,
    /// `par_dist:K:ETA`, `par_mono:K:ETA`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || Error::Config(format!("unknown variant '{s}'"));
        let k = |i: usize| -> Result<usize> {
            let k: usize = parts.get(i).ok_or_else(bad)?.parse().map_err(|_| bad())?;
            if k == 0 {
                return Err(bad());
            }
            Ok(k)
        };
        let eta = |i: usize| -> Result<f64> {
            let v: f64 = parts.get(i).ok_or_else(bad)?.parse().map_err(|_| bad())?;
            if !(v > 0.0) {
                return Err(bad());
            }
            Ok(v)
        };
        let v = match (parts[0], parts.len()) {
            ("global_sqp", 1) => Self::global_sqp(),
            ("mono_qp", 1) => Self::monolithic_qp(),
            ("dist_qp", 1) => Self::distributed_qp(),
            ("par_dist_nocert", 2) => Self::parallel_dist(k(1)?, None),
            ("par_dist", 3) => Self::parallel_dist(k(1)?, Some(eta(2)?)),
            ("par_mono", 3) => Self::parallel_mono(k(1)?, eta(2)?),
            _ => return Err(bad()),
        };
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub seed: u64,
    pub horizon: usize,
    pub variant: Variant,
    pub generator: TargetGenerator,
    /// Controller settings shared by all differential-IK variants
    /// (segments, weights, solver, dt).
    pub base: ControllerConfig,
    pub sqp: SqpSettings,
    /// Tracked frames, one target each.
    pub frames: Vec<String>,
    pub start: DVector<f64>,
    pub stagnation_window: usize,
    pub stagnation_tol: f64,
    pub singularity_threshold: f64,
    /// Lyapunov weight applied to every target; `None` uses the task weight.
    pub lyapunov_weight: Option<f64>,
}

impl TrialConfig {
    pub fn new(
        variant: Variant,
        seed: u64,
        base: ControllerConfig,
        frames: Vec<String>,
        start: DVector<f64>,
    ) -> Self {
        Self {
            seed,
            horizon: 50,
            variant,
            generator: TargetGenerator::NearCbfBoundary,
            base,
            sqp: SqpSettings::default(),
            frames,
            start,
            stagnation_window: 10,
            stagnation_tol: 1e-3,
            singularity_threshold: 1e-3,
            lyapunov_weight: None,
        }
    }

    pub fn with_lyapunov_weight(mut self, w: f64) -> Self {
        self.lyapunov_weight = Some(w);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .lyapunov_weight
            .is_some_and(|w| !(w > 0.0 && w.is_finite()))
        {
            return Err(Error::Config("lyapunov_weight must be positive".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.frames.is_empty() {
            return Err(Error::Config("no tracked frames".into()));
        }
        self.base.validate()?;
        self.sqp.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub variant: String,
    pub seed: u64,
    /// Mean over steps of the mean target error, meters.
    pub mean_error: f64,
    /// Mean target error after the last step, meters.
    pub final_error: f64,
    /// Mean wall time per control step, seconds.
    pub solve_time_per_step: f64,
    pub self_collision: bool,
    pub singularity: bool,
    pub stagnation: bool,
    pub min_barrier: f64,
    /// QP candidates evaluated over the trial.
    pub candidates: usize,
    pub certified_steps: usize,
    pub fallback_steps: usize,
    pub hold_steps: usize,
    /// Applied steps that break the progress certificate or the
    /// largest-α rule.
    pub certificate_violations: usize,
}

/// Checks an applied step against the certificate and selection rules.
pub fn certificate_violations(step: &StepResult, eta: f64) -> usize {
    let mut bad = 0;
    for seg in &step.segments {
        if let Some(s) = seg.selected {
            if seg.candidates[s + 1..].iter().any(|c| c.accepted) {
                bad += 1;
            }
        }
        if let SegmentAction::Certified(i) = seg.action {
            let c = &seg.candidates[i];
            if !(c.accepted && c.feasible && c.v_pred <= seg.v - eta) {
                bad += 1;
            }
            if !step.flags.composition_fallback && seg.selected != Some(i) {
                bad += 1;
            }
        }
    }
    bad
}

/// Run one closed-loop trial; `observer` sees every controller step.
pub fn run_trial_observed(
    model: &RobotModel,
    config: &TrialConfig,
    observer: &mut dyn FnMut(usize, &StepResult),
) -> Result<TrialMetrics> {
    config.validate()?;
    model.check_dim(&config.start)?;
    let dt = config.base.dt;
    let traj = generate_targets(
        model,
        &config.generator,
        config.seed,
        config.horizon,
        dt,
        &config.start,
        &config.frames,
    )?;
    let ctrl_cfg = config.variant.controller_config(&config.base);
    let eta = ctrl_cfg.as_ref().map_or(0.0, |c| c.certificate.eta);
    let mut controller = ctrl_cfg.map(|c| Controller::new(model, c)).transpose()?;

    let mut q = config.start.clone();
    let mut q_hist = Vec::with_capacity(config.horizon);
    let mut dq_hist = Vec::with_capacity(config.horizon);
    let mut h_hist = Vec::with_capacity(config.horizon);
    let mut jac_hist = Vec::with_capacity(config.horizon);
    let mut errors = Vec::with_capacity(config.horizon);
    let mut elapsed = 0.0;
    let mut m = TrialMetrics {
        variant: config.variant.to_string(),
        seed: config.seed,
        mean_error: 0.0,
        final_error: 0.0,
        solve_time_per_step: 0.0,
        self_collision: false,
        singularity: false,
        stagnation: false,
        min_barrier: f64::INFINITY,
        candidates: 0,
        certified_steps: 0,
        fallback_steps: 0,
        hold_steps: 0,
        certificate_violations: 0,
    };

    for step in 0..config.horizon {
        let mut task = traj.task_at(step);
        for t in &mut task.targets {
            t.lyapunov_weight = config.lyapunov_weight;
        }
        let started = Instant::now();
        let q_next = match controller.as_mut() {
            Some(ctrl) => {
                let res = ctrl.step(model, &q, &task)?;
                elapsed += started.elapsed().as_secs_f64();
                for seg in &res.segments {
                    m.candidates += seg.candidates.len();
                }
                if res
                    .segments
                    .iter()
                    .all(|s| s.targets == 0 || matches!(s.action, SegmentAction::Certified(_)))
                {
                    m.certified_steps += 1;
                } else if res
                    .segments
                    .iter()
                    .any(|s| matches!(s.action, SegmentAction::Fallback(_)))
                {
                    m.fallback_steps += 1;
                } else {
                    m.hold_steps += 1;
                }
                if config.variant.certificate {
                    m.certificate_violations += certificate_violations(&res, eta);
                }
                observer(step, &res);
                res.q_next
            }
            None => {
                let res = global_ik_sqp(model, &task, &q, &q, &config.sqp)?;
                elapsed += started.elapsed().as_secs_f64();
                m.candidates += 1;
                res.q_star
            }
        };
        q_hist.push(q.clone());
        dq_hist.push(&q_next - &q);
        q = q_next;
        let h = model_barriers(model, &q)?;
        m.min_barrier = h.iter().copied().fold(m.min_barrier, f64::min);
        h_hist.push(h);
        jac_hist.push(task_jacobian(model, &q, &task)?);
        let errs = task.target_errors(model, &q)?;
        errors.push(errs.iter().sum::<f64>() / errs.len() as f64);
    }

    m.mean_error = errors.iter().sum::<f64>() / errors.len() as f64;
    m.final_error = *errors.last().expect("horizon >= 1");
    m.solve_time_per_step = elapsed / config.horizon as f64;
    m.self_collision = detect_collision(&h_hist);
    m.singularity = detect_singularity(&jac_hist, config.singularity_threshold);
    m.stagnation = detect_stagnation(
        &q_hist,
        &dq_hist,
        &model.lower_limits(),
        &model.upper_limits(),
        config.stagnation_window,
        config.stagnation_tol,
    );
    Ok(m)
}

pub fn run_trial(model: &RobotModel, config: &TrialConfig) -> Result<TrialMetrics> {
    run_trial_observed(model, config, &mut |_, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_strings_round_trip() {
        for s in [
            "global_sqp",
            "mono_qp",
            "dist_qp",
            "par_dist_nocert:256",
            "par_dist:64:0.0005",
            "par_mono:16:0.005",
        ] {
            let v: Variant = s.parse().unwrap();
            assert_eq!(v.to_string(), s);
        }
        for s in [
            "par_dist:0:0.1",
            "par_dist:4",
            "nope",
            "par_mono:4:-1",
            "dist_qp:3",
        ] {
            assert!(s.parse::<Variant>().is_err(), "{s}");
        }
    }
}

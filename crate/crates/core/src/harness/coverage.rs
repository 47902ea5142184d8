use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;

use crate::retarget::{Controller, ControllerConfig, TaskSpec};
use crate::rigidbody::RobotModel;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    /// Whole-body candidates evaluated per second.
    pub monolithic_rate: f64,
    pub distributed_rate: f64,
    pub budget_seconds: f64,
    /// Candidates affordable within the budget.
    pub k_monolithic: usize,
    pub k_distributed: usize,
}

fn candidates_per_second(
    model: &RobotModel,
    config: ControllerConfig,
    q: &DVector<f64>,
    task: &TaskSpec,
    k: usize,
    repeats: usize,
) -> Result<f64> {
    let mut ctrl = Controller::new(model, config.with_k(k))?;
    ctrl.step(model, q, task)?;
    let start = Instant::now();
    for _ in 0..repeats {
        ctrl.reset();
        ctrl.step(model, q, task)?;
    }
    Ok((k * repeats) as f64 / start.elapsed().as_secs_f64())
}

/// Time whole-body and per-segment candidate evaluation at one state and
/// convert the rates into candidate counts for a fixed time budget.
pub fn compute_coverage(
    model: &RobotModel,
    distributed: &ControllerConfig,
    q: &DVector<f64>,
    task: &TaskSpec,
    k: usize,
    repeats: usize,
    budget_seconds: f64,
) -> Result<CoverageReport> {
    if distributed.segments.is_empty() {
        return Err(Error::Config(
            "coverage needs a segmented configuration".into(),
        ));
    }
    if k == 0 || repeats == 0 || !(budget_seconds > 0.0) {
        return Err(Error::Config(
            "k, repeats and budget must be positive".into(),
        ));
    }
    let mut mono = distributed.clone();
    mono.segments.clear();
    let monolithic_rate = candidates_per_second(model, mono, q, task, k, repeats)?;
    let distributed_rate = candidates_per_second(model, distributed.clone(), q, task, k, repeats)?;
    Ok(CoverageReport {
        monolithic_rate,
        distributed_rate,
        budget_seconds,
        k_monolithic: (monolithic_rate * budget_seconds) as usize,
        k_distributed: (distributed_rate * budget_seconds) as usize,
    })
}

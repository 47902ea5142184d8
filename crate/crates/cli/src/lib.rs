//! Shared pieces of the `bench` and `retarget` binaries.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use pdik::harness::{TrialConfig, Variant};
use pdik::models::desk_trial_template;
use pdik::perception::{
    group_frames, read_keypoints, scale_command, FilterParams, KeypointPipeline, ScaleSpec,
    ANCHOR_POINT,
};
use pdik::safety::model_barriers;
use pdik::{
    Controller, ControllerConfig, DVector, Error, RobotModel, TaskSpec, TaskTarget, Vector3,
};
use serde::{Deserialize, Serialize};

/// Process exit code for an error: 2 for invalid configuration or input,
/// 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_config() => 2,
        _ => 1,
    }
}

pub fn read_model(path: &Path) -> anyhow::Result<RobotModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read model {}: {e}", path.display())))?;
    Ok(pdik::load_model(&text)?)
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    Ok(toml::from_str(&text).map_err(Error::from)?)
}

/// Joint values by name on top of the neutral configuration.
fn pose_from_map(model: &RobotModel, values: &BTreeMap<String, f64>) -> pdik::Result<DVector<f64>> {
    let mut q = model.neutral();
    for (name, v) in values {
        q[model.joint_index(name)?] = *v;
    }
    model.check_dim(&q)?;
    Ok(q)
}

/// Trial setup file for `bench`. Without one the dual-arm desk setup is used.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSetup {
    pub frames: Vec<String>,
    pub horizon: Option<usize>,
    pub lyapunov_weight: Option<f64>,
    /// Start pose by joint name; unnamed joints start at neutral.
    pub start: BTreeMap<String, f64>,
    pub controller: ControllerConfig,
}

pub fn trial_template(model: &RobotModel, setup: Option<&Path>) -> anyhow::Result<TrialConfig> {
    let Some(path) = setup else {
        return Ok(desk_trial_template(model, Variant::distributed_qp())?);
    };
    let s: BenchSetup = read_toml(path)?;
    let mut t = TrialConfig::new(
        Variant::distributed_qp(),
        0,
        s.controller,
        s.frames,
        pose_from_map(model, &s.start)?,
    );
    if let Some(h) = s.horizon {
        t.horizon = h;
    }
    t.lyapunov_weight = s.lyapunov_weight;
    t.validate()?;
    Ok(t)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetMap {
    pub keypoint: String,
    pub frame: String,
}

/// Configuration of `retarget run`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Human-to-robot scale factor.
    pub beta: f64,
    /// Robot point that the human anchor keypoint maps to.
    pub anchor_robot: [f64; 3],
    #[serde(default)]
    pub start: BTreeMap<String, f64>,
    /// Lyapunov weight of every target; defaults to the task weight.
    #[serde(default)]
    pub lyapunov_weight: Option<f64>,
    #[serde(default)]
    pub filter: FilterParams,
    #[serde(default)]
    pub controller: ControllerConfig,
    pub targets: Vec<TargetMap>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let cfg: Self = read_toml(path)?;
        if !(cfg.beta > 0.0 && cfg.beta.is_finite()) {
            return Err(Error::Config("beta must be positive".into()).into());
        }
        if cfg
            .lyapunov_weight
            .is_some_and(|w| !(w > 0.0 && w.is_finite()))
        {
            return Err(Error::Config("lyapunov_weight must be positive".into()).into());
        }
        if cfg.targets.is_empty() {
            return Err(Error::Config("no targets".into()).into());
        }
        cfg.filter.validate()?;
        cfg.controller.validate()?;
        Ok(cfg)
    }
}

/// One control step of `retarget run`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub step: usize,
    pub t: f64,
    pub body_id: Option<i64>,
    pub targets: usize,
    pub v_before: f64,
    pub v_after: f64,
    pub selected_alpha: Option<f64>,
    /// Largest target error after the step, meters.
    pub max_error: f64,
    pub min_barrier: f64,
    pub no_certified_candidate: bool,
    pub composition_fallback: bool,
}

/// Filter, scale and track a keypoint trajectory; one row per frame.
pub fn run_retarget<R: Read>(
    model: &RobotModel,
    cfg: &RunConfig,
    keypoints: R,
) -> anyhow::Result<Vec<RunRow>> {
    for t in &cfg.targets {
        model.frame_index(&t.frame)?;
    }
    let frames = group_frames(read_keypoints(keypoints)?);
    let mut pipeline = KeypointPipeline::new(cfg.filter);
    let mut controller = Controller::new(model, cfg.controller.clone())?;
    let mut q = pose_from_map(model, &cfg.start)?;
    let anchor_robot = Vector3::from(cfg.anchor_robot);
    let mut rows = Vec::with_capacity(frames.len());
    for (step, frame) in frames.iter().enumerate() {
        let filtered = pipeline.update(frame);
        let targets: Vec<TaskTarget> = match filtered.get(ANCHOR_POINT) {
            Some(anchor) => {
                let spec = ScaleSpec {
                    beta: cfg.beta,
                    anchor_human: *anchor,
                    anchor_robot,
                };
                cfg.targets
                    .iter()
                    .filter_map(|m| {
                        filtered.get(&m.keypoint).map(|p| TaskTarget {
                            lyapunov_weight: cfg.lyapunov_weight,
                            ..TaskTarget::new(m.frame.clone(), scale_command(p, &spec))
                        })
                    })
                    .collect()
            }
            None => Vec::new(),
        };
        let mut row = RunRow {
            step,
            t: frame.t,
            body_id: pipeline.tracked_body(),
            targets: targets.len(),
            v_before: 0.0,
            v_after: 0.0,
            selected_alpha: None,
            max_error: 0.0,
            min_barrier: f64::INFINITY,
            no_certified_candidate: false,
            composition_fallback: false,
        };
        if !targets.is_empty() {
            let task = TaskSpec::new(targets);
            let res = controller.step(model, &q, &task)?;
            q = res.q_next.clone();
            row.v_before = res.v_before;
            row.v_after = res.v_after;
            row.selected_alpha = res.selected_alpha;
            row.max_error = task
                .target_errors(model, &q)?
                .into_iter()
                .fold(0.0, f64::max);
            row.no_certified_candidate = res.flags.no_certified_candidate;
            row.composition_fallback = res.flags.composition_fallback;
        }
        row.min_barrier = model_barriers(model, &q)?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_csv<W: Write, T: Serialize>(writer: W, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

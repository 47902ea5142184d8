use std::collections::BTreeMap;
use std::io::Read;
use std::path::PathBuf;

use nalgebra::{DVector, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::retarget::{TaskSpec, TaskTarget};
use crate::rigidbody::RobotModel;
use crate::safety::model_barriers;
use crate::{Error, Result};

/// Upper bound on target speed.
pub const MAX_TARGET_SPEED: f64 = 0.5;
/// Waypoints of the near-boundary generator lie within this band around
/// the barrier surface.
pub const BOUNDARY_BAND: f64 = 0.02;
const WAYPOINTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetGenerator {
    /// Waypoints at frame positions of random collision-free configurations.
    RandomReachable,
    /// Waypoints within ±2 cm of the barrier surface of a body sphere.
    NearCbfBoundary,
    /// Targets read from a `t,frame,x,y,z` CSV file.
    ReplayFile(PathBuf),
}

/// Per-step desired positions of a fixed list of frames.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetTrajectory {
    pub frames: Vec<String>,
    /// `positions[step][i]` is the target of `frames[i]`.
    pub positions: Vec<Vec<Vector3<f64>>>,
}

impl TargetTrajectory {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Task at `step`; the last sample is held past the end.
    pub fn task_at(&self, step: usize) -> TaskSpec {
        let row = &self.positions[step.min(self.positions.len() - 1)];
        TaskSpec::new(
            self.frames
                .iter()
                .zip(row)
                .map(|(f, p)| TaskTarget::new(f.clone(), *p))
                .collect(),
        )
    }
}

/// Point at arc length `s` along a polyline (clamped to its end).
fn along(points: &[Vector3<f64>], mut s: f64) -> Vector3<f64> {
    for w in points.windows(2) {
        let seg = (w[1] - w[0]).norm();
        if s <= seg && seg > 0.0 {
            return w[0] + (w[1] - w[0]) * (s / seg);
        }
        s -= seg;
    }
    *points.last().expect("non-empty polyline")
}

fn sample_safe_configuration(model: &RobotModel, rng: &mut ChaCha8Rng) -> Result<DVector<f64>> {
    let (lo, hi) = (model.lower_limits(), model.upper_limits());
    for _ in 0..1000 {
        let q = DVector::from_fn(model.dof(), |i, _| rng.random_range(lo[i]..hi[i]));
        if model_barriers(model, &q)?.iter().all(|&h| h > 0.0) {
            return Ok(q);
        }
    }
    Err(Error::Config(
        "no collision-free configuration found".into(),
    ))
}

/// Unit direction in front of the body, biased to the side of `start`.
fn boundary_direction(rng: &mut ChaCha8Rng, side: f64) -> Vector3<f64> {
    Vector3::new(
        rng.random_range(-0.2..1.0),
        side * rng.random_range(-1.0..1.0),
        rng.random_range(-0.7..0.7),
    )
    .normalize()
}

/// Build a trajectory of `horizon` steps starting at the frame positions of `q0`.
pub fn generate_targets(
    model: &RobotModel,
    generator: &TargetGenerator,
    seed: u64,
    horizon: usize,
    dt: f64,
    q0: &DVector<f64>,
    frames: &[String],
) -> Result<TargetTrajectory> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    if let TargetGenerator::ReplayFile(path) = generator {
        let file = std::fs::File::open(path)?;
        return replay_targets(file, horizon, dt, frames);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let state = model.kinematics(q0)?;
    let frame_ids = frames
        .iter()
        .map(|f| model.frame_index(f))
        .collect::<Result<Vec<_>>>()?;
    let starts: Vec<Vector3<f64>> = frame_ids
        .iter()
        .map(|&f| state.frame_position(model, f))
        .collect();

    let mut paths: Vec<Vec<Vector3<f64>>> = starts.iter().map(|s| vec![*s]).collect();
    match generator {
        TargetGenerator::RandomReachable => {
            for _ in 0..WAYPOINTS {
                let q = sample_safe_configuration(model, &mut rng)?;
                let st = model.kinematics(&q)?;
                for (path, &f) in paths.iter_mut().zip(&frame_ids) {
                    path.push(st.frame_position(model, f));
                }
            }
        }
        TargetGenerator::NearCbfBoundary => {
            for (i, path) in paths.iter_mut().enumerate() {
                let frame = &frames[i];
                let pairs: Vec<_> = model
                    .cbf_pairs()
                    .iter()
                    .filter(|p| &p.frame == frame)
                    .collect();
                if pairs.is_empty() {
                    return Err(Error::Config(format!("frame {frame} has no barrier pair")));
                }
                let side = if starts[i].y >= 0.0 { 1.0 } else { -1.0 };
                for _ in 0..WAYPOINTS {
                    let pair = pairs[rng.random_range(0..pairs.len())];
                    let sphere = model.sphere_index(&pair.sphere)?;
                    let center = state.sphere_center(model, sphere);
                    let rho = model.spheres()[sphere].radius + pair.limb_radius + pair.margin;
                    let dist = rho + rng.random_range(-BOUNDARY_BAND..BOUNDARY_BAND);
                    path.push(center + boundary_direction(&mut rng, side) * dist);
                }
            }
        }
        TargetGenerator::ReplayFile(_) => unreachable!(),
    }

    let speed = rng.random_range(0.6..1.0) * MAX_TARGET_SPEED;
    let positions = (0..horizon)
        .map(|step| {
            let s = speed * dt * (step + 1) as f64;
            paths.iter().map(|p| along(p, s)).collect()
        })
        .collect();
    Ok(TargetTrajectory {
        frames: frames.to_vec(),
        positions,
    })
}

#[derive(Debug, Deserialize)]
struct ReplayRow {
    t: f64,
    frame: String,
    x: f64,
    y: f64,
    z: f64,
}

/// Targets from CSV rows `t,frame,x,y,z`; each frame holds its latest
/// sample with `t ≤ step·dt`.
pub fn replay_targets<R: Read>(
    reader: R,
    horizon: usize,
    dt: f64,
    frames: &[String],
) -> Result<TargetTrajectory> {
    let mut samples: BTreeMap<String, Vec<(f64, Vector3<f64>)>> = BTreeMap::new();
    for row in csv::Reader::from_reader(reader).deserialize() {
        let row: ReplayRow = row?;
        if ![row.t, row.x, row.y, row.z].iter().all(|v| v.is_finite()) {
            return Err(Error::Config(format!(
                "non-finite replay sample for {}",
                row.frame
            )));
        }
        samples
            .entry(row.frame)
            .or_default()
            .push((row.t, Vector3::new(row.x, row.y, row.z)));
    }
    for s in samples.values_mut() {
        s.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let mut positions = Vec::with_capacity(horizon);
    for step in 0..horizon {
        let t = step as f64 * dt;
        let row = frames
            .iter()
            .map(|f| {
                let s = samples
                    .get(f)
                    .ok_or_else(|| Error::UnknownFrame(f.clone()))?;
                let idx = s.partition_point(|(ts, _)| *ts <= t + 1e-12);
                Ok(s[idx.saturating_sub(1)].1)
            })
            .collect::<Result<Vec<_>>>()?;
        positions.push(row);
    }
    Ok(TargetTrajectory {
        frames: frames.to_vec(),
        positions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{desk_dual_arm, dual_arm_ready_pose};

    fn hands() -> Vec<String> {
        vec!["l_hand".into(), "r_hand".into()]
    }

    #[test]
    fn polyline_interpolation() {
        let p = [
            Vector3::zeros(),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(1.0, 1.0, 0.0),
        ];
        assert_eq!(along(&p, 0.5), Vector3::new(0.5, 0.0, 0.0));
        assert_eq!(along(&p, 1.5), Vector3::new(1.0, 0.5, 0.0));
        assert_eq!(along(&p, 9.0), Vector3::new(1.0, 1.0, 0.0));
    }

    #[test]
    fn generated_targets_respect_speed_cap() {
        let model = desk_dual_arm();
        let q0 = dual_arm_ready_pose(&model).unwrap();
        for gen in [
            TargetGenerator::RandomReachable,
            TargetGenerator::NearCbfBoundary,
        ] {
            let traj = generate_targets(&model, &gen, 7, 50, 0.01, &q0, &hands()).unwrap();
            assert_eq!(traj.len(), 50);
            for w in traj.positions.windows(2) {
                for (a, b) in w[0].iter().zip(&w[1]) {
                    assert!((b - a).norm() <= MAX_TARGET_SPEED * 0.01 + 1e-12);
                }
            }
            let again = generate_targets(&model, &gen, 7, 50, 0.01, &q0, &hands()).unwrap();
            assert_eq!(traj, again);
        }
    }

    #[test]
    fn replay_holds_latest_sample() {
        let csv = "t,frame,x,y,z\n0.0,tip,0.1,0.2,0.0\n0.02,tip,0.3,0.2,0.0\n";
        let traj = replay_targets(csv.as_bytes(), 4, 0.01, &["tip".into()]).unwrap();
        assert_eq!(traj.positions[0][0].x, 0.1);
        assert_eq!(traj.positions[1][0].x, 0.1);
        assert_eq!(traj.positions[2][0].x, 0.3);
        assert_eq!(traj.positions[3][0].x, 0.3);
        assert!(replay_targets(csv.as_bytes(), 4, 0.01, &["hand".into()]).is_err());
    }
}

//! Keypoint robustification and command scaling.
//!
//! Each streamed keypoint passes through a three-branch low-pass filter:
//! invalid samples (non-finite or low confidence) hold the previous value,
//! samples further than `tau_jr` from the filtered state are blended with the
//! small jump coefficient `lambda_jr`, and everything else is blended with
//! `alpha_jr`.

use std::collections::BTreeMap;
use std::io::Read;

use nalgebra::Vector3;
use serde::Deserialize;

use crate::{Error, Result};

/// Keypoint used for demonstrator selection.
pub const ANCHOR_POINT: &str = "torso";

#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint {
    pub body_id: i64,
    pub point_id: String,
    pub position: Vector3<f64>,
    pub confidence: f64,
    pub timestamp: f64,
}

impl Keypoint {
    pub fn is_valid(&self, conf_min: f64) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.confidence.is_finite()
            && self.confidence >= conf_min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FilterState {
    pub last: Vector3<f64>,
    pub initialized: bool,
    pub last_body: Option<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterParams {
    pub alpha_jr: f64,
    pub lambda_jr: f64,
    pub tau_jr: f64,
    pub conf_min: f64,
    pub body_switch_max: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            alpha_jr: 0.4,
            lambda_jr: 0.05,
            tau_jr: 0.3,
            conf_min: 0.5,
            body_switch_max: 0.5,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha_jr > 0.0
            && self.alpha_jr <= 1.0
            && self.lambda_jr > 0.0
            && self.lambda_jr < self.alpha_jr
            && self.tau_jr > 0.0
            && (0.0..=1.0).contains(&self.conf_min)
            && self.body_switch_max > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid filter parameters {self:?}")))
        }
    }
}

/// One filter update. The first valid sample initialises the state directly.
pub fn filter_step(
    state: &FilterState,
    sample: &Keypoint,
    params: &FilterParams,
) -> (FilterState, Vector3<f64>) {
    if !sample.is_valid(params.conf_min) {
        return (*state, state.last);
    }
    let p = sample.position;
    if !state.initialized {
        let next = FilterState {
            last: p,
            initialized: true,
            last_body: Some(sample.body_id),
        };
        return (next, p);
    }
    let prev = state.last;
    let mix = if (p - prev).norm() > params.tau_jr {
        params.lambda_jr
    } else {
        params.alpha_jr
    };
    let out = p * mix + prev * (1.0 - mix);
    let next = FilterState {
        last: out,
        initialized: true,
        last_body: Some(sample.body_id),
    };
    (next, out)
}

/// Anchor keypoint of one detected body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyCandidate {
    pub body_id: i64,
    pub anchor: Vector3<f64>,
}

/// Demonstrator selection by anchor proximity.
///
/// With a previous anchor, the closest body is returned unless it is further
/// than `body_switch_max`. Without one, the body closest to the sensor origin
/// is returned.
pub fn select_body(
    candidates: &[BodyCandidate],
    previous_anchor: Option<&Vector3<f64>>,
    params: &FilterParams,
) -> Option<i64> {
    let reference = previous_anchor.copied().unwrap_or_else(Vector3::zeros);
    let best = candidates
        .iter()
        .filter(|c| c.anchor.iter().all(|v| v.is_finite()))
        .map(|c| (c.body_id, (c.anchor - reference).norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1))?;
    match previous_anchor {
        Some(_) if best.1 > params.body_switch_max => None,
        _ => Some(best.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleSpec {
    pub beta: f64,
    pub anchor_human: Vector3<f64>,
    pub anchor_robot: Vector3<f64>,
}

/// `beta * (p - p_c) + x_c`.
pub fn scale_command(p: &Vector3<f64>, spec: &ScaleSpec) -> Vector3<f64> {
    (p - spec.anchor_human) * spec.beta + spec.anchor_robot
}

#[derive(Debug, Deserialize)]
struct Row {
    t: f64,
    body_id: i64,
    point_id: String,
    x: f64,
    y: f64,
    z: f64,
    confidence: f64,
}

/// Read a keypoint trajectory CSV (`t,body_id,point_id,x,y,z,confidence`).
pub fn read_keypoints<R: Read>(reader: R) -> Result<Vec<Keypoint>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["t", "body_id", "point_id", "x", "y", "z", "confidence"];
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::Config(format!(
            "keypoint header must be `{}`",
            expected.join(",")
        )));
    }
    let mut out = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for row in rdr.deserialize() {
        let r: Row = row?;
        if r.t < last_t {
            return Err(Error::Config(format!(
                "rows not sorted by t at t = {}",
                r.t
            )));
        }
        last_t = r.t;
        out.push(Keypoint {
            body_id: r.body_id,
            point_id: r.point_id,
            position: Vector3::new(r.x, r.y, r.z),
            confidence: r.confidence,
            timestamp: r.t,
        });
    }
    Ok(out)
}

/// Keypoints sharing a timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub bodies: BTreeMap<i64, Vec<Keypoint>>,
}

impl Frame {
    pub fn candidates(&self) -> Vec<BodyCandidate> {
        self.bodies
            .iter()
            .filter_map(|(&id, kps)| {
                kps.iter()
                    .find(|k| k.point_id == ANCHOR_POINT)
                    .map(|k| BodyCandidate {
                        body_id: id,
                        anchor: k.position,
                    })
            })
            .collect()
    }
}

pub fn group_frames(keypoints: Vec<Keypoint>) -> Vec<Frame> {
    let mut frames: Vec<Frame> = Vec::new();
    for kp in keypoints {
        match frames.last_mut() {
            Some(f) if f.t == kp.timestamp => f.bodies.entry(kp.body_id).or_default().push(kp),
            _ => {
                let mut bodies = BTreeMap::new();
                let t = kp.timestamp;
                bodies.insert(kp.body_id, vec![kp]);
                frames.push(Frame { t, bodies });
            }
        }
    }
    frames
}

/// Per-keypoint filter bank with demonstrator tracking.
#[derive(Debug, Clone, Default)]
pub struct KeypointPipeline {
    pub params: FilterParams,
    filters: BTreeMap<String, FilterState>,
    tracked_anchor: Option<Vector3<f64>>,
    tracked_body: Option<i64>,
}

impl KeypointPipeline {
    pub fn new(params: FilterParams) -> Self {
        Self {
            params,
            ..Default::default()
        }
    }

    pub fn tracked_body(&self) -> Option<i64> {
        self.tracked_body
    }

    /// Filter one frame; returns the filtered value of every keypoint that has
    /// ever been initialised. Frames without an acceptable body leave the
    /// filters untouched.
    pub fn update(&mut self, frame: &Frame) -> BTreeMap<String, Vector3<f64>> {
        let body = select_body(
            &frame.candidates(),
            self.tracked_anchor.as_ref(),
            &self.params,
        );
        if let Some(id) = body {
            self.tracked_body = Some(id);
            for kp in &frame.bodies[&id] {
                let state = self.filters.entry(kp.point_id.clone()).or_default();
                let (next, _) = filter_step(state, kp, &self.params);
                *state = next;
            }
            if let Some(anchor) = self.filters.get(ANCHOR_POINT).filter(|s| s.initialized) {
                self.tracked_anchor = Some(anchor.last);
            }
        }
        self.filters
            .iter()
            .filter(|(_, s)| s.initialized)
            .map(|(k, s)| (k.clone(), s.last))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kp(p: [f64; 3]) -> Keypoint {
        Keypoint {
            body_id: 0,
            point_id: "hand_l".into(),
            position: Vector3::from(p),
            confidence: 0.9,
            timestamp: 0.0,
        }
    }

    fn init_at_origin() -> FilterState {
        FilterState {
            last: Vector3::zeros(),
            initialized: true,
            last_body: Some(0),
        }
    }

    #[test]
    fn jump_branch() {
        let (_, out) = filter_step(
            &init_at_origin(),
            &kp([1.0, 0.0, 0.0]),
            &FilterParams::default(),
        );
        assert!((out - Vector3::new(0.05, 0.0, 0.0)).amax() < 1e-15);
    }

    #[test]
    fn nominal_branch() {
        let (_, out) = filter_step(
            &init_at_origin(),
            &kp([0.1, 0.0, 0.0]),
            &FilterParams::default(),
        );
        assert!((out - Vector3::new(0.04, 0.0, 0.0)).amax() < 1e-15);
    }

    #[test]
    fn tie_takes_nominal_branch() {
        let (_, out) = filter_step(
            &init_at_origin(),
            &kp([0.3, 0.0, 0.0]),
            &FilterParams::default(),
        );
        assert!((out[0] - 0.4 * 0.3).abs() < 1e-15);
    }

    #[test]
    fn invalid_holds() {
        let s = init_at_origin();
        let (next, out) = filter_step(&s, &kp([f64::NAN, 0.0, 0.0]), &FilterParams::default());
        assert_eq!(next, s);
        assert_eq!(out, s.last);
        let mut low = kp([0.1, 0.0, 0.0]);
        low.confidence = 0.2;
        assert_eq!(filter_step(&s, &low, &FilterParams::default()).0, s);
    }

    #[test]
    fn first_valid_sample_initialises() {
        let (s, out) = filter_step(
            &FilterState::default(),
            &kp([0.7, 0.1, 0.2]),
            &FilterParams::default(),
        );
        assert!(s.initialized);
        assert_eq!(out, Vector3::new(0.7, 0.1, 0.2));
    }

    #[test]
    fn body_selection() {
        let p = FilterParams::default();
        let a = BodyCandidate {
            body_id: 1,
            anchor: Vector3::new(0.05, 0.0, 1.0),
        };
        let b = BodyCandidate {
            body_id: 2,
            anchor: Vector3::new(0.8, 0.0, 1.0),
        };
        let prev = Vector3::new(0.0, 0.0, 1.0);
        assert_eq!(select_body(&[b, a], Some(&prev), &p), Some(1));
        assert_eq!(select_body(&[a], Some(&prev), &p), Some(1));
        let far = Vector3::new(5.0, 0.0, 1.0);
        assert_eq!(select_body(&[a, b], Some(&far), &p), None);
        // First call: closest to the sensor origin.
        assert_eq!(select_body(&[b, a], None, &p), Some(1));
        assert_eq!(select_body(&[], None, &p), None);
    }

    #[test]
    fn scaling() {
        let spec = ScaleSpec {
            beta: 0.8,
            anchor_human: Vector3::zeros(),
            anchor_robot: Vector3::new(0.1, 0.0, 0.2),
        };
        let out = scale_command(&Vector3::new(0.5, 0.0, 0.0), &spec);
        assert!((out - Vector3::new(0.5, 0.0, 0.2)).amax() < 1e-15);

        let spec = ScaleSpec {
            beta: 1.0,
            anchor_human: Vector3::new(0.3, 0.2, 0.1),
            anchor_robot: Vector3::new(1.0, 2.0, 3.0),
        };
        assert_eq!(
            scale_command(&Vector3::new(0.3, 0.2, 0.1), &spec),
            spec.anchor_robot
        );

        let spec = ScaleSpec {
            beta: 0.5,
            anchor_human: Vector3::new(0.1, 0.1, 0.1),
            anchor_robot: Vector3::zeros(),
        };
        let out = scale_command(&Vector3::new(0.2, 0.4, -0.2), &spec);
        assert!((out - Vector3::new(0.05, 0.15, -0.15)).amax() < 1e-15);
    }

    #[test]
    fn csv_roundtrip_with_nan() {
        let text = "t,body_id,point_id,x,y,z,confidence\n\
                    0.0,0,torso,0,0,1,0.9\n\
                    0.0,0,hand_l,NaN,NaN,NaN,0.0\n\
                    0.033,0,torso,0,0,1.01,0.95\n";
        let kps = read_keypoints(text.as_bytes()).unwrap();
        assert_eq!(kps.len(), 3);
        assert!(kps[1].position[0].is_nan());
        let frames = group_frames(kps);
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[0].candidates().len(), 1);
    }

    #[test]
    fn csv_rejects_bad_header_and_order() {
        assert!(read_keypoints("a,b\n1,2\n".as_bytes()).is_err());
        let text = "t,body_id,point_id,x,y,z,confidence\n1,0,torso,0,0,0,1\n0.5,0,torso,0,0,0,1\n";
        assert!(read_keypoints(text.as_bytes()).is_err());
    }
}

//! Agent tracking: detection filtering, joint-displacement data association,
//! pose-graph construction, and nonlinear least-squares smoothing.

mod optimize;

pub use optimize::{optimize_track, SmoothResult};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{AgentClass, SkeletonFrame, TimedPose};
use crate::math::{Pose, Vec3};

/// Default joint count of the skeleton model.
pub const DEFAULT_JOINT_COUNT: usize = 23;

#[derive(Error, Debug)]
pub enum TrackError {
    #[error("detection timestamp {t} must exceed the last state timestamp {last}")]
    NonMonotonicTimestamp { t: f64, last: f64 },
    #[error("track states and ground truth share no time span")]
    EmptyOverlap,
    #[error("ground-truth trajectory is empty")]
    EmptyGroundTruth,
}

/// One timestamped agent detection, possibly corrupted.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Detection {
    pub t: f64,
    pub class: AgentClass,
    #[serde(rename = "torso")]
    pub torso_pose: Pose,
    pub joints: Vec<Vec3>,
    /// Image-space rectangle `[x0, y0, x1, y1]` in pixels.
    pub bbox: [f64; 4],
    #[serde(rename = "image")]
    pub image_size: [u32; 2],
    /// Ground-truth tag from the simulator; evaluation only, never read by
    /// the tracker.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<u32>,
}

/// Gating and filtering parameters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GateConfig {
    /// Maximum allowable joint displacement per 1 s interval (meters).
    pub max_joint_disp: f64,
    /// Minimum bounding-box side in pixels.
    pub min_bbox: f64,
    /// Rejection margin against the image border in pixels.
    pub border_margin: f64,
    /// Floor on the gating interval, guarding near-duplicate timestamps.
    pub dt_min: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self { max_joint_disp: 3.0, min_bbox: 30.0, border_margin: 1.0, dt_min: 0.05 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RejectReason {
    TooSmall,
    NearBorder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterDecision {
    Accept,
    Reject(RejectReason),
}

impl FilterDecision {
    pub fn accepted(&self) -> bool {
        matches!(self, FilterDecision::Accept)
    }
}

/// Reject detections whose bounding box is too small or approaches the image
/// border.
pub fn filter_detection(det: &Detection, cfg: &GateConfig) -> FilterDecision {
    let [x0, y0, x1, y1] = det.bbox;
    let (w, h) = (det.image_size[0] as f64, det.image_size[1] as f64);
    if (x1 - x0).min(y1 - y0) <= cfg.min_bbox {
        return FilterDecision::Reject(RejectReason::TooSmall);
    }
    if x0 <= cfg.border_margin
        || y0 <= cfg.border_margin
        || x1 >= w - cfg.border_margin
        || y1 >= h - cfg.border_margin
    {
        return FilterDecision::Reject(RejectReason::NearBorder);
    }
    FilterDecision::Accept
}

/// Per-agent pose graph: states, per-state measurement priors, zero-velocity
/// factors between consecutive states, and skeleton snapshots.
#[derive(Clone, Debug)]
pub struct AgentTrack {
    pub id: u32,
    pub class: AgentClass,
    /// Current state estimates (smoothed in place by `optimize_track`).
    pub states: Vec<TimedPose>,
    /// Unary prior factors: the measured pose at each state's timestamp.
    pub measurements: Vec<TimedPose>,
    /// Weight of each unary prior.
    pub unary_weights: Vec<f64>,
    /// Weight of the zero-velocity factor between states i and i+1.
    pub motion_weights: Vec<f64>,
    pub skeletons: Vec<SkeletonFrame>,
}

impl AgentTrack {
    pub fn new(id: u32, class: AgentClass) -> Self {
        Self {
            id,
            class,
            states: Vec::new(),
            measurements: Vec::new(),
            unary_weights: Vec::new(),
            motion_weights: Vec::new(),
            skeletons: Vec::new(),
        }
    }

    /// A robot trajectory ingested directly as a pre-built track (odometry is
    /// an input, not estimated here).
    pub fn from_poses(id: u32, class: AgentClass, poses: &[TimedPose]) -> Self {
        let mut track = Self::new(id, class);
        for p in poses {
            track.states.push(*p);
            track.measurements.push(*p);
            track.unary_weights.push(1.0);
            if track.states.len() > 1 {
                track.motion_weights.push(0.0);
            }
        }
        track
    }

    pub fn last_t(&self) -> Option<f64> {
        self.states.last().map(|s| s.t)
    }

    /// Joint positions used for gating: the last skeleton, or the last torso
    /// position when no skeleton was stored.
    fn gate_joints(&self) -> Vec<Vec3> {
        match self.skeletons.last() {
            Some(f) if !f.joints.is_empty() => {
                f.joints.iter().map(|j| Vec3::new(j[0], j[1], j[2])).collect()
            }
            _ => self.states.last().map(|s| vec![s.pose.translation]).unwrap_or_default(),
        }
    }
}

fn detection_joints(det: &Detection) -> Vec<Vec3> {
    if det.joints.is_empty() {
        vec![det.torso_pose.translation]
    } else {
        det.joints.clone()
    }
}

/// Max and mean joint displacement between a detection and a track's last
/// skeleton. Joint lists of different lengths compare over the shared prefix.
fn joint_displacement(det: &Detection, track: &AgentTrack) -> Option<(f64, f64)> {
    let a = detection_joints(det);
    let b = track.gate_joints();
    let n = a.len().min(b.len());
    if n == 0 {
        return None;
    }
    let mut max_d = 0.0f64;
    let mut sum = 0.0f64;
    for i in 0..n {
        let d = (a[i] - b[i]).norm();
        max_d = max_d.max(d);
        sum += d;
    }
    Some((max_d, sum / n as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Association {
    Track(u32),
    NewTrack,
}

/// Associate an accepted detection with an existing track, or decide to start
/// a new one.
///
/// Candidate tracks are those whose last skeleton is physically reachable:
/// the maximum per-joint displacement must stay within
/// `max_joint_disp * max(dt, dt_min)`. Among candidates the one with the
/// smallest mean joint displacement wins; ties go to the lowest track id.
pub fn associate(det: &Detection, tracks: &[AgentTrack], cfg: &GateConfig) -> Association {
    let mut best: Option<(f64, u32)> = None;
    for track in tracks {
        if track.class != det.class {
            continue;
        }
        let Some(last_t) = track.last_t() else { continue };
        if det.t <= last_t {
            continue;
        }
        let dt = (det.t - last_t).max(cfg.dt_min);
        let bound = cfg.max_joint_disp * dt;
        let Some((max_d, mean_d)) = joint_displacement(det, track) else { continue };
        if max_d > bound {
            continue;
        }
        let better = match best {
            None => true,
            Some((d, id)) => mean_d < d || (mean_d == d && track.id < id),
        };
        if better {
            best = Some((mean_d, track.id));
        }
    }
    match best {
        Some((_, id)) => Association::Track(id),
        None => Association::NewTrack,
    }
}

/// Append a measurement: a new state initialized at the detected pose, a
/// unary prior on it, and a zero-velocity factor to the previous state.
pub fn append_measurement(
    track: &mut AgentTrack,
    det: &Detection,
    w_d: f64,
    w_m: f64,
) -> Result<(), TrackError> {
    if let Some(last) = track.last_t() {
        if det.t <= last {
            return Err(TrackError::NonMonotonicTimestamp { t: det.t, last });
        }
    }
    track.states.push(TimedPose { t: det.t, pose: det.torso_pose });
    track.measurements.push(TimedPose { t: det.t, pose: det.torso_pose });
    track.unary_weights.push(w_d);
    if track.states.len() > 1 {
        track.motion_weights.push(w_m);
    }
    track.skeletons.push(SkeletonFrame {
        t: det.t,
        joints: det.joints.iter().map(|j| [j.x, j.y, j.z]).collect(),
    });
    Ok(())
}

/// Mean Euclidean position error of timestamped states against a
/// linearly-interpolated ground-truth trajectory. States outside the covered
/// span are skipped; no overlap at all is an error.
pub fn track_error(states: &[TimedPose], gt: &[TimedPose]) -> Result<f64, TrackError> {
    if gt.is_empty() {
        return Err(TrackError::EmptyGroundTruth);
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for s in states {
        let Some(p_gt) = interpolate_position(gt, s.t) else { continue };
        sum += (s.pose.translation - p_gt).norm();
        n += 1;
    }
    if n == 0 {
        return Err(TrackError::EmptyOverlap);
    }
    Ok(sum / n as f64)
}

pub fn interpolate_position(gt: &[TimedPose], t: f64) -> Option<Vec3> {
    if gt.is_empty() || t < gt[0].t || t > gt[gt.len() - 1].t {
        return None;
    }
    let i = match gt.binary_search_by(|s| s.t.partial_cmp(&t).unwrap()) {
        Ok(i) => return Some(gt[i].pose.translation),
        Err(i) => i,
    };
    let (a, b) = (&gt[i - 1], &gt[i]);
    let alpha = (t - a.t) / (b.t - a.t);
    Some(a.pose.translation + (b.pose.translation - a.pose.translation) * alpha)
}

/// Multi-agent tracking front end: filters detections, gates per frame, and
/// grows tracks. Simultaneous detections gating to the same track are
/// assigned greedily by mean displacement; losers start new tracks.
#[derive(Clone, Debug)]
pub struct Tracker {
    pub cfg: GateConfig,
    pub w_d: f64,
    pub w_m: f64,
    pub tracks: Vec<AgentTrack>,
    next_id: u32,
}

impl Tracker {
    pub fn new(cfg: GateConfig, w_d: f64, w_m: f64) -> Self {
        Self { cfg, w_d, w_m, tracks: Vec::new(), next_id: 0 }
    }

    /// Process one frame's detections (shared timestamp). Returns the track
    /// id assigned to each detection, in input order (None = filtered out).
    pub fn process_frame(&mut self, dets: &[Detection]) -> Vec<Option<u32>> {
        let mut out = vec![None; dets.len()];

        // Gated candidates over the whole batch: (mean_disp, track_id, det).
        let mut pairs: Vec<(f64, u32, usize)> = Vec::new();
        for (i, det) in dets.iter().enumerate() {
            if !filter_detection(det, &self.cfg).accepted() {
                continue;
            }
            for track in &self.tracks {
                if track.class != det.class {
                    continue;
                }
                let Some(last_t) = track.last_t() else { continue };
                if det.t <= last_t {
                    continue;
                }
                let dt = (det.t - last_t).max(self.cfg.dt_min);
                if let Some((max_d, mean_d)) = joint_displacement(det, track) {
                    if max_d <= self.cfg.max_joint_disp * dt {
                        pairs.push((mean_d, track.id, i));
                    }
                }
            }
        }

        pairs.sort_by(|a, b| {
            a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
        });
        let mut used_tracks = std::collections::BTreeSet::new();
        let mut used_dets = std::collections::BTreeSet::new();
        let mut assigned: Vec<(usize, u32)> = Vec::new();
        for (_, track_id, det_idx) in pairs {
            if used_tracks.contains(&track_id) || used_dets.contains(&det_idx) {
                continue;
            }
            used_tracks.insert(track_id);
            used_dets.insert(det_idx);
            assigned.push((det_idx, track_id));
        }
        for (det_idx, track_id) in &assigned {
            let det = &dets[*det_idx];
            let track = self
                .tracks
                .iter_mut()
                .find(|t| t.id == *track_id)
                .expect("assigned track exists");
            append_measurement(track, det, self.w_d, self.w_m).expect("gated timestamp");
            out[*det_idx] = Some(*track_id);
        }
        // Accepted detections without a track start new ones.
        for (i, det) in dets.iter().enumerate() {
            if out[i].is_some() || !filter_detection(det, &self.cfg).accepted() {
                continue;
            }
            let id = self.next_id;
            self.next_id += 1;
            let mut track = AgentTrack::new(id, det.class);
            append_measurement(&mut track, det, self.w_d, self.w_m).expect("fresh track");
            self.tracks.push(track);
            out[i] = Some(id);
        }
        out
    }

    /// Smooth every track in place; returns per-track convergence results.
    pub fn optimize_all(&mut self) -> Vec<SmoothResult> {
        self.tracks.iter_mut().map(optimize_track).collect()
    }
}

//! Per-camera association of thumbnails into player tracklets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{solve_assignment, INFEASIBLE};
use crate::fusion::{conflict, dempster_combine, evidence_from_thumbnail, FusionParams, MassFunction};
use crate::model::{CameraCalib, Interval, PitchPos, Rect, Thumbnail, TimeStamp, Tracklet, TrackletEntry};
use crate::streams::ThumbnailStreams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error("thumbnail has no player detections")]
    NoDetections,
    #[error("stream for camera {camera} is not time-ordered at index {index}")]
    UnsortedStream { camera: String, index: usize },
    #[error("thumbnail {index} belongs to camera {found}, expected {expected}")]
    CalibMismatch { expected: String, found: String, index: usize },
    #[error("no calibration for camera {0}")]
    UnknownCamera(String),
    #[error("invalid tracker parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerParams {
    /// Fastest plausible player speed, m/s.
    pub gate_speed_mps: f64,
    /// Longest silence before a tracklet is closed, ms.
    pub max_gap: u64,
    /// Distance (m) added to every gate radius to absorb measurement noise.
    pub gate_slack_m: f64,
    /// A thumbnail whose nearest detection lies farther than this (px) from
    /// the crop center is treated as a missed central player. `None` accepts
    /// any distance.
    pub central_max_offset_px: Option<f64>,
    /// Exit gating. When a tracklet's predicted position falls outside the
    /// camera region (grown by `gate_slack_m`), the player is expected to have
    /// left; the tracklet is then extended only by observations whose jersey
    /// evidence conflicts with its own by at most this much. `None` disables.
    pub exit_conflict_max: Option<f64>,
    /// Cost of opening a tracklet for an observation instead of extending
    /// one. `None` uses twice the largest gate radius of the step, the most a
    /// gate-feasible match can cost under constant-velocity prediction.
    pub new_track_cost: Option<f64>,
}

impl Default for TrackerParams {
    fn default() -> Self {
        TrackerParams {
            gate_speed_mps: 9.0,
            max_gap: 1000,
            gate_slack_m: 0.5,
            central_max_offset_px: Some(8.0),
            exit_conflict_max: Some(0.5),
            new_track_cost: None,
        }
    }
}

impl TrackerParams {
    pub fn validate(&self, tick_ms: u64) -> Result<(), TrackError> {
        if !(self.gate_speed_mps > 0.0) {
            return Err(TrackError::InvalidParams("gate_speed_mps > 0".into()));
        }
        if self.max_gap < tick_ms {
            return Err(TrackError::InvalidParams("max_gap >= 1 tick".into()));
        }
        if !(self.gate_slack_m >= 0.0 && self.gate_slack_m.is_finite()) {
            return Err(TrackError::InvalidParams("gate_slack_m >= 0".into()));
        }
        if let Some(r) = self.central_max_offset_px {
            if !(r >= 0.0) {
                return Err(TrackError::InvalidParams("central_max_offset_px >= 0".into()));
            }
        }
        if let Some(k) = self.exit_conflict_max {
            if !(0.0..=1.0).contains(&k) {
                return Err(TrackError::InvalidParams("exit_conflict_max in [0, 1]".into()));
            }
        }
        if let Some(c) = self.new_track_cost {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(TrackError::InvalidParams("new_track_cost >= 0".into()));
            }
        }
        Ok(())
    }
}

/// Index of the detection nearest the thumbnail center; ties go to the lowest
/// index.
pub fn central_player(t: &Thumbnail) -> Result<usize, TrackError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, d) in t.player_detections.iter().enumerate() {
        let dist = d.image_box().dist_to_center();
        if best.is_none_or(|(_, bd)| dist < bd) {
            best = Some((i, dist));
        }
    }
    best.map(|(i, _)| i).ok_or(TrackError::NoDetections)
}

/// The central detection if it is close enough to the crop center.
pub fn resolve_central(t: &Thumbnail, p: &TrackerParams) -> Option<usize> {
    let c = central_player(t).ok()?;
    match p.central_max_offset_px {
        Some(r) if t.player_detections[c].image_box().dist_to_center() > r => None,
        _ => Some(c),
    }
}

/// A tracklet point in camera-plane meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub t: TimeStamp,
    pub pos: PitchPos,
}

/// Constant-velocity extrapolation from the last two points, or the last
/// point held when only one is known.
pub fn predict_position(recent: &[TrackPoint], t: TimeStamp) -> PitchPos {
    match recent {
        [] => panic!("prediction needs at least one point"),
        [only] => only.pos,
        [.., a, b] => {
            let dt = (b.t.0 - a.t.0) as f64;
            if dt <= 0.0 {
                return b.pos;
            }
            let ahead = (t.0 as f64 - b.t.0 as f64) / dt;
            PitchPos::new(b.pos.x + (b.pos.x - a.pos.x) * ahead, b.pos.y + (b.pos.y - a.pos.y) * ahead)
        }
    }
}

fn gate_radius(recent: &[TrackPoint], now: TimeStamp, p: &TrackerParams) -> f64 {
    let last = recent[recent.len() - 1];
    p.gate_speed_mps * now.0.saturating_sub(last.t.0) as f64 / 1000.0 + p.gate_slack_m
}

/// `cost[i][j]` is the distance from tracklet `i`'s predicted position to
/// observation `j`, or [`INFEASIBLE`] when reaching `j` from the tracklet's
/// last point would take more than `gate_speed_mps`.
pub fn gated_cost_matrix(
    active: &[&[TrackPoint]],
    observations: &[PitchPos],
    now: TimeStamp,
    p: &TrackerParams,
) -> Vec<Vec<f64>> {
    active
        .iter()
        .map(|recent| {
            let last = recent[recent.len() - 1].pos;
            let radius = gate_radius(recent, now, p);
            let pred = predict_position(recent, now);
            observations
                .iter()
                .map(|obs| {
                    if last.dist(obs) <= radius {
                        pred.dist(obs)
                    } else {
                        INFEASIBLE
                    }
                })
                .collect()
        })
        .collect()
}

struct Open {
    tracklet: Tracklet,
    recent: Vec<TrackPoint>,
    /// Combined jersey evidence so far.
    mass: MassFunction,
}

impl Open {
    fn start(id: u32, camera: &str, entry: TrackletEntry, pos: PitchPos, evidence: MassFunction) -> Open {
        Open {
            mass: evidence,
            tracklet: Tracklet {
                id,
                camera_id: camera.to_string(),
                span: Interval::new(entry.t_ms.0, entry.t_ms.0 + 1).expect("nonempty"),
                entries: vec![entry],
            },
            recent: vec![TrackPoint { t: entry.t_ms, pos }],
        }
    }

    fn push(&mut self, entry: TrackletEntry, pos: PitchPos, evidence: &MassFunction) {
        if let Ok((m, _)) = dempster_combine(&self.mass, evidence) {
            self.mass = m;
        }
        self.tracklet.entries.push(entry);
        self.recent.push(TrackPoint { t: entry.t_ms, pos });
        if self.recent.len() > 2 {
            self.recent.remove(0);
        }
    }

    fn finish(mut self, tick_ms: u64) -> Tracklet {
        let start = self.tracklet.first_t().0;
        let end = self.tracklet.last_t().0 + tick_ms;
        self.tracklet.span = Interval::new(start, end).expect("tick > 0");
        self.tracklet
    }
}

/// Output of [`build_tracklets`] for one camera.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CameraTracklets {
    /// Tracklets with camera-local ids, in creation order.
    pub tracklets: Vec<Tracklet>,
    /// Stream indices of thumbnails without a resolvable central player.
    pub unresolved: Vec<usize>,
}

/// Associates one camera's time-ordered stream into tracklets.
pub fn build_tracklets(
    stream: &[Thumbnail],
    calib: &CameraCalib,
    p: &TrackerParams,
    tick_ms: u64,
) -> Result<CameraTracklets, TrackError> {
    build_tracklets_on(stream, calib, None, p, tick_ms)
}

/// Where a tracklet may be predicted to go without being considered gone:
/// the region grown by the slack, unbounded on sides that lie on the pitch
/// boundary since players never leave the pitch.
fn stay_region(region: &Rect, pitch: Option<&Rect>, slack: f64) -> Rect {
    let grown = region.expand(slack);
    let Some(pitch) = pitch else {
        return grown;
    };
    let open = |edge: f64, bound: f64, far: f64| if edge == bound { far } else { edge };
    Rect::new(
        open(grown.x0 + slack, pitch.x0, f64::NEG_INFINITY).min(grown.x0),
        open(grown.y0 + slack, pitch.y0, f64::NEG_INFINITY).min(grown.y0),
        open(grown.x1 - slack, pitch.x1, f64::INFINITY).max(grown.x1),
        open(grown.y1 - slack, pitch.y1, f64::INFINITY).max(grown.y1),
    )
}

/// [`build_tracklets`] knowing the pitch bounds, which sharpens exit gating.
pub fn build_tracklets_on(
    stream: &[Thumbnail],
    calib: &CameraCalib,
    pitch: Option<&Rect>,
    p: &TrackerParams,
    tick_ms: u64,
) -> Result<CameraTracklets, TrackError> {
    p.validate(tick_ms)?;
    for (i, t) in stream.iter().enumerate() {
        if t.camera_id != calib.camera_id {
            return Err(TrackError::CalibMismatch {
                expected: calib.camera_id.clone(),
                found: t.camera_id.clone(),
                index: i,
            });
        }
        if i > 0 && stream[i - 1].t_ms > t.t_ms {
            return Err(TrackError::UnsortedStream {
                camera: calib.camera_id.clone(),
                index: i,
            });
        }
    }

    let mut open: Vec<Open> = Vec::new();
    let mut closed: Vec<Tracklet> = Vec::new();
    let mut unresolved = Vec::new();
    let mut next_id = 0u32;

    let mut start = 0;
    while start < stream.len() {
        let now = stream[start].t_ms;
        let end = start + stream[start..].iter().take_while(|t| t.t_ms == now).count();

        let (stale, live): (Vec<Open>, Vec<Open>) = open
            .into_iter()
            .partition(|o| now.0 - o.tracklet.last_t().0 > p.max_gap);
        closed.extend(stale.into_iter().map(|o| o.finish(tick_ms)));
        open = live;

        let mut obs: Vec<(TrackletEntry, PitchPos, MassFunction)> = Vec::new();
        for (idx, thumb) in stream.iter().enumerate().take(end).skip(start) {
            match resolve_central(thumb, p) {
                Some(c) => {
                    let d = thumb.player_detections[c];
                    let entry = TrackletEntry {
                        t_ms: now,
                        thumb: idx,
                        central: c,
                        anchor_x_m: thumb.anchor_x_m,
                        anchor_y_m: thumb.anchor_y_m,
                        cx: d.cx,
                        cy: d.cy,
                    };
                    let evidence = if p.exit_conflict_max.is_some() {
                        evidence_from_thumbnail(&thumb.digit_detections, &d.image_box(), FusionParams::default().discount)
                    } else {
                        MassFunction::vacuous()
                    };
                    obs.push((entry, entry.plane_pos(calib.px_per_m), evidence));
                }
                None => unresolved.push(idx),
            }
        }

        let mut taken = vec![false; obs.len()];
        if !open.is_empty() && !obs.is_empty() {
            let recents: Vec<&[TrackPoint]> = open.iter().map(|o| o.recent.as_slice()).collect();
            let positions: Vec<PitchPos> = obs.iter().map(|(_, pos, _)| *pos).collect();
            let mut cost = gated_cost_matrix(&recents, &positions, now, p);
            if let Some(max_conflict) = p.exit_conflict_max {
                let region = stay_region(&calib.region, pitch, p.gate_slack_m);
                for (row, o) in cost.iter_mut().zip(&open) {
                    if region.contains(&predict_position(&o.recent, now)) {
                        continue;
                    }
                    for (c, (_, _, evidence)) in row.iter_mut().zip(&obs) {
                        if c.is_finite() && conflict(&o.mass, evidence) > max_conflict {
                            *c = INFEASIBLE;
                        }
                    }
                }
            }
            let ntc = p.new_track_cost.unwrap_or_else(|| {
                2.0 * recents
                    .iter()
                    .map(|r| gate_radius(r, now, p))
                    .fold(0.0, f64::max)
            });
            let assignment = solve_assignment(&cost, ntc);
            for (row, col) in assignment.pairs() {
                let (entry, pos, ref evidence) = obs[col];
                open[row].push(entry, pos, evidence);
                taken[col] = true;
            }
        }
        for ((entry, pos, evidence), used) in obs.into_iter().zip(taken) {
            if !used {
                open.push(Open::start(next_id, &calib.camera_id, entry, pos, evidence));
                next_id += 1;
            }
        }
        start = end;
    }

    closed.extend(open.into_iter().map(|o| o.finish(tick_ms)));
    closed.sort_by_key(|t| t.id);
    Ok(CameraTracklets {
        tracklets: closed,
        unresolved,
    })
}

/// Tracklets for every camera, with ids renumbered globally in camera order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackingOutput {
    pub tracklets: Vec<Tracklet>,
    pub unresolved: usize,
}

/// Runs [`build_tracklets`] for every camera of `cameras` (in parallel) and
/// renumbers tracklet ids in camera order.
pub fn track_all(
    streams: &ThumbnailStreams,
    cameras: &[CameraCalib],
    pitch: Option<&Rect>,
    p: &TrackerParams,
    tick_ms: u64,
) -> Result<TrackingOutput, TrackError> {
    for cam in streams.cameras() {
        if !cameras.iter().any(|c| c.camera_id == cam) {
            return Err(TrackError::UnknownCamera(cam.to_string()));
        }
    }
    let per_camera: Vec<CameraTracklets> = cameras
        .par_iter()
        .map(|c| build_tracklets_on(streams.stream(&c.camera_id), c, pitch, p, tick_ms))
        .collect::<Result<_, _>>()?;

    let mut out = TrackingOutput::default();
    for ct in per_camera {
        out.unresolved += ct.unresolved.len();
        for mut t in ct.tracklets {
            t.id = out.tracklets.len() as u32;
            out.tracklets.push(t);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ImageBox, PlayerDetection};

    fn pt(t: u64, x: f64, y: f64) -> TrackPoint {
        TrackPoint {
            t: TimeStamp(t),
            pos: PitchPos::new(x, y),
        }
    }

    fn thumb_with(centers: &[(f64, f64)]) -> Thumbnail {
        Thumbnail {
            camera_id: "c".into(),
            t_ms: TimeStamp(0),
            anchor_x_m: 0.0,
            anchor_y_m: 0.0,
            player_detections: centers
                .iter()
                .map(|&(x, y)| PlayerDetection::new(ImageBox::body(x, y), 1.0))
                .collect(),
            digit_detections: vec![],
            truth_player_id: None,
        }
    }

    #[test]
    fn central_player_examples() {
        assert_eq!(central_player(&thumb_with(&[(128.0, 128.0), (60.0, 200.0)])), Ok(0));
        assert_eq!(central_player(&thumb_with(&[(130.0, 128.0), (126.0, 128.0)])), Ok(0));
        assert_eq!(central_player(&thumb_with(&[(130.0, 128.0), (127.0, 128.0)])), Ok(1));
        assert_eq!(central_player(&thumb_with(&[])), Err(TrackError::NoDetections));
    }

    #[test]
    fn prediction_examples() {
        let p = predict_position(&[pt(0, 10.0, 10.0), pt(1000, 11.0, 10.0)], TimeStamp(2000));
        assert_eq!(p, PitchPos::new(12.0, 10.0));
        assert_eq!(predict_position(&[pt(0, 5.0, 5.0)], TimeStamp(500)), PitchPos::new(5.0, 5.0));
        let p = predict_position(&[pt(0, 0.0, 0.0), pt(100, 0.5, 0.0)], TimeStamp(200));
        assert_eq!(p, PitchPos::new(1.0, 0.0));
    }

    #[test]
    fn gate_examples() {
        let params = TrackerParams::default();
        let track = [pt(0, 10.0, 10.0)];
        let obs = [PitchPos::new(10.0, 10.0), PitchPos::new(20.0, 10.0), PitchPos::new(10.5, 10.0)];
        let c = gated_cost_matrix(&[&track], &obs, TimeStamp(100), &params);
        assert_eq!(c[0][0], 0.0);
        assert_eq!(c[0][1], INFEASIBLE);
        assert_eq!(c[0][2], 0.5);
    }

    #[test]
    fn params_validation() {
        assert!(TrackerParams::default().validate(100).is_ok());
        let p = TrackerParams {
            max_gap: 50,
            ..Default::default()
        };
        assert!(p.validate(100).is_err());
        let p = TrackerParams {
            gate_speed_mps: 0.0,
            ..Default::default()
        };
        assert!(p.validate(100).is_err());
    }

    fn calib() -> CameraCalib {
        CameraCalib {
            camera_id: "c".into(),
            region: Rect::new(0.0, 0.0, 105.0, 68.0),
            px_per_m: 10.0,
            drop_prob: 0.0,
        }
    }

    fn at(t: u64, x: f64) -> Thumbnail {
        let mut th = thumb_with(&[(128.0, 128.0)]);
        th.t_ms = TimeStamp(t);
        th.anchor_x_m = x;
        th.anchor_y_m = 30.0;
        th
    }

    #[test]
    fn long_gap_splits_tracklet() {
        let stream = vec![at(0, 10.0), at(100, 10.1), at(1600, 10.2), at(1700, 10.3)];
        let out = build_tracklets(&stream, &calib(), &TrackerParams::default(), 100).unwrap();
        assert_eq!(out.tracklets.len(), 2);
        assert_eq!(out.tracklets[0].span, Interval::new(0, 200).unwrap());
        assert_eq!(out.tracklets[1].span, Interval::new(1600, 1800).unwrap());
    }

    #[test]
    fn unsorted_stream_rejected() {
        let stream = vec![at(100, 10.0), at(0, 10.0)];
        assert!(matches!(
            build_tracklets(&stream, &calib(), &TrackerParams::default(), 100),
            Err(TrackError::UnsortedStream { index: 1, .. })
        ));
    }

    #[test]
    fn empty_detections_are_unresolved() {
        let mut blank = at(100, 10.0);
        blank.player_detections.clear();
        let stream = vec![at(0, 10.0), blank, at(200, 10.2)];
        let out = build_tracklets(&stream, &calib(), &TrackerParams::default(), 100).unwrap();
        assert_eq!(out.unresolved, vec![1]);
        assert_eq!(out.tracklets.len(), 1);
        assert_eq!(out.tracklets[0].entries.len(), 2);
    }

    #[test]
    fn wrong_camera_rejected() {
        let mut th = at(0, 1.0);
        th.camera_id = "other".into();
        assert!(matches!(
            build_tracklets(&[th], &calib(), &TrackerParams::default(), 100),
            Err(TrackError::CalibMismatch { .. })
        ));
    }
}

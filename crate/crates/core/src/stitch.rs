//! Cross-camera stitching of tracklets into global tracks.
//!
//! Tracklets are placed on the pitch through their crop anchors, scored
//! pairwise on spatial consistency plus the Dempster-Shafer conflict between
//! their number evidence, and merged greedily with complete linkage. Only
//! pairs cheaper than the merge threshold are ever stored: under complete
//! linkage a single expensive cross pair blocks a cluster merge for good.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::{self, conflict, FusionParams, MassFunction};
use crate::model::{CameraCalib, GlobalTrack, PitchPos, TimeStamp, Tracklet};
use crate::streams::ThumbnailStreams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StitchError {
    #[error("tracklet {tracklet} is from camera {tracklet_camera}, calibration is for {calib_camera}")]
    CalibMismatch {
        tracklet: u32,
        tracklet_camera: String,
        calib_camera: String,
    },
    #[error("no calibration for camera {0}")]
    UnknownCamera(String),
    #[error("tracklet {tracklet} refers to missing thumbnail {index} of camera {camera}")]
    MissingThumbnail { tracklet: u32, camera: String, index: usize },
    #[error("invalid stitch parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StitchParams {
    /// Largest mean distance (m) tolerated over a temporal overlap.
    pub overlap_dist_max: f64,
    /// Largest speed (m/s) implied across a temporal gap.
    pub gap_speed_mps: f64,
    pub conflict_penalty_weight: f64,
    /// Clusters merge only while their linkage cost is below this.
    pub merge_threshold: f64,
}

impl Default for StitchParams {
    fn default() -> Self {
        StitchParams {
            overlap_dist_max: 1.0,
            gap_speed_mps: 9.0,
            conflict_penalty_weight: 5.0,
            merge_threshold: 2.0,
        }
    }
}

impl StitchParams {
    pub fn validate(&self) -> Result<(), StitchError> {
        let ok = [
            self.overlap_dist_max,
            self.gap_speed_mps,
            self.conflict_penalty_weight,
            self.merge_threshold,
        ]
        .iter()
        .all(|v| *v > 0.0 && v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(StitchError::InvalidParams("all stitch parameters must be positive".into()))
        }
    }
}

/// Pitch-frame positions of a tracklet's entries, clamped into the camera
/// region.
pub fn tracklet_to_pitch(t: &Tracklet, c: &CameraCalib) -> Result<Vec<(TimeStamp, PitchPos)>, StitchError> {
    if t.camera_id != c.camera_id {
        return Err(StitchError::CalibMismatch {
            tracklet: t.id,
            tracklet_camera: t.camera_id.clone(),
            calib_camera: c.camera_id.clone(),
        });
    }
    let r = c.region;
    Ok(t.entries
        .iter()
        .map(|e| {
            let p = e.plane_pos(c.px_per_m);
            let x = p.x.clamp(r.x0, r.x1.next_down());
            let y = p.y.clamp(r.y0, r.y1.next_down());
            (e.t_ms, PitchPos::new(x, y))
        })
        .collect())
}

/// A tracklet prepared for stitching: its pitch trajectory, per-entry number
/// evidence, and the combined evidence.
#[derive(Debug, Clone)]
pub struct PitchTracklet {
    pub tracklet: Tracklet,
    pub times: Vec<u64>,
    pub positions: Vec<PitchPos>,
    pub evidence: Vec<MassFunction>,
    pub mass: MassFunction,
}

impl PitchTracklet {
    pub fn new(tracklet: Tracklet, trajectory: Vec<(TimeStamp, PitchPos)>, evidence: Vec<MassFunction>) -> Self {
        let mass = fusion::combine_all(&evidence)
            .map(|(m, _)| m)
            .unwrap_or_else(|_| MassFunction::vacuous());
        let (times, positions) = trajectory.into_iter().map(|(t, p)| (t.0, p)).unzip();
        PitchTracklet {
            tracklet,
            times,
            positions,
            evidence,
            mass,
        }
    }

    fn first(&self) -> (u64, PitchPos) {
        (self.times[0], self.positions[0])
    }

    fn last(&self) -> (u64, PitchPos) {
        let i = self.times.len() - 1;
        (self.times[i], self.positions[i])
    }

    /// Entry index range with times inside `[start, end)`.
    fn window(&self, start: u64, end: u64) -> std::ops::Range<usize> {
        let lo = self.times.partition_point(|t| *t < start);
        let hi = self.times.partition_point(|t| *t < end);
        lo..hi
    }
}

/// Builds stitch inputs: trajectories from calibration and per-thumbnail
/// number evidence from the streams.
pub fn prepare(
    tracklets: &[Tracklet],
    cameras: &[CameraCalib],
    streams: &ThumbnailStreams,
    fusion: &FusionParams,
) -> Result<Vec<PitchTracklet>, StitchError> {
    tracklets
        .par_iter()
        .map(|t| {
            let calib = cameras
                .iter()
                .find(|c| c.camera_id == t.camera_id)
                .ok_or_else(|| StitchError::UnknownCamera(t.camera_id.clone()))?;
            let trajectory = tracklet_to_pitch(t, calib)?;
            let evidence = tracklet_evidence(t, streams, fusion)?;
            Ok(PitchTracklet::new(t.clone(), trajectory, evidence))
        })
        .collect()
}

/// Per-entry evidence of a tracklet, in entry order.
pub fn tracklet_evidence(
    t: &Tracklet,
    streams: &ThumbnailStreams,
    fusion: &FusionParams,
) -> Result<Vec<MassFunction>, StitchError> {
    t.entries
        .iter()
        .map(|e| {
            let thumb = streams
                .get(&t.camera_id, e.thumb)
                .filter(|th| th.t_ms == e.t_ms && e.central < th.player_detections.len())
                .ok_or_else(|| StitchError::MissingThumbnail {
                    tracklet: t.id,
                    camera: t.camera_id.clone(),
                    index: e.thumb,
                })?;
            let central = thumb.player_detections[e.central].image_box();
            Ok(fusion::evidence_from_thumbnail(&thumb.digit_detections, &central, fusion.discount))
        })
        .collect()
}

fn gap_cost(earlier: (u64, PitchPos), later: (u64, PitchPos), p: &StitchParams) -> f64 {
    let gap_s = later.0.abs_diff(earlier.0) as f64 / 1000.0;
    let dist = earlier.1.dist(&later.1);
    if gap_s <= 0.0 {
        return if dist == 0.0 { 0.0 } else { f64::INFINITY };
    }
    let ratio = dist / gap_s / p.gap_speed_mps;
    if ratio <= 1.0 {
        ratio
    } else {
        f64::INFINITY
    }
}

/// Spatial part of the pair cost.
fn motion_cost(a: &PitchTracklet, b: &PitchTracklet, p: &StitchParams, tick_ms: u64) -> f64 {
    let (sa, sb) = (a.tracklet.span, b.tracklet.span);
    let Some(shared) = crate::model::interval_overlap(&sa, &sb) else {
        return if sa.end() <= sb.start() {
            gap_cost(a.last(), b.first(), p)
        } else {
            gap_cost(b.last(), a.first(), p)
        };
    };
    if a.tracklet.camera_id == b.tracklet.camera_id {
        return f64::INFINITY;
    }

    let (start, end) = (shared.start().0, shared.end().0);
    let (ra, rb) = (a.window(start, end), b.window(start, end));
    let tick = tick_ms.max(1);
    let key = |t: u64| (t + tick / 2) / tick;
    let (mut i, mut j) = (ra.start, rb.start);
    let (mut sum, mut n) = (0.0, 0usize);
    while i < ra.end && j < rb.end {
        match key(a.times[i]).cmp(&key(b.times[j])) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                sum += a.positions[i].dist(&b.positions[j]);
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    if n > 0 {
        let mean = sum / n as f64;
        return if mean <= p.overlap_dist_max { mean } else { f64::INFINITY };
    }

    // Spans overlap but no tick is shared (frame drops): gate the closest
    // pair in time as if it were a gap.
    let mut best: Option<((u64, PitchPos), (u64, PitchPos))> = None;
    let all_a = a.window(start.saturating_sub(tick), end + tick);
    for ia in all_a {
        let ta = a.times[ia];
        let k = b.times.partition_point(|t| *t < ta);
        for jb in [k.wrapping_sub(1), k] {
            if let (Some(&tb), Some(&pb)) = (b.times.get(jb), b.positions.get(jb)) {
                let cand = ((ta, a.positions[ia]), (tb, pb));
                if best.is_none_or(|(x, y)| cand.0 .0.abs_diff(cand.1 .0) < x.0.abs_diff(y.0)) {
                    best = Some(cand);
                }
            }
        }
    }
    best.map_or(f64::INFINITY, |(x, y)| gap_cost(x, y, p))
}

/// Cost of attributing two tracklets to one player.
pub fn pair_cost(a: &PitchTracklet, b: &PitchTracklet, p: &StitchParams, tick_ms: u64) -> f64 {
    let motion = motion_cost(a, b, p, tick_ms);
    if !motion.is_finite() {
        return f64::INFINITY;
    }
    motion + p.conflict_penalty_weight * conflict(&a.mass, &b.mass)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    cost: f64,
    a: usize,
    b: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.a.cmp(&other.a))
            .then(self.b.cmp(&other.b))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Complete-linkage clustering state over tracklet indices. A cluster is
/// named by its smallest member index.
struct Linkage {
    members: Vec<Vec<usize>>,
    alive: Vec<bool>,
    /// Linkage costs below the threshold; an absent entry means blocked.
    links: Vec<BTreeMap<usize, f64>>,
    heap: BinaryHeap<Reverse<Candidate>>,
}

impl Linkage {
    fn new(n: usize, pairs: Vec<(usize, usize, f64)>) -> Self {
        let mut links = vec![BTreeMap::new(); n];
        let mut heap = BinaryHeap::new();
        for (a, b, cost) in pairs {
            links[a].insert(b, cost);
            links[b].insert(a, cost);
            heap.push(Reverse(Candidate { cost, a, b }));
        }
        Linkage {
            members: (0..n).map(|i| vec![i]).collect(),
            alive: vec![true; n],
            links,
            heap,
        }
    }

    fn merge(&mut self, x: usize, y: usize) -> usize {
        let (a, b) = (x.min(y), x.max(y));
        let la = std::mem::take(&mut self.links[a]);
        let lb = std::mem::take(&mut self.links[b]);
        for c in la.keys().chain(lb.keys()) {
            if *c != a && *c != b {
                self.links[*c].remove(&a);
                self.links[*c].remove(&b);
            }
        }
        let mut merged = BTreeMap::new();
        for (c, ca) in &la {
            if *c == b {
                continue;
            }
            if let Some(cb) = lb.get(c) {
                let cost = ca.max(*cb);
                merged.insert(*c, cost);
                self.links[*c].insert(a, cost);
                let (lo, hi) = (a.min(*c), a.max(*c));
                self.heap.push(Reverse(Candidate { cost, a: lo, b: hi }));
            }
        }
        self.links[a] = merged;
        let moved = std::mem::take(&mut self.members[b]);
        self.members[a].extend(moved);
        self.alive[b] = false;
        a
    }

    fn run(&mut self, threshold: f64) {
        while let Some(Reverse(c)) = self.heap.pop() {
            if c.cost >= threshold {
                break;
            }
            if !(self.alive[c.a] && self.alive[c.b]) || self.links[c.a].get(&c.b) != Some(&c.cost) {
                continue;
            }
            self.merge(c.a, c.b);
        }
    }

    fn clusters(&self) -> Vec<Vec<usize>> {
        (0..self.members.len())
            .filter(|i| self.alive[*i])
            .map(|i| {
                let mut m = self.members[i].clone();
                m.sort_unstable();
                m
            })
            .collect()
    }
}

/// Pairs `(i, j, cost)` with `i < j` and cost below the merge threshold.
fn cheap_pairs(inputs: &[PitchTracklet], p: &StitchParams, tick_ms: u64) -> Vec<(usize, usize, f64)> {
    (0..inputs.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            ((i + 1)..inputs.len()).filter_map(move |j| {
                let c = pair_cost(&inputs[i], &inputs[j], p, tick_ms);
                (c < p.merge_threshold).then_some((i, j, c))
            })
        })
        .collect()
}

/// Groups of input indices after greedy complete-linkage merging, starting
/// from `initial` (singletons when `None`). Groups are sorted by their
/// smallest member.
pub fn cluster(
    inputs: &[PitchTracklet],
    initial: Option<&[Vec<usize>]>,
    p: &StitchParams,
    tick_ms: u64,
) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    order.sort_by_key(|i| inputs[*i].tracklet.id);
    debug_assert!(order.iter().enumerate().all(|(k, i)| k == *i), "inputs must be sorted by tracklet id");

    let mut linkage = Linkage::new(inputs.len(), cheap_pairs(inputs, p, tick_ms));
    if let Some(groups) = initial {
        for g in groups {
            let mut rep = g[0];
            for &other in &g[1..] {
                rep = linkage.merge(rep, other);
            }
        }
    }
    linkage.run(p.merge_threshold);
    linkage.clusters()
}

/// Stitches tracklets into global tracks and attaches number verdicts from
/// all member thumbnails' evidence.
pub fn stitch(
    inputs: &[PitchTracklet],
    p: &StitchParams,
    fusion: &FusionParams,
    tick_ms: u64,
) -> Result<Vec<GlobalTrack>, StitchError> {
    p.validate()?;
    let mut sorted: Vec<PitchTracklet> = inputs.to_vec();
    sorted.sort_by_key(|t| t.tracklet.id);
    let groups = cluster(&sorted, None, p, tick_ms);
    Ok(assemble(&sorted, &groups, fusion))
}

/// Global tracks for the given groups, verdicts included.
pub fn assemble(inputs: &[PitchTracklet], groups: &[Vec<usize>], fusion: &FusionParams) -> Vec<GlobalTrack> {
    groups
        .par_iter()
        .enumerate()
        .map(|(k, g)| {
            let members: Vec<&PitchTracklet> = g.iter().map(|i| &inputs[*i]).collect();
            GlobalTrack {
                track_id: k as u32,
                tracklets: members.iter().map(|m| m.tracklet.clone()).collect(),
                number_verdict: Some(track_verdict(&members, fusion)),
            }
        })
        .collect()
}

/// Verdict from every member entry's evidence, combined in (time, tracklet)
/// order.
pub fn track_verdict(members: &[&PitchTracklet], fusion: &FusionParams) -> fusion::NumberVerdict {
    let mut ordered: Vec<(u64, u32, &MassFunction)> = Vec::new();
    for m in members {
        for (t, e) in m.times.iter().zip(&m.evidence) {
            ordered.push((*t, m.tracklet.id, e));
        }
    }
    ordered.sort_by_key(|(t, id, _)| (*t, *id));
    let evidence: Vec<MassFunction> = ordered.into_iter().map(|(_, _, m)| m.clone()).collect();
    match fusion::identify(&evidence, fusion) {
        Ok((_, v)) => v,
        Err(_) => fusion::NumberVerdict::abstain(0.0, 1.0),
    }
}

//! Shared domain types: time and interval algebra, pitch/image geometry,
//! detections, thumbnails, tracklets and scenario configuration.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::quant::{q9, q9_vec, ser_q9};

/// Side length of a thumbnail in pixels.
pub const THUMB_SIZE: f64 = 256.0;
/// Pixel coordinate of the thumbnail center along either axis.
pub const THUMB_CENTER: f64 = 128.0;
/// Fixed body box used for player detections.
pub const BODY_BOX_W: f64 = 20.0;
pub const BODY_BOX_H: f64 = 50.0;

pub type CameraId = String;
pub type PlayerId = u32;

/// Integer milliseconds since match start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimeStamp(pub u64);

impl TimeStamp {
    pub fn millis(self) -> u64 {
        self.0
    }

    pub fn seconds(self) -> f64 {
        self.0 as f64 / 1000.0
    }
}

impl fmt::Display for TimeStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms", self.0)
    }
}

/// Half-open time interval `[start, end)`; zero-length intervals are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "(u64, u64)", into = "(u64, u64)")]
pub struct Interval {
    start: TimeStamp,
    end: TimeStamp,
}

impl Interval {
    pub fn new(start: u64, end: u64) -> Option<Interval> {
        (start < end).then_some(Interval {
            start: TimeStamp(start),
            end: TimeStamp(end),
        })
    }

    pub fn start(&self) -> TimeStamp {
        self.start
    }

    pub fn end(&self) -> TimeStamp {
        self.end
    }

    pub fn len_ms(&self) -> u64 {
        self.end.0 - self.start.0
    }

    pub fn contains(&self, t: TimeStamp) -> bool {
        self.start <= t && t < self.end
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        interval_overlap(self, other).is_some()
    }
}

impl TryFrom<(u64, u64)> for Interval {
    type Error = String;

    fn try_from((s, e): (u64, u64)) -> Result<Self, Self::Error> {
        Interval::new(s, e).ok_or_else(|| format!("invalid interval [{s}, {e})"))
    }
}

impl From<Interval> for (u64, u64) {
    fn from(i: Interval) -> Self {
        (i.start.0, i.end.0)
    }
}

/// `[max(starts), min(ends))` when nonempty.
pub fn interval_overlap(a: &Interval, b: &Interval) -> Option<Interval> {
    let start = a.start.max(b.start);
    let end = a.end.min(b.end);
    Interval::new(start.0, end.0)
}

/// Length of the union of `intervals`, overlaps counted once.
pub fn covered_duration(intervals: &[Interval]) -> u64 {
    let mut sorted: Vec<Interval> = intervals.to_vec();
    sorted.sort();
    let mut total = 0;
    let mut current: Option<(u64, u64)> = None;
    for iv in sorted {
        let (s, e) = (iv.start.0, iv.end.0);
        match current {
            Some((cs, ce)) if s <= ce => current = Some((cs, ce.max(e))),
            Some((cs, ce)) => {
                total += ce - cs;
                current = Some((s, e));
            }
            None => current = Some((s, e)),
        }
    }
    if let Some((cs, ce)) = current {
        total += ce - cs;
    }
    total
}

/// World position on the pitch, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PitchPos {
    pub x: f64,
    pub y: f64,
}

impl PitchPos {
    pub fn new(x: f64, y: f64) -> Self {
        PitchPos { x, y }
    }

    pub fn dist(&self, other: &PitchPos) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned rectangle `[x0, x1) x [y0, y1)` on the pitch, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }

    /// Inclusive of the min edges, exclusive of the max edges.
    pub fn contains(&self, p: &PitchPos) -> bool {
        p.x >= self.x0 && p.x < self.x1 && p.y >= self.y0 && p.y < self.y1
    }

    /// The rectangle grown by `margin` on every side.
    pub fn expand(&self, margin: f64) -> Rect {
        Rect::new(self.x0 - margin, self.y0 - margin, self.x1 + margin, self.y1 + margin)
    }
}

impl From<[f64; 4]> for Rect {
    fn from(a: [f64; 4]) -> Self {
        Rect::new(a[0], a[1], a[2], a[3])
    }
}

impl From<Rect> for [f64; 4] {
    fn from(r: Rect) -> Self {
        [r.x0, r.y0, r.x1, r.y1]
    }
}

/// A box inside a 256x256 thumbnail, center plus size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl ImageBox {
    pub fn body(cx: f64, cy: f64) -> Self {
        ImageBox {
            cx,
            cy,
            w: BODY_BOX_W,
            h: BODY_BOX_H,
        }
    }

    pub fn is_valid(&self) -> bool {
        (0.0..THUMB_SIZE).contains(&self.cx)
            && (0.0..THUMB_SIZE).contains(&self.cy)
            && self.w > 0.0
            && self.h > 0.0
    }

    /// Whether a horizontal pixel position falls inside the box's width.
    pub fn spans_x(&self, x: f64) -> bool {
        (x - self.cx).abs() <= self.w / 2.0
    }

    pub fn dist_to_center(&self) -> f64 {
        (self.cx - THUMB_CENTER).hypot(self.cy - THUMB_CENTER)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerDetection {
    #[serde(serialize_with = "ser_q9")]
    pub cx: f64,
    #[serde(serialize_with = "ser_q9")]
    pub cy: f64,
    #[serde(serialize_with = "ser_q9")]
    pub w: f64,
    #[serde(serialize_with = "ser_q9")]
    pub h: f64,
    #[serde(serialize_with = "ser_q9")]
    pub conf: f64,
}

impl PlayerDetection {
    pub fn new(b: ImageBox, conf: f64) -> Self {
        PlayerDetection {
            cx: b.cx,
            cy: b.cy,
            w: b.w,
            h: b.h,
            conf,
        }
    }

    pub fn image_box(&self) -> ImageBox {
        ImageBox {
            cx: self.cx,
            cy: self.cy,
            w: self.w,
            h: self.h,
        }
    }

    pub(crate) fn quantized(self) -> Self {
        PlayerDetection {
            cx: q9(self.cx),
            cy: q9(self.cy),
            w: q9(self.w),
            h: q9(self.h),
            conf: q9(self.conf),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DigitDetection {
    pub digit: u8,
    #[serde(serialize_with = "ser_q9")]
    pub x: f64,
    #[serde(serialize_with = "ser_q9")]
    pub conf: f64,
}

impl DigitDetection {
    pub(crate) fn quantized(self) -> Self {
        DigitDetection {
            digit: self.digit,
            x: q9(self.x),
            conf: q9(self.conf),
        }
    }
}

/// One timestamped crop from one camera. The anchor is the pitch position the
/// crop is centered on, known to calibrated consumers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thumbnail {
    pub camera_id: CameraId,
    pub t_ms: TimeStamp,
    #[serde(serialize_with = "ser_q9")]
    pub anchor_x_m: f64,
    #[serde(serialize_with = "ser_q9")]
    pub anchor_y_m: f64,
    pub player_detections: Vec<PlayerDetection>,
    pub digit_detections: Vec<DigitDetection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_player_id: Option<PlayerId>,
}

impl Thumbnail {
    pub fn anchor(&self) -> PitchPos {
        PitchPos::new(self.anchor_x_m, self.anchor_y_m)
    }

    pub fn is_valid(&self) -> bool {
        self.anchor_x_m.is_finite()
            && self.anchor_y_m.is_finite()
            && self
                .player_detections
                .iter()
                .all(|d| d.image_box().is_valid() && (0.0..=1.0).contains(&d.conf))
            && self.digit_detections.iter().all(|d| {
                d.digit <= 9 && (0.0..THUMB_SIZE).contains(&d.x) && (0.0..=1.0).contains(&d.conf)
            })
    }
}

/// One point of a tracklet: the thumbnail it came from (index into that
/// camera's stream), which detection was taken as the central player, and
/// the geometry needed to place it on the pitch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackletEntry {
    pub t_ms: TimeStamp,
    pub thumb: usize,
    pub central: usize,
    #[serde(serialize_with = "ser_q9")]
    pub anchor_x_m: f64,
    #[serde(serialize_with = "ser_q9")]
    pub anchor_y_m: f64,
    #[serde(serialize_with = "ser_q9")]
    pub cx: f64,
    #[serde(serialize_with = "ser_q9")]
    pub cy: f64,
}

impl TrackletEntry {
    pub fn anchor(&self) -> PitchPos {
        PitchPos::new(self.anchor_x_m, self.anchor_y_m)
    }

    /// Position in camera-plane meters.
    pub fn plane_pos(&self, px_per_m: f64) -> PitchPos {
        PitchPos::new(
            self.anchor_x_m + (self.cx - THUMB_CENTER) / px_per_m,
            self.anchor_y_m + (self.cy - THUMB_CENTER) / px_per_m,
        )
    }
}

/// Time-ordered chain of thumbnails from one camera attributed to one player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tracklet {
    pub id: u32,
    pub camera_id: CameraId,
    pub span: Interval,
    pub entries: Vec<TrackletEntry>,
}

impl Tracklet {
    pub fn first_t(&self) -> TimeStamp {
        self.entries[0].t_ms
    }

    pub fn last_t(&self) -> TimeStamp {
        self.entries[self.entries.len() - 1].t_ms
    }

    /// Checks ordering and span invariants for a tick of `tick_ms`.
    pub fn check(&self, tick_ms: u64) -> Result<(), String> {
        if self.entries.is_empty() {
            return Err(format!("tracklet {} has no entries", self.id));
        }
        if self.entries.windows(2).any(|w| w[0].t_ms >= w[1].t_ms) {
            return Err(format!("tracklet {} entries not strictly increasing", self.id));
        }
        if self.span.start() != self.first_t() || self.span.end().0 != self.last_t().0 + tick_ms {
            return Err(format!("tracklet {} span does not match its entries", self.id));
        }
        Ok(())
    }
}

/// Tracklets across cameras fused into one player identity.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalTrack {
    pub track_id: u32,
    pub tracklets: Vec<Tracklet>,
    pub number_verdict: Option<crate::fusion::NumberVerdict>,
}

impl GlobalTrack {
    /// True when no two member tracklets from one camera overlap in time.
    pub fn is_consistent(&self) -> bool {
        self.tracklets.iter().enumerate().all(|(i, a)| {
            self.tracklets[i + 1..]
                .iter()
                .all(|b| a.camera_id != b.camera_id || !a.span.overlaps(&b.span))
        })
    }

    pub fn tracklet_ids(&self) -> Vec<u32> {
        self.tracklets.iter().map(|t| t.id).collect()
    }
}

/// Per (player, camera) visibility intervals; `count` is `K` for that pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisibilityRecord {
    pub player_id: PlayerId,
    pub camera_id: CameraId,
    pub count: usize,
    pub intervals: Vec<Interval>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VisibilityLog {
    entries: BTreeMap<(PlayerId, CameraId), Vec<Interval>>,
}

impl VisibilityLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, player: PlayerId, camera: &str, iv: Interval) {
        self.entries
            .entry((player, camera.to_string()))
            .or_default()
            .push(iv);
    }

    /// `K` for the (player, camera) pair.
    pub fn count(&self, player: PlayerId, camera: &str) -> usize {
        self.intervals(player, camera).len()
    }

    pub fn intervals(&self, player: PlayerId, camera: &str) -> &[Interval] {
        self.entries
            .get(&(player, camera.to_string()))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Total number of visibility intervals for one camera, all players.
    pub fn camera_total(&self, camera: &str) -> usize {
        self.entries
            .iter()
            .filter(|((_, c), _)| c == camera)
            .map(|(_, v)| v.len())
            .sum()
    }

    pub fn contains(&self, player: PlayerId, camera: &str, t: TimeStamp) -> bool {
        self.intervals(player, camera).iter().any(|iv| iv.contains(t))
    }

    pub fn records(&self) -> Vec<VisibilityRecord> {
        self.entries
            .iter()
            .map(|((p, c), ivs)| VisibilityRecord {
                player_id: *p,
                camera_id: c.clone(),
                count: ivs.len(),
                intervals: ivs.clone(),
            })
            .collect()
    }

    pub fn from_records(records: Vec<VisibilityRecord>) -> Result<Self, String> {
        let mut log = VisibilityLog::new();
        for r in records {
            if r.count != r.intervals.len() {
                return Err(format!(
                    "visibility ({}, {}): count {} != {} intervals",
                    r.player_id,
                    r.camera_id,
                    r.count,
                    r.intervals.len()
                ));
            }
            log.entries.insert((r.player_id, r.camera_id), r.intervals);
        }
        Ok(log)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraCalib {
    pub camera_id: CameraId,
    pub region: Rect,
    #[serde(default = "default_px_per_m")]
    pub px_per_m: f64,
    #[serde(default)]
    pub drop_prob: f64,
}

fn default_px_per_m() -> f64 {
    10.0
}

/// Per-digit detection probabilities, from class-wise digit detector mAPs.
pub const DIGIT_DETECT_PROB: [f64; 10] = [0.57, 0.57, 0.68, 0.61, 0.30, 0.58, 0.47, 0.31, 0.29, 0.51];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    pub pos_jitter_px: f64,
    pub miss_prob: f64,
    pub fp_rate: f64,
    pub digit_detect_prob: [f64; 10],
    pub digit_swap_prob: f64,
    pub conf_low: f64,
    pub conf_high: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            pos_jitter_px: 2.0,
            miss_prob: 0.05,
            fp_rate: 0.05,
            digit_detect_prob: DIGIT_DETECT_PROB,
            digit_swap_prob: 0.05,
            conf_low: 0.5,
            conf_high: 1.0,
        }
    }
}

impl NoiseModel {
    /// Perfect detectors: every player and digit found, no jitter, full confidence.
    pub fn off() -> Self {
        NoiseModel {
            pos_jitter_px: 0.0,
            miss_prob: 0.0,
            fp_rate: 0.0,
            digit_detect_prob: [1.0; 10],
            digit_swap_prob: 0.0,
            conf_low: 1.0,
            conf_high: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub duration: TimeStamp,
    pub n_players: usize,
    pub jersey_numbers: Vec<u32>,
    #[serde(default = "default_pitch_width")]
    pub pitch_width: f64,
    #[serde(default = "default_pitch_height")]
    pub pitch_height: f64,
    pub cameras: Vec<CameraCalib>,
    #[serde(default = "default_tick")]
    pub tick: u64,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub seed: u64,
    /// Player speed range in m/s; `[0, 0]` gives stationary players.
    #[serde(default = "default_speed_range")]
    pub speed_range: [f64; 2],
}

fn default_pitch_width() -> f64 {
    105.0
}

fn default_pitch_height() -> f64 {
    68.0
}

fn default_tick() -> u64 {
    100
}

fn default_speed_range() -> [f64; 2] {
    [1.0, 8.0]
}

/// A single violated invariant, with the path of the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.rule)
    }
}

impl Scenario {
    /// The bundled demo: 22 players, 8 cameras tiling a standard pitch, 10 minutes.
    pub fn demo() -> Scenario {
        let (w, h): (f64, f64) = (105.0, 68.0);
        let xs: [f64; 5] = [0.0, 26.25, 52.5, 78.75, 105.0];
        let ys: [f64; 3] = [0.0, 34.0, 68.0];
        let overlap = 6.0;
        let mut cameras = Vec::new();
        for row in 0..2 {
            for col in 0..4 {
                let region = Rect::new(
                    (xs[col] - overlap).max(0.0),
                    (ys[row] - overlap).max(0.0),
                    (xs[col + 1] + overlap).min(w),
                    (ys[row + 1] + overlap).min(h),
                );
                cameras.push(CameraCalib {
                    camera_id: format!("cam{}", row * 4 + col),
                    region,
                    px_per_m: 10.0,
                    drop_prob: 0.1,
                });
            }
        }
        Scenario {
            duration: TimeStamp(600_000),
            n_players: 22,
            jersey_numbers: (10..32).collect(),
            pitch_width: w,
            pitch_height: h,
            cameras,
            tick: 100,
            noise: NoiseModel::default(),
            seed: 7,
            speed_range: default_speed_range(),
        }
    }

    pub fn pitch(&self) -> Rect {
        Rect::new(0.0, 0.0, self.pitch_width, self.pitch_height)
    }

    pub fn camera(&self, id: &str) -> Option<&CameraCalib> {
        self.cameras.iter().find(|c| c.camera_id == id)
    }

    /// Sample times `0, tick, 2*tick, ...` strictly before `duration`.
    pub fn ticks(&self) -> impl Iterator<Item = TimeStamp> + '_ {
        (0..self.n_ticks()).map(move |k| TimeStamp(k as u64 * self.tick))
    }

    pub fn n_ticks(&self) -> usize {
        if self.tick == 0 {
            return 0;
        }
        self.duration.0.div_ceil(self.tick) as usize
    }

    /// Collapses every noise source so streams reflect ground truth exactly.
    pub fn noiseless(mut self) -> Scenario {
        self.noise = NoiseModel::off();
        for c in &mut self.cameras {
            c.drop_prob = 0.0;
        }
        self
    }

    pub(crate) fn quantize(&mut self) {
        self.pitch_width = q9(self.pitch_width);
        self.pitch_height = q9(self.pitch_height);
        for c in &mut self.cameras {
            c.region = Rect::new(q9(c.region.x0), q9(c.region.y0), q9(c.region.x1), q9(c.region.y1));
            c.px_per_m = q9(c.px_per_m);
            c.drop_prob = q9(c.drop_prob);
        }
        let n = &mut self.noise;
        n.pos_jitter_px = q9(n.pos_jitter_px);
        n.miss_prob = q9(n.miss_prob);
        n.fp_rate = q9(n.fp_rate);
        q9_vec(&mut n.digit_detect_prob);
        n.digit_swap_prob = q9(n.digit_swap_prob);
        n.conf_low = q9(n.conf_low);
        n.conf_high = q9(n.conf_high);
        self.speed_range = [q9(self.speed_range[0]), q9(self.speed_range[1])];
    }
}

fn unit(p: f64) -> bool {
    (0.0..=1.0).contains(&p)
}

/// Every violated scenario invariant; empty means the scenario is valid.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut bad = |path: &str, rule: &str| {
        out.push(Violation {
            path: path.to_string(),
            rule: rule.to_string(),
        })
    };

    if s.duration.0 == 0 {
        bad("duration", "duration > 0");
    }
    if s.n_players < 1 {
        bad("n_players", "n_players >= 1");
    }
    if s.n_players != s.jersey_numbers.len() {
        bad("n_players", "n_players = |jersey_numbers|");
    }
    let mut seen = std::collections::BTreeSet::new();
    if !s.jersey_numbers.iter().all(|n| seen.insert(*n)) {
        bad("jersey_numbers", "jersey_numbers distinct");
    }
    for (i, n) in s.jersey_numbers.iter().enumerate() {
        if !(1..=99).contains(n) {
            bad(&format!("jersey_numbers[{i}]"), "jersey number in [1, 99]");
        }
    }
    if !(s.pitch_width > 0.0 && s.pitch_height > 0.0) {
        bad("pitch", "pitch_width > 0 and pitch_height > 0");
    }
    if s.tick == 0 {
        bad("tick", "tick > 0");
    }
    if s.cameras.is_empty() {
        bad("cameras", "cameras >= 1");
    }
    let pitch = s.pitch();
    let mut ids = std::collections::BTreeSet::new();
    for (i, c) in s.cameras.iter().enumerate() {
        let p = format!("cameras[{i}]");
        if !ids.insert(c.camera_id.as_str()) {
            bad(&format!("{p}.camera_id"), "camera ids distinct");
        }
        let r = c.region;
        if !(r.x0 < r.x1 && r.y0 < r.y1) {
            bad(&format!("{p}.region"), "region area > 0");
        }
        if r.x0 < pitch.x0 || r.y0 < pitch.y0 || r.x1 > pitch.x1 || r.y1 > pitch.y1 {
            bad(&format!("{p}.region"), "region within pitch");
        }
        if !(c.px_per_m > 0.0) {
            bad(&format!("{p}.px_per_m"), "px_per_m > 0");
        }
        if !(0.0..1.0).contains(&c.drop_prob) {
            bad(&format!("{p}.drop_prob"), "drop_prob in [0, 1)");
        }
    }
    let n = &s.noise;
    if !(n.pos_jitter_px >= 0.0) {
        bad("noise.pos_jitter_px", "pos_jitter_px >= 0");
    }
    if !unit(n.miss_prob) {
        bad("noise.miss_prob", "probability in [0, 1]");
    }
    if !(n.fp_rate >= 0.0 && n.fp_rate.is_finite()) {
        bad("noise.fp_rate", "fp_rate >= 0");
    }
    for (d, p) in n.digit_detect_prob.iter().enumerate() {
        if !unit(*p) {
            bad(&format!("noise.digit_detect_prob[{d}]"), "probability in [0, 1]");
        }
    }
    if !unit(n.digit_swap_prob) {
        bad("noise.digit_swap_prob", "probability in [0, 1]");
    }
    if !(unit(n.conf_low) && unit(n.conf_high)) {
        bad("noise.conf_low", "confidences in [0, 1]");
    }
    if !(n.conf_low <= n.conf_high) {
        bad("noise.conf_low", "conf_low <= conf_high");
    }
    let [lo, hi] = s.speed_range;
    if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
        bad("speed_range", "0 <= speed_min <= speed_max");
    }
    out
}

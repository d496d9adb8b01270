//! Seeded simulation of player motion and of the per-camera thumbnail and
//! detection streams.
//!
//! Every random draw comes from a ChaCha substream keyed by the scenario seed
//! and a label (the camera id for emission), so cameras can be generated in
//! parallel without changing the output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{
    validate_scenario, CameraCalib, DigitDetection, ImageBox, Interval, NoiseModel, PitchPos, PlayerDetection, PlayerId,
    Scenario, Thumbnail, TimeStamp, Violation, VisibilityLog, THUMB_CENTER, THUMB_SIZE,
};
use crate::quant::q9;
use crate::streams::ThumbnailStreams;

/// Largest pixel coordinate the simulator will emit.
const MAX_PX: f64 = THUMB_SIZE - 0.01;
/// Horizontal digit offsets from the box center for two-digit numbers.
const DIGIT_OFFSET_PX: f64 = 8.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidScenario(Vec<Violation>),
    #[error("contract violation: {0}")]
    Contract(String),
}

/// Deterministic substream for `(seed, label)`.
pub fn substream(seed: u64, label: &str) -> ChaCha8Rng {
    // FNV-1a over the label, folded into the seed with a splitmix finalizer.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h.rotate_left(17);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlayerTruth {
    pub id: PlayerId,
    pub jersey: u32,
    /// One sample per tick, `positions[k]` at time `k * tick`.
    pub positions: Vec<PitchPos>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub tick: u64,
    pub duration: TimeStamp,
    pub players: Vec<PlayerTruth>,
    pub visibility: VisibilityLog,
}

impl GroundTruth {
    pub fn n_ticks(&self) -> usize {
        self.players.first().map_or(0, |p| p.positions.len())
    }

    /// Position of `player` at `t`, if `t` falls on a sampled tick.
    pub fn position(&self, player: PlayerId, t: TimeStamp) -> Option<PitchPos> {
        if t.0 % self.tick != 0 {
            return None;
        }
        let k = (t.0 / self.tick) as usize;
        self.players.get(player as usize)?.positions.get(k).copied()
    }

    pub fn jersey(&self, player: PlayerId) -> Option<u32> {
        self.players.get(player as usize).map(|p| p.jersey)
    }
}

/// Inclusive of the region's min edges, exclusive of its max edges.
pub fn camera_sees(c: &CameraCalib, p: &PitchPos) -> bool {
    c.region.contains(p)
}

/// Body box of `other` inside the thumbnail centered on `center`, or `None`
/// when it maps outside the frame.
pub fn pitch_to_image(c: &CameraCalib, center: &PitchPos, other: &PitchPos) -> Result<Option<ImageBox>, SimError> {
    if !camera_sees(c, center) {
        return Err(SimError::Contract(format!(
            "camera {} does not see crop center ({}, {})",
            c.camera_id, center.x, center.y
        )));
    }
    let cx = THUMB_CENTER + (other.x - center.x) * c.px_per_m;
    let cy = THUMB_CENTER + (other.y - center.y) * c.px_per_m;
    let inside = (0.0..THUMB_SIZE).contains(&cx) && (0.0..THUMB_SIZE).contains(&cy);
    Ok(inside.then(|| ImageBox::body(cx, cy)))
}

fn draw_waypoint(rng: &mut ChaCha8Rng, s: &Scenario) -> PitchPos {
    PitchPos::new(
        rng.random_range(0.0..s.pitch_width),
        rng.random_range(0.0..s.pitch_height),
    )
}

fn draw_speed(rng: &mut ChaCha8Rng, s: &Scenario) -> f64 {
    let [lo, hi] = s.speed_range;
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

fn visibility_log(players: &[PlayerTruth], s: &Scenario) -> VisibilityLog {
    let mut log = VisibilityLog::new();
    for p in players {
        for c in &s.cameras {
            let mut run: Option<u64> = None;
            for (k, pos) in p.positions.iter().enumerate() {
                let t = k as u64 * s.tick;
                match (camera_sees(c, pos), run) {
                    (true, None) => run = Some(t),
                    (false, Some(start)) => {
                        log.push(p.id, &c.camera_id, Interval::new(start, t).expect("run is nonempty"));
                        run = None;
                    }
                    _ => {}
                }
            }
            if let Some(start) = run {
                let end = p.positions.len() as u64 * s.tick;
                log.push(p.id, &c.camera_id, Interval::new(start, end).expect("run is nonempty"));
            }
        }
    }
    log
}

/// Waypoint motion: each player heads to a uniformly drawn pitch point at a
/// speed drawn from `speed_range`, then draws the next one on arrival.
pub fn generate_ground_truth(s: &Scenario) -> Result<GroundTruth, SimError> {
    let violations = validate_scenario(s);
    if !violations.is_empty() {
        return Err(SimError::InvalidScenario(violations));
    }
    let n_ticks = s.n_ticks();
    let step_s = s.tick as f64 / 1000.0;
    let players = (0..s.n_players)
        .map(|i| {
            let mut rng = substream(s.seed, &format!("player/{i}"));
            let mut pos = draw_waypoint(&mut rng, s);
            let mut target = draw_waypoint(&mut rng, s);
            let mut speed = draw_speed(&mut rng, s);
            let mut positions = Vec::with_capacity(n_ticks);
            for _ in 0..n_ticks {
                positions.push(PitchPos::new(q9(pos.x), q9(pos.y)));
                let step = speed * step_s;
                let d = pos.dist(&target);
                if d <= step {
                    pos = target;
                    target = draw_waypoint(&mut rng, s);
                    speed = draw_speed(&mut rng, s);
                } else if step > 0.0 {
                    pos.x += (target.x - pos.x) / d * step;
                    pos.y += (target.y - pos.y) / d * step;
                }
            }
            PlayerTruth {
                id: i as PlayerId,
                jersey: s.jersey_numbers[i],
                positions,
            }
        })
        .collect::<Vec<_>>();
    let visibility = visibility_log(&players, s);
    Ok(GroundTruth {
        tick: s.tick,
        duration: s.duration,
        players,
        visibility,
    })
}

fn confidence(n: &NoiseModel, rng: &mut ChaCha8Rng) -> f64 {
    if n.conf_low == n.conf_high {
        n.conf_low
    } else {
        rng.random_range(n.conf_low..=n.conf_high)
    }
}

fn jitter(n: &NoiseModel, rng: &mut ChaCha8Rng) -> f64 {
    if n.pos_jitter_px > 0.0 {
        Normal::new(0.0, n.pos_jitter_px).expect("finite std-dev").sample(rng)
    } else {
        0.0
    }
}

/// True box of a player in the crop and its detection, if any.
struct Subject {
    truth: ImageBox,
    detection: Option<PlayerDetection>,
}

fn detect_subjects(
    central: &PitchPos,
    neighbors: &[PitchPos],
    c: &CameraCalib,
    n: &NoiseModel,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Option<Subject>>, Vec<PlayerDetection>), SimError> {
    let mut subjects = Vec::with_capacity(neighbors.len() + 1);
    for p in std::iter::once(central).chain(neighbors) {
        let Some(truth) = pitch_to_image(c, central, p)? else {
            subjects.push(None);
            continue;
        };
        let detection = if rng.random_bool(n.miss_prob) {
            None
        } else {
            let cx = (truth.cx + jitter(n, rng)).clamp(0.0, MAX_PX);
            let cy = (truth.cy + jitter(n, rng)).clamp(0.0, MAX_PX);
            Some(PlayerDetection::new(ImageBox::body(cx, cy), confidence(n, rng)).quantized())
        };
        subjects.push(Some(Subject { truth, detection }));
    }
    let mut spurious = Vec::new();
    if n.fp_rate > 0.0 {
        let count = Poisson::new(n.fp_rate).expect("positive rate").sample(rng) as usize;
        for _ in 0..count {
            let b = ImageBox::body(rng.random_range(0.0..MAX_PX), rng.random_range(0.0..MAX_PX));
            spurious.push(PlayerDetection::new(b, confidence(n, rng)).quantized());
        }
    }
    Ok((subjects, spurious))
}

fn sort_detections(dets: &mut [PlayerDetection]) {
    dets.sort_by(|a, b| a.cx.total_cmp(&b.cx).then(a.cy.total_cmp(&b.cy)));
}

/// Player detections in the crop centered on `central`: each in-crop player is
/// found with probability `1 - miss_prob` at a jittered center, plus
/// Poisson(`fp_rate`) spurious boxes. Sorted by box center.
pub fn simulate_player_detections(
    central: &PitchPos,
    neighbors: &[PitchPos],
    c: &CameraCalib,
    n: &NoiseModel,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<PlayerDetection>, SimError> {
    let (subjects, spurious) = detect_subjects(central, neighbors, c, n, rng)?;
    let mut dets: Vec<PlayerDetection> = subjects
        .into_iter()
        .flatten()
        .filter_map(|s| s.detection)
        .chain(spurious)
        .collect();
    sort_detections(&mut dets);
    Ok(dets)
}

/// Digit detections for one shirt: each digit of `jersey` is found with its
/// class probability, possibly swapped for another digit, and placed at
/// -8/+8 px (two digits) or 0 px (one digit) from the box center.
pub fn simulate_digit_detections(
    jersey: u32,
    central_box: &ImageBox,
    n: &NoiseModel,
    rng: &mut ChaCha8Rng,
) -> Vec<DigitDetection> {
    let digits: Vec<u8> = if jersey >= 10 {
        vec![(jersey / 10 % 10) as u8, (jersey % 10) as u8]
    } else {
        vec![jersey as u8]
    };
    let offsets: &[f64] = if digits.len() == 2 {
        &[-DIGIT_OFFSET_PX, DIGIT_OFFSET_PX]
    } else {
        &[0.0]
    };
    let mut out = Vec::new();
    for (&d, &off) in digits.iter().zip(offsets) {
        if !rng.random_bool(n.digit_detect_prob[d as usize]) {
            continue;
        }
        let mut shown = d;
        if rng.random_bool(n.digit_swap_prob) {
            let other = rng.random_range(0..9u8);
            shown = if other >= d { other + 1 } else { other };
        }
        out.push(
            DigitDetection {
                digit: shown,
                x: (central_box.cx + off).clamp(0.0, MAX_PX),
                conf: confidence(n, rng),
            }
            .quantized(),
        );
    }
    out
}

fn emit_camera(gt: &GroundTruth, s: &Scenario, c: &CameraCalib) -> Result<Vec<Thumbnail>, SimError> {
    let mut rng = substream(s.seed, &format!("camera/{}", c.camera_id));
    let mut out = Vec::new();
    for k in 0..gt.n_ticks() {
        let t = TimeStamp(k as u64 * s.tick);
        let visible: Vec<&crate::sim::PlayerTruth> =
            gt.players.iter().filter(|p| camera_sees(c, &p.positions[k])).collect();
        for p in &visible {
            if c.drop_prob > 0.0 && rng.random_bool(c.drop_prob) {
                continue;
            }
            let center = p.positions[k];
            let others: Vec<&crate::sim::PlayerTruth> = visible.iter().copied().filter(|o| o.id != p.id).collect();
            let neighbor_pos: Vec<PitchPos> = others.iter().map(|o| o.positions[k]).collect();
            let (subjects, spurious) = detect_subjects(&center, &neighbor_pos, c, &s.noise, &mut rng)?;

            let mut digits = Vec::new();
            let mut dets = spurious;
            let jerseys = std::iter::once(p.jersey).chain(others.iter().map(|o| o.jersey));
            for (subject, jersey) in subjects.into_iter().zip(jerseys) {
                let Some(subject) = subject else { continue };
                let shirt = subject.detection.map_or(subject.truth, |d| d.image_box());
                digits.extend(simulate_digit_detections(jersey, &shirt, &s.noise, &mut rng));
                dets.extend(subject.detection);
            }
            sort_detections(&mut dets);
            digits.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.digit.cmp(&b.digit)));
            out.push(Thumbnail {
                camera_id: c.camera_id.clone(),
                t_ms: t,
                anchor_x_m: center.x,
                anchor_y_m: center.y,
                player_detections: dets,
                digit_detections: digits,
                truth_player_id: Some(p.id),
            });
        }
    }
    Ok(out)
}

/// One thumbnail per (tick, camera, visible player) that survives the
/// camera's frame drops, with simulated player and digit detections.
pub fn emit_thumbnails(gt: &GroundTruth, s: &Scenario) -> Result<ThumbnailStreams, SimError> {
    let per_camera: Vec<Vec<Thumbnail>> = s
        .cameras
        .par_iter()
        .map(|c| emit_camera(gt, s, c))
        .collect::<Result<_, _>>()?;
    let mut streams = ThumbnailStreams::new();
    for (c, stream) in s.cameras.iter().zip(per_camera) {
        streams.insert(c.camera_id.clone(), stream);
    }
    Ok(streams)
}

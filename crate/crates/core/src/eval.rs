//! Ground-truth metrics and brute-force oracles.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use thiserror::Error;

use crate::assignment::{assignment_cost, Assignment};
use crate::fusion::{self, FusionParams};
use crate::model::{covered_duration, GlobalTrack, ImageBox, NoiseModel, PlayerId, TimeStamp, Tracklet};
use crate::sim::{self, GroundTruth};
use crate::streams::ThumbnailStreams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("thumbnail {index} of camera {camera} has no truth_player_id")]
    MissingTruth { camera: String, index: usize },
    #[error("brute force limited to 8x8, got {rows}x{cols}")]
    DimensionTooLarge { rows: usize, cols: usize },
}

/// Anything made of tracklets: a lone tracklet or a global track.
pub trait TrackletGroup {
    fn members(&self) -> Vec<&Tracklet>;
}

impl TrackletGroup for Tracklet {
    fn members(&self) -> Vec<&Tracklet> {
        vec![self]
    }
}

impl TrackletGroup for GlobalTrack {
    fn members(&self) -> Vec<&Tracklet> {
        self.tracklets.iter().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrackingMetrics {
    /// Mean over tracks of the majority truth-id fraction.
    pub purity: f64,
    /// Truth-id changes between consecutive entries within a track.
    pub id_switches: usize,
    /// Mean number of tracks per truth player.
    pub fragmentation: f64,
    /// Fraction of visible (player, tick) pairs captured by some track.
    pub coverage: f64,
    pub n_tracks: usize,
}

/// Truth ids of a track's entries in (time, camera) order.
fn truth_sequence<T: TrackletGroup>(track: &T, streams: &ThumbnailStreams) -> Result<Vec<(TimeStamp, PlayerId)>, EvalError> {
    let mut seq = Vec::new();
    for t in track.members() {
        for e in &t.entries {
            let truth = streams
                .get(&t.camera_id, e.thumb)
                .and_then(|th| th.truth_player_id)
                .ok_or_else(|| EvalError::MissingTruth {
                    camera: t.camera_id.clone(),
                    index: e.thumb,
                })?;
            seq.push((e.t_ms, t.camera_id.as_str(), truth));
        }
    }
    seq.sort();
    Ok(seq.into_iter().map(|(t, _, p)| (t, p)).collect())
}

fn majority(seq: &[(TimeStamp, PlayerId)]) -> Option<(PlayerId, usize)> {
    let mut counts: BTreeMap<PlayerId, usize> = BTreeMap::new();
    for (_, p) in seq {
        *counts.entry(*p).or_default() += 1;
    }
    // ties go to the smallest id
    counts
        .into_iter()
        .fold(None, |best, (p, c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((p, c)),
        })
}

pub fn compute_tracking_metrics<T: TrackletGroup>(
    tracks: &[T],
    streams: &ThumbnailStreams,
    gt: &GroundTruth,
) -> Result<TrackingMetrics, EvalError> {
    let sequences: Vec<Vec<(TimeStamp, PlayerId)>> = tracks
        .iter()
        .map(|t| truth_sequence(t, streams))
        .collect::<Result<_, _>>()?;

    let mut purity_sum = 0.0;
    let mut id_switches = 0;
    let mut tracks_per_player: BTreeMap<PlayerId, usize> = BTreeMap::new();
    let mut captured: HashSet<(PlayerId, TimeStamp)> = HashSet::new();
    let mut scored = 0usize;
    for seq in &sequences {
        if seq.is_empty() {
            continue;
        }
        scored += 1;
        let (_, count) = majority(seq).expect("nonempty");
        purity_sum += count as f64 / seq.len() as f64;
        id_switches += seq.windows(2).filter(|w| w[0].1 != w[1].1).count();
        let players: std::collections::BTreeSet<PlayerId> = seq.iter().map(|(_, p)| *p).collect();
        for p in players {
            *tracks_per_player.entry(p).or_default() += 1;
        }
        captured.extend(seq.iter().map(|(t, p)| (*p, *t)));
    }

    let mut visible_ticks = 0u64;
    for p in &gt.players {
        let intervals: Vec<_> = gt
            .visibility
            .records()
            .into_iter()
            .filter(|r| r.player_id == p.id)
            .flat_map(|r| r.intervals)
            .collect();
        visible_ticks += covered_duration(&intervals) / gt.tick;
    }
    let coverage = if visible_ticks == 0 {
        0.0
    } else {
        captured.len() as f64 / visible_ticks as f64
    };
    let fragmentation = if tracks_per_player.is_empty() {
        0.0
    } else {
        tracks_per_player.values().sum::<usize>() as f64 / tracks_per_player.len() as f64
    };
    Ok(TrackingMetrics {
        purity: if scored == 0 { 0.0 } else { purity_sum / scored as f64 },
        id_switches,
        fragmentation,
        coverage,
        n_tracks: scored,
    })
}

/// Accuracy over decided tracks (`None` when nothing was decided) and the
/// abstention rate over all tracks. A track's true number is its majority
/// player's jersey.
pub fn number_id_accuracy(
    tracks: &[GlobalTrack],
    streams: &ThumbnailStreams,
    gt: &GroundTruth,
) -> Result<(Option<f64>, f64), EvalError> {
    let mut decided = 0usize;
    let mut correct = 0usize;
    let mut abstained = 0usize;
    for track in tracks {
        let seq = truth_sequence(track, streams)?;
        let truth = majority(&seq).and_then(|(p, _)| gt.jersey(p));
        match track.number_verdict.and_then(|v| v.outcome) {
            Some(n) => {
                decided += 1;
                if truth == Some(n as u32) {
                    correct += 1;
                }
            }
            None => abstained += 1,
        }
    }
    Ok(score(correct, decided, abstained, tracks.len()))
}

fn score(correct: usize, decided: usize, abstained: usize, total: usize) -> (Option<f64>, f64) {
    let accuracy = (decided > 0).then(|| correct as f64 / decided as f64);
    let abstain_rate = if total == 0 { 0.0 } else { abstained as f64 / total as f64 };
    (accuracy, abstain_rate)
}

/// Fills missing `truth_player_id`s by matching each thumbnail's anchor to the
/// nearest ground-truth player at that tick.
pub fn attach_truth(streams: &mut ThumbnailStreams, gt: &GroundTruth) -> Result<(), EvalError> {
    let cameras: Vec<String> = streams.cameras().map(str::to_string).collect();
    for cam in cameras {
        for (index, th) in streams.stream_mut(&cam).iter_mut().enumerate() {
            if th.truth_player_id.is_some() {
                continue;
            }
            let anchor = th.anchor();
            let nearest = gt
                .players
                .iter()
                .filter_map(|p| gt.position(p.id, th.t_ms).map(|pos| (p.id, pos.dist(&anchor))))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .filter(|(_, d)| *d < 1e-6)
                .map(|(p, _)| p);
            match nearest {
                Some(p) => th.truth_player_id = Some(p),
                None => return Err(EvalError::MissingTruth { camera: cam, index }),
            }
        }
    }
    Ok(())
}

/// Exhaustive optimum over all feasible partial matchings, charging
/// `new_track_cost` per unmatched column. Enumerates mappings in
/// lexicographic order and keeps the first strict minimum.
pub fn brute_force_assignment(cost: &[Vec<f64>], new_track_cost: f64) -> Result<Assignment, EvalError> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows > 8 || cols > 8 {
        return Err(EvalError::DimensionTooLarge { rows, cols });
    }
    struct Search<'a> {
        cost: &'a [Vec<f64>],
        cols: usize,
        ntc: f64,
        current: Vec<Option<usize>>,
        used: Vec<bool>,
        best: Option<(f64, Vec<Option<usize>>)>,
    }
    impl Search<'_> {
        fn go(&mut self, row: usize) {
            if row == self.cost.len() {
                let total = assignment_cost(self.cost, self.cols, &self.current, self.ntc);
                if self.best.as_ref().is_none_or(|(b, _)| total < *b) {
                    self.best = Some((total, self.current.clone()));
                }
                return;
            }
            self.current[row] = None;
            self.go(row + 1);
            for j in 0..self.cols {
                if self.used[j] || !self.cost[row][j].is_finite() {
                    continue;
                }
                self.used[j] = true;
                self.current[row] = Some(j);
                self.go(row + 1);
                self.current[row] = None;
                self.used[j] = false;
            }
        }
    }
    let mut s = Search {
        cost,
        cols,
        ntc: new_track_cost,
        current: vec![None; rows],
        used: vec![false; cols],
        best: None,
    };
    s.go(0);
    let (total, mapping) = s.best.expect("the empty matching always exists");
    Ok(Assignment {
        rows: mapping,
        cost: total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloAccuracy {
    /// Fraction of trials ending in the correct number; `None` when no trial
    /// reached a decision.
    pub mean: Option<f64>,
    pub stderr: f64,
    pub decided: usize,
    pub trials: usize,
}

/// Jerseys drawn by the Monte Carlo study. Single-digit numbers are left out:
/// their evidence is only ever "contains digit d", which cannot single them
/// out.
pub const MC_JERSEYS: std::ops::RangeInclusive<u32> = 10..=99;

/// Per trial: draw a jersey, simulate `n_thumbnails` of digit evidence on a
/// centered shirt, fuse and decide. Abstentions score as incorrect.
pub fn monte_carlo_number_accuracy(
    noise: &NoiseModel,
    n_thumbnails: usize,
    trials: usize,
    seed: u64,
    fusion: &FusionParams,
) -> MonteCarloAccuracy {
    let outcomes: Vec<(bool, bool)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            use rand::Rng;
            let mut rng = sim::substream(seed, &format!("trial/{i}"));
            let jersey = rng.random_range(MC_JERSEYS);
            let shirt = ImageBox::body(128.0, 128.0);
            let evidence: Vec<_> = (0..n_thumbnails)
                .map(|_| {
                    let digits = sim::simulate_digit_detections(jersey, &shirt, noise, &mut rng);
                    fusion::evidence_from_thumbnail(&digits, &shirt, fusion.discount)
                })
                .collect();
            let verdict = fusion::identify(&evidence, fusion)
                .map(|(_, v)| v)
                .unwrap_or_else(|_| fusion::NumberVerdict::abstain(0.0, 1.0));
            (verdict.outcome.is_some(), verdict.outcome.map(u32::from) == Some(jersey))
        })
        .collect();
    let decided = outcomes.iter().filter(|(d, _)| *d).count();
    let correct = outcomes.iter().filter(|(_, c)| *c).count();
    let (mean, stderr) = if decided == 0 || trials == 0 {
        (None, 0.0)
    } else {
        let p = correct as f64 / trials as f64;
        (Some(p), (p * (1.0 - p) / trials as f64).sqrt())
    };
    MonteCarloAccuracy {
        mean,
        stderr,
        decided,
        trials,
    }
}

/// Flat `(metric, value)` rows for reports.
pub fn metric_rows(m: &TrackingMetrics, number: (Option<f64>, f64), unresolved: usize) -> Vec<(String, String)> {
    let f = |x: f64| format!("{}", crate::quant::q9(x));
    vec![
        ("purity".into(), f(m.purity)),
        ("id_switches".into(), m.id_switches.to_string()),
        ("fragmentation".into(), f(m.fragmentation)),
        ("coverage".into(), f(m.coverage)),
        ("n_tracks".into(), m.n_tracks.to_string()),
        ("unresolved_thumbnails".into(), unresolved.to_string()),
        ("number_accuracy".into(), number.0.map_or("none".into(), f)),
        ("number_abstain_rate".into(), f(number.1)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Interval, PlayerDetection, Thumbnail, TrackletEntry, VisibilityLog};
    use crate::sim::PlayerTruth;
    use crate::model::PitchPos;

    fn world(ids: &[PlayerId]) -> (ThumbnailStreams, Tracklet, GroundTruth) {
        let mut streams = ThumbnailStreams::new();
        let mut entries = Vec::new();
        for (i, id) in ids.iter().enumerate() {
            streams.push(Thumbnail {
                camera_id: "a".into(),
                t_ms: TimeStamp(i as u64 * 100),
                anchor_x_m: 1.0,
                anchor_y_m: 1.0,
                player_detections: vec![PlayerDetection::new(ImageBox::body(128.0, 128.0), 1.0)],
                digit_detections: vec![],
                truth_player_id: Some(*id),
            });
            entries.push(TrackletEntry {
                t_ms: TimeStamp(i as u64 * 100),
                thumb: i,
                central: 0,
                anchor_x_m: 1.0,
                anchor_y_m: 1.0,
                cx: 128.0,
                cy: 128.0,
            });
        }
        let t = Tracklet {
            id: 0,
            camera_id: "a".into(),
            span: Interval::new(0, ids.len() as u64 * 100).unwrap(),
            entries,
        };
        let mut visibility = VisibilityLog::new();
        let players = (1..=2)
            .map(|p| {
                visibility.push(p, "a", Interval::new(0, ids.len() as u64 * 100).unwrap());
                PlayerTruth {
                    id: p,
                    jersey: 10 + p,
                    positions: vec![PitchPos::new(1.0, 1.0); ids.len()],
                }
            })
            .collect();
        let gt = GroundTruth {
            tick: 100,
            duration: TimeStamp(ids.len() as u64 * 100),
            players,
            visibility,
        };
        (streams, t, gt)
    }

    #[test]
    fn switches_and_purity_by_hand() {
        let (streams, t, gt) = world(&[1, 1, 2, 1]);
        let m = compute_tracking_metrics(&[t], &streams, &gt).unwrap();
        assert_eq!(m.id_switches, 2);
        assert_eq!(m.purity, 0.75);
        assert_eq!(m.fragmentation, 1.0);
    }

    #[test]
    fn empty_track_set_has_no_coverage() {
        let (streams, _, gt) = world(&[1, 1]);
        let m = compute_tracking_metrics::<Tracklet>(&[], &streams, &gt).unwrap();
        assert_eq!(m.coverage, 0.0);
        assert_eq!(m.n_tracks, 0);
    }

    #[test]
    fn missing_truth_is_an_error() {
        let (mut streams, t, gt) = world(&[1, 1]);
        streams.strip_truth();
        assert!(matches!(
            compute_tracking_metrics(&[t], &streams, &gt),
            Err(EvalError::MissingTruth { .. })
        ));
    }

    #[test]
    fn accuracy_arithmetic() {
        assert_eq!(score(10, 10, 0, 10), (Some(1.0), 0.0));
        assert_eq!(score(8, 9, 1, 10), (Some(8.0 / 9.0), 0.1));
        assert_eq!(score(0, 0, 10, 10).0, None);
    }

    #[test]
    fn brute_force_examples() {
        let c = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = brute_force_assignment(&c, 1e6).unwrap();
        assert_eq!(a.cost, 5.0);
        assert_eq!(a.rows, vec![Some(1), Some(0), Some(2)]);
        assert_eq!(brute_force_assignment(&[vec![3.0]], 4.0).unwrap().rows, vec![Some(0)]);
        assert_eq!(brute_force_assignment(&[vec![3.0]], 3.0).unwrap().rows, vec![None]);
        let id = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert_eq!(brute_force_assignment(&id, 1e6).unwrap().rows, vec![Some(0), Some(1)]);
        assert!(matches!(
            brute_force_assignment(&vec![vec![0.0; 9]; 2], 1.0),
            Err(EvalError::DimensionTooLarge { .. })
        ));
    }

    #[test]
    fn monte_carlo_degenerate_cases() {
        let f = FusionParams::default();
        let off = monte_carlo_number_accuracy(&NoiseModel::off(), 1, 200, 1, &f);
        assert_eq!(off.mean, Some(1.0));
        let none = monte_carlo_number_accuracy(&NoiseModel::default(), 0, 50, 1, &f);
        assert_eq!(none.mean, None);
        assert_eq!(none.decided, 0);
    }
}

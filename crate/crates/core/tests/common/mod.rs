#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tracklet_fuse::assignment::INFEASIBLE;
use tracklet_fuse::fusion::{MassFunction, NumberSet};
use tracklet_fuse::model::{CameraCalib, Rect, Scenario, TimeStamp};
use tracklet_fuse::PipelineParams;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random nonempty subset of `1..=universe`, each member kept with
/// probability 1/2.
pub fn random_set(rng: &mut ChaCha8Rng, universe: u8) -> NumberSet {
    loop {
        let picked: Vec<u8> = (1..=universe).filter(|_| rng.random_bool(0.5)).collect();
        match NumberSet::from_numbers(picked) {
            Some(s) if !s.is_empty() => return s,
            _ => {}
        }
    }
}

/// Mass function with 1 to `max_focal` focal sets drawn either from a small
/// universe (so intersections are common) or from the whole frame.
pub fn random_mass(rng: &mut ChaCha8Rng, max_focal: usize) -> MassFunction {
    let universe = if rng.random_bool(0.5) { 8 } else { 99 };
    let k = rng.random_range(1..=max_focal);
    let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let focal: Vec<(NumberSet, f64)> = weights.iter().map(|w| (random_set(rng, universe), w / total)).collect();
    MassFunction::new(focal).expect("weights normalized")
}

pub fn max_mass_diff(a: &MassFunction, b: &MassFunction) -> f64 {
    a.focal()
        .chain(b.focal())
        .map(|(s, _)| (a.mass(s) - b.mass(s)).abs())
        .fold(0.0, f64::max)
}

/// Integer-valued `rows x cols` costs in `0..10` with about a fifth of the
/// cells forbidden.
pub fn random_costs(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| if rng.random_bool(0.2) { INFEASIBLE } else { rng.random_range(0..10) as f64 })
                .collect()
        })
        .collect()
}

/// The demo cast on four cameras, one per pitch quadrant, with 6 m overlaps.
pub fn quad_scenario(seed: u64, duration_ms: u64, drop_prob: f64) -> Scenario {
    let mut s = Scenario::demo();
    s.seed = seed;
    s.duration = TimeStamp(duration_ms);
    let (w, h, o) = (s.pitch_width, s.pitch_height, 6.0);
    s.cameras = (0..4)
        .map(|i| {
            let (c, r) = ((i % 2) as f64, (i / 2) as f64);
            CameraCalib {
                camera_id: format!("cam{i}"),
                region: Rect::new(
                    (c * w / 2.0 - o / 2.0).max(0.0),
                    (r * h / 2.0 - o / 2.0).max(0.0),
                    ((c + 1.0) * w / 2.0 + o / 2.0).min(w),
                    ((r + 1.0) * h / 2.0 + o / 2.0).min(h),
                ),
                px_per_m: 10.0,
                drop_prob,
            }
        })
        .collect();
    s
}

/// Tracker settings for noiseless streams: every gap means the player left.
pub fn exact_params(s: &Scenario) -> PipelineParams {
    let mut p = PipelineParams::default();
    p.tracker.max_gap = s.tick;
    p.tracker.gate_slack_m = 0.0;
    p
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn cli(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tracklet-fuse"))
        .args(args)
        .current_dir(dir)
        .env_remove("TRACKLET_FUSE_THREADS")
        .output()
        .expect("spawn tracklet-fuse")
}

pub fn write_scenario(dir: &Path, s: &Scenario) -> PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, tracklet_fuse::io::scenario_to_toml(s)).expect("write scenario");
    path
}

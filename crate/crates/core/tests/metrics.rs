mod common;

use approx::assert_abs_diff_eq;

use tracklet_fuse::eval::{self, monte_carlo_number_accuracy};
use tracklet_fuse::fusion::FusionParams;
use tracklet_fuse::model::NoiseModel;
use tracklet_fuse::{pipeline, PipelineParams};

#[test]
fn metrics_ignore_track_order() {
    let s = common::quad_scenario(14, 20_000, 0.2);
    let out = pipeline::run(&s, &PipelineParams::default()).unwrap();
    let forward = eval::compute_tracking_metrics(&out.tracks, &out.streams, &out.ground_truth).unwrap();
    let mut reversed = out.tracks.clone();
    reversed.reverse();
    let third = reversed.len() / 3;
    reversed.rotate_left(third);
    let shuffled = eval::compute_tracking_metrics(&reversed, &out.streams, &out.ground_truth).unwrap();
    assert_abs_diff_eq!(forward.purity, shuffled.purity, epsilon = 1e-12);
    assert_eq!(forward.id_switches, shuffled.id_switches);
    assert_eq!(forward.fragmentation, shuffled.fragmentation);
    assert_eq!(forward.coverage, shuffled.coverage);
    assert_eq!(
        eval::number_id_accuracy(&out.tracks, &out.streams, &out.ground_truth).unwrap(),
        eval::number_id_accuracy(&reversed, &out.streams, &out.ground_truth).unwrap()
    );
}

#[test]
fn metrics_stay_in_range() {
    let s = common::quad_scenario(15, 20_000, 0.3);
    let out = pipeline::run(&s, &PipelineParams::default()).unwrap();
    let m = eval::compute_tracking_metrics(&out.tracks, &out.streams, &out.ground_truth).unwrap();
    assert!((0.0..=1.0).contains(&m.purity));
    assert!((0.0..=1.0).contains(&m.coverage));
    assert!(m.coverage > 0.0 && m.fragmentation >= 1.0);
}

#[test]
fn noiseless_single_thumbnail_is_always_right() {
    let r = monte_carlo_number_accuracy(&NoiseModel::off(), 1, 200, 3, &FusionParams::default());
    assert_eq!(r.mean, Some(1.0));
    assert_eq!(r.stderr, 0.0);
}

#[test]
fn no_thumbnails_means_no_decision() {
    let r = monte_carlo_number_accuracy(&NoiseModel::default(), 0, 50, 3, &FusionParams::default());
    assert_eq!(r.mean, None);
    assert_eq!(r.decided, 0);
}

#[test]
fn monte_carlo_is_seed_deterministic() {
    let a = monte_carlo_number_accuracy(&NoiseModel::default(), 5, 300, 9, &FusionParams::default());
    let b = monte_carlo_number_accuracy(&NoiseModel::default(), 5, 300, 9, &FusionParams::default());
    assert_eq!(a, b);
}

mod common;

use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use tracklet_fuse::io::{self, IoError};
use tracklet_fuse::model::{DigitDetection, PlayerDetection, Scenario, Thumbnail, TimeStamp};
use tracklet_fuse::pipeline;
use tracklet_fuse::quant::q9;
use tracklet_fuse::streams::ThumbnailStreams;

fn random_thumbnail(rng: &mut ChaCha8Rng, t_ms: u64) -> Thumbnail {
    let n_players = rng.random_range(0..4);
    let n_digits = rng.random_range(0..4);
    Thumbnail {
        camera_id: format!("cam{}", rng.random_range(0..3)),
        t_ms: TimeStamp(t_ms),
        anchor_x_m: q9(rng.random_range(0.0..105.0)),
        anchor_y_m: q9(rng.random_range(0.0..68.0)),
        player_detections: (0..n_players)
            .map(|_| PlayerDetection {
                cx: q9(rng.random_range(0.0..256.0)),
                cy: q9(rng.random_range(0.0..256.0)),
                w: q9(rng.random_range(1.0..40.0)),
                h: q9(rng.random_range(1.0..80.0)),
                conf: q9(rng.random_range(0.0..=1.0)),
            })
            .collect(),
        digit_detections: (0..n_digits)
            .map(|_| DigitDetection {
                digit: rng.random_range(0..=9),
                x: q9(rng.random_range(0.0..256.0)),
                conf: q9(rng.random_range(0.0..=1.0)),
            })
            .collect(),
        truth_player_id: rng.random_bool(0.5).then(|| rng.random_range(0..22)),
    }
}

#[test]
fn thousand_random_thumbnails_round_trip() {
    let mut rng = common::rng(5);
    let streams: ThumbnailStreams = (0..1000u64).map(|i| random_thumbnail(&mut rng, i * 100)).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(io::THUMBNAILS_FILE);
    io::write_thumbnails(&path, &streams).unwrap();
    assert_eq!(io::read_thumbnails(&path).unwrap(), streams);
    let first = std::fs::read(&path).unwrap();
    assert_eq!(first.iter().filter(|b| **b == b'\n').count(), 1000);
}

#[test]
fn record_keys_follow_the_documented_order() {
    let mut rng = common::rng(9);
    let mut t = random_thumbnail(&mut rng, 0);
    t.truth_player_id = Some(3);
    let line = serde_json::to_string(&t).unwrap();
    let keys = [
        "\"camera_id\"",
        "\"t_ms\"",
        "\"anchor_x_m\"",
        "\"anchor_y_m\"",
        "\"player_detections\"",
        "\"digit_detections\"",
        "\"truth_player_id\"",
    ];
    let positions: Vec<usize> = keys.iter().map(|k| line.find(k).unwrap()).collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]), "{line}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn serialization_is_canonical(
        ax in -1e3f64..1e3, ay in -1e3f64..1e3,
        cx in 0.0f64..256.0, conf in 0.0f64..=1.0, x in 0.0f64..256.0,
    ) {
        let t = Thumbnail {
            camera_id: "c".into(),
            t_ms: TimeStamp(100),
            anchor_x_m: ax,
            anchor_y_m: ay,
            player_detections: vec![PlayerDetection { cx, cy: 128.0, w: 20.0, h: 50.0, conf }],
            digit_detections: vec![DigitDetection { digit: 7, x, conf }],
            truth_player_id: None,
        };
        let once = serde_json::to_string(&t).unwrap();
        let parsed: Thumbnail = serde_json::from_str(&once).unwrap();
        prop_assert_eq!(serde_json::to_string(&parsed).unwrap(), once);
    }
}

#[test]
fn bundled_demo_fixture_loads() {
    let s = io::load_scenario(&common::fixture("demo.scenario")).unwrap();
    assert_eq!(s.n_players, 22);
    assert_eq!(s.cameras.len(), 8);
    assert_eq!(s, Scenario::demo());
}

#[test]
fn scenario_document_round_trips() {
    let s = common::quad_scenario(3, 20_000, 0.25);
    let text = io::scenario_to_toml(&s);
    let back = io::parse_scenario(&text, std::path::Path::new("x")).unwrap();
    assert_eq!(back, s);
    assert_eq!(io::scenario_to_toml(&back), text);
}

#[test]
fn pipeline_products_round_trip() {
    let s = common::quad_scenario(4, 10_000, 0.1);
    let out = pipeline::run(&s, &Default::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);

    io::write_thumbnails(&p(io::THUMBNAILS_FILE), &out.streams).unwrap();
    assert_eq!(io::read_thumbnails(&p(io::THUMBNAILS_FILE)).unwrap(), out.streams);

    io::write_tracklets(&p(io::TRACKLETS_FILE), &out.tracklets).unwrap();
    let tracklets = io::read_tracklets(&p(io::TRACKLETS_FILE)).unwrap();
    assert_eq!(tracklets, out.tracklets);

    io::write_tracks(&p(io::TRACKS_FILE), &out.tracks).unwrap();
    let tracks = io::read_tracks(&p(io::TRACKS_FILE), &tracklets).unwrap();
    assert_eq!(tracks, out.tracks);

    io::write_ground_truth(&p(io::GROUND_TRUTH_FILE), &out.ground_truth).unwrap();
    assert_eq!(io::read_ground_truth(&p(io::GROUND_TRUTH_FILE)).unwrap(), out.ground_truth);
}

#[test]
fn malformed_lines_are_reported_by_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(io::TRACKLETS_FILE);
    let good = r#"{"id":0,"camera_id":"c","span":[0,100],"entries":[{"t_ms":0,"thumb":0,"central":0,"anchor_x_m":1.0,"anchor_y_m":2.0,"cx":128.0,"cy":128.0}]}"#;
    std::fs::write(&path, format!("{good}\n{good}\n{{\"id\":1,\n")).unwrap();
    match io::read_tracklets(&path) {
        Err(IoError::Schema { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a schema error, got {other:?}"),
    }
}

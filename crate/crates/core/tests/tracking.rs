mod common;

use std::collections::BTreeSet;

use tracklet_fuse::fusion::FusionParams;
use tracklet_fuse::model::{CameraCalib, NoiseModel, PitchPos, PlayerDetection, Rect, Thumbnail, TimeStamp};
use tracklet_fuse::sim::{self, substream};
use tracklet_fuse::stitch::{self, StitchParams};
use tracklet_fuse::streams::ThumbnailStreams;
use tracklet_fuse::tracklets::{self, build_tracklets, TrackerParams};
use tracklet_fuse::{pipeline, PipelineParams};

const TICK: u64 = 100;

fn camera(id: &str, region: Rect) -> CameraCalib {
    CameraCalib {
        camera_id: id.into(),
        region,
        px_per_m: 10.0,
        drop_prob: 0.0,
    }
}

/// Noiseless thumbnails of `players` (jersey, one position per tick) as
/// seen by `cam`.
fn film(cam: &CameraCalib, players: &[(u32, Vec<PitchPos>)]) -> Vec<Thumbnail> {
    let mut rng = substream(0, "film");
    let ticks = players[0].1.len();
    let mut out = Vec::new();
    for k in 0..ticks {
        let visible: Vec<(u32, u32, PitchPos)> = players
            .iter()
            .enumerate()
            .filter(|(_, (_, path))| sim::camera_sees(cam, &path[k]))
            .map(|(id, (jersey, path))| (id as u32, *jersey, path[k]))
            .collect();
        for &(id, _, center) in &visible {
            let mut dets = Vec::new();
            let mut digits = Vec::new();
            for &(_, other_jersey, pos) in &visible {
                if let Some(b) = sim::pitch_to_image(cam, &center, &pos).unwrap() {
                    dets.push(PlayerDetection::new(b, 1.0));
                    digits.extend(sim::simulate_digit_detections(other_jersey, &b, &NoiseModel::off(), &mut rng));
                }
            }
            out.push(Thumbnail {
                camera_id: cam.camera_id.clone(),
                t_ms: TimeStamp(k as u64 * TICK),
                anchor_x_m: center.x,
                anchor_y_m: center.y,
                player_detections: dets,
                digit_detections: digits,
                truth_player_id: Some(id),
            });
        }
    }
    out
}

fn line(from: (f64, f64), to: (f64, f64), ticks: usize) -> Vec<PitchPos> {
    (0..ticks)
        .map(|k| {
            let f = k as f64 / (ticks - 1) as f64;
            PitchPos::new(from.0 + (to.0 - from.0) * f, from.1 + (to.1 - from.1) * f)
        })
        .collect()
}

fn truth_ids(t: &tracklet_fuse::Tracklet, stream: &[Thumbnail]) -> BTreeSet<u32> {
    t.entries.iter().map(|e| stream[e.thumb].truth_player_id.unwrap()).collect()
}

#[test]
fn players_passing_each_other_keep_their_tracklets() {
    let cam = camera("a", Rect::new(0.0, 0.0, 40.0, 40.0));
    // 2 m/s each, opposite directions, 1 m apart laterally
    let players = vec![(10, line((5.0, 20.0), (35.0, 20.0), 151)), (23, line((35.0, 21.0), (5.0, 21.0), 151))];
    let stream = film(&cam, &players);
    let out = build_tracklets(&stream, &cam, &TrackerParams::default(), TICK).unwrap();
    assert_eq!(out.tracklets.len(), 2);
    assert!(out.unresolved.is_empty());
    for t in &out.tracklets {
        assert_eq!(truth_ids(t, &stream).len(), 1);
        assert_eq!(t.entries.len(), 151);
    }
}

#[test]
fn handoff_between_overlapping_cameras_stitches_into_one_track() {
    let left = camera("left", Rect::new(0.0, 0.0, 33.0, 40.0));
    let right = camera("right", Rect::new(27.0, 0.0, 60.0, 40.0));
    let players = vec![(17, line((5.0, 10.0), (55.0, 12.0), 201)), (44, line((50.0, 30.0), (10.0, 28.0), 201))];
    let mut streams = ThumbnailStreams::new();
    for cam in [&left, &right] {
        streams.insert(cam.camera_id.clone(), film(cam, &players));
    }
    let cameras = vec![left, right];
    let params = TrackerParams {
        max_gap: TICK,
        gate_slack_m: 0.0,
        ..TrackerParams::default()
    };
    let out = tracklets::track_all(&streams, &cameras, None, &params, TICK).unwrap();
    assert_eq!(out.tracklets.len(), 4);

    let fusion = FusionParams::default();
    let inputs = stitch::prepare(&out.tracklets, &cameras, &streams, &fusion).unwrap();
    let tracks = stitch::stitch(&inputs, &StitchParams::default(), &fusion, TICK).unwrap();
    assert_eq!(tracks.len(), 2);
    let mut numbers: Vec<u8> = tracks.iter().filter_map(|t| t.number_verdict.unwrap().outcome).collect();
    numbers.sort();
    assert_eq!(numbers, vec![17, 44]);
    for track in &tracks {
        let cams: BTreeSet<&str> = track.tracklets.iter().map(|t| t.camera_id.as_str()).collect();
        assert_eq!(cams.len(), 2);
        let ids: BTreeSet<u32> = track
            .tracklets
            .iter()
            .flat_map(|t| truth_ids(t, streams.stream(&t.camera_id)))
            .collect();
        assert_eq!(ids.len(), 1);
    }
}

#[test]
fn tracklets_partition_the_resolvable_thumbnails() {
    let s = common::quad_scenario(12, 30_000, 0.2);
    let p = PipelineParams::default();
    let (_, streams) = pipeline::simulate(&s).unwrap();
    let out = pipeline::track(&s, &streams, &p).unwrap();

    let mut used: Vec<(String, usize, usize)> = out
        .tracklets
        .iter()
        .flat_map(|t| t.entries.iter().map(move |e| (t.camera_id.clone(), e.thumb, e.central)))
        .collect();
    used.sort();
    let mut resolvable: Vec<(String, usize, usize)> = streams
        .cameras()
        .flat_map(|cam| {
            streams
                .stream(cam)
                .iter()
                .enumerate()
                .filter_map(|(i, t)| tracklets::resolve_central(t, &p.tracker).map(|c| (cam.to_string(), i, c)))
        })
        .collect();
    resolvable.sort();
    assert_eq!(used, resolvable);
    assert_eq!(out.unresolved + resolvable.len(), streams.len());
    for t in &out.tracklets {
        t.check(s.tick).unwrap();
    }
}

#[test]
fn stitching_partitions_and_is_idempotent() {
    let s = common::quad_scenario(13, 30_000, 0.2);
    let p = PipelineParams::default();
    let out = pipeline::run(&s, &p).unwrap();

    let mut ids: Vec<u32> = out.tracks.iter().flat_map(|t| t.tracklet_ids()).collect();
    ids.sort();
    let all: Vec<u32> = out.tracklets.iter().map(|t| t.id).collect();
    assert_eq!(ids, all);
    assert!(out.tracks.iter().all(|t| t.is_consistent()));

    let inputs = stitch::prepare(&out.tracklets, &s.cameras, &out.streams, &p.fusion).unwrap();
    let groups: Vec<Vec<usize>> = out
        .tracks
        .iter()
        .map(|t| t.tracklet_ids().into_iter().map(|id| id as usize).collect())
        .collect();
    let again = stitch::cluster(&inputs, Some(&groups), &p.stitch, s.tick);
    let mut sorted = groups.clone();
    for g in &mut sorted {
        g.sort();
    }
    sorted.sort();
    assert_eq!(again, sorted);
}

#[test]
fn zero_noise_recovers_every_player() {
    let s = common::quad_scenario(21, 30_000, 0.0).noiseless();
    let p = common::exact_params(&s);
    let out = pipeline::run(&s, &p).unwrap();
    for c in &s.cameras {
        let n = out.tracklets.iter().filter(|t| t.camera_id == c.camera_id).count();
        assert_eq!(n, out.ground_truth.visibility.camera_total(&c.camera_id), "{}", c.camera_id);
    }
    let (m, rows) = pipeline::evaluate(&out.tracks, &out.streams, &out.ground_truth, out.unresolved).unwrap();
    assert_eq!(m.n_tracks, 22);
    assert_eq!(m.purity, 1.0);
    assert_eq!(m.id_switches, 0);
    assert_eq!(m.fragmentation, 1.0);
    let row = |k: &str| rows.iter().find(|(n, _)| n == k).unwrap().1.clone();
    assert_eq!(row("number_accuracy"), "1");
    assert_eq!(row("number_abstain_rate"), "0");
}

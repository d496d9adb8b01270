//! End-to-end stages: simulate, track, stitch, identify, evaluate.

use thiserror::Error;

use crate::eval::{self, EvalError, TrackingMetrics};
use crate::fusion::{FusionParams, NumberVerdict};
use crate::io::PipelineParams;
use crate::model::{GlobalTrack, Scenario, Tracklet};
use crate::sim::{self, GroundTruth, SimError};
use crate::stitch::{self, PitchTracklet, StitchError};
use crate::streams::ThumbnailStreams;
use crate::tracklets::{self, TrackError, TrackerParams, TrackingOutput};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Stitch(#[from] StitchError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub fn simulate(s: &Scenario) -> Result<(GroundTruth, ThumbnailStreams), PipelineError> {
    let gt = sim::generate_ground_truth(s)?;
    let streams = sim::emit_thumbnails(&gt, s)?;
    Ok((gt, streams))
}

pub fn track(s: &Scenario, streams: &ThumbnailStreams, p: &PipelineParams) -> Result<TrackingOutput, PipelineError> {
    Ok(tracklets::track_all(streams, &s.cameras, Some(&s.pitch()), &p.tracker, s.tick)?)
}

pub fn stitch_tracklets(
    s: &Scenario,
    tracklets: &[Tracklet],
    streams: &ThumbnailStreams,
    p: &PipelineParams,
) -> Result<Vec<GlobalTrack>, PipelineError> {
    let inputs = stitch::prepare(tracklets, &s.cameras, streams, &p.fusion)?;
    Ok(stitch::stitch(&inputs, &p.stitch, &p.fusion, s.tick)?)
}

/// Recomputes every track's verdict from its members' thumbnails.
pub fn identify(
    tracks: &mut [GlobalTrack],
    streams: &ThumbnailStreams,
    fusion: &FusionParams,
) -> Result<(), PipelineError> {
    for track in tracks.iter_mut() {
        let members = track
            .tracklets
            .iter()
            .map(|t| {
                let evidence = stitch::tracklet_evidence(t, streams, fusion)?;
                let times = t.entries.iter().map(|e| (e.t_ms, e.anchor())).collect();
                Ok(PitchTracklet::new(t.clone(), times, evidence))
            })
            .collect::<Result<Vec<_>, StitchError>>()?;
        let refs: Vec<&PitchTracklet> = members.iter().collect();
        track.number_verdict = Some(stitch::track_verdict(&refs, fusion));
    }
    Ok(())
}

/// Everything a full run produces.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub ground_truth: GroundTruth,
    pub streams: ThumbnailStreams,
    pub tracklets: Vec<Tracklet>,
    pub tracks: Vec<GlobalTrack>,
    pub unresolved: usize,
}

impl PipelineOutput {
    pub fn verdicts(&self) -> Vec<(u32, NumberVerdict)> {
        self.tracks
            .iter()
            .filter_map(|t| t.number_verdict.map(|v| (t.track_id, v)))
            .collect()
    }
}

/// Simulates the scenario and runs tracking and stitching on the streams with
/// truth labels removed; the returned streams carry the labels.
pub fn run(s: &Scenario, p: &PipelineParams) -> Result<PipelineOutput, PipelineError> {
    let (ground_truth, streams) = simulate(s)?;
    let mut blind = streams.clone();
    blind.strip_truth();
    let TrackingOutput { tracklets, unresolved } = track(s, &blind, p)?;
    let tracks = stitch_tracklets(s, &tracklets, &blind, p)?;
    Ok(PipelineOutput {
        ground_truth,
        streams,
        tracklets,
        tracks,
        unresolved,
    })
}

/// Metrics report: tracking quality of the global tracks and number
/// accuracy. Thumbnails without labels are labelled from the ground truth.
pub fn evaluate(
    tracks: &[GlobalTrack],
    streams: &ThumbnailStreams,
    gt: &GroundTruth,
    unresolved: usize,
) -> Result<(TrackingMetrics, Vec<(String, String)>), PipelineError> {
    let labelled;
    let streams = if streams.has_full_truth() {
        streams
    } else {
        let mut s = streams.clone();
        eval::attach_truth(&mut s, gt)?;
        labelled = s;
        &labelled
    };
    let metrics = eval::compute_tracking_metrics(tracks, streams, gt)?;
    let number = eval::number_id_accuracy(tracks, streams, gt)?;
    Ok((metrics, eval::metric_rows(&metrics, number, unresolved)))
}

/// Thumbnails whose central player cannot be resolved.
pub fn count_unresolved(streams: &ThumbnailStreams, p: &TrackerParams) -> usize {
    streams.iter().filter(|t| tracklets::resolve_central(t, p).is_none()).count()
}

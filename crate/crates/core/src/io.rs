//! Scenario documents, parameter files and JSONL persistence.
//!
//! Streams are JSONL with one record per line, keys in declaration order and
//! floats at 9 significant digits. Every file is written to a temporary
//! sibling and renamed into place.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fusion::{FusionParams, NumberVerdict};
use crate::model::{validate_scenario, GlobalTrack, PitchPos, PlayerId, Scenario, Thumbnail, TimeStamp, Tracklet, VisibilityLog, VisibilityRecord, Violation};
use crate::quant::q9;
use crate::sim::{GroundTruth, PlayerTruth};
use crate::stitch::StitchParams;
use crate::streams::ThumbnailStreams;
use crate::tracklets::TrackerParams;

pub const THUMBNAILS_FILE: &str = "thumbnails.jsonl";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const TRACKLETS_FILE: &str = "tracklets.jsonl";
pub const TRACKS_FILE: &str = "tracks.jsonl";
pub const VERDICTS_FILE: &str = "verdicts.jsonl";
pub const METRICS_CSV_FILE: &str = "metrics.csv";
pub const METRICS_JSONL_FILE: &str = "metrics.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Schema { path: PathBuf, line: usize, message: String },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: invalid scenario: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Validation { path: PathBuf, violations: Vec<Violation> },
    #[error("{path}: {message}")]
    Inconsistent { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let file = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        let mut w = BufWriter::new(file);
        write(&mut w).map_err(io_err(&tmp))?;
        w.flush().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), IoError> {
    write_atomic(path, |w| {
        for r in records {
            serde_json::to_writer(&mut *w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let record = serde_json::from_str(&line).map_err(|e| IoError::Schema {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    write_atomic(path, |w| {
        serde_json::to_writer(&mut *w, value)?;
        w.write_all(b"\n")
    })
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| IoError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Parses a scenario document; unknown fields are errors, optional fields
/// take their defaults, and the result must validate.
pub fn parse_scenario(text: &str, path: &Path) -> Result<Scenario, IoError> {
    let mut s: Scenario = toml::from_str(text).map_err(|e| IoError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let violations = validate_scenario(&s);
    if !violations.is_empty() {
        return Err(IoError::Validation {
            path: path.to_path_buf(),
            violations,
        });
    }
    s.quantize();
    Ok(s)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_scenario(&text, path)
}

pub fn scenario_to_toml(s: &Scenario) -> String {
    toml::to_string(s).expect("scenario is representable as TOML")
}

/// SHA-256 of the scenario's canonical JSON form, hex encoded.
pub fn scenario_digest(s: &Scenario) -> String {
    let json = serde_json::to_vec(s).expect("scenario serializes");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

/// Tracker, stitcher and fusion settings, all optional.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineParams {
    pub tracker: TrackerParams,
    pub stitch: StitchParams,
    pub fusion: FusionParams,
}

pub fn load_params(path: &Path) -> Result<PipelineParams, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    toml::from_str(&text).map_err(|e| IoError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_thumbnails(path: &Path, streams: &ThumbnailStreams) -> Result<(), IoError> {
    write_atomic(path, |w| {
        for t in streams.iter() {
            serde_json::to_writer(&mut *w, t)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

pub fn read_thumbnails(path: &Path) -> Result<ThumbnailStreams, IoError> {
    let records: Vec<Thumbnail> = read_jsonl(path)?;
    for (i, t) in records.iter().enumerate() {
        if !t.is_valid() {
            return Err(IoError::Schema {
                path: path.to_path_buf(),
                line: i + 1,
                message: "detection outside its valid range".into(),
            });
        }
    }
    Ok(records.into_iter().collect())
}

pub fn write_tracklets(path: &Path, tracklets: &[Tracklet]) -> Result<(), IoError> {
    write_jsonl(path, tracklets)
}

pub fn read_tracklets(path: &Path) -> Result<Vec<Tracklet>, IoError> {
    let ts: Vec<Tracklet> = read_jsonl(path)?;
    for (i, t) in ts.iter().enumerate() {
        if t.entries.is_empty() || t.entries.windows(2).any(|w| w[0].t_ms >= w[1].t_ms) {
            return Err(IoError::Schema {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("tracklet {} entries must be nonempty and strictly increasing", t.id),
            });
        }
    }
    Ok(ts)
}

/// A global track on disk: member tracklets by id plus the verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackRecord {
    pub track_id: u32,
    pub tracklet_ids: Vec<u32>,
    pub number_verdict: Option<NumberVerdict>,
}

pub fn write_tracks(path: &Path, tracks: &[GlobalTrack]) -> Result<(), IoError> {
    let records: Vec<TrackRecord> = tracks
        .iter()
        .map(|t| TrackRecord {
            track_id: t.track_id,
            tracklet_ids: t.tracklet_ids(),
            number_verdict: t.number_verdict,
        })
        .collect();
    write_jsonl(path, &records)
}

/// Reads track records and resolves their tracklet ids against `tracklets`.
pub fn read_tracks(path: &Path, tracklets: &[Tracklet]) -> Result<Vec<GlobalTrack>, IoError> {
    let by_id: BTreeMap<u32, &Tracklet> = tracklets.iter().map(|t| (t.id, t)).collect();
    let records: Vec<TrackRecord> = read_jsonl(path)?;
    records
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let members = r
                .tracklet_ids
                .iter()
                .map(|id| {
                    by_id.get(id).map(|t| (*t).clone()).ok_or_else(|| IoError::Schema {
                        path: path.to_path_buf(),
                        line: i + 1,
                        message: format!("unknown tracklet id {id}"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(GlobalTrack {
                track_id: r.track_id,
                tracklets: members,
                number_verdict: r.number_verdict,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictRecord {
    pub track_id: u32,
    pub outcome: Option<u8>,
    #[serde(serialize_with = "crate::quant::ser_q9")]
    pub confidence: f64,
    #[serde(serialize_with = "crate::quant::ser_q9")]
    pub total_conflict: f64,
}

impl VerdictRecord {
    pub fn new(track_id: u32, v: &NumberVerdict) -> Self {
        VerdictRecord {
            track_id,
            outcome: v.outcome,
            confidence: v.confidence,
            total_conflict: v.total_conflict,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlayerRecord {
    player_id: PlayerId,
    jersey: u32,
    positions: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroundTruthFile {
    tick_ms: u64,
    duration_ms: u64,
    players: Vec<PlayerRecord>,
    visibility: Vec<VisibilityRecord>,
}

pub fn write_ground_truth(path: &Path, gt: &GroundTruth) -> Result<(), IoError> {
    let file = GroundTruthFile {
        tick_ms: gt.tick,
        duration_ms: gt.duration.0,
        players: gt
            .players
            .iter()
            .map(|p| PlayerRecord {
                player_id: p.id,
                jersey: p.jersey,
                positions: p.positions.iter().map(|q| [q9(q.x), q9(q.y)]).collect(),
            })
            .collect(),
        visibility: gt.visibility.records(),
    };
    write_json(path, &file)
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth, IoError> {
    let file: GroundTruthFile = read_json(path)?;
    let bad = |message: String| IoError::Inconsistent {
        path: path.to_path_buf(),
        message,
    };
    if file.tick_ms == 0 {
        return Err(bad("tick_ms must be positive".into()));
    }
    let players: Vec<PlayerTruth> = file
        .players
        .into_iter()
        .map(|p| PlayerTruth {
            id: p.player_id,
            jersey: p.jersey,
            positions: p.positions.into_iter().map(|[x, y]| PitchPos::new(x, y)).collect(),
        })
        .collect();
    if players.iter().enumerate().any(|(i, p)| p.id as usize != i) {
        return Err(bad("player ids must be 0..n in order".into()));
    }
    let visibility = VisibilityLog::from_records(file.visibility).map_err(bad)?;
    Ok(GroundTruth {
        tick: file.tick_ms,
        duration: TimeStamp(file.duration_ms),
        players,
        visibility,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool_version: String,
    pub scenario_digest: String,
    pub seed: u64,
    /// Stage name to output file, relative to the run directory.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(s: &Scenario) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            scenario_digest: scenario_digest(s),
            seed: s.seed,
            outputs: BTreeMap::new(),
        }
    }
}

/// Merges `outputs` into the manifest in `dir`, creating it if needed.
pub fn update_manifest(dir: &Path, s: &Scenario, outputs: &[(&str, &str)]) -> Result<RunManifest, IoError> {
    let path = dir.join(MANIFEST_FILE);
    let fresh = RunManifest::new(s);
    let mut manifest = match read_json::<RunManifest>(&path) {
        Ok(m) if m.scenario_digest == fresh.scenario_digest && m.tool_version == fresh.tool_version => m,
        _ => fresh,
    };
    for (stage, file) in outputs {
        manifest.outputs.insert(stage.to_string(), file.to_string());
    }
    write_json(&path, &manifest)?;
    Ok(manifest)
}

pub fn write_metrics_csv(path: &Path, rows: &[(String, String)]) -> Result<(), IoError> {
    write_atomic(path, |w| {
        writeln!(w, "metric,value")?;
        for (k, v) in rows {
            writeln!(w, "{k},{v}")?;
        }
        Ok(())
    })
}

pub fn write_metrics_jsonl(path: &Path, rows: &[(String, String)]) -> Result<(), IoError> {
    #[derive(Serialize)]
    struct Row<'a> {
        metric: &'a str,
        value: &'a str,
    }
    let rows: Vec<Row> = rows.iter().map(|(k, v)| Row { metric: k, value: v }).collect();
    write_jsonl(path, &rows)
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tracklet_fuse::io::{self, IoError, PipelineParams, VerdictRecord};
use tracklet_fuse::model::{GlobalTrack, Scenario};
use tracklet_fuse::pipeline::{self, PipelineError};
use tracklet_fuse::sim::GroundTruth;
use tracklet_fuse::streams::ThumbnailStreams;

#[derive(Debug, Parser)]
#[command(name = "tracklet-fuse", version, about = "Multi-camera player tracking and jersey-number fusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scenario -> thumbnail streams and ground truth
    Simulate(Common),
    /// Thumbnail streams -> tracklets
    Track(Common),
    /// Tracklets -> global tracks
    Stitch(Common),
    /// Global tracks -> number verdicts
    Identify(Common),
    /// Tracks and ground truth -> metrics
    Evaluate(Common),
    /// All stages
    Pipeline(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario document (TOML)
    #[arg(long, value_name = "PATH")]
    scenario: PathBuf,

    /// Run directory; stages read their inputs from and write outputs to it
    #[arg(long, value_name = "DIR")]
    out: PathBuf,

    /// Overrides the scenario seed
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,

    /// Omit truth_player_id from emitted thumbnail streams
    #[arg(long)]
    strip_truth: bool,

    /// Tracker, stitcher and fusion parameters (TOML)
    #[arg(long, value_name = "PATH")]
    params: Option<PathBuf>,

    /// Metrics output format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Jsonl,
    Csv,
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

struct Run {
    scenario: Scenario,
    params: PipelineParams,
    dir: PathBuf,
    strip_truth: bool,
    format: Format,
}

impl Run {
    fn load(c: &Common) -> Result<Run, Failure> {
        let mut scenario = io::load_scenario(&c.scenario).map_err(|e| Failure::Validation(e.to_string()))?;
        if let Some(seed) = c.seed {
            scenario.seed = seed;
        }
        let params = match &c.params {
            Some(p) => io::load_params(p).map_err(|e| Failure::Validation(e.to_string()))?,
            None => PipelineParams::default(),
        };
        Ok(Run {
            scenario,
            params,
            dir: c.out.clone(),
            strip_truth: c.strip_truth,
            format: c.format,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&self, outputs: &[(&str, &str)]) -> Result<(), Failure> {
        io::update_manifest(&self.dir, &self.scenario, outputs)?;
        Ok(())
    }

    fn thumbnails(&self) -> Result<ThumbnailStreams, Failure> {
        Ok(io::read_thumbnails(&self.path(io::THUMBNAILS_FILE))?)
    }

    fn tracks(&self) -> Result<Vec<GlobalTrack>, Failure> {
        let tracklets = io::read_tracklets(&self.path(io::TRACKLETS_FILE))?;
        Ok(io::read_tracks(&self.path(io::TRACKS_FILE), &tracklets)?)
    }

    fn write_simulation(&self, gt: &GroundTruth, mut streams: ThumbnailStreams) -> Result<(), Failure> {
        if self.strip_truth {
            streams.strip_truth();
        }
        io::write_thumbnails(&self.path(io::THUMBNAILS_FILE), &streams)?;
        io::write_ground_truth(&self.path(io::GROUND_TRUTH_FILE), gt)?;
        self.record(&[("simulate", io::THUMBNAILS_FILE), ("ground_truth", io::GROUND_TRUTH_FILE)])
    }

    fn write_tracks(&self, tracks: &[GlobalTrack]) -> Result<(), Failure> {
        io::write_tracks(&self.path(io::TRACKS_FILE), tracks)?;
        self.record(&[("stitch", io::TRACKS_FILE)])
    }

    fn write_verdicts(&self, tracks: &[GlobalTrack]) -> Result<(), Failure> {
        let verdicts: Vec<VerdictRecord> = tracks
            .iter()
            .filter_map(|t| t.number_verdict.map(|v| VerdictRecord::new(t.track_id, &v)))
            .collect();
        io::write_jsonl(&self.path(io::VERDICTS_FILE), &verdicts)?;
        self.record(&[("identify", io::VERDICTS_FILE)])
    }

    fn write_metrics(&self, tracks: &[GlobalTrack], streams: &ThumbnailStreams, gt: &GroundTruth) -> Result<(), Failure> {
        let unresolved = pipeline::count_unresolved(streams, &self.params.tracker);
        let (_, rows) = pipeline::evaluate(tracks, streams, gt, unresolved)?;
        let name = match self.format {
            Format::Csv => {
                io::write_metrics_csv(&self.path(io::METRICS_CSV_FILE), &rows)?;
                io::METRICS_CSV_FILE
            }
            Format::Jsonl => {
                io::write_metrics_jsonl(&self.path(io::METRICS_JSONL_FILE), &rows)?;
                io::METRICS_JSONL_FILE
            }
        };
        for (k, v) in &rows {
            println!("{k:<24}{v}");
        }
        self.record(&[("evaluate", name)])
    }
}

fn simulate(run: &Run) -> Result<(), Failure> {
    let (gt, streams) = pipeline::simulate(&run.scenario)?;
    run.write_simulation(&gt, streams)
}

fn track(run: &Run) -> Result<(), Failure> {
    let streams = run.thumbnails()?;
    let out = pipeline::track(&run.scenario, &streams, &run.params)?;
    io::write_tracklets(&run.path(io::TRACKLETS_FILE), &out.tracklets)?;
    if out.unresolved > 0 {
        eprintln!("{} thumbnails without a resolvable central player", out.unresolved);
    }
    run.record(&[("track", io::TRACKLETS_FILE)])
}

fn stitch(run: &Run) -> Result<(), Failure> {
    let streams = run.thumbnails()?;
    let tracklets = io::read_tracklets(&run.path(io::TRACKLETS_FILE))?;
    let tracks = pipeline::stitch_tracklets(&run.scenario, &tracklets, &streams, &run.params)?;
    run.write_tracks(&tracks)
}

fn identify(run: &Run) -> Result<(), Failure> {
    let streams = run.thumbnails()?;
    let mut tracks = run.tracks()?;
    pipeline::identify(&mut tracks, &streams, &run.params.fusion)?;
    run.write_tracks(&tracks)?;
    run.write_verdicts(&tracks)
}

fn evaluate(run: &Run) -> Result<(), Failure> {
    let streams = run.thumbnails()?;
    let tracks = run.tracks()?;
    let gt = io::read_ground_truth(&run.path(io::GROUND_TRUTH_FILE))?;
    run.write_metrics(&tracks, &streams, &gt)
}

fn full(run: &Run) -> Result<(), Failure> {
    let out = pipeline::run(&run.scenario, &run.params)?;
    run.write_simulation(&out.ground_truth, out.streams.clone())?;
    io::write_tracklets(&run.path(io::TRACKLETS_FILE), &out.tracklets)?;
    run.record(&[("track", io::TRACKLETS_FILE)])?;
    run.write_tracks(&out.tracks)?;
    run.write_verdicts(&out.tracks)?;
    run.write_metrics(&out.tracks, &out.streams, &out.ground_truth)
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("TRACKLET_FUSE_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::Validation(format!("TRACKLET_FUSE_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn dispatch(command: &Command) -> Result<(), Failure> {
    configure_threads()?;
    let (stage, common): (fn(&Run) -> Result<(), Failure>, &Common) = match command {
        Command::Simulate(c) => (simulate, c),
        Command::Track(c) => (track, c),
        Command::Stitch(c) => (stitch, c),
        Command::Identify(c) => (identify, c),
        Command::Evaluate(c) => (evaluate, c),
        Command::Pipeline(c) => (full, c),
    };
    let run = Run::load(common)?;
    stage(&run)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

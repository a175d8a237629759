use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use birdseye::analytics::RealCount;
use birdseye::calibration::CalibrationModel;
use birdseye::pipeline::{
    analyze, calibrate_tracks, evaluate_tracks, gen_synthetic_scene, parse_detections, project_detections,
    read_real_counts, read_tracks, run_pipeline, run_tracker, stitch_tracks, write_detections, write_outputs,
    write_real_counts, write_tracks, DetectionStream, GroundTruth, RunOptions, SceneConfig, SynthSpec, TrackerKind,
};
use birdseye::tracking::Track;
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "birdseye", version, about = "Traffic counts, speeds and accelerations from vehicle detections")]
struct Cli {
    /// Overrides the synthetic scene seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory of frame_%06d.pgm images for flow-assisted stitching.
    #[arg(long, global = true, value_name = "DIR")]
    frames_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic scene: detections, scene config and ground truth.
    Synth {
        #[arg(long, value_name = "FILE")]
        spec: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Fit the camera calibration model from detections.
    Calibrate {
        #[arg(long, value_name = "FILE")]
        detections: PathBuf,
        #[arg(long, value_name = "FILE")]
        scene: PathBuf,
        #[arg(long)]
        tracker: Option<TrackerKind>,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Track and stitch detections on the BEV plane.
    Track {
        #[arg(long, value_name = "FILE")]
        detections: PathBuf,
        #[arg(long, value_name = "FILE")]
        scene: PathBuf,
        #[arg(long)]
        tracker: Option<TrackerKind>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Measure tracks written by `track`.
    Analyze {
        #[arg(long, value_name = "DIR")]
        tracks: PathBuf,
        #[arg(long, value_name = "FILE")]
        calibration: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// CSV with columns direction,class,real_count.
        #[arg(long, value_name = "FILE")]
        real_counts: Option<PathBuf>,
    },
    /// All stages in one pass.
    Run {
        #[arg(long, value_name = "FILE")]
        detections: PathBuf,
        #[arg(long, value_name = "FILE")]
        scene: PathBuf,
        #[arg(long)]
        tracker: Option<TrackerKind>,
        /// Use this model instead of fitting one.
        #[arg(long, value_name = "FILE")]
        calibration: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        real_counts: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Score predicted tracks against synthetic ground truth.
    Metrics {
        /// tracks.jsonl, or a directory written by `track`.
        #[arg(long, value_name = "FILE")]
        pred: PathBuf,
        #[arg(long, value_name = "FILE")]
        truth: PathBuf,
        #[arg(long, default_value_t = 2)]
        min_detections: usize,
        #[arg(long, default_value_t = 10.0)]
        min_displacement: f64,
    },
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_scene(path: &Path, frames_dir: Option<&PathBuf>) -> Result<SceneConfig> {
    let mut scene = SceneConfig::from_toml(&read_text(path)?).with_context(|| format!("scene {}", path.display()))?;
    if let Some(dir) = frames_dir {
        scene.frames_dir = Some(dir.clone());
    }
    Ok(scene)
}

fn load_detections(path: &Path) -> Result<DetectionStream> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_detections(BufReader::new(f)).with_context(|| format!("detections {}", path.display()))
}

fn load_tracks(path: &Path) -> Result<Vec<Track>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_tracks(BufReader::new(f)).with_context(|| format!("tracks {}", path.display()))
}

fn load_model(path: &Path) -> Result<CalibrationModel> {
    CalibrationModel::from_toml(&read_text(path)?).with_context(|| format!("calibration {}", path.display()))
}

fn load_real(path: Option<&PathBuf>) -> Result<Option<Vec<RealCount>>> {
    path.map(|p| read_real_counts(p).with_context(|| format!("real counts {}", p.display()))).transpose()
}

fn track_stage(scene: &SceneConfig, dets: &DetectionStream, tracker: Option<TrackerKind>) -> Result<(Vec<Track>, Vec<Track>)> {
    let h = scene.homography()?;
    let projection = project_detections(dets, &h, scene)?;
    log::info!("{} of {} detections inside the ROI", projection.projected(), projection.detections_in);
    let raw = run_tracker(tracker.unwrap_or(scene.tracker.kind), scene, &projection)?;
    let stitched = stitch_tracks(scene, &h, &raw);
    log::info!("{} tracks, {} after stitching", raw.len(), stitched.len());
    Ok((raw, stitched))
}

fn write_track_file(path: &Path, tracks: &[Track]) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_tracks(tracks, f)?;
    Ok(())
}

fn synth(cli: &Cli, spec: Option<&PathBuf>, out: &Path) -> Result<()> {
    let mut spec = match spec {
        Some(p) => SynthSpec::from_toml(&read_text(p)?).with_context(|| format!("spec {}", p.display()))?,
        None => SynthSpec::default(),
    };
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    let mut scene = spec.scene.clone().unwrap_or_else(SceneConfig::example);
    if let Some(dir) = &cli.frames_dir {
        scene.frames_dir = Some(dir.clone());
    }
    let (stream, truth) = gen_synthetic_scene(&spec, &scene)?;
    fs::create_dir_all(out)?;
    write_detections(&stream, File::create(out.join("detections.jsonl"))?)?;
    fs::write(out.join("scene.toml"), scene.to_toml())?;
    fs::write(out.join("truth.json"), serde_json::to_string(&truth)? + "\n")?;
    let real: Vec<RealCount> = truth
        .counts()
        .into_iter()
        .map(|((direction, class), real_count)| RealCount { direction, class, real_count })
        .collect();
    write_real_counts(&out.join("real_counts.csv"), &real)?;
    println!("{} vehicles, {} detections -> {}", truth.vehicles.len(), stream.len(), out.display());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Synth { spec, out } => synth(&cli, spec.as_ref(), out)?,
        Command::Calibrate { detections, scene, tracker, out } => {
            let scene = load_scene(scene, cli.frames_dir.as_ref())?;
            let dets = load_detections(detections)?;
            let (_, tracks) = track_stage(&scene, &dets, *tracker)?;
            let (model, note) = calibrate_tracks(&scene, &tracks)?;
            if let Some(note) = note {
                eprintln!("calibration fallback: {note}");
            }
            fs::write(out, model.to_toml()).with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Track { detections, scene: scene_path, tracker, out } => {
            let scene = load_scene(scene_path, cli.frames_dir.as_ref())?;
            let dets = load_detections(detections)?;
            let (raw, stitched) = track_stage(&scene, &dets, *tracker)?;
            fs::create_dir_all(out)?;
            write_track_file(&out.join("raw_tracks.jsonl"), &raw)?;
            write_track_file(&out.join("tracks.jsonl"), &stitched)?;
            fs::write(out.join("scene.toml"), scene.to_toml())?;
            println!("{} tracks ({} before stitching) -> {}", stitched.len(), raw.len(), out.display());
        }
        Command::Analyze { tracks, calibration, out, real_counts } => {
            let scene = load_scene(&tracks.join("scene.toml"), cli.frames_dir.as_ref())?;
            let tracks = load_tracks(&tracks.join("tracks.jsonl"))?;
            let model = load_model(calibration)?;
            let real = load_real(real_counts.as_ref())?;
            let (analysis, summary) = analyze(&scene, &tracks, &model, real.as_deref())?;
            write_outputs(out, &analysis, &summary, &model, None, &scene.analytics)?;
            println!("{} vehicles -> {}", analysis.records.len(), out.display());
        }
        Command::Run { detections, scene, tracker, calibration, real_counts, out } => {
            let scene = load_scene(scene, cli.frames_dir.as_ref())?;
            let dets = load_detections(detections)?;
            let model = calibration.as_deref().map(load_model).transpose()?;
            let real = load_real(real_counts.as_ref())?;
            let opts = RunOptions { tracker: *tracker, calibration: model.as_ref(), real_counts: real.as_deref() };
            let result = run_pipeline(&scene, &dets, &opts)?;
            write_outputs(out, &result.analysis, &result.summary, &result.calibration, Some(&result.diagnostics), &scene.analytics)?;
            write_track_file(&out.join("tracks.jsonl"), &result.tracks)?;
            println!("{} vehicles -> {}", result.analysis.records.len(), out.display());
        }
        Command::Metrics { pred, truth, min_detections, min_displacement } => {
            let pred = if pred.is_dir() { pred.join("tracks.jsonl") } else { pred.clone() };
            let tracks = load_tracks(&pred)?;
            let truth: GroundTruth = serde_json::from_str(&read_text(truth)?).context("parsing ground truth")?;
            let m = evaluate_tracks(&tracks, &truth, *min_detections, *min_displacement);
            println!("{}", serde_json::to_string_pretty(&m)?);
        }
    }
    Ok(())
}

use std::fs;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{Diagnostics, PipelineError, Result};
use crate::analytics::{histogram, Analysis, AnalyticsConfig, RealCount, SceneSummary};
use crate::calibration::CalibrationModel;
use crate::tracking::Track;

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFiles {
    pub vehicles: PathBuf,
    pub summary: PathBuf,
    pub calibration: PathBuf,
    pub speed_hist: PathBuf,
    pub accel_hist: PathBuf,
    pub diagnostics: Option<PathBuf>,
}

fn csv_err(e: csv::Error) -> PipelineError {
    PipelineError::Io(e.to_string())
}

fn json_err(e: serde_json::Error) -> PipelineError {
    PipelineError::Io(e.to_string())
}

fn write_histogram(path: &Path, header: &str, values: &[f64], bin: f64) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record([header, "count"]).map_err(csv_err)?;
    for (start, count) in histogram(values, bin) {
        w.write_record([format!("{start}"), count.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the per-vehicle table, scene summary, calibration model,
/// histograms of per-vehicle mean speed and acceleration, and optionally the
/// run diagnostics into `dir`.
pub fn write_outputs(
    dir: &Path,
    analysis: &Analysis,
    summary: &SceneSummary,
    model: &CalibrationModel,
    diagnostics: Option<&Diagnostics>,
    cfg: &AnalyticsConfig,
) -> Result<OutputFiles> {
    fs::create_dir_all(dir)?;
    let files = OutputFiles {
        vehicles: dir.join("vehicles.csv"),
        summary: dir.join("summary.json"),
        calibration: dir.join("calibration.toml"),
        speed_hist: dir.join("speed_hist.csv"),
        accel_hist: dir.join("accel_hist.csv"),
        diagnostics: diagnostics.map(|_| dir.join("diagnostics.json")),
    };

    let mut w = csv::Writer::from_path(&files.vehicles).map_err(csv_err)?;
    w.write_record(["id", "class", "direction", "lane", "first_frame", "last_frame", "mean_speed_mph", "mean_accel_ms2"])
        .map_err(csv_err)?;
    for r in &analysis.records {
        w.write_record([
            r.id.to_string(),
            r.class.clone(),
            r.direction.to_string(),
            r.lane.to_string(),
            r.first_frame.to_string(),
            r.last_frame.to_string(),
            format!("{:.4}", r.mean_speed_mph),
            r.mean_accel_ms2.map(|a| format!("{a:.5}")).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;

    fs::write(&files.summary, serde_json::to_string_pretty(summary).map_err(json_err)? + "\n")?;
    fs::write(&files.calibration, model.to_toml())?;

    let speeds: Vec<f64> = analysis.records.iter().map(|r| r.mean_speed_mph).collect();
    let accels: Vec<f64> = analysis.records.iter().filter_map(|r| r.mean_accel_ms2).collect();
    write_histogram(&files.speed_hist, "speed_mph", &speeds, cfg.speed_bin_mph)?;
    write_histogram(&files.accel_hist, "accel_ms2", &accels, cfg.accel_bin_ms2)?;

    if let (Some(d), Some(path)) = (diagnostics, &files.diagnostics) {
        fs::write(path, serde_json::to_string_pretty(d).map_err(json_err)? + "\n")?;
    }
    Ok(files)
}

/// One JSON track per line.
pub fn write_tracks(tracks: &[Track], out: impl Write) -> Result<()> {
    let mut out = BufWriter::new(out);
    for t in tracks {
        serde_json::to_writer(&mut out, t).map_err(json_err)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_tracks(input: impl BufRead) -> Result<Vec<Track>> {
    let mut tracks = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: Track =
            serde_json::from_str(&line).map_err(|e| PipelineError::Parse { line: i + 1, msg: e.to_string() })?;
        tracks.push(t);
    }
    Ok(tracks)
}

/// CSV with header `direction,class,real_count`.
pub fn read_real_counts(path: &Path) -> Result<Vec<RealCount>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

pub fn write_real_counts(path: &Path, counts: &[RealCount]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for c in counts {
        w.serialize(c).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

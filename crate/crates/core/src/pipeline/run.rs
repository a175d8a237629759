use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{DetectionStream, PipelineError, Result, SceneConfig, TrackerKind};
use crate::analytics::{analyze_tracks, summarize, Analysis, RealCount, SceneSummary};
use crate::calibration::{fit_calibration, CalSample, CalibrationError, CalibrationModel, FitStats};
use crate::feature_flow::{FlowPredictor, PgmDirectory};
use crate::geometry::Homography;
use crate::stitching::{join_tracks, PositionPredictor};
use crate::tracking::{BBox, BevBoxSizer, BevDetection, ByteTracker, MotpyTracker, MultiTracker, Track};

/// Detections on the BEV plane, grouped by frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Projection {
    pub frames: BTreeMap<u64, Vec<BevDetection>>,
    pub frame_range: Option<(u64, u64)>,
    pub detections_in: usize,
    pub outside: usize,
}

impl Projection {
    pub fn projected(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }
}

/// Projects every detection center through `h` and drops those landing
/// outside the BEV rectangle.
pub fn project_detections(stream: &DetectionStream, h: &Homography, cfg: &SceneConfig) -> Result<Projection> {
    let mut sizer = BevBoxSizer::new(cfg.classes.clone(), cfg.box_sizing.fallback, cfg.box_sizing.warmup);
    let (len, wid) = cfg.bev_size;
    let mut out = Projection { frame_range: stream.frame_range(), detections_in: stream.len(), ..Default::default() };
    for d in &stream.detections {
        let (cx, cy) = d.bbox.center();
        let Ok(c) = h.map(cx, cy) else {
            out.outside += 1;
            continue;
        };
        if !(c.0 >= 0.0 && c.0 <= len && c.1 >= 0.0 && c.1 <= wid) {
            out.outside += 1;
            continue;
        }
        let j = h.jacobian(cx, cy).map_err(|e| PipelineError::geometry("projection", e))?.map(f64::abs);
        let observed = (j[(0, 0)] * d.bbox.w + j[(0, 1)] * d.bbox.h, j[(1, 0)] * d.bbox.w + j[(1, 1)] * d.bbox.h);
        sizer.observe(&d.cls, observed.0, observed.1);
        let (bw, bh) = sizer.canonical(&d.cls);
        out.frames.entry(d.frame).or_default().push(BevDetection {
            frame: d.frame,
            cls: d.cls.clone(),
            center: crate::geometry::BevPoint::new(c.0, c.1),
            bbox: BBox::centered(c.0, c.1, bw, bh),
            score: d.score,
            image_bbox: d.bbox,
            observed_size: observed,
        });
    }
    Ok(out)
}

/// Steps the chosen tracker through every frame of the projection's range,
/// empty frames included, and returns all tracks ordered by id.
pub fn run_tracker(kind: TrackerKind, cfg: &SceneConfig, projection: &Projection) -> Result<Vec<Track>> {
    let mut tracker: Box<dyn MultiTracker> = match kind {
        TrackerKind::Motpy => Box::new(MotpyTracker::new(cfg.motpy_config(), cfg.tracker.kalman)?),
        TrackerKind::Byte => Box::new(ByteTracker::new(cfg.byte_config(), cfg.tracker.kalman)?),
    };
    let mut tracks = Vec::new();
    if let Some((first, last)) = projection.frame_range {
        for frame in first..=last {
            let dets = projection.frames.get(&frame).map(Vec::as_slice).unwrap_or(&[]);
            tracks.extend(tracker.step(frame, dets)?);
        }
    }
    tracks.extend(tracker.flush());
    tracks.retain(|t| t.detection_count() > 0);
    tracks.sort_by_key(|t| t.id);
    Ok(tracks)
}

/// Joins fragments; uses optical flow when the scene names a frames
/// directory, constant-velocity extrapolation otherwise.
pub fn stitch_tracks(cfg: &SceneConfig, h: &Homography, tracks: &[Track]) -> Vec<Track> {
    let mut flow = cfg.frames_dir.as_ref().map(|dir| FlowPredictor::new(PgmDirectory::new(dir), *h));
    let predictor = flow.as_mut().map(|p| p as &mut dyn PositionPredictor);
    join_tracks(tracks, cfg.fps, cfg.image_size, &cfg.stitching, predictor)
}

/// Observed BEV box sizes of every detection on tracks of the fit class.
pub fn calibration_samples(tracks: &[Track], fit_class: &str) -> Vec<CalSample> {
    tracks
        .iter()
        .filter(|t| t.cls == fit_class)
        .flat_map(|t| t.detections())
        .map(|d| CalSample { center: d.center, w: d.observed_size.0, h: d.observed_size.1, cls: d.cls.clone() })
        .collect()
}

/// Fits the calibration model, falling back to the configured constant
/// scale when the data cannot support a fit. The second value explains a
/// fallback.
pub fn calibrate_tracks(cfg: &SceneConfig, tracks: &[Track]) -> Result<(CalibrationModel, Option<String>)> {
    let samples = calibration_samples(tracks, &cfg.calibration.fit_class);
    match fit_calibration(&samples, cfg.bev_size, &cfg.calibration) {
        Ok(m) => Ok((m, None)),
        Err(
            e @ (CalibrationError::InsufficientSamples { .. }
            | CalibrationError::InsufficientSpan { .. }
            | CalibrationError::NonPositivePrediction { .. }),
        ) => {
            log::warn!("calibration fit unavailable ({e}); using the fallback scale");
            Ok((CalibrationModel::constant(cfg.bev_size, &cfg.calibration)?, Some(e.to_string())))
        }
        Err(e) => Err(e.into()),
    }
}

/// Seconds spanned by the tracks, first to last frame inclusive.
pub fn track_duration_s(tracks: &[Track], fps: f64) -> f64 {
    let first = tracks.iter().map(Track::first_frame).min();
    let last = tracks.iter().map(Track::last_frame).max();
    match (first, last) {
        (Some(a), Some(b)) => (b - a + 1) as f64 / fps,
        _ => 0.0,
    }
}

pub fn analyze(
    cfg: &SceneConfig,
    tracks: &[Track],
    model: &CalibrationModel,
    real: Option<&[RealCount]>,
) -> Result<(Analysis, SceneSummary)> {
    let analysis = analyze_tracks(tracks, model, cfg.fps, &cfg.analytics)?;
    let summary = summarize(&analysis.records, track_duration_s(tracks, cfg.fps), real, &cfg.analytics);
    Ok((analysis, summary))
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions<'a> {
    /// Overrides the scene's tracker choice.
    pub tracker: Option<TrackerKind>,
    /// Skips fitting and uses this model.
    pub calibration: Option<&'a CalibrationModel>,
    pub real_counts: Option<&'a [RealCount]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub tracker: TrackerKind,
    pub detections_in: usize,
    pub detections_projected: usize,
    pub detections_outside_roi: usize,
    pub tracks_before_stitching: usize,
    pub tracks_after_stitching: usize,
    pub calibration_source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration_note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration_fit: Option<FitStats>,
    pub tracks_skipped: usize,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub raw_tracks: Vec<Track>,
    pub tracks: Vec<Track>,
    pub calibration: CalibrationModel,
    pub analysis: Analysis,
    pub summary: SceneSummary,
    pub diagnostics: Diagnostics,
}

/// Runs every stage: projection, tracking, stitching, calibration and
/// analytics.
pub fn run_pipeline(cfg: &SceneConfig, stream: &DetectionStream, opts: &RunOptions) -> Result<PipelineOutput> {
    cfg.validate()?;
    let h = cfg.homography()?;
    let projection = project_detections(stream, &h, cfg)?;
    let kind = opts.tracker.unwrap_or(cfg.tracker.kind);
    let raw_tracks = run_tracker(kind, cfg, &projection)?;
    let tracks = stitch_tracks(cfg, &h, &raw_tracks);
    let (calibration, note, source) = match opts.calibration {
        Some(m) => (m.clone(), None, "provided".to_string()),
        None => {
            let (m, note) = calibrate_tracks(cfg, &tracks)?;
            let source = if note.is_some() { "fallback" } else { "fit" };
            (m, note, source.to_string())
        }
    };
    let (analysis, summary) = analyze(cfg, &tracks, &calibration, opts.real_counts)?;
    let diagnostics = Diagnostics {
        tracker: kind,
        detections_in: projection.detections_in,
        detections_projected: projection.projected(),
        detections_outside_roi: projection.outside,
        tracks_before_stitching: raw_tracks.len(),
        tracks_after_stitching: tracks.len(),
        calibration_source: source,
        calibration_note: note,
        calibration_fit: calibration.fit,
        tracks_skipped: analysis.skipped.len(),
    };
    Ok(PipelineOutput { raw_tracks, tracks, calibration, analysis, summary, diagnostics })
}

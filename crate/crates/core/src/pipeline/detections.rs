use std::io::{BufRead, Write};

use super::{PipelineError, Result};
use crate::tracking::Detection;

/// Detections in frame order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionStream {
    pub detections: Vec<Detection>,
}

impl DetectionStream {
    pub fn new(detections: Vec<Detection>) -> Self {
        Self { detections }
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn frame_range(&self) -> Option<(u64, u64)> {
        Some((self.detections.first()?.frame, self.detections.last()?.frame))
    }

    /// Consecutive runs of detections sharing a frame.
    pub fn frames(&self) -> impl Iterator<Item = (u64, &[Detection])> {
        self.detections.chunk_by(|a, b| a.frame == b.frame).map(|g| (g[0].frame, g))
    }
}

fn validate(d: &Detection) -> std::result::Result<(), String> {
    let b = d.bbox;
    if ![b.x, b.y, b.w, b.h, d.score].iter().all(|v| v.is_finite()) {
        return Err("non-finite number".into());
    }
    if b.w <= 0.0 || b.h <= 0.0 {
        return Err(format!("bbox size must be positive, got {}x{}", b.w, b.h));
    }
    if !(0.0..=1.0).contains(&d.score) {
        return Err(format!("score {} outside [0, 1]", d.score));
    }
    if d.cls.is_empty() {
        return Err("empty class label".into());
    }
    Ok(())
}

/// Reads one JSON detection record per line; blank lines are skipped.
pub fn parse_detections(input: impl BufRead) -> Result<DetectionStream> {
    let mut out: Vec<Detection> = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| PipelineError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| PipelineError::Parse { line: line_no, msg };
        let d: Detection = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        validate(&d).map_err(parse_err)?;
        if let Some(prev) = out.last() {
            if d.frame < prev.frame {
                return Err(parse_err(format!("frame {} after frame {}", d.frame, prev.frame)));
            }
        }
        out.push(d);
    }
    Ok(DetectionStream::new(out))
}

pub fn write_detections(stream: &DetectionStream, mut out: impl Write) -> std::io::Result<()> {
    for d in &stream.detections {
        serde_json::to_writer(&mut out, d)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

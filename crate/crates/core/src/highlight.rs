//! Highlight detection: sustained low-blink-probability intervals in a
//! predicted series, with clip-export padding.

use serde::{Deserialize, Serialize};

use crate::train::PredictedSeries;
use crate::{Error, Result};

/// Default threshold depth in standard deviations below the clip mean.
pub const DEFAULT_K_SD: f64 = 2.0;
/// Default minimum run length in frames.
pub const DEFAULT_MIN_RUN: usize = 5;
/// Default export padding in seconds.
pub const DEFAULT_PAD_S: f64 = 1.0;

/// How the sustained-low rule reads "across N video frames".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectMode {
    /// Every frame in a run of length ≥ min_run is below the threshold.
    #[default]
    AllFramesBelow,
    /// Some window of min_run frames has its mean below the threshold; all
    /// frames of such windows are marked.
    WindowMeanBelow,
}

/// One detected low-probability interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighlightSegment {
    pub clip_id: String,
    /// Inclusive frame bounds.
    pub start_frame: usize,
    pub end_frame: usize,
    /// Lowest prediction inside the segment.
    pub min_value: f64,
    /// (clip mean − min_value) / clip sd.
    pub depth_sd: f64,
    /// Export bounds in seconds, padded and clamped to the clip.
    pub padded_start_s: f64,
    pub padded_end_s: f64,
    /// Set when the padded bounds overlap a neighboring segment's.
    pub overlaps_neighbor: bool,
}

/// Detect maximal runs of at least `min_run` consecutive frames whose
/// prediction is strictly below `mean − k·sd`, with mean and sd taken over
/// the clip's whole predicted series.
///
/// A constant series has zero spread and nothing strictly below its mean,
/// so it yields no detections.
pub fn detect(pred: &PredictedSeries, k: f64, min_run: usize, mode: DetectMode) -> Vec<HighlightSegment> {
    let values = &pred.values;
    let n = values.len();
    if min_run == 0 || n < min_run || n < 2 {
        return Vec::new();
    }

    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if sd == 0.0 {
        return Vec::new();
    }
    let threshold = mean - k * sd;

    let below: Vec<bool> = match mode {
        DetectMode::AllFramesBelow => values.iter().map(|&v| v < threshold).collect(),
        DetectMode::WindowMeanBelow => {
            let mut marked = vec![false; n];
            let mut window_sum: f64 = values[..min_run].iter().sum();
            let mut start = 0;
            loop {
                if window_sum / (min_run as f64) < threshold {
                    for m in &mut marked[start..start + min_run] {
                        *m = true;
                    }
                }
                if start + min_run >= n {
                    break;
                }
                window_sum += values[start + min_run] - values[start];
                start += 1;
            }
            marked
        }
    };

    let mut segments = Vec::new();
    let mut run_start: Option<usize> = None;
    for i in 0..=n {
        let is_below = i < n && below[i];
        match (run_start, is_below) {
            (None, true) => run_start = Some(i),
            (Some(s), false) => {
                run_start = None;
                if i - s >= min_run {
                    segments.push(make_segment(pred, s, i - 1, mean, sd));
                }
            }
            _ => {}
        }
    }
    segments
}

fn make_segment(
    pred: &PredictedSeries,
    run_start: usize,
    run_end: usize,
    mean: f64,
    sd: f64,
) -> HighlightSegment {
    let min_value = pred.values[run_start..=run_end]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let start_frame = pred.first_valid_frame + run_start;
    let end_frame = pred.first_valid_frame + run_end;
    HighlightSegment {
        clip_id: pred.clip_id.clone(),
        start_frame,
        end_frame,
        min_value,
        depth_sd: (mean - min_value) / sd,
        // unpadded defaults; export_clip_bounds refines these
        padded_start_s: start_frame as f64 / pred.fps,
        padded_end_s: (end_frame + 1) as f64 / pred.fps,
        overlaps_neighbor: false,
    }
}

/// Fill padded export bounds: `pad` seconds on each side, clamped to the
/// clip. Overlapping padded segments stay separate entries and are flagged.
pub fn export_clip_bounds(
    segments: &mut [HighlightSegment],
    pad: f64,
    fps: f64,
    clip_duration_s: f64,
) {
    for s in segments.iter_mut() {
        s.padded_start_s = (s.start_frame as f64 / fps - pad).max(0.0);
        s.padded_end_s = ((s.end_frame + 1) as f64 / fps + pad).min(clip_duration_s);
        s.overlaps_neighbor = false;
    }
    for i in 1..segments.len() {
        if segments[i].padded_start_s < segments[i - 1].padded_end_s {
            segments[i].overlaps_neighbor = true;
            segments[i - 1].overlaps_neighbor = true;
        }
    }
}

/// Per-clip segment counts with corpus mean ± sample standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSummary {
    pub per_clip: Vec<(String, usize)>,
    pub mean: f64,
    pub sd: f64,
}

/// Summarize detected segment counts across clips.
pub fn summarize(per_clip: &[(String, usize)]) -> Result<CorpusSummary> {
    if per_clip.is_empty() {
        return Err(Error::invalid("highlight summary", "need at least one clip"));
    }
    let n = per_clip.len() as f64;
    let mean = per_clip.iter().map(|(_, c)| *c as f64).sum::<f64>() / n;
    let sd = if per_clip.len() > 1 {
        (per_clip
            .iter()
            .map(|(_, c)| (*c as f64 - mean) * (*c as f64 - mean))
            .sum::<f64>()
            / (n - 1.0))
            .sqrt()
    } else {
        0.0
    };
    Ok(CorpusSummary {
        per_clip: per_clip.to_vec(),
        mean,
        sd,
    })
}

/// CSV summary: `clip_id,n_segments`.
pub fn write_summary_csv(summary: &CorpusSummary) -> String {
    let mut out = String::from("clip_id,n_segments\n");
    for (clip, count) in &summary.per_clip {
        out.push_str(&format!("{clip},{count}\n"));
    }
    out
}

/// Plot-ready CSV per clip: `frame,pred,threshold`.
pub fn write_plot_csv(pred: &PredictedSeries, k: f64) -> String {
    let n = pred.values.len();
    let mut out = String::from("frame,pred,threshold\n");
    if n == 0 {
        return out;
    }
    let mean = pred.values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (pred
            .values
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / (n - 1) as f64)
            .sqrt()
    } else {
        0.0
    };
    let threshold = mean - k * sd;
    for (i, v) in pred.values.iter().enumerate() {
        out.push_str(&format!("{},{v},{threshold}\n", pred.first_valid_frame + i));
    }
    out
}

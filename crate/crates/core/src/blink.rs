//! Blink detection from pupil-diameter traces and aggregation into a
//! per-video-frame blink-rate series.
//!
//! A blink shows up in an eye-tracker diameter trace as a rapid apparent
//! increase followed by a rapid decrease within half a second. Detection
//! works on z-scored first differences, so it is invariant to affine
//! rescaling of the raw diameters.

use std::collections::BTreeMap;

use crate::{Error, Result};

/// Pupil-diameter samples for one participant watching one clip.
/// `None` marks an invalid sample (tracker dropout).
#[derive(Debug, Clone, PartialEq)]
pub struct PupilTrace {
    pub participant_id: String,
    pub clip_id: String,
    /// Samples per second, typically 120.
    pub sample_rate: f64,
    pub samples: Vec<Option<f64>>,
}

/// One detected blink: onset and offset in seconds from clip start.
#[derive(Debug, Clone, PartialEq)]
pub struct BlinkEvent {
    pub participant_id: String,
    pub onset_time: f64,
    pub offset_time: f64,
}

/// Detection parameters.
#[derive(Debug, Clone, Copy)]
pub struct BlinkParams {
    /// Z-score a first difference must exceed to count as rapid.
    pub deriv_z_threshold: f64,
    /// Maximum spike→dip separation in seconds.
    pub pair_window: f64,
}

impl Default for BlinkParams {
    fn default() -> Self {
        Self {
            deriv_z_threshold: 2.5,
            pair_window: 0.5,
        }
    }
}

/// How a participant counts as blinking within a video frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MarkMode {
    /// Only the frame containing the onset.
    OnsetOnly,
    /// Every frame whose interval intersects [onset, offset].
    #[default]
    Span,
}

/// Fraction of participants blinking at each video frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BlinkRateSeries {
    pub clip_id: String,
    pub fps: f64,
    pub values: Vec<f64>,
    pub n_participants: usize,
}

/// Detect blinks in one trace.
///
/// First differences of the diameter are z-scored over the trace's valid
/// samples. A blink is a local-maximum positive difference with z above the
/// threshold, followed within `pair_window` seconds by a local-minimum
/// negative difference with z below the negated threshold. Overlapping
/// candidates resolve greedily left to right. Differences spanning an
/// invalid sample are skipped, so no event starts or ends there.
pub fn detect_blinks(trace: &PupilTrace, params: &BlinkParams) -> Result<Vec<BlinkEvent>> {
    if trace.samples.iter().all(|s| s.is_none()) {
        return Err(Error::UnusableTrace {
            participant_id: trace.participant_id.clone(),
            clip_id: trace.clip_id.clone(),
        });
    }
    if trace.samples.len() < 2 {
        return Err(Error::invalid(
            "pupil trace",
            format!("need at least 2 samples, got {}", trace.samples.len()),
        ));
    }
    if trace.sample_rate <= 0.0 {
        return Err(Error::invalid("pupil trace", "sample_rate must be > 0"));
    }

    let n = trace.samples.len();
    // diffs[i] = s[i] - s[i-1], indexed by the later sample
    let mut diffs: Vec<Option<f64>> = vec![None; n];
    for i in 1..n {
        if let (Some(a), Some(b)) = (trace.samples[i - 1], trace.samples[i]) {
            diffs[i] = Some(b - a);
        }
    }

    let valid: Vec<f64> = diffs.iter().flatten().copied().collect();
    if valid.len() < 2 {
        return Ok(Vec::new());
    }
    let mean = valid.iter().sum::<f64>() / valid.len() as f64;
    let var = valid.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>()
        / (valid.len() - 1) as f64;
    let sd = var.sqrt();
    if sd == 0.0 {
        return Ok(Vec::new()); // constant trace: no rapid change anywhere
    }

    let z = |i: usize| diffs[i].map(|d| (d - mean) / sd);
    let local_max = |i: usize| {
        let d = diffs[i].unwrap();
        let left_ok = i == 0 || diffs[i - 1].is_none_or(|l| d >= l);
        let right_ok = i + 1 >= n || diffs[i + 1].is_none_or(|r| d > r);
        left_ok && right_ok
    };
    let local_min = |i: usize| {
        let d = diffs[i].unwrap();
        let left_ok = i == 0 || diffs[i - 1].is_none_or(|l| d <= l);
        let right_ok = i + 1 >= n || diffs[i + 1].is_none_or(|r| d < r);
        left_ok && right_ok
    };

    let mut spikes = Vec::new();
    let mut dips = Vec::new();
    for i in 1..n {
        match z(i) {
            Some(zi) if zi > params.deriv_z_threshold && local_max(i) => spikes.push(i),
            Some(zi) if zi < -params.deriv_z_threshold && local_min(i) => dips.push(i),
            _ => {}
        }
    }

    let max_gap = (params.pair_window * trace.sample_rate).floor() as usize;
    let mut events = Vec::new();
    let mut dip_cursor = 0usize;
    let mut last_end = 0usize;
    for &s in &spikes {
        if s < last_end {
            continue; // inside the previous event
        }
        while dip_cursor < dips.len() && dips[dip_cursor] <= s {
            dip_cursor += 1;
        }
        if dip_cursor < dips.len() && dips[dip_cursor] - s <= max_gap {
            let d = dips[dip_cursor];
            events.push(BlinkEvent {
                participant_id: trace.participant_id.clone(),
                onset_time: s as f64 / trace.sample_rate,
                offset_time: d as f64 / trace.sample_rate,
            });
            dip_cursor += 1;
            last_end = d;
        }
    }
    Ok(events)
}

/// Result of aggregating events into a per-frame series, plus how many
/// events fell past the clip end and were clipped to the last frame.
#[derive(Debug, Clone)]
pub struct RateSeriesOutcome {
    pub series: BlinkRateSeries,
    pub clipped_events: usize,
}

/// Aggregate per-participant blink events into the fraction blinking per
/// video frame. Frame `f` covers `[f/fps, (f+1)/fps)`.
pub fn blink_rate_series(
    events_by_participant: &BTreeMap<String, Vec<BlinkEvent>>,
    clip_id: &str,
    n_frames: usize,
    fps: f64,
    mark_mode: MarkMode,
) -> Result<RateSeriesOutcome> {
    if n_frames == 0 {
        return Err(Error::invalid("blink rate series", "n_frames must be > 0"));
    }
    let n_participants = events_by_participant.len();
    if n_participants == 0 {
        return Err(Error::invalid(
            "blink rate series",
            "need at least one participant",
        ));
    }

    let mut counts = vec![0usize; n_frames];
    let mut clipped = 0usize;
    for events in events_by_participant.values() {
        let mut blinking = vec![false; n_frames];
        for ev in events {
            let first = (ev.onset_time * fps).floor() as usize;
            let last = match mark_mode {
                MarkMode::OnsetOnly => first,
                MarkMode::Span => (ev.offset_time * fps).floor() as usize,
            };
            if first >= n_frames {
                clipped += 1;
                blinking[n_frames - 1] = true;
                continue;
            }
            let last = if last >= n_frames {
                clipped += 1;
                n_frames - 1
            } else {
                last
            };
            for slot in &mut blinking[first..=last] {
                *slot = true;
            }
        }
        for (count, b) in counts.iter_mut().zip(&blinking) {
            *count += *b as usize;
        }
    }

    let values = counts
        .iter()
        .map(|&c| c as f64 / n_participants as f64)
        .collect();
    Ok(RateSeriesOutcome {
        series: BlinkRateSeries {
            clip_id: clip_id.to_string(),
            fps,
            values,
            n_participants,
        },
        clipped_events: clipped,
    })
}

/// Optional centered moving average; window is the half-width in frames.
/// A half-width of 0 returns the series unchanged.
pub fn smooth_moving_average(series: &BlinkRateSeries, half_width: usize) -> BlinkRateSeries {
    if half_width == 0 {
        return series.clone();
    }
    let n = series.values.len();
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(half_width);
        let hi = (i + half_width).min(n - 1);
        let window = &series.values[lo..=hi];
        values.push(window.iter().sum::<f64>() / window.len() as f64);
    }
    BlinkRateSeries {
        values,
        ..series.clone()
    }
}

/// Write a pupil trace as `time_s,diameter` CSV; invalid samples leave the
/// diameter field empty.
pub fn write_pupil_csv(trace: &PupilTrace) -> String {
    let mut out = String::from("time_s,diameter\n");
    for (i, s) in trace.samples.iter().enumerate() {
        let t = i as f64 / trace.sample_rate;
        match s {
            Some(v) => out.push_str(&format!("{t},{v}\n")),
            None => out.push_str(&format!("{t},\n")),
        }
    }
    out
}

/// Parse a `time_s,diameter` CSV. The sample rate is inferred from the
/// timestamp span; timestamps must be evenly spaced and increasing.
pub fn read_pupil_csv(
    text: &str,
    file: &str,
    participant_id: &str,
    clip_id: &str,
) -> Result<PupilTrace> {
    let err = |line: usize, detail: &str| Error::PupilCsv {
        file: file.to_string(),
        line,
        detail: detail.to_string(),
    };

    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "time_s,diameter" => {}
        _ => return Err(err(1, "expected header `time_s,diameter`")),
    }

    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (idx, line) in lines {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let (t_str, d_str) = line
            .split_once(',')
            .ok_or_else(|| err(idx + 1, "expected two comma-separated fields"))?;
        let t: f64 = t_str
            .parse()
            .map_err(|_| err(idx + 1, "unparseable time_s"))?;
        let d = if d_str.is_empty() {
            None
        } else {
            Some(
                d_str
                    .parse()
                    .map_err(|_| err(idx + 1, "unparseable diameter"))?,
            )
        };
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(err(idx + 1, "timestamps must increase"));
            }
        }
        times.push(t);
        samples.push(d);
    }

    if samples.len() < 2 {
        return Err(err(0, "need at least 2 samples"));
    }
    let span = times[times.len() - 1] - times[0];
    let sample_rate = (times.len() - 1) as f64 / span;
    Ok(PupilTrace {
        participant_id: participant_id.to_string(),
        clip_id: clip_id.to_string(),
        sample_rate,
        samples,
    })
}

/// Write a blink-rate series as `frame,rate` CSV.
pub fn write_rate_csv(series: &BlinkRateSeries) -> String {
    let mut out = String::from("frame,rate\n");
    for (f, v) in series.values.iter().enumerate() {
        out.push_str(&format!("{f},{v}\n"));
    }
    out
}

/// Parse a `frame,rate` CSV written by [`write_rate_csv`].
pub fn read_rate_csv(
    text: &str,
    file: &str,
    clip_id: &str,
    fps: f64,
    n_participants: usize,
) -> Result<BlinkRateSeries> {
    let err = |line: usize, detail: &str| Error::PupilCsv {
        file: file.to_string(),
        line,
        detail: detail.to_string(),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "frame,rate" => {}
        _ => return Err(err(1, "expected header `frame,rate`")),
    }
    let mut values = Vec::new();
    for (idx, line) in lines {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let (f_str, v_str) = line
            .split_once(',')
            .ok_or_else(|| err(idx + 1, "expected two comma-separated fields"))?;
        let f: usize = f_str.parse().map_err(|_| err(idx + 1, "unparseable frame"))?;
        if f != values.len() {
            return Err(err(idx + 1, "frame indices must be dense from 0"));
        }
        values.push(v_str.parse().map_err(|_| err(idx + 1, "unparseable rate"))?);
    }
    Ok(BlinkRateSeries {
        clip_id: clip_id.to_string(),
        fps,
        values,
        n_participants,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(samples: Vec<Option<f64>>, rate: f64) -> PupilTrace {
        PupilTrace {
            participant_id: "p0".into(),
            clip_id: "c0".into(),
            sample_rate: rate,
            samples,
        }
    }

    /// Flat baseline with a spike-plateau-drop artifact at `at`,
    /// dropping `gap` samples later.
    fn artifact_trace(n: usize, at: usize, gap: usize, amp: f64) -> PupilTrace {
        // mild deterministic wiggle so the difference sd is nonzero
        let mut s: Vec<Option<f64>> = (0..n)
            .map(|i| Some(4.0 + 0.01 * ((i % 7) as f64 - 3.0)))
            .collect();
        for v in s[at..at + gap].iter_mut() {
            *v = Some(v.unwrap() + amp);
        }
        trace(s, 120.0)
    }

    #[test]
    fn constant_trace_yields_no_events() {
        let t = trace(vec![Some(4.0); 100], 120.0);
        assert!(detect_blinks(&t, &BlinkParams::default()).unwrap().is_empty());
    }

    #[test]
    fn all_invalid_trace_is_unusable() {
        let t = trace(vec![None; 100], 120.0);
        assert!(matches!(
            detect_blinks(&t, &BlinkParams::default()),
            Err(Error::UnusableTrace { .. })
        ));
    }

    #[test]
    fn detects_spike_then_dip() {
        let t = artifact_trace(600, 200, 24, 0.8);
        let events = detect_blinks(&t, &BlinkParams::default()).unwrap();
        assert_eq!(events.len(), 1);
        let ev = &events[0];
        assert!((ev.onset_time - 200.0 / 120.0).abs() <= 1.0 / 120.0 + 1e-12);
        assert!((ev.offset_time - 224.0 / 120.0).abs() <= 1.0 / 120.0 + 1e-12);
        assert!(ev.offset_time - ev.onset_time <= 0.5 + 1e-12);
    }

    #[test]
    fn spike_without_dip_within_window_is_dropped() {
        // drop comes 0.6 s after the rise: too late to pair
        let t = artifact_trace(600, 200, 72, 0.8);
        let events = detect_blinks(&t, &BlinkParams::default()).unwrap();
        assert!(events.is_empty());
    }

    #[test]
    fn events_are_disjoint_and_short() {
        let mut t = artifact_trace(2000, 200, 24, 0.8);
        // second artifact
        for v in t.samples[900..924].iter_mut() {
            *v = Some(v.unwrap() + 0.8);
        }
        let events = detect_blinks(&t, &BlinkParams::default()).unwrap();
        assert_eq!(events.len(), 2);
        for w in events.windows(2) {
            assert!(w[0].offset_time <= w[1].onset_time);
        }
        for ev in &events {
            assert!(ev.onset_time < ev.offset_time);
            assert!(ev.offset_time - ev.onset_time <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn no_event_starts_or_ends_at_invalid_samples() {
        let mut t = artifact_trace(600, 200, 24, 0.8);
        t.samples[200] = None; // kill the rise difference
        let events = detect_blinks(&t, &BlinkParams::default()).unwrap();
        assert!(events.is_empty());
    }

    #[test]
    fn detection_invariant_under_affine_rescale() {
        let t = artifact_trace(600, 150, 24, 0.8);
        let scaled = PupilTrace {
            samples: t
                .samples
                .iter()
                .map(|s| s.map(|v| 3.5 * v + 11.0))
                .collect(),
            ..t.clone()
        };
        let a = detect_blinks(&t, &BlinkParams::default()).unwrap();
        let b = detect_blinks(&scaled, &BlinkParams::default()).unwrap();
        assert_eq!(a, b);
    }

    fn ev(p: &str, onset: f64, offset: f64) -> BlinkEvent {
        BlinkEvent {
            participant_id: p.into(),
            onset_time: onset,
            offset_time: offset,
        }
    }

    #[test]
    fn rate_is_fraction_of_participants() {
        let mut map = BTreeMap::new();
        map.insert("a".to_string(), vec![ev("a", 0.50, 0.52)]);
        map.insert("b".to_string(), vec![ev("b", 0.50, 0.52)]);
        map.insert("c".to_string(), vec![]);
        map.insert("d".to_string(), vec![]);
        let out = blink_rate_series(&map, "c0", 60, 30.0, MarkMode::OnsetOnly).unwrap();
        assert_eq!(out.series.values[15], 0.5); // frame 15 covers [0.5, 0.5333)
        assert_eq!(out.clipped_events, 0);
    }

    #[test]
    fn no_events_gives_all_zero() {
        let mut map = BTreeMap::new();
        map.insert("a".to_string(), vec![]);
        let out = blink_rate_series(&map, "c0", 10, 30.0, MarkMode::Span).unwrap();
        assert!(out.series.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn span_marks_every_intersected_frame() {
        let mut map = BTreeMap::new();
        // onset inside frame 10, offset inside frame 15
        map.insert("a".to_string(), vec![ev("a", 10.2 / 30.0, 15.5 / 30.0)]);
        let out = blink_rate_series(&map, "c0", 30, 30.0, MarkMode::Span).unwrap();
        for f in 0..30 {
            let expect = if (10..=15).contains(&f) { 1.0 } else { 0.0 };
            assert_eq!(out.series.values[f], expect, "frame {f}");
        }
    }

    #[test]
    fn event_past_clip_end_clips_with_warning() {
        let mut map = BTreeMap::new();
        map.insert("a".to_string(), vec![ev("a", 5.0, 5.1)]);
        let out = blink_rate_series(&map, "c0", 30, 30.0, MarkMode::Span).unwrap();
        assert_eq!(out.clipped_events, 1);
        assert_eq!(out.series.values[29], 1.0);
    }

    #[test]
    fn onset_mode_conserves_mass() {
        let mut map = BTreeMap::new();
        map.insert(
            "a".to_string(),
            vec![ev("a", 0.1, 0.2), ev("a", 1.0, 1.1), ev("a", 2.5, 2.6)],
        );
        map.insert("b".to_string(), vec![ev("b", 0.5, 0.6)]);
        let out = blink_rate_series(&map, "c0", 120, 30.0, MarkMode::OnsetOnly).unwrap();
        let total: f64 = out.series.values.iter().sum();
        assert!((total - 4.0 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn duplicating_participants_leaves_series_unchanged() {
        let events = vec![ev("x", 0.3, 0.4), ev("x", 1.7, 1.9)];
        let mut one = BTreeMap::new();
        one.insert("x".to_string(), events.clone());
        let mut two = BTreeMap::new();
        two.insert("x1".to_string(), events.clone());
        two.insert("x2".to_string(), events);
        let a = blink_rate_series(&one, "c", 90, 30.0, MarkMode::Span).unwrap();
        let b = blink_rate_series(&two, "c", 90, 30.0, MarkMode::Span).unwrap();
        assert_eq!(a.series.values, b.series.values);
    }

    #[test]
    fn values_are_multiples_of_participant_fraction() {
        let mut map = BTreeMap::new();
        for p in 0..7 {
            let id = format!("p{p}");
            let evs = if p % 2 == 0 {
                vec![ev(&id, 0.2 + p as f64 * 0.01, 0.3 + p as f64 * 0.01)]
            } else {
                vec![]
            };
            map.insert(id, evs);
        }
        let out = blink_rate_series(&map, "c", 30, 30.0, MarkMode::Span).unwrap();
        for &v in &out.series.values {
            let k = v * 7.0;
            assert!((k - k.round()).abs() < 1e-9, "value {v} not a multiple of 1/7");
        }
    }

    #[test]
    fn pupil_csv_roundtrip_preserves_invalid() {
        let t = trace(
            vec![Some(4.0), None, Some(4.2), Some(4.1), None, Some(3.9)],
            120.0,
        );
        let csv = write_pupil_csv(&t);
        let back = read_pupil_csv(&csv, "t.csv", "p0", "c0").unwrap();
        assert_eq!(back.samples, t.samples);
        assert!((back.sample_rate - 120.0).abs() < 1e-6);
    }

    #[test]
    fn pupil_csv_rejects_bad_header() {
        assert!(matches!(
            read_pupil_csv("time,diam\n0,1\n", "x.csv", "p", "c"),
            Err(Error::PupilCsv { .. })
        ));
    }

    #[test]
    fn rate_csv_roundtrip() {
        let series = BlinkRateSeries {
            clip_id: "c".into(),
            fps: 30.0,
            values: vec![0.0, 0.25, 0.5, 0.125],
            n_participants: 8,
        };
        let csv = write_rate_csv(&series);
        let back = read_rate_csv(&csv, "r.csv", "c", 30.0, 8).unwrap();
        assert_eq!(back, series);
    }

    #[test]
    fn smoothing_half_width_zero_is_identity() {
        let series = BlinkRateSeries {
            clip_id: "c".into(),
            fps: 30.0,
            values: vec![0.0, 1.0, 0.0, 1.0],
            n_participants: 1,
        };
        assert_eq!(smooth_moving_average(&series, 0), series);
        let sm = smooth_moving_average(&series, 1);
        assert_eq!(sm.values, vec![0.5, 1.0 / 3.0, 2.0 / 3.0, 0.5]);
    }
}

//! Interactive browser demo of the blink-signal chain.
//!
//! Three operations, each taking slider parameters and returning plot-ready
//! JSON: the latent suppression curve around jump events, blink detection on
//! a synthetic pupil trace, and highlight segmentation of a predicted
//! blink-probability series. All of them call the same library code the
//! pipeline uses.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use blinklight_core::blink::{detect_blinks, BlinkParams, PupilTrace};
use blinklight_core::highlight::{detect, DetectMode};
use blinklight_core::rng::{derive_seed, normal, seed_rng};
use blinklight_core::synth::{
    gen_latent_blink_curve, render_trace, sample_event_frames, sample_onsets, SynthSpec,
};
use blinklight_core::train::PredictedSeries;

#[derive(Serialize)]
struct LatentDemo {
    fps: f64,
    events: Vec<usize>,
    latent: Vec<f64>,
    /// Empirical fraction of participants with a blink onset per frame.
    empirical: Vec<f64>,
    n_participants: usize,
}

/// Latent blink-probability curve with planted suppression dips, plus the
/// empirical onset fraction of a simulated audience.
#[wasm_bindgen]
pub fn latent_curve_demo(
    duration_s: f64,
    n_events: usize,
    suppression_depth: f64,
    rebound_frac: f64,
    baseline_blinks_per_min: f64,
    n_participants: usize,
    seed: u64,
) -> String {
    let spec = SynthSpec {
        clip_count: 1,
        duration_s: duration_s.clamp(10.0, 300.0),
        events_min: n_events.min(20),
        events_max: n_events.min(20),
        event_margin_s: 3.0,
        suppression_depth: suppression_depth.clamp(0.0, 1.0),
        rebound_frac: rebound_frac.clamp(0.0, 1.0),
        baseline_blinks_per_min: baseline_blinks_per_min.clamp(1.0, 120.0),
        n_participants: n_participants.clamp(1, 500),
        master_seed: seed,
        ..SynthSpec::default()
    };
    let events = sample_event_frames(&spec, 0);
    let latent = gen_latent_blink_curve(&spec, &events, spec.n_frames());

    let mut counts = vec![0usize; latent.len()];
    for p in 0..spec.n_participants {
        let mut rng = seed_rng(derive_seed(seed, &[0xDE40, p as u64]));
        for onset in sample_onsets(&mut rng, &latent, &spec) {
            let frame = (onset * spec.fps).floor() as usize;
            if frame < counts.len() {
                counts[frame] += 1;
            }
        }
    }
    let empirical = counts
        .iter()
        .map(|&c| c as f64 / spec.n_participants as f64)
        .collect();

    serde_json::to_string(&LatentDemo {
        fps: spec.fps,
        events,
        latent,
        empirical,
        n_participants: spec.n_participants,
    })
    .expect("demo serializes")
}

#[derive(Serialize)]
struct DetectedEvent {
    onset_s: f64,
    offset_s: f64,
}

#[derive(Serialize)]
struct BlinkDemo {
    sample_rate: f64,
    trace: Vec<Option<f64>>,
    true_onsets_s: Vec<f64>,
    detected: Vec<DetectedEvent>,
    hits: usize,
    misses: usize,
    false_alarms: usize,
}

/// Render a pupil trace with planted blink artifacts and run the detector
/// over it at the requested derivative z-threshold.
#[wasm_bindgen]
pub fn blink_detection_demo(
    duration_s: f64,
    baseline_blinks_per_min: f64,
    pupil_noise: f64,
    artifact_amp_mult: f64,
    deriv_z_threshold: f64,
    seed: u64,
) -> String {
    let spec = SynthSpec {
        clip_count: 1,
        duration_s: duration_s.clamp(5.0, 120.0),
        events_min: 1,
        events_max: 2,
        event_margin_s: 3.0,
        baseline_blinks_per_min: baseline_blinks_per_min.clamp(1.0, 120.0),
        pupil_noise: pupil_noise.clamp(0.001, 0.5),
        artifact_amp_mult: artifact_amp_mult.clamp(0.5, 40.0),
        master_seed: seed,
        ..SynthSpec::default()
    };
    let events = sample_event_frames(&spec, 0);
    let latent = gen_latent_blink_curve(&spec, &events, spec.n_frames());
    let mut rng = seed_rng(derive_seed(seed, &[0xB117]));
    let onsets = sample_onsets(&mut rng, &latent, &spec);
    let samples = render_trace(&mut rng, &onsets, &spec);

    let trace = PupilTrace {
        participant_id: "demo".into(),
        clip_id: "demo".into(),
        sample_rate: spec.pupil_sample_rate,
        samples,
    };
    let params = BlinkParams {
        deriv_z_threshold: deriv_z_threshold.clamp(0.5, 10.0),
        pair_window: 0.5,
    };
    let detected = detect_blinks(&trace, &params).unwrap_or_default();

    let tol = 1.0 / spec.pupil_sample_rate + 1e-9;
    let mut matched = vec![false; onsets.len()];
    let mut hits = 0usize;
    let mut false_alarms = 0usize;
    for ev in &detected {
        match onsets
            .iter()
            .enumerate()
            .find(|(i, t)| !matched[*i] && (ev.onset_time - **t).abs() <= tol)
        {
            Some((i, _)) => {
                matched[i] = true;
                hits += 1;
            }
            None => false_alarms += 1,
        }
    }
    let misses = matched.iter().filter(|m| !**m).count();

    serde_json::to_string(&BlinkDemo {
        sample_rate: trace.sample_rate,
        trace: trace.samples.clone(),
        true_onsets_s: onsets,
        detected: detected
            .iter()
            .map(|e| DetectedEvent {
                onset_s: e.onset_time,
                offset_s: e.offset_time,
            })
            .collect(),
        hits,
        misses,
        false_alarms,
    })
    .expect("demo serializes")
}

#[derive(Serialize)]
struct SegmentOut {
    start_frame: usize,
    end_frame: usize,
    min_value: f64,
    depth_sd: f64,
}

#[derive(Serialize)]
struct HighlightDemo {
    fps: f64,
    first_frame: usize,
    pred: Vec<f64>,
    mean: f64,
    threshold: f64,
    events: Vec<usize>,
    segments: Vec<SegmentOut>,
}

/// Simulate a predicted blink-probability series (suppression dips plus
/// model noise) and run the sustained-low highlight rule over it.
#[wasm_bindgen]
pub fn highlight_demo(
    duration_s: f64,
    n_events: usize,
    suppression_depth: f64,
    model_noise: f64,
    k_sd: f64,
    min_run: usize,
    seed: u64,
) -> String {
    let spec = SynthSpec {
        clip_count: 1,
        duration_s: duration_s.clamp(10.0, 300.0),
        events_min: n_events.min(20),
        events_max: n_events.min(20),
        event_margin_s: 3.0,
        suppression_depth: suppression_depth.clamp(0.0, 1.0),
        master_seed: seed,
        ..SynthSpec::default()
    };
    let events = sample_event_frames(&spec, 0);
    let latent = gen_latent_blink_curve(&spec, &events, spec.n_frames());
    let scale = 6.0; // span marking raises per-frame rates above onset probability
    let mut rng = seed_rng(derive_seed(seed, &[0x41C4]));
    let first_frame = 89.min(latent.len().saturating_sub(1));
    let values: Vec<f64> = latent[first_frame..]
        .iter()
        .map(|&p| scale * p + model_noise.clamp(0.0, 0.2) * normal(&mut rng))
        .collect();

    let series = PredictedSeries {
        clip_id: "demo".into(),
        fps: spec.fps,
        values,
        first_valid_frame: first_frame,
    };
    let segments = detect(
        &series,
        k_sd.clamp(0.1, 6.0),
        min_run.clamp(1, 60),
        DetectMode::AllFramesBelow,
    );

    let n = series.values.len() as f64;
    let mean = series.values.iter().sum::<f64>() / n;
    let sd = (series
        .values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / (n - 1.0))
        .sqrt();

    serde_json::to_string(&HighlightDemo {
        fps: spec.fps,
        first_frame,
        pred: series.values.clone(),
        mean,
        threshold: mean - k_sd.clamp(0.1, 6.0) * sd,
        events,
        segments: segments
            .iter()
            .map(|s| SegmentOut {
                start_frame: s.start_frame,
                end_frame: s.end_frame,
                min_value: s.min_value,
                depth_sd: s.depth_sd,
            })
            .collect(),
    })
    .expect("demo serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latent_demo_returns_valid_json() {
        let json = latent_curve_demo(20.0, 2, 0.9, 0.15, 30.0, 16, 5);
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["events"].as_array().unwrap().len(), 2);
        assert_eq!(v["latent"].as_array().unwrap().len(), 600);
    }

    #[test]
    fn blink_demo_detects_most_onsets() {
        let json = blink_detection_demo(20.0, 40.0, 0.02, 12.0, 2.5, 3);
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let hits = v["hits"].as_u64().unwrap();
        let misses = v["misses"].as_u64().unwrap();
        assert!(hits > 0 && hits >= 4 * misses.max(1) || misses == 0, "{json}");
    }

    #[test]
    fn highlight_demo_finds_planted_dips() {
        let json = highlight_demo(30.0, 3, 0.95, 0.005, 2.0, 5, 8);
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let segments = v["segments"].as_array().unwrap();
        assert!(!segments.is_empty(), "{json}");
    }
}

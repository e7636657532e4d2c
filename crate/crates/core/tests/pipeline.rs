//! End-to-end integration through the on-disk formats: a generated corpus
//! is written to disk, read back through the real parsers, and pushed
//! through ingestion, blink aggregation, windowing, a tiny training run,
//! prediction, stats, and highlight detection.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use blinklight_core::blink::{
    blink_rate_series, detect_blinks, read_rate_csv, write_rate_csv, BlinkParams, MarkMode,
};
use blinklight_core::corpus::{list_clip_dirs, load_clip, load_truth, write_corpus};
use blinklight_core::dataset::{build_windows, loocv_splits, read_dataset, write_dataset, Dataset};
use blinklight_core::highlight::{detect, DetectMode};
use blinklight_core::model::{load_params, save_params, Activation, ModelConfig};
use blinklight_core::pose::ingest;
use blinklight_core::stats::{align_events, surrogate_test};
use blinklight_core::synth::SynthSpec;
use blinklight_core::train::{run_loocv, ClipData, TrainConfig};

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("blk-pipeline-{tag}-{}", std::process::id()));
    fs::remove_dir_all(&dir).ok();
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn tiny_spec() -> SynthSpec {
    SynthSpec {
        clip_count: 3,
        duration_s: 14.0,
        n_participants: 6,
        events_min: 1,
        events_max: 2,
        event_margin_s: 4.0,
        master_seed: 77,
        ..SynthSpec::default()
    }
}

#[test]
fn disk_roundtrip_pipeline() {
    let dir = temp_dir("rt");
    let spec = tiny_spec();
    let ids = write_corpus(&spec, &dir).unwrap();
    assert_eq!(ids.len(), 3);

    // read back through the real parsers
    let clips = list_clip_dirs(&dir).unwrap();
    assert_eq!(clips.len(), 3);

    let mut corpus = Vec::new();
    let mut all_events = BTreeMap::new();
    for (id, clip_dir) in &clips {
        let loaded = load_clip(clip_dir).unwrap();
        assert_eq!(&loaded.pose.clip_id, id);
        assert_eq!(loaded.pose.frames.len(), spec.n_frames());
        assert_eq!(loaded.traces.len(), spec.n_participants);

        let joints = ingest(&loaded.pose, 0.7).unwrap();
        assert_eq!(joints.n_frames, spec.n_frames());
        assert!(joints.values.iter().all(|v| v.is_finite()));
        assert!(joints.values.iter().all(|&v| (-0.1..=1.1).contains(&v)));

        let mut events = BTreeMap::new();
        for trace in &loaded.traces {
            events.insert(
                trace.participant_id.clone(),
                detect_blinks(trace, &BlinkParams::default()).unwrap(),
            );
        }
        let outcome =
            blink_rate_series(&events, id, spec.n_frames(), spec.fps, MarkMode::Span).unwrap();
        assert_eq!(outcome.series.values.len(), spec.n_frames());

        // rate CSV round-trip preserves the series
        let csv = write_rate_csv(&outcome.series);
        let back = read_rate_csv(&csv, "rate.csv", id, spec.fps, spec.n_participants).unwrap();
        assert_eq!(back, outcome.series);

        // detection recovers most of the generator's planted onsets
        let truth = load_truth(clip_dir, id).unwrap();
        let planted: usize = truth.onsets.values().map(|v| v.len()).sum();
        let detected: usize = events.values().map(|v| v.len()).sum();
        assert!(
            (detected as f64) > 0.8 * planted as f64 && (detected as f64) < 1.2 * planted as f64,
            "detected {detected} vs planted {planted}"
        );

        all_events.insert(id.clone(), truth.event_frames);
        corpus.push(ClipData {
            joints,
            rates: outcome.series,
        });
    }

    // dataset container round-trip
    let mut samples = Vec::new();
    for clip in &corpus {
        samples.extend(build_windows(&clip.joints, &clip.rates, 90, 4).unwrap());
    }
    let ds = Dataset {
        window: 90,
        stride: 4,
        samples,
    };
    let mut bytes = Vec::new();
    write_dataset(&mut bytes, &ds).unwrap();
    let ds_back = read_dataset(&mut bytes.as_slice(), "mem").unwrap();
    assert_eq!(ds_back, ds);

    // tiny leave-one-out run; the point is the plumbing, not model quality
    let model_cfg = ModelConfig {
        in_channels: 36,
        filters: [3, 4, 3],
        kernel_size: 8,
        window_len: 90,
        activation: Activation::Rectifier,
    };
    let train_cfg = TrainConfig {
        batch_size: 128,
        max_epochs: 2,
        ..TrainConfig::default()
    };
    let clip_ids: Vec<String> = corpus.iter().map(|c| c.joints.clip_id.clone()).collect();
    let plan = loocv_splits(&clip_ids).unwrap();
    let loocv = run_loocv(&corpus, &plan, &model_cfg, &train_cfg, 90, 4, 5).unwrap();
    assert!(loocv.failures.is_empty(), "{:?}", loocv.failures);
    assert_eq!(loocv.folds.len(), 3);

    for fold in &loocv.folds {
        // checkpoint round-trips through disk
        let ckpt = dir.join(format!("{}.ckpt", fold.test_clip_id));
        save_params(&fold.params, &ckpt).unwrap();
        assert_eq!(load_params(&ckpt).unwrap(), fold.params);

        assert_eq!(
            fold.predicted.values.len(),
            spec.n_frames() - 90 + 1,
            "dense prediction covers every frame from 89 on"
        );

        let clip = corpus
            .iter()
            .find(|c| c.joints.clip_id == fold.test_clip_id)
            .unwrap();
        let actual = &clip.rates.values[fold.predicted.first_valid_frame..];
        // surrogate machinery runs end to end (significance not expected
        // from a 2-epoch toy model)
        let report = surrogate_test(
            &fold.test_clip_id,
            &fold.predicted.values,
            actual,
            50,
            9,
            0.05,
            3,
        );
        match report {
            Ok(r) => assert!(r.r.abs() <= 1.0),
            Err(e) => panic!("surrogate test failed: {e}"),
        }

        // event-aligned slices where events fit the short clips
        let events = &all_events[&fold.test_clip_id];
        if let Ok((curves, reports, _)) = align_events(
            &fold.predicted,
            &clip.rates,
            events,
            30,
            90,
            50,
            13,
            0.05,
        ) {
            assert_eq!(curves.pred_mean.len(), 121);
            assert_eq!(reports.len(), curves.event_count);
        }

        // highlight detection runs on the predictions
        let segments = detect(&fold.predicted, 2.0, 5, DetectMode::AllFramesBelow);
        for s in &segments {
            assert!(s.start_frame >= fold.predicted.first_valid_frame);
            assert!(s.end_frame - s.start_frame + 1 >= 5);
        }
    }

    fs::remove_dir_all(&dir).ok();
}

#[test]
fn real_corpus_layout_without_truth_dir_is_loadable() {
    // a "real" corpus has keypoints + pupil CSVs + events, but no truth/
    let dir = temp_dir("no-truth");
    let spec = SynthSpec {
        clip_count: 1,
        duration_s: 8.0,
        n_participants: 2,
        events_min: 1,
        events_max: 1,
        event_margin_s: 2.0,
        ..SynthSpec::default()
    };
    write_corpus(&spec, &dir).unwrap();
    let clip_dir = dir.join("synth00");
    fs::remove_dir_all(clip_dir.join("truth")).unwrap();

    let loaded = load_clip(&clip_dir).unwrap();
    assert_eq!(loaded.pose.frames.len(), spec.n_frames());
    assert_eq!(loaded.traces.len(), 2);
    assert!(!loaded.event_frames.is_empty());

    fs::remove_dir_all(&dir).ok();
}

//! Adam optimization loop, leave-one-out training schedule, and dense
//! per-clip prediction.

use std::time::Instant;

use crate::blink::BlinkRateSeries;
use crate::dataset::{build_windows, Fold, FoldPlan, WindowSample};
use crate::model::{
    adam_shapes_match, backward, forward, init_params, GradientSet, ModelConfig, ModelParams,
};
use crate::par::chunked_map;
use crate::pose::JointMatrix;
use crate::rng::{derive_seed, seed_rng, shuffle};
use crate::{Error, Result};

/// Seed-derivation stream tags.
const STREAM_EPOCH_SHUFFLE: u64 = 0x45504f43; // "EPOC"
const STREAM_FOLD_INIT: u64 = 0x464f4c44; // "FOLD"

/// Optimizer and loop configuration.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 4096,
            max_epochs: 100,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.batch_size >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("train config", format!("{self:?}")))
        }
    }
}

/// Adam moment accumulators, stored flat in the parameters' declared order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(param_count: usize) -> Self {
        Self {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
        }
    }
}

/// One Adam update with bias correction:
/// m ← β₁m + (1−β₁)g, v ← β₂v + (1−β₂)g², θ ← θ − lr·m̂/(√v̂ + ε).
///
/// A non-finite gradient aborts the step with parameters and state
/// untouched.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &GradientSet,
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    if !adam_shapes_match(params, grads) || state.m.len() != params.param_count() {
        return Err(Error::ShapeMismatch(
            "adam_step: params/grads/state shapes differ".into(),
        ));
    }
    if !grads.all_finite() {
        return Err(Error::NonFinite {
            location: format!("gradient at adam step {}", state.t + 1),
        });
    }

    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for ((p, g), (m, v)) in params
        .flat_iter_mut()
        .zip(grads.flat_iter())
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Per-epoch training RMSE over all samples (computed from each batch's
    /// pre-update predictions).
    pub loss_history: Vec<f64>,
    /// Wall-clock milliseconds per epoch, for the training log.
    pub epoch_wall_ms: Vec<u64>,
    /// Total optimizer steps taken.
    pub steps: u64,
}

/// Train for exactly `max_epochs` epochs (no early stopping).
///
/// Each epoch reshuffles the samples with a seed derived from
/// `(shuffle_seed, epoch)`, partitions them into batches of `batch_size`
/// (last batch smaller), and takes one Adam step per batch on the batch
/// RMSE. Fully deterministic given the seeds.
pub fn train(
    samples: &[WindowSample],
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    init_seed: u64,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }

    let mut params = init_params(model_cfg, init_seed)?;
    let mut state = AdamState::new(params.param_count());
    let mut loss_history = Vec::with_capacity(cfg.max_epochs);
    let mut epoch_wall_ms = Vec::with_capacity(cfg.max_epochs);

    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..cfg.max_epochs {
        let started = Instant::now();
        let mut rng = seed_rng(derive_seed(
            cfg.shuffle_seed,
            &[STREAM_EPOCH_SHUFFLE, epoch as u64],
        ));
        order.sort_unstable(); // reset to canonical order before reshuffling
        shuffle(&mut rng, &mut order);

        let mut sse = 0.0;
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let inputs: Vec<&[f64]> = batch.iter().map(|&i| samples[i].input.as_slice()).collect();
            let targets: Vec<f64> = batch.iter().map(|&i| samples[i].target).collect();
            let (batch_rmse, grads) = backward(&params, &inputs, &targets).map_err(|e| {
                Error::invalid(
                    "training step",
                    format!("epoch {epoch} batch {batch_idx}: {e}"),
                )
            })?;
            sse += batch_rmse * batch_rmse * batch.len() as f64;
            adam_step(&mut params, &grads, &mut state, cfg).map_err(|e| {
                Error::invalid(
                    "training step",
                    format!("epoch {epoch} batch {batch_idx}: {e}"),
                )
            })?;
        }
        let epoch_rmse = (sse / samples.len() as f64).sqrt();
        if !epoch_rmse.is_finite() {
            return Err(Error::NonFinite {
                location: format!("training loss at epoch {epoch}"),
            });
        }
        loss_history.push(epoch_rmse);
        epoch_wall_ms.push(started.elapsed().as_millis() as u64);
    }

    Ok(TrainOutcome {
        params,
        loss_history,
        epoch_wall_ms,
        steps: state.t,
    })
}

/// Dense per-frame predictions for one clip, starting at the first frame
/// with a full window behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedSeries {
    pub clip_id: String,
    pub fps: f64,
    /// Predictions for frames `first_valid_frame ..= n_frames - 1`.
    pub values: Vec<f64>,
    pub first_valid_frame: usize,
}

impl PredictedSeries {
    /// Prediction values clamped to [0, 1] for reporting; the raw pipeline
    /// values stay unclamped.
    pub fn clamped_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.clamp(0.0, 1.0)).collect()
    }
}

/// One forward pass per frame `t ∈ [window-1, n_frames-1]` on the window
/// ending at `t`.
pub fn predict_clip(params: &ModelParams, joints: &JointMatrix, fps: f64) -> Result<PredictedSeries> {
    let window = params.config.window_len;
    let channels = params.config.in_channels;
    if joints.n_frames < window {
        return Err(Error::invalid(
            "predict input",
            format!(
                "clip {} has {} frames, need at least {window}",
                joints.clip_id, joints.n_frames
            ),
        ));
    }

    let n_out = joints.n_frames - window + 1;
    let value_chunks = chunked_map(n_out, 256, |range| {
        range
            .map(|i| {
                let start = i * crate::pose::N_CHANNELS;
                let input = &joints.values[start..start + window * channels];
                forward(params, input)
            })
            .collect::<Result<Vec<f64>>>()
    });
    let mut values = Vec::with_capacity(n_out);
    for chunk in value_chunks {
        values.extend(chunk?);
    }
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            location: format!("prediction for clip {} frame {}", joints.clip_id, window - 1 + bad),
        });
    }
    Ok(PredictedSeries {
        clip_id: joints.clip_id.clone(),
        fps,
        values,
        first_valid_frame: window - 1,
    })
}

/// One ingested clip: normalized joints plus the measured blink-rate series.
#[derive(Debug, Clone)]
pub struct ClipData {
    pub joints: JointMatrix,
    pub rates: BlinkRateSeries,
}

/// One completed leave-one-out fold.
#[derive(Debug, Clone)]
pub struct FoldResult {
    pub test_clip_id: String,
    pub params: ModelParams,
    pub predicted: PredictedSeries,
    pub loss_history: Vec<f64>,
    pub epoch_wall_ms: Vec<u64>,
}

/// Outcome of a full leave-one-out run; failed folds are reported and the
/// remaining folds continue.
#[derive(Debug, Clone)]
pub struct LoocvOutcome {
    pub folds: Vec<FoldResult>,
    pub failures: Vec<(String, String)>,
}

/// Gather training windows for a fold, excluding the held-out clip by
/// construction.
pub fn assemble_training_windows(
    corpus: &[ClipData],
    fold: &Fold,
    window: usize,
    stride: usize,
) -> Result<Vec<WindowSample>> {
    let mut samples = Vec::new();
    for id in &fold.train_clip_ids {
        let clip = corpus
            .iter()
            .find(|c| &c.joints.clip_id == id)
            .ok_or_else(|| Error::invalid("fold plan", format!("unknown clip {id}")))?;
        samples.extend(build_windows(&clip.joints, &clip.rates, window, stride)?);
    }
    Ok(samples)
}

/// Train once per fold on the union of the training clips' windows, then
/// predict the held-out clip densely (stride 1).
#[allow(clippy::too_many_arguments)]
pub fn run_loocv(
    corpus: &[ClipData],
    plan: &FoldPlan,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    window: usize,
    stride: usize,
    master_seed: u64,
) -> Result<LoocvOutcome> {
    if window != model_cfg.window_len {
        return Err(Error::invalid(
            "loocv config",
            format!(
                "dataset window {window} != model window {}",
                model_cfg.window_len
            ),
        ));
    }
    run_loocv_inner(corpus, plan, model_cfg, train_cfg, master_seed, |fold| {
        assemble_training_windows(corpus, fold, window, stride)
    })
}

/// Leave-one-out over pre-materialized window samples (e.g. a serialized
/// dataset container). Each fold trains on every sample whose clip is in
/// its training set, in stored order.
pub fn run_loocv_with_samples(
    samples: &[WindowSample],
    corpus: &[ClipData],
    plan: &FoldPlan,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    master_seed: u64,
) -> Result<LoocvOutcome> {
    run_loocv_inner(corpus, plan, model_cfg, train_cfg, master_seed, |fold| {
        Ok(samples
            .iter()
            .filter(|s| fold.train_clip_ids.contains(&s.clip_id))
            .cloned()
            .collect())
    })
}

fn run_loocv_inner<F>(
    corpus: &[ClipData],
    plan: &FoldPlan,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    master_seed: u64,
    gather: F,
) -> Result<LoocvOutcome>
where
    F: Fn(&Fold) -> Result<Vec<WindowSample>>,
{
    let mut folds = Vec::new();
    let mut failures = Vec::new();
    for (fold_idx, fold) in plan.folds.iter().enumerate() {
        let result = (|| -> Result<FoldResult> {
            let samples = gather(fold)?;
            // leave-one-out hygiene: the held-out clip must never train
            assert!(
                samples.iter().all(|s| s.clip_id != fold.test_clip_id),
                "test clip leaked into training windows"
            );
            let init_seed = derive_seed(master_seed, &[STREAM_FOLD_INIT, fold_idx as u64]);
            let outcome = train(&samples, model_cfg, train_cfg, init_seed)?;
            let test = corpus
                .iter()
                .find(|c| c.joints.clip_id == fold.test_clip_id)
                .ok_or_else(|| {
                    Error::invalid("fold plan", format!("unknown clip {}", fold.test_clip_id))
                })?;
            let predicted = predict_clip(&outcome.params, &test.joints, test.rates.fps)?;
            Ok(FoldResult {
                test_clip_id: fold.test_clip_id.clone(),
                params: outcome.params,
                predicted,
                loss_history: outcome.loss_history,
                epoch_wall_ms: outcome.epoch_wall_ms,
            })
        })();
        match result {
            Ok(fold_result) => folds.push(fold_result),
            Err(e) => failures.push((fold.test_clip_id.clone(), e.to_string())),
        }
    }
    Ok(LoocvOutcome { folds, failures })
}

/// Write the per-epoch training log as `epoch,rmse,wall_ms`.
pub fn write_train_log(loss_history: &[f64], wall_ms: &[u64]) -> String {
    let mut out = String::from("epoch,rmse,wall_ms\n");
    for (e, (rmse, ms)) in loss_history.iter().zip(wall_ms).enumerate() {
        out.push_str(&format!("{e},{rmse},{ms}\n"));
    }
    out
}

/// Write a predicted series as `frame,predicted_rate`.
pub fn write_prediction_csv(series: &PredictedSeries) -> String {
    let mut out = String::from("frame,predicted_rate\n");
    for (i, v) in series.values.iter().enumerate() {
        out.push_str(&format!("{},{v}\n", series.first_valid_frame + i));
    }
    out
}

/// Parse a `frame,predicted_rate` CSV written by [`write_prediction_csv`].
pub fn read_prediction_csv(text: &str, file: &str, clip_id: &str, fps: f64) -> Result<PredictedSeries> {
    let err = |line: usize, detail: &str| Error::PupilCsv {
        file: file.to_string(),
        line,
        detail: detail.to_string(),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "frame,predicted_rate" => {}
        _ => return Err(err(1, "expected header `frame,predicted_rate`")),
    }
    let mut first_valid_frame = None;
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
        match first_valid_frame {
            None => first_valid_frame = Some(f),
            Some(first) => {
                if f != first + values.len() {
                    return Err(err(idx + 1, "frames must be consecutive"));
                }
            }
        }
        values.push(v_str.parse().map_err(|_| err(idx + 1, "unparseable rate"))?);
    }
    let first_valid_frame = first_valid_frame.ok_or_else(|| err(0, "no rows"))?;
    Ok(PredictedSeries {
        clip_id: clip_id.to_string(),
        fps,
        values,
        first_valid_frame,
    })
}

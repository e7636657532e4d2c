//! Synthetic corpus generator with planted pose→blink coupling.
//!
//! Every clip gets smooth band-limited joint trajectories, a set of jump
//! events rendered as whole-body vertical bursts, a latent per-frame blink
//! probability curve that dips around each event, and per-participant pupil
//! traces with spike-then-dip blink artifacts sampled from that curve.
//! Because the coupling is planted, a correctly implemented pipeline must
//! recover it — which is what makes end-to-end acceptance meaningful.
//!
//! Everything is a pure function of the master seed.

use std::collections::BTreeMap;

use crate::blink::PupilTrace;
use crate::pose::{Joint, PersonPose, PoseSequence, N_JOINTS};
use crate::rng::{derive_seed, normal, seed_rng, uniform_f64, uniform_range, uniform_usize, ChaCha8Rng};

const STREAM_EVENTS: u64 = 0x45564e54; // "EVNT"
const STREAM_POSE: u64 = 0x504f5345; // "POSE"
const STREAM_PUPIL: u64 = 0x50555049; // "PUPI"

/// Suppression dip shape around an event, in seconds relative to the event
/// frame: ramp down from −0.5 s, minimum at +0.2 s, recovery to a mild
/// rebound by +1.5 s, settled by +2.5 s.
pub const RAMP_START_S: f64 = -0.5;
pub const DIP_MIN_S: f64 = 0.2;
pub const RECOVERY_S: f64 = 1.5;
pub const REBOUND_END_S: f64 = 2.5;

/// Blink artifact: the apparent diameter jumps up, plateaus, and drops back
/// this many seconds later.
pub const ARTIFACT_DIP_DELAY_S: f64 = 0.2;
/// No second onset can be sampled within this window after an onset.
pub const ONSET_REFRACTORY_S: f64 = 0.6;

/// Generator parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub clip_count: usize,
    pub duration_s: f64,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    pub n_participants: usize,
    pub pupil_sample_rate: f64,
    /// Inclusive range of jump events per clip.
    pub events_min: usize,
    pub events_max: usize,
    /// Minimum distance of events from clip edges and from each other.
    pub event_margin_s: f64,
    /// Fractional blink suppression at the dip minimum, in [0, 1].
    pub suppression_depth: f64,
    /// Mild post-recovery overshoot above baseline.
    pub rebound_frac: f64,
    /// Baseline blink onsets per participant per minute.
    pub baseline_blinks_per_min: f64,
    /// Per-frame jitter added to joint positions, in pixels.
    pub pose_noise_px: f64,
    /// Additive noise sd on the pupil trace, in diameter units.
    pub pupil_noise: f64,
    /// Blink artifact amplitude as a multiple of `pupil_noise`.
    pub artifact_amp_mult: f64,
    /// Probability a joint's confidence drops below the 0.7 filter.
    pub confidence_dropout_rate: f64,
    /// Probability a frame has no people at all.
    pub absent_frame_rate: f64,
    /// Probability per sample of starting a short invalid run in a trace.
    pub invalid_run_rate: f64,
    /// Add a small second person so principal selection is exercised.
    pub audience_person: bool,
    pub master_seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            clip_count: 12,
            duration_s: 60.0,
            fps: 30.0,
            width: 1920,
            height: 1080,
            n_participants: 64,
            pupil_sample_rate: 120.0,
            events_min: 5,
            events_max: 7,
            event_margin_s: 5.0,
            suppression_depth: 0.95,
            rebound_frac: 0.15,
            baseline_blinks_per_min: 35.0,
            pose_noise_px: 2.0,
            pupil_noise: 0.02,
            artifact_amp_mult: 16.0,
            confidence_dropout_rate: 0.02,
            absent_frame_rate: 0.004,
            invalid_run_rate: 0.0004,
            audience_person: true,
            master_seed: 42,
        }
    }
}

impl SynthSpec {
    pub fn n_frames(&self) -> usize {
        (self.duration_s * self.fps).round() as usize
    }

    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.pupil_sample_rate).round() as usize
    }

    pub fn clip_id(&self, clip_index: usize) -> String {
        format!("synth{clip_index:02}")
    }

    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.clip_count > 0
            && self.duration_s > 0.0
            && self.fps > 0.0
            && self.width > 0
            && self.height > 0
            && self.n_participants > 0
            && self.pupil_sample_rate > 0.0
            && self.events_min <= self.events_max
            && (0.0..=1.0).contains(&self.suppression_depth)
            && self.baseline_blinks_per_min >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(crate::Error::invalid("synth spec", format!("{self:?}")))
        }
    }
}

/// Ground truth for one generated clip.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipTruth {
    pub clip_id: String,
    pub event_frames: Vec<usize>,
    /// Per-frame latent blink-onset probability.
    pub latent: Vec<f64>,
    /// True onset times per participant, seconds.
    pub onsets: BTreeMap<String, Vec<f64>>,
}

/// Everything generated for one clip.
#[derive(Debug, Clone)]
pub struct SynthClip {
    pub pose: PoseSequence,
    pub traces: Vec<PupilTrace>,
    pub truth: ClipTruth,
}

/// Sample the event frames for a clip, respecting edge margins and minimum
/// separation.
pub fn sample_event_frames(spec: &SynthSpec, clip_index: usize) -> Vec<usize> {
    let mut rng = seed_rng(derive_seed(spec.master_seed, &[STREAM_EVENTS, clip_index as u64]));
    let n_frames = spec.n_frames();
    let margin = (spec.event_margin_s * spec.fps).round() as usize;
    if n_frames <= 2 * margin {
        return Vec::new();
    }
    let span = spec.events_max - spec.events_min + 1;
    let n_events = spec.events_min + uniform_usize(&mut rng, span);

    let mut frames: Vec<usize> = Vec::new();
    let mut attempts = 0;
    while frames.len() < n_events && attempts < 10_000 {
        attempts += 1;
        let f = margin + uniform_usize(&mut rng, n_frames - 2 * margin);
        if frames.iter().all(|&e| e.abs_diff(f) >= margin) {
            frames.push(f);
        }
    }
    frames.sort_unstable();
    frames
}

/// Jump signature envelope relative to the event frame, in seconds: a quick
/// crouch-and-launch rise starting 0.5 s before the event, a peak through
/// the jump itself, and a slower landing recovery ending 1.5 s after. The
/// asymmetric edges are what downstream models can anchor to, and the span
/// deliberately matches the blink-suppression window.
pub const SIGNATURE_RISE_START_S: f64 = -0.5;
pub const SIGNATURE_PEAK_START_S: f64 = -0.15;
pub const SIGNATURE_PEAK_END_S: f64 = 0.3;
pub const SIGNATURE_END_S: f64 = 1.5;

/// Signature envelope value at `dt` seconds from the event: 0 outside the
/// support, 1 at the peak.
pub fn signature_envelope(dt: f64) -> f64 {
    if !(SIGNATURE_RISE_START_S..=SIGNATURE_END_S).contains(&dt) {
        0.0
    } else if dt < SIGNATURE_PEAK_START_S {
        smooth01((dt - SIGNATURE_RISE_START_S) / (SIGNATURE_PEAK_START_S - SIGNATURE_RISE_START_S))
    } else if dt <= SIGNATURE_PEAK_END_S {
        1.0
    } else {
        1.0 - smooth01((dt - SIGNATURE_PEAK_END_S) / (SIGNATURE_END_S - SIGNATURE_PEAK_END_S))
    }
}

// COCO-18 base offsets in body-height units, (dx, dy) from body center.
const JOINT_OFFSETS: [(f64, f64); N_JOINTS] = [
    (0.00, -0.50), // nose
    (0.00, -0.35), // neck
    (-0.10, -0.33),
    (-0.16, -0.18),
    (-0.18, -0.02), // right arm
    (0.10, -0.33),
    (0.16, -0.18),
    (0.18, -0.02), // left arm
    (-0.07, 0.00),
    (-0.08, 0.25),
    (-0.09, 0.50), // right leg
    (0.07, 0.00),
    (0.08, 0.25),
    (0.09, 0.50), // left leg
    (-0.03, -0.52),
    (0.03, -0.52), // eyes
    (-0.06, -0.50),
    (0.06, -0.50), // ears
];

/// Vertical signature amplitude at an event, in body-height units.
const BURST_AMP_BODY: f64 = 0.35;

struct JointMotion {
    amp_x: [f64; 2],
    amp_y: [f64; 2],
    freq_x: [f64; 2],
    freq_y: [f64; 2],
    phase_x: [f64; 2],
    phase_y: [f64; 2],
}

fn draw_motion(rng: &mut ChaCha8Rng, body_h: f64, lower_body: bool) -> JointMotion {
    let max_amp = if lower_body { 0.025 } else { 0.06 };
    let mut m = JointMotion {
        amp_x: [0.0; 2],
        amp_y: [0.0; 2],
        freq_x: [0.0; 2],
        freq_y: [0.0; 2],
        phase_x: [0.0; 2],
        phase_y: [0.0; 2],
    };
    for h in 0..2 {
        m.amp_x[h] = body_h * uniform_range(rng, 0.01, max_amp);
        m.amp_y[h] = body_h * uniform_range(rng, 0.008, max_amp * 0.7);
        m.freq_x[h] = uniform_range(rng, 0.15, 1.0);
        m.freq_y[h] = uniform_range(rng, 0.15, 1.0);
        m.phase_x[h] = uniform_range(rng, 0.0, std::f64::consts::TAU);
        m.phase_y[h] = uniform_range(rng, 0.0, std::f64::consts::TAU);
    }
    m
}

/// Generate the pose sequence for one clip.
///
/// Joints follow a smooth sum of low-frequency sinusoids plus a global
/// drift; every event superimposes a whole-body vertical burst (strongest
/// on hips, knees and ankles). Confidence values sit near 1.0 with
/// occasional sub-threshold dropouts, and a small audience person exercises
/// principal-person selection.
pub fn gen_pose(spec: &SynthSpec, clip_index: usize, event_frames: &[usize]) -> PoseSequence {
    let mut rng = seed_rng(derive_seed(spec.master_seed, &[STREAM_POSE, clip_index as u64]));
    let n_frames = spec.n_frames();
    let (w, h) = (spec.width as f64, spec.height as f64);
    let body_h = h * 0.45;

    // global drift
    let drift_amp_x = [w * 0.15, w * 0.06];
    let drift_freq_x = [uniform_range(&mut rng, 0.02, 0.05), uniform_range(&mut rng, 0.06, 0.12)];
    let drift_phase_x = [
        uniform_range(&mut rng, 0.0, std::f64::consts::TAU),
        uniform_range(&mut rng, 0.0, std::f64::consts::TAU),
    ];
    let drift_amp_y = h * 0.03;
    let drift_freq_y = uniform_range(&mut rng, 0.03, 0.08);
    let drift_phase_y = uniform_range(&mut rng, 0.0, std::f64::consts::TAU);

    // per-joint oscillation parameters (fixed draw order)
    let motions: Vec<JointMotion> = (0..N_JOINTS)
        .map(|j| draw_motion(&mut rng, body_h, (8..=13).contains(&j)))
        .collect();

    let burst_at = |frame: f64| -> f64 {
        let mut total = 0.0;
        for &e in event_frames {
            total += signature_envelope((frame - e as f64) / spec.fps);
        }
        total
    };

    let mut frames = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let t = f as f64 / spec.fps;
        // one absent-frame draw per frame, always consumed
        let absent = uniform_f64(&mut rng) < spec.absent_frame_rate;

        let cx = w * 0.5
            + drift_amp_x[0] * (std::f64::consts::TAU * drift_freq_x[0] * t + drift_phase_x[0]).sin()
            + drift_amp_x[1] * (std::f64::consts::TAU * drift_freq_x[1] * t + drift_phase_x[1]).sin();
        let cy = h * 0.52
            + drift_amp_y * (std::f64::consts::TAU * drift_freq_y * t + drift_phase_y).sin();
        let burst = burst_at(f as f64) * BURST_AMP_BODY * body_h;

        let mut skater = [Joint { x: 0.0, y: 0.0, c: 0.0 }; N_JOINTS];
        for (j, joint) in skater.iter_mut().enumerate() {
            let m = &motions[j];
            let mut x = cx + JOINT_OFFSETS[j].0 * body_h;
            let mut y = cy + JOINT_OFFSETS[j].1 * body_h;
            for hn in 0..2 {
                x += m.amp_x[hn] * (std::f64::consts::TAU * m.freq_x[hn] * t + m.phase_x[hn]).sin();
                y += m.amp_y[hn] * (std::f64::consts::TAU * m.freq_y[hn] * t + m.phase_y[hn]).sin();
            }
            // the jump: whole body rises, legs most
            let lower = (8..=13).contains(&j);
            y -= burst * if lower { 1.0 } else { 0.8 };
            x += spec.pose_noise_px * normal(&mut rng);
            y += spec.pose_noise_px * normal(&mut rng);
            let c = if uniform_f64(&mut rng) < spec.confidence_dropout_rate {
                uniform_range(&mut rng, 0.1, 0.65)
            } else {
                (0.92 + 0.05 * normal(&mut rng)).clamp(0.0, 1.0)
            };
            *joint = Joint { x, y, c };
        }

        // the audience person wiggles slightly in a corner; draws happen
        // every frame so the stream stays aligned
        let aud_dx = 3.0 * normal(&mut rng);
        let aud_dy = 3.0 * normal(&mut rng);
        let audience_first = uniform_f64(&mut rng) < 0.5;

        if absent {
            frames.push(Vec::new());
            continue;
        }

        let mut people = vec![PersonPose { joints: skater }];
        if spec.audience_person {
            let aud_h = body_h * 0.18;
            let ax = w * 0.12 + aud_dx;
            let ay = h * 0.18 + aud_dy;
            let mut joints = [Joint { x: 0.0, y: 0.0, c: 0.0 }; N_JOINTS];
            for (j, joint) in joints.iter_mut().enumerate() {
                *joint = Joint {
                    x: ax + JOINT_OFFSETS[j].0 * aud_h,
                    y: ay + JOINT_OFFSETS[j].1 * aud_h,
                    c: 0.85,
                };
            }
            let audience = PersonPose { joints };
            if audience_first {
                people.insert(0, audience);
            } else {
                people.push(audience);
            }
        }
        frames.push(people);
    }

    PoseSequence {
        clip_id: spec.clip_id(clip_index),
        fps: spec.fps,
        width: spec.width,
        height: spec.height,
        frames,
    }
}

fn smooth01(u: f64) -> f64 {
    0.5 - 0.5 * (std::f64::consts::PI * u.clamp(0.0, 1.0)).cos()
}

/// Multiplicative suppression factor at `dt` frames relative to an event.
fn event_factor(dt_frames: f64, fps: f64, depth: f64, rebound: f64) -> f64 {
    let dt = dt_frames / fps; // seconds
    if !(RAMP_START_S..REBOUND_END_S).contains(&dt) {
        1.0
    } else if dt < DIP_MIN_S {
        1.0 - depth * smooth01((dt - RAMP_START_S) / (DIP_MIN_S - RAMP_START_S))
    } else if dt < RECOVERY_S {
        let floor = 1.0 - depth;
        floor + (1.0 + rebound - floor) * smooth01((dt - DIP_MIN_S) / (RECOVERY_S - DIP_MIN_S))
    } else {
        1.0 + rebound * (1.0 - smooth01((dt - RECOVERY_S) / (REBOUND_END_S - RECOVERY_S)))
    }
}

/// The latent per-frame blink-onset probability: a flat baseline of
/// `baseline_blinks_per_min / (60 · fps)` modulated by a multiplicative dip
/// around each event.
pub fn gen_latent_blink_curve(spec: &SynthSpec, event_frames: &[usize], n_frames: usize) -> Vec<f64> {
    let p0 = spec.baseline_blinks_per_min / (60.0 * spec.fps);
    (0..n_frames)
        .map(|f| {
            let mut factor = 1.0;
            for &e in event_frames {
                factor *= event_factor(f as f64 - e as f64, spec.fps, spec.suppression_depth, spec.rebound_frac);
            }
            (p0 * factor).clamp(0.0, 1.0)
        })
        .collect()
}

/// Sample blink onset times from the latent curve: one independent Bernoulli
/// draw per frame, a refractory gap after each onset, and no onset so close
/// to the end that its artifact cannot render fully.
pub fn sample_onsets(rng: &mut ChaCha8Rng, latent: &[f64], spec: &SynthSpec) -> Vec<f64> {
    let refractory = (ONSET_REFRACTORY_S * spec.fps).ceil() as usize;
    let guard_frames = ((ARTIFACT_DIP_DELAY_S + 0.1) * spec.fps).ceil() as usize;
    let last_ok = latent.len().saturating_sub(guard_frames);
    let mut onsets = Vec::new();
    let mut blocked_until = 0usize;
    for (f, &p) in latent.iter().enumerate() {
        let draw = uniform_f64(rng); // always consume, keeps streams aligned
        if f < blocked_until || f >= last_ok {
            continue;
        }
        if draw < p {
            onsets.push((f as f64 + 0.5) / spec.fps);
            blocked_until = f + refractory;
        }
    }
    onsets
}

/// Render onsets into a pupil trace: slow baseline wander plus noise, with a
/// spike-plateau-drop artifact per onset and occasional short invalid runs
/// kept clear of the artifacts.
pub fn render_trace(rng: &mut ChaCha8Rng, onsets: &[f64], spec: &SynthSpec) -> Vec<Option<f64>> {
    let n = spec.n_samples();
    let rate = spec.pupil_sample_rate;
    let phase1 = uniform_range(rng, 0.0, std::f64::consts::TAU);
    let phase2 = uniform_range(rng, 0.0, std::f64::consts::TAU);

    // slow wander kept small next to the artifact amplitude, so artifacts
    // stay ≥ 6 trace-sd even with the wander included
    let mut samples: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            4.0 + 0.035 * (std::f64::consts::TAU * 0.05 * t + phase1).sin()
                + 0.02 * (std::f64::consts::TAU * 0.013 * t + phase2).sin()
                + spec.pupil_noise * normal(rng)
        })
        .collect();

    let amp = spec.artifact_amp_mult * spec.pupil_noise;
    let dip_delay = (ARTIFACT_DIP_DELAY_S * rate).round() as usize;
    for &onset in onsets {
        let s0 = (onset * rate).round() as usize;
        if s0 == 0 || s0 + dip_delay >= n {
            continue; // sample_onsets keeps these out already
        }
        for v in samples[s0..s0 + dip_delay].iter_mut() {
            *v += amp;
        }
    }

    let mut out: Vec<Option<f64>> = samples.into_iter().map(Some).collect();
    // short invalid runs away from any artifact
    let clear_of_artifacts = |i: usize| {
        let guard = rate as usize;
        onsets.iter().all(|&o| {
            let s0 = (o * rate).round() as usize;
            i + guard < s0 || i > s0 + dip_delay + guard
        })
    };
    let mut i = 0;
    while i < n {
        let draw = uniform_f64(rng);
        if draw < spec.invalid_run_rate && clear_of_artifacts(i) {
            let run = 3 + uniform_usize(rng, 6);
            for slot in out.iter_mut().skip(i).take(run) {
                *slot = None;
            }
            i += run + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Generate all pupil traces (and the true onsets) for one clip.
pub fn gen_pupil_traces(
    spec: &SynthSpec,
    clip_index: usize,
    latent: &[f64],
) -> (Vec<PupilTrace>, BTreeMap<String, Vec<f64>>) {
    let clip_id = spec.clip_id(clip_index);
    let mut traces = Vec::with_capacity(spec.n_participants);
    let mut onsets_by_participant = BTreeMap::new();
    for p in 0..spec.n_participants {
        let participant_id = format!("p{p:02}");
        let mut rng = seed_rng(derive_seed(
            spec.master_seed,
            &[STREAM_PUPIL, clip_index as u64, p as u64],
        ));
        let onsets = sample_onsets(&mut rng, latent, spec);
        let samples = render_trace(&mut rng, &onsets, spec);
        traces.push(PupilTrace {
            participant_id: participant_id.clone(),
            clip_id: clip_id.clone(),
            sample_rate: spec.pupil_sample_rate,
            samples,
        });
        onsets_by_participant.insert(participant_id, onsets);
    }
    (traces, onsets_by_participant)
}

/// Generate one full clip: pose, traces, and ground truth.
pub fn gen_clip(spec: &SynthSpec, clip_index: usize) -> SynthClip {
    let event_frames = sample_event_frames(spec, clip_index);
    let pose = gen_pose(spec, clip_index, &event_frames);
    let latent = gen_latent_blink_curve(spec, &event_frames, spec.n_frames());
    let (traces, onsets) = gen_pupil_traces(spec, clip_index, &latent);
    SynthClip {
        pose,
        traces,
        truth: ClipTruth {
            clip_id: spec.clip_id(clip_index),
            event_frames,
            latent,
            onsets,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blink::{detect_blinks, BlinkParams};

    fn small_spec() -> SynthSpec {
        SynthSpec {
            clip_count: 1,
            duration_s: 30.0,
            n_participants: 4,
            events_min: 2,
            events_max: 3,
            event_margin_s: 4.0,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = small_spec();
        let a = gen_clip(&spec, 0);
        let b = gen_clip(&spec, 0);
        assert_eq!(a.pose, b.pose);
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.traces.len(), b.traces.len());
        for (x, y) in a.traces.iter().zip(&b.traces) {
            assert_eq!(x, y);
        }
        let c = gen_clip(&spec, 1);
        assert_ne!(a.pose, c.pose);
    }

    #[test]
    fn no_events_means_constant_latent() {
        let spec = SynthSpec {
            events_min: 0,
            events_max: 0,
            ..small_spec()
        };
        let latent = gen_latent_blink_curve(&spec, &[], spec.n_frames());
        let p0 = spec.baseline_blinks_per_min / (60.0 * spec.fps);
        assert!(latent.iter().all(|&v| (v - p0).abs() < 1e-15));
    }

    #[test]
    fn full_depth_reaches_zero_at_dip() {
        let spec = SynthSpec {
            suppression_depth: 1.0,
            ..small_spec()
        };
        let event = 300usize;
        let latent = gen_latent_blink_curve(&spec, &[event], spec.n_frames());
        let min = latent.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(min.abs() < 1e-15);
    }

    #[test]
    fn latent_minimum_within_half_second_after_event() {
        let spec = small_spec();
        let event = 400usize;
        let latent = gen_latent_blink_curve(&spec, &[event], spec.n_frames());
        let argmin = latent
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!(
            argmin >= event && argmin <= event + (0.5 * spec.fps) as usize,
            "dip minimum at {argmin}, event at {event}"
        );
    }

    #[test]
    fn event_burst_dominates_baseline_hip_motion() {
        let spec = SynthSpec {
            absent_frame_rate: 0.0,
            audience_person: false, // frames[f][0] is always the skater
            ..small_spec()
        };
        let quiet = gen_pose(&spec, 0, &[]);
        let event = 300usize;
        let active = gen_pose(&spec, 0, &[event]);

        // hip y (joint 8) baseline sd from the event-free run
        let hip_y: Vec<f64> = quiet.frames.iter().map(|f| f[0].joints[8].y).collect();
        let mean = hip_y.iter().sum::<f64>() / hip_y.len() as f64;
        let sd = (hip_y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / hip_y.len() as f64)
            .sqrt();

        let max_dev = (event - 10..=event + 10)
            .map(|f| (active.frames[f][0].joints[8].y - quiet.frames[f][0].joints[8].y).abs())
            .fold(0.0, f64::max);
        assert!(
            max_dev > 3.0 * sd,
            "burst deviation {max_dev:.1} px vs 3×sd {:.1} px",
            3.0 * sd
        );
    }

    #[test]
    fn zero_latent_means_no_blinks_and_smooth_traces() {
        let spec = small_spec();
        let latent = vec![0.0; spec.n_frames()];
        let (traces, onsets) = gen_pupil_traces(&spec, 0, &latent);
        assert!(onsets.values().all(|v| v.is_empty()));
        // no artifact anywhere: every difference stays far below the
        // amplitude a rendered blink would inject
        let amp = spec.artifact_amp_mult * spec.pupil_noise;
        for t in &traces {
            let max_diff = t
                .samples
                .windows(2)
                .filter_map(|w| match (w[0], w[1]) {
                    (Some(a), Some(b)) => Some((b - a).abs()),
                    _ => None,
                })
                .fold(0.0, f64::max);
            assert!(max_diff < amp / 2.0, "diff {max_diff} suggests an artifact");
        }
    }

    #[test]
    fn detector_recovers_planted_onsets() {
        // enough onsets that the F1 estimate is stable; the acceptance
        // suite runs the larger two-clip version of this check
        let spec = SynthSpec {
            duration_s: 40.0,
            n_participants: 8,
            ..small_spec()
        };
        let clip = gen_clip(&spec, 0);
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        let tol = 1.0 / spec.pupil_sample_rate + 1e-9;
        for trace in &clip.traces {
            let truth = &clip.truth.onsets[&trace.participant_id];
            let detected = detect_blinks(trace, &BlinkParams::default()).unwrap();
            let mut matched = vec![false; truth.len()];
            for ev in &detected {
                match truth
                    .iter()
                    .enumerate()
                    .filter(|(i, t)| !matched[*i] && (ev.onset_time - **t).abs() <= tol)
                    .min_by(|a, b| {
                        (ev.onset_time - a.1).abs().partial_cmp(&(ev.onset_time - b.1).abs()).unwrap()
                    }) {
                    Some((i, _)) => {
                        matched[i] = true;
                        tp += 1;
                    }
                    None => fp += 1,
                }
            }
            fn_ += matched.iter().filter(|m| !**m).count();
        }
        let precision = tp as f64 / (tp + fp).max(1) as f64;
        let recall = tp as f64 / (tp + fn_).max(1) as f64;
        let f1 = 2.0 * precision * recall / (precision + recall).max(1e-12);
        assert!(f1 >= 0.95, "F1 {f1:.3} (P {precision:.3} R {recall:.3})");
    }

    #[test]
    fn empirical_onset_fraction_approaches_latent() {
        let base = SynthSpec {
            duration_s: 30.0,
            events_min: 2,
            events_max: 2,
            ..SynthSpec::default()
        };
        let events = sample_event_frames(&base, 0);
        let latent = gen_latent_blink_curve(&base, &events, base.n_frames());

        let max_dev = |n_participants: usize| -> f64 {
            let spec = SynthSpec {
                n_participants,
                ..base.clone()
            };
            let mut counts = vec![0usize; spec.n_frames()];
            for p in 0..n_participants {
                let mut rng = seed_rng(derive_seed(spec.master_seed, &[STREAM_PUPIL, 0, p as u64]));
                for onset in sample_onsets(&mut rng, &latent, &spec) {
                    counts[(onset * spec.fps).floor() as usize] += 1;
                }
            }
            counts
                .iter()
                .zip(&latent)
                .map(|(&c, &l)| (c as f64 / n_participants as f64 - l).abs())
                .fold(0.0, f64::max)
        };

        let dev_small = max_dev(50);
        let dev_large = max_dev(200);
        assert!(
            dev_large < dev_small,
            "max deviation should shrink: n=50 → {dev_small:.4}, n=200 → {dev_large:.4}"
        );
        assert!(dev_large < 0.05, "n=200 deviation {dev_large:.4}");
    }

    #[test]
    fn generated_pose_satisfies_parser_invariants() {
        let spec = small_spec();
        let pose = gen_pose(&spec, 0, &sample_event_frames(&spec, 0));
        assert_eq!(pose.frames.len(), spec.n_frames());
        for frame in &pose.frames {
            for person in frame {
                for j in &person.joints {
                    assert!(j.x.is_finite() && j.y.is_finite());
                    assert!((0.0..=1.0).contains(&j.c));
                }
            }
        }
    }
}

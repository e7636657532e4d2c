//! On-disk corpus layout shared by the generator and the ingestion stages.
//!
//! ```text
//! <corpus>/<clip_id>/
//!   clip.json                             id, fps, width, height
//!   keypoints/frame_000000_keypoints.json one document per frame
//!   pupil/p00.csv                         time_s,diameter per participant
//!   events.json                           jump event frame indices
//!   truth/latent.csv                      generator ground truth (oracle)
//!   truth/onsets.csv
//! ```
//!
//! Synthetic and real corpora are interchangeable: a real corpus simply has
//! no `truth/` directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::blink::{read_pupil_csv, write_pupil_csv, PupilTrace};
use crate::pose::{
    frame_index_from_name, parse_keypoints, write_keypoint_frame, ClipMeta, PoseSequence,
};
use crate::synth::{gen_clip, ClipTruth, SynthClip, SynthSpec};
use crate::{Error, Result};

/// A clip read back from disk.
#[derive(Debug, Clone)]
pub struct LoadedClip {
    pub pose: PoseSequence,
    pub traces: Vec<PupilTrace>,
    pub event_frames: Vec<usize>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Write one generated clip into `<dir>/<clip_id>/`.
pub fn write_clip(dir: &Path, clip: &SynthClip) -> Result<PathBuf> {
    let clip_dir = dir.join(&clip.pose.clip_id);
    let kp_dir = clip_dir.join("keypoints");
    let pupil_dir = clip_dir.join("pupil");
    let truth_dir = clip_dir.join("truth");
    for d in [&clip_dir, &kp_dir, &pupil_dir, &truth_dir] {
        fs::create_dir_all(d).map_err(|e| Error::io(d.clone(), e))?;
    }

    let meta = ClipMeta {
        id: clip.pose.clip_id.clone(),
        fps: clip.pose.fps,
        width: clip.pose.width,
        height: clip.pose.height,
    };
    write_file(
        &clip_dir.join("clip.json"),
        &serde_json::to_vec_pretty(&meta).expect("meta serializes"),
    )?;

    for (f, people) in clip.pose.frames.iter().enumerate() {
        let path = kp_dir.join(format!("frame_{f:06}_keypoints.json"));
        write_file(&path, &write_keypoint_frame(people))?;
    }

    for trace in &clip.traces {
        let path = pupil_dir.join(format!("{}.csv", trace.participant_id));
        write_file(&path, write_pupil_csv(trace).as_bytes())?;
    }

    write_file(
        &clip_dir.join("events.json"),
        &serde_json::to_vec(&clip.truth.event_frames).expect("events serialize"),
    )?;

    let mut latent = String::from("frame,probability\n");
    for (f, p) in clip.truth.latent.iter().enumerate() {
        latent.push_str(&format!("{f},{p}\n"));
    }
    write_file(&truth_dir.join("latent.csv"), latent.as_bytes())?;

    let mut onsets = String::from("participant_id,onset_s\n");
    for (pid, times) in &clip.truth.onsets {
        for t in times {
            onsets.push_str(&format!("{pid},{t}\n"));
        }
    }
    write_file(&truth_dir.join("onsets.csv"), onsets.as_bytes())?;

    Ok(clip_dir)
}

/// Generate and write the whole corpus; returns the clip ids in order.
pub fn write_corpus(spec: &SynthSpec, dir: &Path) -> Result<Vec<String>> {
    spec.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut ids = Vec::with_capacity(spec.clip_count);
    for i in 0..spec.clip_count {
        let clip = gen_clip(spec, i);
        ids.push(clip.pose.clip_id.clone());
        write_clip(dir, &clip)?;
    }
    Ok(ids)
}

/// Clip directories under a corpus root, sorted by clip id.
pub fn list_clip_dirs(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() && path.join("clip.json").is_file() {
            let id = entry.file_name().to_string_lossy().into_owned();
            out.push((id, path));
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::invalid(
            "corpus",
            format!("no clip directories under {}", dir.display()),
        ));
    }
    Ok(out)
}

/// Read the pose sequence of one clip directory: metadata sidecar plus all
/// keypoint documents ordered by their filename frame index.
pub fn load_pose(clip_dir: &Path) -> Result<PoseSequence> {
    let meta: ClipMeta = serde_json::from_str(&read_to_string(&clip_dir.join("clip.json"))?)
        .map_err(|e| Error::invalid("clip.json", e.to_string()))?;

    let kp_dir = clip_dir.join("keypoints");
    let mut frames: Vec<(usize, String, PathBuf)> = Vec::new();
    let entries = fs::read_dir(&kp_dir).map_err(|e| Error::io(&kp_dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(&kp_dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(idx) = frame_index_from_name(&name) {
            frames.push((idx, name, entry.path()));
        }
    }
    frames.sort();
    let mut docs = Vec::with_capacity(frames.len());
    for (_, name, path) in frames {
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        docs.push((name, bytes));
    }
    parse_keypoints(&docs, &meta)
}

/// Read every pupil trace of one clip directory.
pub fn load_traces(clip_dir: &Path, clip_id: &str) -> Result<Vec<PupilTrace>> {
    let pupil_dir = clip_dir.join("pupil");
    let mut files: Vec<(String, PathBuf)> = Vec::new();
    let entries = fs::read_dir(&pupil_dir).map_err(|e| Error::io(&pupil_dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(&pupil_dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(pid) = name.strip_suffix(".csv") {
            files.push((pid.to_string(), entry.path()));
        }
    }
    files.sort();
    let mut traces = Vec::with_capacity(files.len());
    for (pid, path) in files {
        let text = read_to_string(&path)?;
        traces.push(read_pupil_csv(
            &text,
            &path.to_string_lossy(),
            &pid,
            clip_id,
        )?);
    }
    Ok(traces)
}

/// Read the jump event frames of one clip directory (empty when absent).
pub fn load_events(clip_dir: &Path) -> Result<Vec<usize>> {
    let path = clip_dir.join("events.json");
    if !path.is_file() {
        return Ok(Vec::new());
    }
    serde_json::from_str(&read_to_string(&path)?)
        .map_err(|e| Error::invalid("events.json", e.to_string()))
}

/// Read one clip directory end to end.
pub fn load_clip(clip_dir: &Path) -> Result<LoadedClip> {
    let pose = load_pose(clip_dir)?;
    let traces = load_traces(clip_dir, &pose.clip_id)?;
    let event_frames = load_events(clip_dir)?;
    Ok(LoadedClip {
        pose,
        traces,
        event_frames,
    })
}

/// Read the generator ground truth of one clip directory.
pub fn load_truth(clip_dir: &Path, clip_id: &str) -> Result<ClipTruth> {
    let latent_text = read_to_string(&clip_dir.join("truth/latent.csv"))?;
    let mut latent = Vec::new();
    for (i, line) in latent_text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let (_, p) = line
            .split_once(',')
            .ok_or_else(|| Error::invalid("latent.csv", format!("line {}", i + 1)))?;
        latent.push(
            p.parse()
                .map_err(|_| Error::invalid("latent.csv", format!("line {}", i + 1)))?,
        );
    }

    let onset_text = read_to_string(&clip_dir.join("truth/onsets.csv"))?;
    let mut onsets: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (i, line) in onset_text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let (pid, t) = line
            .split_once(',')
            .ok_or_else(|| Error::invalid("onsets.csv", format!("line {}", i + 1)))?;
        onsets.entry(pid.to_string()).or_default().push(
            t.parse()
                .map_err(|_| Error::invalid("onsets.csv", format!("line {}", i + 1)))?,
        );
    }

    let event_frames = load_events(clip_dir)?;
    Ok(ClipTruth {
        clip_id: clip_id.to_string(),
        event_frames,
        latent,
        onsets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("blk-corpus-{tag}-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn corpus_roundtrip_through_real_parsers() {
        let dir = temp_dir("rt");
        let spec = SynthSpec {
            clip_count: 1,
            duration_s: 8.0,
            n_participants: 2,
            events_min: 1,
            events_max: 1,
            event_margin_s: 2.0,
            ..SynthSpec::default()
        };
        let clip = gen_clip(&spec, 0);
        write_clip(&dir, &clip).unwrap();

        let clip_dir = dir.join(&clip.pose.clip_id);
        let loaded = load_clip(&clip_dir).unwrap();
        assert_eq!(loaded.pose, clip.pose);
        assert_eq!(loaded.event_frames, clip.truth.event_frames);
        assert_eq!(loaded.traces.len(), clip.traces.len());
        for (a, b) in loaded.traces.iter().zip(&clip.traces) {
            assert_eq!(a.participant_id, b.participant_id);
            assert_eq!(a.samples, b.samples);
        }

        let truth = load_truth(&clip_dir, &clip.pose.clip_id).unwrap();
        assert_eq!(truth.event_frames, clip.truth.event_frames);
        assert_eq!(truth.latent, clip.truth.latent);
        assert_eq!(truth.onsets, clip.truth.onsets);

        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn write_corpus_is_deterministic() {
        let spec = SynthSpec {
            clip_count: 2,
            duration_s: 5.0,
            n_participants: 2,
            events_min: 0,
            events_max: 1,
            event_margin_s: 1.5,
            ..SynthSpec::default()
        };
        let d1 = temp_dir("det1");
        let d2 = temp_dir("det2");
        let ids1 = write_corpus(&spec, &d1).unwrap();
        let ids2 = write_corpus(&spec, &d2).unwrap();
        assert_eq!(ids1, ids2);

        for (id, _) in list_clip_dirs(&d1).unwrap() {
            let f1 = d1.join(&id).join("keypoints/frame_000000_keypoints.json");
            let f2 = d2.join(&id).join("keypoints/frame_000000_keypoints.json");
            assert_eq!(fs::read(f1).unwrap(), fs::read(f2).unwrap());
            let p1 = d1.join(&id).join("pupil/p00.csv");
            let p2 = d2.join(&id).join("pupil/p00.csv");
            assert_eq!(fs::read(p1).unwrap(), fs::read(p2).unwrap());
        }

        fs::remove_dir_all(&d1).ok();
        fs::remove_dir_all(&d2).ok();
    }
}

//! Keypoint ingestion: parse per-frame pose documents, select the principal
//! (largest) person, mask low-confidence joints, interpolate gaps, and
//! normalize into a dense frame × channel matrix.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of joints per person (COCO-18 layout).
pub const N_JOINTS: usize = 18;
/// Channels per frame: interleaved (x_0, y_0, ..., x_17, y_17).
pub const N_CHANNELS: usize = 2 * N_JOINTS;
/// Default confidence threshold below which a joint is treated as missing.
pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.7;
/// Normalized coordinates are clamped to this range; slightly out-of-frame
/// detections survive without unbounded values.
pub const CLAMP_RANGE: (f64, f64) = (-0.1, 1.1);

/// One detected joint: image-space position plus estimator confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub x: f64,
    pub y: f64,
    pub c: f64,
}

/// One person in one frame: exactly 18 joints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonPose {
    pub joints: [Joint; N_JOINTS],
}

/// Raw per-frame, per-person keypoints for one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    pub clip_id: String,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    /// One entry per video frame; a frame may contain zero or more people.
    pub frames: Vec<Vec<PersonPose>>,
}

/// Clip metadata sidecar stored next to the keypoint files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipMeta {
    pub id: String,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
}

/// Dense normalized joint matrix: `n_frames` rows × 36 channels, channel
/// `2j` = x of joint `j` / width, channel `2j + 1` = y of joint `j` / height.
#[derive(Debug, Clone, PartialEq)]
pub struct JointMatrix {
    pub clip_id: String,
    pub n_frames: usize,
    /// Row-major `n_frames × 36`.
    pub values: Vec<f64>,
}

impl JointMatrix {
    pub fn row(&self, frame: usize) -> &[f64] {
        &self.values[frame * N_CHANNELS..(frame + 1) * N_CHANNELS]
    }
}

// On-disk keypoint document: top-level "people" array, each person a flat
// array of 54 numbers (x0, y0, c0, ..., x17, y17, c17).
#[derive(Serialize, Deserialize)]
struct KeypointDoc {
    people: Vec<KeypointPerson>,
}

#[derive(Serialize, Deserialize)]
struct KeypointPerson {
    pose_keypoints_2d: Vec<f64>,
}

/// Parse ordered per-frame keypoint documents into a [`PoseSequence`].
///
/// `frames` must be ordered by frame index; each element is the raw bytes of
/// one document plus a name used in error messages.
pub fn parse_keypoints(frames: &[(String, Vec<u8>)], meta: &ClipMeta) -> Result<PoseSequence> {
    if meta.fps <= 0.0 || meta.width == 0 || meta.height == 0 {
        return Err(Error::invalid(
            "clip metadata",
            format!(
                "fps, width, height must be positive (got {}, {}, {})",
                meta.fps, meta.width, meta.height
            ),
        ));
    }
    if frames.is_empty() {
        return Err(Error::invalid("keypoint input", "no frame files"));
    }

    let mut out = Vec::with_capacity(frames.len());
    for (name, bytes) in frames {
        out.push(parse_keypoint_frame(name, bytes)?);
    }
    Ok(PoseSequence {
        clip_id: meta.id.clone(),
        fps: meta.fps,
        width: meta.width,
        height: meta.height,
        frames: out,
    })
}

/// Parse a single keypoint document into the people present in that frame.
pub fn parse_keypoint_frame(name: &str, bytes: &[u8]) -> Result<Vec<PersonPose>> {
    let doc: KeypointDoc = serde_json::from_slice(bytes).map_err(|e| Error::KeypointParse {
        file: name.to_string(),
        offset: byte_offset(bytes, e.line(), e.column()),
        detail: e.to_string(),
    })?;

    let mut people = Vec::with_capacity(doc.people.len());
    for (pi, person) in doc.people.iter().enumerate() {
        let nums = &person.pose_keypoints_2d;
        if nums.len() != 3 * N_JOINTS {
            return Err(Error::KeypointSchema {
                file: name.to_string(),
                person: pi,
                count: nums.len(),
            });
        }
        let mut joints = [Joint {
            x: 0.0,
            y: 0.0,
            c: 0.0,
        }; N_JOINTS];
        for (j, joint) in joints.iter_mut().enumerate() {
            joint.x = nums[3 * j];
            joint.y = nums[3 * j + 1];
            joint.c = nums[3 * j + 2];
        }
        people.push(PersonPose { joints });
    }
    Ok(people)
}

/// Serialize one frame's people back into the on-disk document format.
pub fn write_keypoint_frame(people: &[PersonPose]) -> Vec<u8> {
    let doc = KeypointDoc {
        people: people
            .iter()
            .map(|p| KeypointPerson {
                pose_keypoints_2d: p
                    .joints
                    .iter()
                    .flat_map(|j| [j.x, j.y, j.c])
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_vec(&doc).expect("keypoint doc serializes")
}

/// Extract the frame index from a zero-padded numeric filename suffix, e.g.
/// `frame_000123_keypoints.json` → 123. The last run of digits wins.
pub fn frame_index_from_name(name: &str) -> Option<usize> {
    let stem = name.strip_suffix(".json").unwrap_or(name);
    let mut best: Option<&str> = None;
    let mut start = None;
    for (i, ch) in stem.char_indices() {
        if ch.is_ascii_digit() {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            best = Some(&stem[s..i]);
        }
    }
    if let Some(s) = start {
        best = Some(&stem[s..]);
    }
    best.and_then(|d| d.parse().ok())
}

// serde_json reports 1-based line/column; map that back to a byte offset.
fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut cur_line = 1;
    let mut line_start = 0;
    for (i, &b) in bytes.iter().enumerate() {
        if cur_line == line {
            line_start = i;
            break;
        }
        if b == b'\n' {
            cur_line += 1;
            line_start = i + 1;
        }
    }
    (line_start + column.saturating_sub(1)).min(bytes.len())
}

/// Principal-person rule: the person with the largest axis-aligned bounding
/// box over joints with confidence > 0. Ties break to the lower index.
/// Returns `None` when the frame is empty or nobody has at least two
/// confident joints.
pub fn select_principal_person(frame: &[PersonPose]) -> Option<&PersonPose> {
    let mut best: Option<(usize, f64)> = None;
    for (i, person) in frame.iter().enumerate() {
        if let Some(area) = bbox_area(person) {
            match best {
                Some((_, a)) if area <= a => {}
                _ => best = Some((i, area)),
            }
        }
    }
    best.map(|(i, _)| &frame[i])
}

/// Bounding-box area over joints with c > 0; `None` with fewer than two
/// confident joints.
pub fn bbox_area(person: &PersonPose) -> Option<f64> {
    let mut n = 0;
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for j in &person.joints {
        if j.c > 0.0 {
            n += 1;
            min_x = min_x.min(j.x);
            max_x = max_x.max(j.x);
            min_y = min_y.min(j.y);
            max_y = max_y.max(j.y);
        }
    }
    (n >= 2).then_some((max_x - min_x) * (max_y - min_y))
}

/// One person's joints with low-confidence entries masked out.
/// `None` = missing.
pub type MaskedPose = [Option<(f64, f64)>; N_JOINTS];

/// Mask joints whose confidence is strictly below `threshold`.
pub fn mask_low_confidence(person: &PersonPose, threshold: f64) -> MaskedPose {
    let mut out: MaskedPose = [None; N_JOINTS];
    for (slot, j) in out.iter_mut().zip(&person.joints) {
        if j.c >= threshold {
            *slot = Some((j.x, j.y));
        }
    }
    out
}

/// Fill missing values in a scalar time series: interior gaps by linear
/// interpolation between the nearest valid neighbors, leading/trailing gaps
/// by constant extension. Returns `None` when nothing is valid.
pub fn interpolate_series(values: &[Option<f64>]) -> Option<Vec<f64>> {
    let n = values.len();
    let first_valid = values.iter().position(|v| v.is_some())?;
    let last_valid = values.iter().rposition(|v| v.is_some()).unwrap();

    let mut out = vec![0.0; n];
    for i in 0..first_valid {
        out[i] = values[first_valid].unwrap();
    }
    for i in last_valid + 1..n {
        out[i] = values[last_valid].unwrap();
    }

    let mut i = first_valid;
    while i <= last_valid {
        match values[i] {
            Some(v) => {
                out[i] = v;
                i += 1;
            }
            None => {
                // gap strictly inside (first_valid, last_valid)
                let left = i - 1;
                let mut right = i;
                while values[right].is_none() {
                    right += 1;
                }
                let (lv, rv) = (values[left].unwrap(), values[right].unwrap());
                let span = (right - left) as f64;
                for k in i..right {
                    let t = (k - left) as f64 / span;
                    out[k] = lv + (rv - lv) * t;
                }
                i = right;
            }
        }
    }
    Some(out)
}

/// Per-frame masked poses for a whole clip, after principal-person selection.
/// An absent frame (no usable person) is all-missing.
#[derive(Debug, Clone)]
pub struct MaskedSequence {
    pub clip_id: String,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    pub frames: Vec<MaskedPose>,
}

/// Select the principal person per frame and mask low-confidence joints.
/// Frames with no usable person become all-missing and are later filled by
/// interpolation, keeping the time axis dense.
pub fn select_and_mask(seq: &PoseSequence, confidence_threshold: f64) -> MaskedSequence {
    let frames = seq
        .frames
        .iter()
        .map(|frame| match select_principal_person(frame) {
            Some(p) => mask_low_confidence(p, confidence_threshold),
            None => [None; N_JOINTS],
        })
        .collect();
    MaskedSequence {
        clip_id: seq.clip_id.clone(),
        fps: seq.fps,
        width: seq.width,
        height: seq.height,
        frames,
    }
}

/// Pixel-space joint tracks with every gap filled.
#[derive(Debug, Clone)]
pub struct FilledSequence {
    pub clip_id: String,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    /// `[frame][joint] = (x, y)` in pixels.
    pub frames: Vec<[(f64, f64); N_JOINTS]>,
}

/// Fill every missing joint observation.
///
/// Each joint's x and y tracks are interpolated independently across time.
/// A joint missing for the entire clip falls back to the clip-wide mean of
/// all valid joints' coordinates. A clip with zero valid observations
/// anywhere is unusable.
pub fn interpolate_missing(seq: &MaskedSequence) -> Result<FilledSequence> {
    let n = seq.frames.len();

    let mut sum_x = 0.0;
    let mut sum_y = 0.0;
    let mut count = 0usize;
    for frame in &seq.frames {
        for joint in frame.iter().flatten() {
            sum_x += joint.0;
            sum_y += joint.1;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::UnusableClip {
            clip_id: seq.clip_id.clone(),
        });
    }
    let fallback = (sum_x / count as f64, sum_y / count as f64);

    let mut frames = vec![[(0.0, 0.0); N_JOINTS]; n];
    for j in 0..N_JOINTS {
        let xs: Vec<Option<f64>> = seq.frames.iter().map(|f| f[j].map(|p| p.0)).collect();
        let ys: Vec<Option<f64>> = seq.frames.iter().map(|f| f[j].map(|p| p.1)).collect();
        let xs = interpolate_series(&xs).unwrap_or_else(|| vec![fallback.0; n]);
        let ys = interpolate_series(&ys).unwrap_or_else(|| vec![fallback.1; n]);
        for t in 0..n {
            frames[t][j] = (xs[t], ys[t]);
        }
    }

    Ok(FilledSequence {
        clip_id: seq.clip_id.clone(),
        fps: seq.fps,
        width: seq.width,
        height: seq.height,
        frames,
    })
}

/// Scale x by 1/width and y by 1/height, clamp to [-0.1, 1.1], and interleave
/// channels as (x_0, y_0, ..., x_17, y_17).
pub fn normalize(seq: &FilledSequence) -> JointMatrix {
    let (lo, hi) = CLAMP_RANGE;
    let (w, h) = (seq.width as f64, seq.height as f64);
    let mut values = Vec::with_capacity(seq.frames.len() * N_CHANNELS);
    for frame in &seq.frames {
        for &(x, y) in frame {
            values.push((x / w).clamp(lo, hi));
            values.push((y / h).clamp(lo, hi));
        }
    }
    JointMatrix {
        clip_id: seq.clip_id.clone(),
        n_frames: seq.frames.len(),
        values,
    }
}

/// Full ingestion: principal-person selection, confidence masking, gap
/// interpolation, normalization.
pub fn ingest(seq: &PoseSequence, confidence_threshold: f64) -> Result<JointMatrix> {
    let masked = select_and_mask(seq, confidence_threshold);
    let filled = interpolate_missing(&masked)?;
    Ok(normalize(&filled))
}

const JOINTS_MAGIC: &[u8; 8] = b"BLKJMTX\0";
const JOINTS_VERSION: u32 = 1;

/// Serialize a joint matrix: magic, version, clip id, dimensions, then the
/// row-major values as little-endian f64.
pub fn write_joint_matrix<W: std::io::Write>(w: &mut W, m: &JointMatrix) -> std::io::Result<()> {
    w.write_all(JOINTS_MAGIC)?;
    w.write_all(&JOINTS_VERSION.to_le_bytes())?;
    let id = m.clip_id.as_bytes();
    w.write_all(&(id.len() as u32).to_le_bytes())?;
    w.write_all(id)?;
    w.write_all(&(m.n_frames as u64).to_le_bytes())?;
    for v in &m.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Parse a joint matrix written by [`write_joint_matrix`].
pub fn read_joint_matrix<R: std::io::Read>(r: &mut R, origin: &str) -> Result<JointMatrix> {
    let bad = |detail: &str| Error::invalid(format!("joint matrix {origin}"), detail.to_string());
    let mut take = |buf: &mut [u8]| -> Result<()> {
        r.read_exact(buf).map_err(|_| bad("truncated"))
    };
    let mut magic = [0u8; 8];
    take(&mut magic)?;
    if &magic != JOINTS_MAGIC {
        return Err(bad("bad magic bytes"));
    }
    let mut b4 = [0u8; 4];
    take(&mut b4)?;
    if u32::from_le_bytes(b4) != JOINTS_VERSION {
        return Err(bad("unsupported version"));
    }
    take(&mut b4)?;
    let id_len = u32::from_le_bytes(b4) as usize;
    let mut id = vec![0u8; id_len];
    take(&mut id)?;
    let clip_id = String::from_utf8(id).map_err(|_| bad("clip id not UTF-8"))?;
    let mut b8 = [0u8; 8];
    take(&mut b8)?;
    let n_frames = u64::from_le_bytes(b8) as usize;
    let mut values = vec![0.0; n_frames * N_CHANNELS];
    for v in &mut values {
        take(&mut b8)?;
        *v = f64::from_le_bytes(b8);
    }
    Ok(JointMatrix {
        clip_id,
        n_frames,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn person(joints: &[(f64, f64, f64)]) -> PersonPose {
        assert_eq!(joints.len(), N_JOINTS);
        let mut out = [Joint {
            x: 0.0,
            y: 0.0,
            c: 0.0,
        }; N_JOINTS];
        for (o, &(x, y, c)) in out.iter_mut().zip(joints) {
            *o = Joint { x, y, c };
        }
        PersonPose { joints: out }
    }

    fn grid_person(origin: (f64, f64), size: f64, c: f64) -> PersonPose {
        // 18 joints spread over a size × size box
        let joints: Vec<(f64, f64, f64)> = (0..N_JOINTS)
            .map(|j| {
                let fx = (j % 6) as f64 / 5.0;
                let fy = (j / 6) as f64 / 2.0;
                (origin.0 + fx * size, origin.1 + fy * size, c)
            })
            .collect();
        person(&joints)
    }

    fn doc_bytes(people: &[PersonPose]) -> Vec<u8> {
        write_keypoint_frame(people)
    }

    #[test]
    fn parse_two_people() {
        let people = vec![grid_person((0.0, 0.0), 10.0, 0.9), grid_person((50.0, 50.0), 20.0, 0.8)];
        let parsed = parse_keypoint_frame("f0.json", &doc_bytes(&people)).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed, people);
    }

    #[test]
    fn parse_empty_frame() {
        let parsed = parse_keypoint_frame("f0.json", br#"{"people": []}"#).unwrap();
        assert!(parsed.is_empty());
    }

    #[test]
    fn schema_error_on_17_joints() {
        let nums: Vec<f64> = vec![0.5; 51];
        let doc = format!(r#"{{"people": [{{"pose_keypoints_2d": {nums:?}}}]}}"#);
        let err = parse_keypoint_frame("f3.json", doc.as_bytes()).unwrap_err();
        match err {
            Error::KeypointSchema { file, person, count } => {
                assert_eq!(file, "f3.json");
                assert_eq!(person, 0);
                assert_eq!(count, 51);
            }
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn parse_error_reports_file_and_offset() {
        let bytes = b"{\"people\": [\n  {broken}";
        let err = parse_keypoint_frame("bad.json", bytes).unwrap_err();
        match err {
            Error::KeypointParse { file, offset, .. } => {
                assert_eq!(file, "bad.json");
                // offset points at the brace content on line 2
                assert!(offset > 12 && offset <= bytes.len(), "offset {offset}");
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn principal_person_picks_larger_area() {
        let small = grid_person((0.0, 0.0), 10.0, 0.9); // area 100
        let large = grid_person((100.0, 100.0), 20.0, 0.9); // area 400
        let frame = vec![small, large.clone()];
        assert_eq!(select_principal_person(&frame), Some(&frame[1]));
        assert_eq!(select_principal_person(&frame).unwrap(), &large);
    }

    #[test]
    fn principal_person_empty_frame_is_absent() {
        assert!(select_principal_person(&[]).is_none());
    }

    #[test]
    fn principal_person_tie_breaks_to_lower_index() {
        let a = grid_person((0.0, 0.0), 15.0, 0.9);
        let b = grid_person((500.0, 500.0), 15.0, 0.9);
        let frame = vec![a, b];
        let picked = select_principal_person(&frame).unwrap();
        assert!(std::ptr::eq(picked, &frame[0]));
    }

    #[test]
    fn principal_person_requires_two_confident_joints() {
        let mut p = grid_person((0.0, 0.0), 10.0, 0.0);
        p.joints[4].c = 0.5; // only one confident joint
        assert!(select_principal_person(std::slice::from_ref(&p)).is_none());
    }

    #[test]
    fn mask_threshold_is_strict_less_than() {
        let mut p = grid_person((0.0, 0.0), 10.0, 0.9);
        p.joints[3].c = 0.69;
        p.joints[5].c = 0.70;
        let masked = mask_low_confidence(&p, 0.7);
        assert!(masked[3].is_none());
        assert!(masked[5].is_some());
        assert_eq!(masked.iter().filter(|m| m.is_none()).count(), 1);
    }

    #[test]
    fn mask_keeps_all_above_threshold() {
        let p = grid_person((0.0, 0.0), 10.0, 0.9);
        let masked = mask_low_confidence(&p, 0.7);
        assert!(masked.iter().all(|m| m.is_some()));
    }

    #[test]
    fn interpolate_linear_midpoint() {
        let out = interpolate_series(&[Some(1.0), None, Some(3.0)]).unwrap();
        assert_eq!(out, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn interpolate_leading_extension() {
        let out = interpolate_series(&[None, None, Some(5.0)]).unwrap();
        assert_eq!(out, vec![5.0, 5.0, 5.0]);
    }

    #[test]
    fn interpolate_two_gap() {
        let out = interpolate_series(&[Some(1.0), None, None, Some(4.0)]).unwrap();
        assert_eq!(out, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn interpolate_all_missing_is_none() {
        assert!(interpolate_series(&[None, None]).is_none());
    }

    #[test]
    fn unusable_clip_errors() {
        let seq = MaskedSequence {
            clip_id: "empty".into(),
            fps: 30.0,
            width: 100,
            height: 100,
            frames: vec![[None; N_JOINTS]; 4],
        };
        assert!(matches!(
            interpolate_missing(&seq),
            Err(Error::UnusableClip { .. })
        ));
    }

    #[test]
    fn whole_missing_joint_uses_clip_mean() {
        let mut frames = vec![[Some((10.0, 20.0)); N_JOINTS]; 3];
        for f in &mut frames {
            f[7] = None; // joint 7 missing everywhere
        }
        let seq = MaskedSequence {
            clip_id: "c".into(),
            fps: 30.0,
            width: 100,
            height: 100,
            frames,
        };
        let filled = interpolate_missing(&seq).unwrap();
        for t in 0..3 {
            assert_eq!(filled.frames[t][7], (10.0, 20.0));
        }
    }

    #[test]
    fn normalize_scales_and_clamps() {
        let mut frames = vec![[(960.0, 1080.0); N_JOINTS]];
        frames[0][1] = (-300.0, 2500.0);
        let seq = FilledSequence {
            clip_id: "c".into(),
            fps: 30.0,
            width: 1920,
            height: 1080,
            frames,
        };
        let m = normalize(&seq);
        assert_eq!(m.row(0)[0], 0.5); // x = 960 / 1920
        assert_eq!(m.row(0)[1], 1.0); // y = 1080 / 1080
        assert_eq!(m.row(0)[2], -0.1); // clamped x
        assert_eq!(m.row(0)[3], 1.1); // clamped y
    }

    #[test]
    fn joint_matrix_roundtrip_bit_exact() {
        let m = JointMatrix {
            clip_id: "clipX".into(),
            n_frames: 3,
            values: (0..3 * N_CHANNELS).map(|i| i as f64 * 0.25 - 7.0).collect(),
        };
        let mut bytes = Vec::new();
        write_joint_matrix(&mut bytes, &m).unwrap();
        let back = read_joint_matrix(&mut bytes.as_slice(), "mem").unwrap();
        assert_eq!(back, m);
        bytes.truncate(bytes.len() - 1);
        assert!(read_joint_matrix(&mut bytes.as_slice(), "mem").is_err());
    }

    #[test]
    fn frame_index_parses_zero_padded_suffix() {
        assert_eq!(frame_index_from_name("frame_000123_keypoints.json"), Some(123));
        assert_eq!(frame_index_from_name("clip7/frame_000000_keypoints.json"), Some(0));
        assert_eq!(frame_index_from_name("no_digits.json"), None);
    }

    #[test]
    fn ingest_interpolates_absent_frames() {
        let p0 = grid_person((100.0, 100.0), 50.0, 0.9);
        let p2 = grid_person((200.0, 200.0), 50.0, 0.9);
        let seq = PoseSequence {
            clip_id: "c".into(),
            fps: 30.0,
            width: 1000,
            height: 1000,
            frames: vec![vec![p0], vec![], vec![p2]],
        };
        let m = ingest(&seq, 0.7).unwrap();
        assert_eq!(m.n_frames, 3);
        // absent middle frame is the average of its neighbors
        for ch in 0..N_CHANNELS {
            let expect = (m.row(0)[ch] + m.row(2)[ch]) / 2.0;
            assert!((m.row(1)[ch] - expect).abs() < 1e-12);
        }
    }

    mod props {
        use super::*;
        use crate::rng::{seed_rng, uniform_f64, uniform_range};
        use proptest::prelude::*;

        fn arb_frame(seed: u64, n_people: usize) -> Vec<PersonPose> {
            let mut rng = seed_rng(seed);
            (0..n_people)
                .map(|_| {
                    let joints: Vec<(f64, f64, f64)> = (0..N_JOINTS)
                        .map(|_| {
                            let c = if uniform_f64(&mut rng) < 0.3 {
                                0.0
                            } else {
                                uniform_range(&mut rng, 0.1, 1.0)
                            };
                            (
                                uniform_range(&mut rng, 0.0, 1920.0),
                                uniform_range(&mut rng, 0.0, 1080.0),
                                c,
                            )
                        })
                        .collect();
                    person(&joints)
                })
                .collect()
        }

        proptest! {
            #[test]
            fn principal_matches_brute_force(seed in 0u64..500, n_people in 0usize..6) {
                let frame = arb_frame(seed, n_people);
                let picked = select_principal_person(&frame);
                // brute-force scan
                let mut best: Option<(usize, f64)> = None;
                for (i, p) in frame.iter().enumerate() {
                    if let Some(a) = bbox_area(p) {
                        if best.is_none_or(|(_, ba)| a > ba) {
                            best = Some((i, a));
                        }
                    }
                }
                match (picked, best) {
                    (None, None) => {}
                    (Some(p), Some((i, _))) => prop_assert!(std::ptr::eq(p, &frame[i])),
                    other => prop_assert!(false, "mismatch: {other:?}"),
                }
            }

            #[test]
            fn interpolation_idempotent_and_complete(
                pattern in proptest::collection::vec(proptest::option::weighted(0.7, -100.0f64..100.0), 1..40)
            ) {
                if let Some(once) = interpolate_series(&pattern) {
                    prop_assert!(once.iter().all(|v| v.is_finite()));
                    let wrapped: Vec<Option<f64>> = once.iter().copied().map(Some).collect();
                    let twice = interpolate_series(&wrapped).unwrap();
                    prop_assert_eq!(once, twice);
                }
            }

            #[test]
            fn normalize_is_affine_per_channel(x in -500.0f64..2500.0, shift in -50.0f64..50.0) {
                // scaling commutes: normalize(x + shift) - normalize(x) == shift / width
                // whenever neither value hits the clamp
                let w = 1920.0;
                let a = (x / w).clamp(-0.1, 1.1);
                let b = ((x + shift) / w).clamp(-0.1, 1.1);
                if a > -0.1 && a < 1.1 && b > -0.1 && b < 1.1 {
                    prop_assert!((b - a - shift / w).abs() < 1e-12);
                }
            }

            #[test]
            fn parse_roundtrip(seed in 0u64..200, n_people in 0usize..4) {
                let frame = arb_frame(seed, n_people);
                let bytes = write_keypoint_frame(&frame);
                let parsed = parse_keypoint_frame("rt.json", &bytes).unwrap();
                prop_assert_eq!(parsed, frame);
            }
        }
    }
}

//! Sliding-window dataset construction and leave-one-out fold planning.

use std::io::{Read, Write};

use crate::blink::BlinkRateSeries;
use crate::pose::{JointMatrix, N_CHANNELS};
use crate::{Error, Result};

/// Default window length in frames (3 s at 30 FPS).
pub const DEFAULT_WINDOW: usize = 90;

/// One training sample: a `window × 36` slice of normalized joint channels
/// with the blink rate at its last frame as the target.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub clip_id: String,
    /// Frame index of the window's last row.
    pub end_frame: usize,
    /// Row-major `window × 36`.
    pub input: Vec<f64>,
    pub target: f64,
}

/// Leave-one-out fold plan: each clip is the test clip exactly once.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fold {
    pub train_clip_ids: Vec<String>,
    pub test_clip_id: String,
}

/// Slice a clip into window samples ending at frames
/// `{window-1, window-1+stride, ...}`.
///
/// Returns an empty list when the clip is shorter than the window.
pub fn build_windows(
    joints: &JointMatrix,
    rates: &BlinkRateSeries,
    window: usize,
    stride: usize,
) -> Result<Vec<WindowSample>> {
    if window == 0 || stride == 0 {
        return Err(Error::invalid("window config", "window and stride must be > 0"));
    }
    if joints.n_frames != rates.values.len() {
        return Err(Error::invalid(
            "window input",
            format!(
                "clip {}: joint matrix has {} frames but rate series has {}",
                joints.clip_id,
                joints.n_frames,
                rates.values.len()
            ),
        ));
    }
    if joints.n_frames < window {
        return Ok(Vec::new());
    }

    let mut samples = Vec::with_capacity((joints.n_frames - window) / stride + 1);
    let mut end = window - 1;
    while end < joints.n_frames {
        let start = end + 1 - window;
        samples.push(WindowSample {
            clip_id: joints.clip_id.clone(),
            end_frame: end,
            input: joints.values[start * N_CHANNELS..(end + 1) * N_CHANNELS].to_vec(),
            target: rates.values[end],
        });
        end += stride;
    }
    Ok(samples)
}

/// Build the leave-one-out fold plan over the given clips, in stable order.
pub fn loocv_splits(clip_ids: &[String]) -> Result<FoldPlan> {
    if clip_ids.len() < 2 {
        return Err(Error::TooFewClips(clip_ids.len()));
    }
    let folds = clip_ids
        .iter()
        .map(|test| Fold {
            train_clip_ids: clip_ids
                .iter()
                .filter(|id| *id != test)
                .cloned()
                .collect(),
            test_clip_id: test.clone(),
        })
        .collect();
    Ok(FoldPlan { folds })
}

// ---------------------------------------------------------------------------
// Serialized dataset container
// ---------------------------------------------------------------------------

const DATASET_MAGIC: &[u8; 8] = b"BLKDSET\0";
const DATASET_VERSION: u32 = 1;
/// Channel-layout tag baked into the container header.
pub const CHANNEL_ORDER_TAG: &str = "xy-interleaved-v1";

/// A windowed dataset with its construction parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub window: usize,
    pub stride: usize,
    pub samples: Vec<WindowSample>,
}

/// Write the binary dataset container.
pub fn write_dataset<W: Write>(w: &mut W, ds: &Dataset) -> std::io::Result<()> {
    w.write_all(DATASET_MAGIC)?;
    w.write_all(&DATASET_VERSION.to_le_bytes())?;
    w.write_all(&(ds.window as u32).to_le_bytes())?;
    w.write_all(&(ds.stride as u32).to_le_bytes())?;
    let tag = CHANNEL_ORDER_TAG.as_bytes();
    w.write_all(&(tag.len() as u32).to_le_bytes())?;
    w.write_all(tag)?;
    w.write_all(&(ds.samples.len() as u64).to_le_bytes())?;
    for s in &ds.samples {
        let id = s.clip_id.as_bytes();
        w.write_all(&(id.len() as u32).to_le_bytes())?;
        w.write_all(id)?;
        w.write_all(&(s.end_frame as u64).to_le_bytes())?;
        w.write_all(&s.target.to_le_bytes())?;
        debug_assert_eq!(s.input.len(), ds.window * N_CHANNELS);
        for v in &s.input {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Read a binary dataset container written by [`write_dataset`].
pub fn read_dataset<R: Read>(r: &mut R, origin: &str) -> Result<Dataset> {
    let bad = |detail: String| Error::invalid(format!("dataset {origin}"), detail);

    let mut magic = [0u8; 8];
    read_exact(r, &mut magic, origin)?;
    if &magic != DATASET_MAGIC {
        return Err(bad("bad magic bytes".into()));
    }
    let version = read_u32(r, origin)?;
    if version != DATASET_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let window = read_u32(r, origin)? as usize;
    let stride = read_u32(r, origin)? as usize;
    let tag_len = read_u32(r, origin)? as usize;
    let mut tag = vec![0u8; tag_len];
    read_exact(r, &mut tag, origin)?;
    if tag != CHANNEL_ORDER_TAG.as_bytes() {
        return Err(bad(format!(
            "channel order tag mismatch: {:?}",
            String::from_utf8_lossy(&tag)
        )));
    }
    let n_samples = read_u64(r, origin)? as usize;
    let mut samples = Vec::with_capacity(n_samples.min(1 << 20));
    for _ in 0..n_samples {
        let id_len = read_u32(r, origin)? as usize;
        let mut id = vec![0u8; id_len];
        read_exact(r, &mut id, origin)?;
        let clip_id = String::from_utf8(id).map_err(|_| bad("clip id not UTF-8".into()))?;
        let end_frame = read_u64(r, origin)? as usize;
        let target = read_f64(r, origin)?;
        let mut input = vec![0.0; window * N_CHANNELS];
        for v in &mut input {
            *v = read_f64(r, origin)?;
        }
        samples.push(WindowSample {
            clip_id,
            end_frame,
            input,
            target,
        });
    }
    Ok(Dataset {
        window,
        stride,
        samples,
    })
}

/// CSV export for inspection: one row per sample, input channels flattened.
pub fn write_dataset_csv<W: Write>(w: &mut W, ds: &Dataset) -> std::io::Result<()> {
    write!(w, "clip_id,end_frame,target")?;
    for i in 0..ds.window * N_CHANNELS {
        write!(w, ",c{i}")?;
    }
    writeln!(w)?;
    for s in &ds.samples {
        write!(w, "{},{},{}", s.clip_id, s.end_frame, s.target)?;
        for v in &s.input {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], origin: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::invalid(format!("dataset {origin}"), format!("truncated: {e}")))
}

fn read_u32<R: Read>(r: &mut R, origin: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, origin)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R, origin: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, origin)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R, origin: &str) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, origin)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(clip: &str, n_frames: usize) -> JointMatrix {
        let values = (0..n_frames * N_CHANNELS)
            .map(|i| (i % 97) as f64 / 97.0)
            .collect();
        JointMatrix {
            clip_id: clip.into(),
            n_frames,
            values,
        }
    }

    fn rates(clip: &str, n: usize) -> BlinkRateSeries {
        BlinkRateSeries {
            clip_id: clip.into(),
            fps: 30.0,
            values: (0..n).map(|i| (i % 10) as f64 / 10.0).collect(),
            n_participants: 10,
        }
    }

    #[test]
    fn window_count_92_frames_stride_1() {
        let m = matrix("c", 92);
        let r = rates("c", 92);
        let w = build_windows(&m, &r, 90, 1).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(
            w.iter().map(|s| s.end_frame).collect::<Vec<_>>(),
            vec![89, 90, 91]
        );
    }

    #[test]
    fn exactly_one_window_at_90_frames() {
        let m = matrix("c", 90);
        let r = rates("c", 90);
        let w = build_windows(&m, &r, 90, 1).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].end_frame, 89);
    }

    #[test]
    fn short_clip_yields_empty() {
        let m = matrix("c", 89);
        let r = rates("c", 89);
        assert!(build_windows(&m, &r, 90, 1).unwrap().is_empty());
    }

    #[test]
    fn window_rows_match_matrix_slices_exactly() {
        let m = matrix("c", 200);
        let r = rates("c", 200);
        for stride in [1usize, 7, 30] {
            let samples = build_windows(&m, &r, 90, stride).unwrap();
            for s in &samples {
                let start = s.end_frame + 1 - 90;
                let expect = &m.values[start * N_CHANNELS..(s.end_frame + 1) * N_CHANNELS];
                assert_eq!(s.input.as_slice(), expect);
                assert_eq!(s.target, r.values[s.end_frame]);
            }
            // end frames form the arithmetic progression
            let ends: Vec<usize> = samples.iter().map(|s| s.end_frame).collect();
            let expect: Vec<usize> = (89..200).step_by(stride).collect();
            assert_eq!(ends, expect);
        }
    }

    #[test]
    fn mismatched_lengths_error() {
        let m = matrix("c", 100);
        let r = rates("c", 99);
        assert!(build_windows(&m, &r, 90, 1).is_err());
    }

    #[test]
    fn loocv_three_clips() {
        let ids: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let plan = loocv_splits(&ids).unwrap();
        assert_eq!(plan.folds.len(), 3);
        assert_eq!(plan.folds[0].test_clip_id, "a");
        assert_eq!(plan.folds[0].train_clip_ids, vec!["b", "c"]);
        assert_eq!(plan.folds[1].test_clip_id, "b");
        assert_eq!(plan.folds[1].train_clip_ids, vec!["a", "c"]);
        assert_eq!(plan.folds[2].test_clip_id, "c");
        assert_eq!(plan.folds[2].train_clip_ids, vec!["a", "b"]);
    }

    #[test]
    fn loocv_48_clips() {
        let ids: Vec<String> = (0..48).map(|i| format!("clip{i:02}")).collect();
        let plan = loocv_splits(&ids).unwrap();
        assert_eq!(plan.folds.len(), 48);
        for fold in &plan.folds {
            assert_eq!(fold.train_clip_ids.len(), 47);
            assert!(!fold.train_clip_ids.contains(&fold.test_clip_id));
        }
        // test sets partition the clip set
        let mut tests: Vec<&String> = plan.folds.iter().map(|f| &f.test_clip_id).collect();
        tests.sort();
        tests.dedup();
        assert_eq!(tests.len(), 48);
    }

    #[test]
    fn loocv_one_clip_errors() {
        assert!(matches!(
            loocv_splits(&["only".to_string()]),
            Err(Error::TooFewClips(1))
        ));
    }

    #[test]
    fn dataset_container_roundtrip() {
        let m = matrix("clipA", 95);
        let r = rates("clipA", 95);
        let ds = Dataset {
            window: 90,
            stride: 2,
            samples: build_windows(&m, &r, 90, 2).unwrap(),
        };
        let mut bytes = Vec::new();
        write_dataset(&mut bytes, &ds).unwrap();
        let back = read_dataset(&mut bytes.as_slice(), "mem").unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn truncated_dataset_errors() {
        let m = matrix("clipA", 92);
        let r = rates("clipA", 92);
        let ds = Dataset {
            window: 90,
            stride: 1,
            samples: build_windows(&m, &r, 90, 1).unwrap(),
        };
        let mut bytes = Vec::new();
        write_dataset(&mut bytes, &ds).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(read_dataset(&mut bytes.as_slice(), "mem").is_err());
    }
}

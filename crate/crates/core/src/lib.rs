//! Estimates per-frame audience blink probability from skater pose time
//! series with a small 1D convolutional regressor, and detects video
//! highlights as sustained low-blink-probability intervals.
//!
//! The pipeline stages map onto the modules here:
//!
//! * [`pose`] — parse per-frame keypoint files, pick the principal person,
//!   filter low-confidence joints, interpolate gaps, normalize into a dense
//!   frame × channel matrix.
//! * [`blink`] — detect blink onsets in pupil-diameter traces and aggregate
//!   them into a per-video-frame blink-rate series.
//! * [`dataset`] — slice joint matrices into fixed-size training windows and
//!   build leave-one-out folds.
//! * [`model`] — the three-layer 1D-CNN regressor: forward pass, reverse-mode
//!   gradients, initialization, checkpoint serialization.
//! * [`train`] — Adam optimization, the leave-one-out training schedule, and
//!   dense per-clip prediction.
//! * [`stats`] — Pearson correlation with surrogate-shuffle significance
//!   testing, Bonferroni correction, and event-aligned curve analysis.
//! * [`highlight`] — sustained low-probability interval detection with clip
//!   export padding.
//! * [`synth`] — synthetic corpus generator with planted pose→blink coupling,
//!   used as the verification oracle for the full pipeline.
//! * [`verify`] — end-to-end correctness checks backed by independent
//!   oracles (naive convolution, central finite differences, Monte Carlo
//!   calibration); also drives the CLI `reproduce` report.
//!
//! Everything is deterministic given the seeds threaded through [`rng`]:
//! identical inputs and seeds produce bit-identical checkpoints,
//! predictions, and reports at any thread count.

pub mod blink;
pub mod corpus;
pub mod dataset;
mod error;
pub mod highlight;
pub mod model;
mod par;
pub mod pose;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
pub use par::with_thread_pool;

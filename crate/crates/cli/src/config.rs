//! Pipeline configuration: one TOML file covering every stage, with CLI
//! flags overriding individual keys.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use blinklight_core::blink::MarkMode;
use blinklight_core::highlight::DetectMode;
use blinklight_core::model::ModelConfig;
use blinklight_core::synth::SynthSpec;
use blinklight_core::train::TrainConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PoseSection {
    pub confidence_threshold: f64,
}

impl Default for PoseSection {
    fn default() -> Self {
        Self {
            confidence_threshold: 0.7,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BlinkSection {
    pub deriv_z_threshold: f64,
    pub pair_window_s: f64,
    /// "span" or "onset_only"
    pub mark_mode: String,
    /// Moving-average half-width in frames; 0 disables smoothing.
    pub smooth_half_width: usize,
}

impl Default for BlinkSection {
    fn default() -> Self {
        Self {
            deriv_z_threshold: 2.5,
            pair_window_s: 0.5,
            mark_mode: "span".into(),
            smooth_half_width: 0,
        }
    }
}

impl BlinkSection {
    pub fn mark_mode(&self) -> anyhow::Result<MarkMode> {
        match self.mark_mode.as_str() {
            "span" => Ok(MarkMode::Span),
            "onset_only" => Ok(MarkMode::OnsetOnly),
            other => anyhow::bail!("unknown mark_mode {other:?} (use \"span\" or \"onset_only\")"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSection {
    pub window: usize,
    pub stride: usize,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            window: 90,
            stride: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct StatsSection {
    pub n_shuffles: usize,
    pub alpha: f64,
    /// Event-aligned window, frames before and after the event.
    pub pre_window: usize,
    pub post_window: usize,
}

impl Default for StatsSection {
    fn default() -> Self {
        Self {
            n_shuffles: 1000,
            alpha: 0.05,
            pre_window: 30,
            post_window: 90,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct HighlightSection {
    pub k_sd: f64,
    pub min_run: usize,
    pub pad_s: f64,
    /// "all_frames_below" or "window_mean_below"
    pub mode: String,
}

impl Default for HighlightSection {
    fn default() -> Self {
        Self {
            k_sd: 2.0,
            min_run: 5,
            pad_s: 1.0,
            mode: "all_frames_below".into(),
        }
    }
}

impl HighlightSection {
    pub fn detect_mode(&self) -> anyhow::Result<DetectMode> {
        match self.mode.as_str() {
            "all_frames_below" => Ok(DetectMode::AllFramesBelow),
            "window_mean_below" => Ok(DetectMode::WindowMeanBelow),
            other => anyhow::bail!(
                "unknown highlight mode {other:?} (use \"all_frames_below\" or \"window_mean_below\")"
            ),
        }
    }
}

/// The whole pipeline configuration. Field defaults follow the reference
/// settings (full architecture, batch 4096, 100 epochs, stride 1);
/// `reproduce_profile` swaps in the desk-scale settings used by the
/// end-to-end verification run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub out_dir: PathBuf,
    /// Corpus location; defaults to `<out_dir>/corpus`.
    pub corpus_dir: Option<PathBuf>,
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
    pub synth: SynthSpec,
    pub pose: PoseSection,
    pub blink: BlinkSection,
    pub dataset: DatasetSection,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub stats: StatsSection,
    pub highlight: HighlightSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
            corpus_dir: None,
            seed: 42,
            threads: 0,
            synth: SynthSpec::default(),
            pose: PoseSection::default(),
            blink: BlinkSection::default(),
            dataset: DatasetSection::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            stats: StatsSection::default(),
            highlight: HighlightSection::default(),
        }
    }
}

impl PipelineConfig {
    /// Desk-scale profile for `reproduce`: a reduced model and widened
    /// stride keep the full leave-one-out schedule within a CPU budget
    /// while leaving the planted coupling detectable.
    pub fn reproduce_profile() -> Self {
        let mut cfg = Self::default();
        cfg.model.filters = [16, 32, 16];
        cfg.train.batch_size = 128;
        cfg.train.max_epochs = 15;
        cfg.dataset.stride = 2;
        cfg
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: PipelineConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.synth.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        self.blink.mark_mode()?;
        self.highlight.detect_mode()?;
        anyhow::ensure!(
            (0.0..=1.0).contains(&self.pose.confidence_threshold),
            "pose.confidence_threshold must be in [0, 1]"
        );
        anyhow::ensure!(
            self.dataset.window == self.model.window_len,
            "dataset.window ({}) must equal model.window_len ({})",
            self.dataset.window,
            self.model.window_len
        );
        anyhow::ensure!(self.dataset.stride >= 1, "dataset.stride must be ≥ 1");
        anyhow::ensure!(self.stats.n_shuffles >= 2, "stats.n_shuffles must be ≥ 2");
        anyhow::ensure!(
            self.stats.alpha > 0.0 && self.stats.alpha < 1.0,
            "stats.alpha must be in (0, 1)"
        );
        Ok(())
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.corpus_dir
            .clone()
            .unwrap_or_else(|| self.out_dir.join("corpus"))
    }

    /// Canonical serialized form used for provenance hashing.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_roundtrips() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        let text = cfg.canonical_toml();
        let back: PipelineConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.canonical_toml(), text);
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let cfg: PipelineConfig = toml::from_str(
            r#"
            seed = 7
            [train]
            max_epochs = 3
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.train.max_epochs, 3);
        assert_eq!(cfg.train.batch_size, 4096);
        assert_eq!(cfg.model.filters, [64, 128, 64]);
        assert_eq!(cfg.dataset.stride, 1);
    }

    #[test]
    fn bad_mark_mode_rejected() {
        let cfg: PipelineConfig = toml::from_str("[blink]\nmark_mode = \"sideways\"\n").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn window_mismatch_rejected() {
        let cfg: PipelineConfig = toml::from_str("[dataset]\nwindow = 60\n").unwrap();
        assert!(cfg.validate().is_err());
    }
}

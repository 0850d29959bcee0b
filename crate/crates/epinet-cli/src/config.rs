//! Pipeline configuration: one JSON file drives every stage.
//!
//! Relative paths inside the file are resolved against the directory the
//! file lives in, so a bundled dataset can be run from anywhere. All
//! randomness in the pipeline flows from the single `seed` field.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use epinet::accumulation::CooccurrenceMode;
use epinet::corpus::{CsvSchema, SegmentOptions};
use epinet::features::audio::MfccConfig;
use epinet::features::pose::{RotationAxis, DEFAULT_POSE_FRAMES};
use epinet::networks::GroupMode;
use serde::{Deserialize, Serialize};

/// Classifier validation parameters for the IRR stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IrrConfig {
    /// Number of lines sampled (without replacement) as the hand-checked set.
    pub handset_size: usize,
    /// Kappa value the corpus must clear in the Monte-Carlo simulation.
    pub threshold_kappa: f64,
    /// Base rate used when a code never or always occurs in the corpus, where
    /// the observed rate would make the simulation degenerate.
    pub fallback_baserate: f64,
}

impl Default for IrrConfig {
    fn default() -> Self {
        Self {
            handset_size: 40,
            threshold_kappa: 0.65,
            fallback_baserate: 0.2,
        }
    }
}

/// Pose-stage parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseConfig {
    /// Frame count every sequence is resampled to.
    pub target_len: usize,
    /// Rotation angles (degrees) written as augmented copies.
    pub rotations: Vec<f64>,
    pub axis: RotationAxis,
    /// Joint index the rotations pivot around.
    pub root_joint: usize,
}

impl Default for PoseConfig {
    fn default() -> Self {
        Self {
            target_len: DEFAULT_POSE_FRAMES,
            rotations: vec![5.0, 10.0],
            axis: RotationAxis::Y,
            root_joint: 0,
        }
    }
}

/// Everything the pipeline needs: input paths, segmentation and modeling
/// choices, and the seed recorded in every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Coded transcript CSV.
    pub corpus_csv: PathBuf,
    /// Codebook JSON ({"codes": [{"id", "label", "definition"}, ...]}).
    pub codebook: PathBuf,
    /// Pattern-classifier JSON; omit to keep the hand codes as-is.
    pub classifier: Option<PathBuf>,
    /// Plot style JSON; omit for defaults.
    pub style: Option<PathBuf>,
    /// Directory of 16-bit PCM WAV files for the MFCC stage.
    pub audio_dir: Option<PathBuf>,
    /// Directory of pose CSVs for the pose stage.
    pub pose_dir: Option<PathBuf>,
    /// Where artifacts are written.
    pub out_dir: PathBuf,
    /// Column mapping for the corpus CSV.
    pub schema: CsvSchema,
    pub segmentation: SegmentOptions,
    pub cooccurrence_mode: CooccurrenceMode,
    pub group_mode: GroupMode,
    /// Projection dimensions requested from the model.
    pub dims: usize,
    /// Master seed; recorded in every report.
    pub seed: u64,
    /// Monte-Carlo replicates for the IRR simulation.
    pub mc_replicates: u32,
    /// Codes the classifier recodes. Empty means every code the classifier
    /// has patterns for.
    pub target_codes: Vec<String>,
    pub irr: IrrConfig,
    /// MFCC parameters; omit to derive defaults from each file's sample rate.
    pub mfcc: Option<MfccConfig>,
    pub pose: PoseConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            corpus_csv: PathBuf::from("corpus.csv"),
            codebook: PathBuf::from("codebook.json"),
            classifier: None,
            style: None,
            audio_dir: None,
            pose_dir: None,
            out_dir: PathBuf::from("out"),
            schema: CsvSchema::default(),
            segmentation: SegmentOptions::default(),
            cooccurrence_mode: CooccurrenceMode::default(),
            group_mode: GroupMode::default(),
            dims: 2,
            seed: 42,
            mc_replicates: 1000,
            target_codes: Vec::new(),
            irr: IrrConfig::default(),
            mfcc: None,
            pose: PoseConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Loads a config file and resolves its relative paths against the
    /// file's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut config: Self = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.resolve_relative_to(base);
        Ok(config)
    }

    fn resolve_relative_to(&mut self, base: &Path) {
        let anchor = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        anchor(&mut self.corpus_csv);
        anchor(&mut self.codebook);
        anchor(&mut self.out_dir);
        for optional in [
            &mut self.classifier,
            &mut self.style,
            &mut self.audio_dir,
            &mut self.pose_dir,
        ]
        .into_iter()
        .flatten()
        {
            anchor(optional);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 {
            bail!("config: dims must be at least 1");
        }
        if self.mc_replicates == 0 {
            bail!("config: mc_replicates must be at least 1");
        }
        if self.irr.handset_size < 2 {
            bail!("config: irr.handset_size must be at least 2");
        }
        if !(-1.0..=1.0).contains(&self.irr.threshold_kappa) {
            bail!(
                "config: irr.threshold_kappa must lie in [-1, 1], got {}",
                self.irr.threshold_kappa
            );
        }
        if !(self.irr.fallback_baserate > 0.0 && self.irr.fallback_baserate < 1.0) {
            bail!(
                "config: irr.fallback_baserate must lie strictly between 0 and 1, got {}",
                self.irr.fallback_baserate
            );
        }
        if self.pose.target_len < 2 {
            bail!("config: pose.target_len must be at least 2");
        }
        if self.pose.rotations.iter().any(|r| !r.is_finite()) {
            bail!("config: pose.rotations must be finite");
        }
        if let Some(mfcc) = &self.mfcc {
            mfcc.validate().context("config: mfcc")?;
        }
        Ok(())
    }
}

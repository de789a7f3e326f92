use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::graph::{EdgeStrategy, PartitionStrategy};
use crate::landmarks::DEFAULT_AUGMENT_PAIRS;
use crate::nn::{Architecture, SgdConfig};
use crate::synth::{GridSpec, SynthConfig, EMOTIONS};

/// Everything one run needs. Relative paths resolve against the directory of
/// the file the configuration was loaded from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub features: FeatureConfig,
    pub landmarks: LandmarkConfig,
    pub graph: GraphConfig,
    pub synth: SynthSection,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split: SplitConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Dataset directory: manifest, graph cache and tensor caches.
    pub data: PathBuf,
    /// Raw sequences for `preprocess`.
    pub input: PathBuf,
    /// Training output: checkpoints, log, report.
    pub run: PathBuf,
    /// Checkpoint evaluated by `eval`; defaults to `<run>/final.fgc`.
    pub checkpoint: Option<PathBuf>,
    /// Report written by `eval`; defaults to `<run>/report.toml`.
    pub report: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            data: "data".into(),
            input: "raw".into(),
            run: "run".into(),
            checkpoint: None,
            report: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    /// Points per landmark patch.
    pub k: usize,
    pub scale_normalize: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            k: crate::patch::DEFAULT_PATCH_SIZE,
            scale_normalize: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LandmarkSource {
    /// `.lm2` texture coordinates if present, else `.lm3` positions.
    #[default]
    Auto,
    Lm2,
    Lm3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LandmarkConfig {
    pub source: LandmarkSource,
    pub augment: bool,
    /// Base-landmark index pairs joined by augmentation.
    pub pairs: Vec<(usize, usize)>,
}

impl Default for LandmarkConfig {
    fn default() -> Self {
        LandmarkConfig {
            source: LandmarkSource::Auto,
            augment: true,
            pairs: DEFAULT_AUGMENT_PAIRS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct GraphConfig {
    pub edges: EdgeStrategy,
    pub partition: PartitionStrategy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub identities: usize,
    pub emotions: Vec<usize>,
    pub frames: usize,
    pub grid: GridSpec,
    pub identity_amplitude: f64,
    pub expression_amplitude: f64,
    pub landmark_spacing: usize,
    pub augment_pairs: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        let s = SynthConfig::default();
        SynthSection {
            identities: s.identities,
            emotions: s.emotions,
            frames: s.frames,
            grid: s.grid,
            identity_amplitude: s.identity_amplitude,
            expression_amplitude: s.expression_amplitude,
            landmark_spacing: s.landmark_spacing,
            augment_pairs: s.augment_pairs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub widths: Vec<usize>,
    pub strides: Vec<usize>,
    pub kernel: usize,
    pub residual: bool,
    pub bias: bool,
    /// Standardize each input (channel, node) with training-set statistics.
    pub standardize_input: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let a = Architecture::new(1, 1);
        ModelConfig {
            widths: a.widths,
            strides: a.strides,
            kernel: a.kernel,
            residual: a.residual,
            bias: a.bias,
            standardize_input: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Report held-out accuracy in the log after every epoch.
    pub eval_each_epoch: bool,
    pub optimizer: SgdConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 60,
            batch_size: 8,
            eval_each_epoch: true,
            optimizer: SgdConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Train on `train_emotions`, hold out the rest.
    #[default]
    CrossEmotion,
    /// Train and evaluate on every sample.
    All,
    /// Repeat the cross-emotion protocol for every subset of the present
    /// emotions with `train_emotions.len()` elements and average.
    AllSubsets,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Train,
    #[default]
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub mode: SplitMode,
    pub train_emotions: Vec<usize>,
    /// Side scored by `eval`.
    pub eval_side: Side,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            mode: SplitMode::CrossEmotion,
            train_emotions: vec![0, 1, 2],
            eval_side: Side::Test,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            paths: Paths::default(),
            features: FeatureConfig::default(),
            landmarks: LandmarkConfig::default(),
            graph: GraphConfig::default(),
            synth: SynthSection::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            split: SplitConfig::default(),
            base_dir: PathBuf::new(),
        }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), PipelineError> {
    if ok {
        Ok(())
    } else {
        Err(PipelineError::Config(msg()))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always serializable")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = RunConfig::from_toml(&text).map_err(|e| match e {
            PipelineError::Config(m) => PipelineError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        check(self.seed <= i64::MAX as u64, || "seed must fit in a signed 64-bit integer".into())?;
        check(self.features.k >= 1, || "features.k must be at least 1".into())?;
        let m = &self.model;
        check(!m.widths.is_empty(), || "model.widths is empty".into())?;
        check(m.widths.len() == m.strides.len(), || {
            format!("model.widths has {} entries but model.strides has {}", m.widths.len(), m.strides.len())
        })?;
        check(m.widths.iter().all(|&w| w > 0), || "model.widths must be positive".into())?;
        check(m.strides.iter().all(|&s| s > 0), || "model.strides must be positive".into())?;
        check(m.kernel % 2 == 1, || format!("model.kernel must be odd, got {}", m.kernel))?;
        let o = &self.train.optimizer;
        check(o.base_lr.is_finite() && o.base_lr > 0.0, || format!("optimizer base_lr must be > 0, got {}", o.base_lr))?;
        check((0.0..1.0).contains(&o.momentum), || format!("optimizer momentum must be in [0, 1), got {}", o.momentum))?;
        check(o.weight_decay.is_finite() && o.weight_decay >= 0.0, || {
            "optimizer weight_decay must be >= 0".into()
        })?;
        check(o.gamma.is_finite() && o.gamma > 0.0, || "optimizer gamma must be > 0".into())?;
        check(self.train.batch_size >= 1, || "train.batch_size must be at least 1".into())?;
        if let EdgeStrategy::Knn(n) = self.graph.edges {
            check(n >= 1, || "graph knn neighbor count must be at least 1".into())?;
        }
        check_emotions("synth.emotions", &self.synth.emotions)?;
        check(!self.synth.emotions.is_empty(), || "synth.emotions is empty".into())?;
        check_emotions("split.train_emotions", &self.split.train_emotions)?;
        if self.split.mode != SplitMode::All {
            check(!self.split.train_emotions.is_empty(), || "split.train_emotions is empty".into())?;
        }
        check(self.synth.identities >= 2, || "synth.identities must be at least 2".into())?;
        check(self.synth.frames >= 1, || "synth.frames must be at least 1".into())?;
        check(self.synth.landmark_spacing >= 1, || "synth.landmark_spacing must be at least 1".into())?;
        for &(a, b) in &self.landmarks.pairs {
            check(a != b, || format!("landmark pair ({a}, {b}) joins a landmark to itself"))?;
        }
        self.synth_config()
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn synth_config(&self) -> SynthConfig {
        let s = &self.synth;
        SynthConfig {
            identities: s.identities,
            emotions: s.emotions.clone(),
            frames: s.frames,
            k: self.features.k,
            scale_normalize: self.features.scale_normalize,
            seed: self.seed,
            grid: s.grid,
            identity_amplitude: s.identity_amplitude,
            expression_amplitude: s.expression_amplitude,
            landmark_spacing: s.landmark_spacing,
            augment_pairs: s.augment_pairs,
            edges: self.graph.edges.clone(),
            partition: self.graph.partition,
        }
    }

    pub fn architecture(&self, in_channels: usize, num_classes: usize) -> Architecture {
        Architecture {
            in_channels,
            widths: self.model.widths.clone(),
            strides: self.model.strides.clone(),
            kernel: self.model.kernel,
            num_classes,
            residual: self.model.residual,
            bias: self.model.bias,
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.resolve(&self.paths.data)
    }

    pub fn input_dir(&self) -> PathBuf {
        self.resolve(&self.paths.input)
    }

    pub fn run_dir(&self) -> PathBuf {
        self.resolve(&self.paths.run)
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        match &self.paths.checkpoint {
            Some(p) => self.resolve(p),
            None => self.run_dir().join("final.fgc"),
        }
    }

    pub fn report_path(&self) -> PathBuf {
        match &self.paths.report {
            Some(p) => self.resolve(p),
            None => self.run_dir().join("report.toml"),
        }
    }
}

fn check_emotions(name: &str, emotions: &[usize]) -> Result<(), PipelineError> {
    check(emotions.iter().all(|&e| e < EMOTIONS), || {
        format!("{name} entries must be in 0..{EMOTIONS}")
    })?;
    check(emotions.iter().collect::<BTreeSet<_>>().len() == emotions.len(), || {
        format!("{name} has duplicates")
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn non_default_round_trip() {
        let mut c = RunConfig::default();
        c.graph.edges = EdgeStrategy::Template(vec![(0, 1), (1, 2)]);
        c.graph.partition = PartitionStrategy::Uniform;
        c.paths.checkpoint = Some("x/best.fgc".into());
        c.split.mode = SplitMode::AllSubsets;
        c.landmarks.source = LandmarkSource::Lm3;
        c.train.optimizer.decay_epochs = vec![];
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let c = RunConfig::from_toml("seed = 9\n[features]\nk = 4\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.features.k, 4);
        assert_eq!(c.model, ModelConfig::default());
    }

    #[test]
    fn validation_errors() {
        for text in [
            "[features]\nk = 0\n",
            "[model]\nkernel = 4\n",
            "[train.optimizer]\nbase_lr = 0.0\n",
            "[split]\ntrain_emotions = [7]\n",
            "[model]\nwidths = [8]\nstrides = [1, 2]\n",
            "unknown_key = 1\n",
        ] {
            assert!(matches!(RunConfig::from_toml(text), Err(PipelineError::Config(_))), "{text}");
        }
    }
}

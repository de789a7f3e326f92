//! Run orchestration: configuration, on-disk layout and the four commands
//! (`synth`, `preprocess`, `train`, `eval`).

mod commands;
mod config;
mod manifest;
mod report;

use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

pub use commands::{
    cmd_eval, cmd_preprocess, cmd_synth, cmd_train, load_dataset, LoadedData, TrainOutcome, LABELS_FILE, LOG_FILE,
};
pub use config::{
    FeatureConfig, GraphConfig, LandmarkConfig, LandmarkSource, ModelConfig, Paths, RunConfig, Side, SplitConfig,
    SplitMode, SynthSection, TrainConfig,
};
pub use manifest::{Manifest, ManifestSample, GRAPH_FILE, MANIFEST_FILE, TENSOR_DIR};
pub use report::{EmotionScore, Report, SubsetRun, SubsetSummary};

pub const THREADS_ENV: &str = "FACEGCN_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("{0} already exists; pass --force to overwrite")]
    Exists(PathBuf),
    #[error("{0} is locked by another run (remove the lock file if that run is gone)")]
    Locked(PathBuf),
    #[error("checkpoint does not match the configuration: {0}")]
    ArchitectureMismatch(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit code: 2 for configuration and input problems, 3 for
    /// numerical failures at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Numerical(_) => 3,
            _ => 2,
        }
    }
}

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub const FILE: &'static str = ".facegcn.lock";

    pub fn acquire(dir: &Path) -> Result<Self, PipelineError> {
        fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        let path = dir.join(Self::FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(OutputLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(PipelineError::Locked(dir.to_path_buf())),
            Err(e) => Err(PipelineError::io(&path, e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Runs `f` under the worker limit from `FACEGCN_THREADS`; `0` means a single
/// thread. Unset leaves the global pool alone.
pub fn with_thread_limit<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T, PipelineError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(f());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| PipelineError::Config(format!("{THREADS_ENV} must be a non-negative integer, got `{raw}`")))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n.max(1))
        .build()
        .map_err(|e| PipelineError::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const GRAPH_FILE: &str = "graph.fgg";
pub const TENSOR_DIR: &str = "tensors";
const FORMAT: &str = "facegcn-manifest-1";

/// Index of a preprocessed dataset. Paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub k: usize,
    pub landmarks: usize,
    /// Landmark ordering hash shared by every tensor, as 16 hex digits.
    pub ordering_hash: String,
    /// Seed the data was generated from; absent for ingested data.
    pub seed: Option<u64>,
    pub graph: PathBuf,
    pub samples: Vec<ManifestSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestSample {
    pub id: String,
    pub identity: usize,
    pub emotion: usize,
    pub frames: usize,
    pub tensor: PathBuf,
    pub identity_seed: Option<String>,
    pub expression_seed: Option<String>,
}

pub fn hex(v: u64) -> String {
    format!("{v:016x}")
}

impl Manifest {
    pub fn new(k: usize, landmarks: usize, ordering_hash: u64, seed: Option<u64>) -> Self {
        Manifest {
            format: FORMAT.into(),
            k,
            landmarks,
            ordering_hash: hex(ordering_hash),
            seed,
            graph: GRAPH_FILE.into(),
            samples: Vec::new(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest is always serializable")
    }

    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let m: Manifest = toml::from_str(text).map_err(|e| PipelineError::Input(format!("manifest: {e}")))?;
        if m.format != FORMAT {
            return Err(PipelineError::Input(format!("unsupported manifest format `{}`", m.format)));
        }
        Ok(m)
    }

    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| PipelineError::Input(format!("cannot read {}: {e}", path.display())))?;
        Manifest::from_toml(&text).map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, dir: &Path) -> Result<(), PipelineError> {
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, self.to_toml()).map_err(|e| PipelineError::io(&path, e))
    }

    /// Number of classifier outputs: identities are used directly as class ids.
    pub fn num_classes(&self) -> usize {
        self.samples.iter().map(|s| s.identity + 1).max().unwrap_or(0)
    }

    pub fn ordering_hash(&self) -> Result<u64, PipelineError> {
        u64::from_str_radix(&self.ordering_hash, 16)
            .map_err(|_| PipelineError::Input(format!("bad ordering hash `{}`", self.ordering_hash)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut m = Manifest::new(25, 61, 0xdead_beef_0000_0001, Some(3));
        m.samples.push(ManifestSample {
            id: "id00_em0".into(),
            identity: 0,
            emotion: 0,
            frames: 24,
            tensor: "tensors/id00_em0.fgt".into(),
            identity_seed: Some(hex(u64::MAX)),
            expression_seed: None,
        });
        let back = Manifest::from_toml(&m.to_toml()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.ordering_hash().unwrap(), 0xdead_beef_0000_0001);
        assert_eq!(back.num_classes(), 1);
    }
}

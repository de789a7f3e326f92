use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::manifest::hex;
use super::{
    Manifest, ManifestSample, OutputLock, PipelineError, Report, RunConfig, Side, SplitMode, SubsetRun, SubsetSummary,
    GRAPH_FILE, MANIFEST_FILE, TENSOR_DIR,
};
use crate::graph::{build_spatial_edges, partition, read_graph_cache, write_graph_cache, PartitionLabels, SpatialGraph};
use crate::landmarks::{augment_landmarks, lift_landmarks, load_landmarks_2d, load_landmarks_3d, snap_to_mesh, LandmarkSet};
use crate::mesh::{build_edge_graph, load_mesh, MeshFormat, TexturedMesh};
use crate::nn::{
    accuracy, load_checkpoint, predict, save_checkpoint, train_epoch, CheckpointMeta, EpochLog, Example, Model, NetError,
    Sgd, Tensor3,
};
use crate::patch::{build_sequence_tensor, read_tensor, write_tensor, PatchOptions, CHANNELS_PER_POINT};
use crate::synth::{build_dataset, cross_emotion_split, derive_seed, emotion_subsets, Split, SynthError};

pub const LABELS_FILE: &str = "labels.txt";
pub const LOG_FILE: &str = "train.log";

const MODEL_SALT: u64 = 0x6d6f_6465_6c;
const SHUFFLE_SALT: u64 = 0x7368_7566;

fn net_error(e: NetError) -> PipelineError {
    match e {
        NetError::NonFinite(m) => PipelineError::Numerical(m),
        NetError::Io(e) => PipelineError::Io {
            path: PathBuf::new(),
            source: e,
        },
        other => PipelineError::Input(other.to_string()),
    }
}

fn synth_error(e: SynthError) -> PipelineError {
    match e {
        SynthError::Config(m) => PipelineError::Config(m),
        SynthError::NotSeparable { .. } => PipelineError::Config(e.to_string()),
        other => PipelineError::Input(other.to_string()),
    }
}

fn refuse_existing(path: &Path, force: bool) -> Result<(), PipelineError> {
    if path.exists() && !force {
        return Err(PipelineError::Exists(path.to_path_buf()));
    }
    Ok(())
}

fn reset_tensor_dir(dir: &Path) -> Result<PathBuf, PipelineError> {
    let tensors = dir.join(TENSOR_DIR);
    if tensors.exists() {
        fs::remove_dir_all(&tensors).map_err(|e| PipelineError::io(&tensors, e))?;
    }
    fs::create_dir_all(&tensors).map_err(|e| PipelineError::io(&tensors, e))?;
    Ok(tensors)
}

/// Removes everything written so far unless disarmed.
struct Cleanup {
    paths: Vec<PathBuf>,
    armed: bool,
}

impl Cleanup {
    fn new() -> Self {
        Cleanup {
            paths: Vec::new(),
            armed: true,
        }
    }
}

impl Drop for Cleanup {
    fn drop(&mut self) {
        if self.armed {
            for p in &self.paths {
                let _ = fs::remove_file(p);
            }
        }
    }
}

fn write_dataset(
    dir: &Path,
    manifest: &mut Manifest,
    items: Vec<(ManifestSample, crate::patch::FeatureTensor)>,
    labels: &PartitionLabels,
) -> Result<(), PipelineError> {
    let mut cleanup = Cleanup::new();
    let graph_path = dir.join(GRAPH_FILE);
    write_graph_cache(labels, &graph_path).map_err(|e| PipelineError::io(&graph_path, e))?;
    cleanup.paths.push(graph_path);
    for (sample, tensor) in items {
        let path = dir.join(&sample.tensor);
        write_tensor(&tensor, &path).map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?;
        cleanup.paths.push(path);
        manifest.samples.push(sample);
    }
    manifest.save(dir)?;
    cleanup.armed = false;
    Ok(())
}

/// Generates the synthetic dataset into `paths.data`.
pub fn cmd_synth(cfg: &RunConfig, force: bool) -> Result<Manifest, PipelineError> {
    cfg.validate()?;
    let dir = cfg.data_dir();
    let _lock = OutputLock::acquire(&dir)?;
    refuse_existing(&dir.join(MANIFEST_FILE), force)?;
    let synth = cfg.synth_config();
    let data = build_dataset(&synth).map_err(synth_error)?;
    let first = &data.samples[0].features;
    let mut manifest = Manifest::new(synth.k, first.landmarks, first.ordering_hash, Some(cfg.seed));
    reset_tensor_dir(&dir)?;
    let items = data
        .samples
        .into_iter()
        .map(|s| {
            let id = format!("id{:03}_em{}", s.identity, s.emotion);
            let sample = ManifestSample {
                tensor: Path::new(TENSOR_DIR).join(format!("{id}.fgt")),
                id,
                identity: s.identity,
                emotion: s.emotion,
                frames: s.features.frames,
                identity_seed: Some(hex(s.identity_seed)),
                expression_seed: Some(hex(s.expression_seed)),
            };
            (sample, s.features)
        })
        .collect();
    write_dataset(&dir, &mut manifest, items, &data.labels)?;
    Ok(manifest)
}

struct RawSequence {
    id: String,
    identity: usize,
    emotion: usize,
    /// `(mesh, landmark file)` per frame, in frame order.
    frames: Vec<(PathBuf, PathBuf)>,
}

fn parse_labels(path: &Path) -> Result<BTreeMap<String, (usize, usize)>, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || PipelineError::Input(format!("{}:{}: expected `<sequence> <identity> <emotion>`", path.display(), n + 1));
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [id, identity, emotion] = parts[..] else { return Err(bad()) };
        let identity = identity.parse().map_err(|_| bad())?;
        let emotion = emotion.parse().map_err(|_| bad())?;
        if out.insert(id.to_string(), (identity, emotion)).is_some() {
            return Err(PipelineError::Input(format!("{}:{}: duplicate sequence `{id}`", path.display(), n + 1)));
        }
    }
    Ok(out)
}

/// `frame_0007.ply` -> `Some(7)`.
fn frame_index(name: &str) -> Option<usize> {
    let stem = name.strip_prefix("frame_")?;
    let (digits, _) = stem.split_once('.')?;
    if digits.len() == 4 && digits.bytes().all(|b| b.is_ascii_digit()) {
        digits.parse().ok()
    } else {
        None
    }
}

fn scan_sequence(cfg: &RunConfig, id: &str, dir: &Path, label: (usize, usize)) -> Result<RawSequence, PipelineError> {
    use super::LandmarkSource;
    let entries = fs::read_dir(dir).map_err(|e| PipelineError::io(dir, e))?;
    let mut meshes: BTreeMap<usize, PathBuf> = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| PipelineError::io(dir, e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let (Some(idx), Some(_)) = (frame_index(name), MeshFormat::from_path(&path)) else { continue };
        if meshes.insert(idx, path.clone()).is_some() {
            return Err(PipelineError::Input(format!("{}: frame {idx} has more than one mesh file", dir.display())));
        }
    }
    if meshes.is_empty() {
        return Err(PipelineError::Input(format!("sequence {id}: no frame_NNNN.ply/.obj files in {}", dir.display())));
    }
    let mut frames = Vec::with_capacity(meshes.len());
    for (expected, (idx, mesh)) in meshes.into_iter().enumerate() {
        if idx != expected {
            return Err(PipelineError::Input(format!(
                "sequence {id}: frame_{expected:04} is missing (next frame is {idx})"
            )));
        }
        let lm2 = mesh.with_extension("lm2");
        let lm3 = mesh.with_extension("lm3");
        let lm = match cfg.landmarks.source {
            LandmarkSource::Lm2 => lm2,
            LandmarkSource::Lm3 => lm3,
            LandmarkSource::Auto if lm2.exists() => lm2,
            LandmarkSource::Auto => lm3,
        };
        if !lm.exists() {
            return Err(PipelineError::Input(format!(
                "sequence {id}: frame {}: missing landmark file {}",
                mesh.display(),
                lm.display()
            )));
        }
        frames.push((mesh, lm));
    }
    Ok(RawSequence {
        id: id.to_string(),
        identity: label.0,
        emotion: label.1,
        frames,
    })
}

fn load_frame(cfg: &RunConfig, mesh_path: &Path, lm_path: &Path) -> Result<(TexturedMesh, LandmarkSet), String> {
    let format = MeshFormat::from_path(mesh_path).ok_or("unsupported mesh extension")?;
    let mesh = load_mesh(mesh_path, format).map_err(|e| e.to_string())?;
    let base = if lm_path.extension().is_some_and(|e| e == "lm2") {
        let uv = load_landmarks_2d(lm_path).map_err(|e| format!("{}: {e}", lm_path.display()))?;
        lift_landmarks(&mesh, &uv).map_err(|e| e.to_string())?
    } else {
        let pts = load_landmarks_3d(lm_path).map_err(|e| format!("{}: {e}", lm_path.display()))?;
        snap_to_mesh(&mesh, &pts).map_err(|e| e.to_string())?
    };
    let set = if cfg.landmarks.augment && !cfg.landmarks.pairs.is_empty() {
        let graph = build_edge_graph(&mesh).map_err(|e| e.to_string())?;
        augment_landmarks(&mesh, &graph, &base, &cfg.landmarks.pairs)
            .map_err(|e| e.to_string())?
            .0
    } else {
        base
    };
    Ok((mesh, set))
}

/// Converts raw per-frame meshes and landmark files under `paths.input` into
/// tensor caches under `paths.data`.
pub fn cmd_preprocess(cfg: &RunConfig, force: bool) -> Result<Manifest, PipelineError> {
    cfg.validate()?;
    let input = cfg.input_dir();
    if !input.is_dir() {
        return Err(PipelineError::Input(format!("input directory {} does not exist", input.display())));
    }
    let mut dirs: Vec<(String, PathBuf)> = Vec::new();
    for entry in fs::read_dir(&input).map_err(|e| PipelineError::io(&input, e))? {
        let path = entry.map_err(|e| PipelineError::io(&input, e))?.path();
        if path.is_dir() {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
            if !name.starts_with('.') {
                dirs.push((name, path));
            }
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(PipelineError::Input(format!("no sequence directories in {}", input.display())));
    }
    let labels = parse_labels(&input.join(LABELS_FILE))?;
    let mut sequences = Vec::with_capacity(dirs.len());
    for (id, dir) in &dirs {
        let label = *labels
            .get(id)
            .ok_or_else(|| PipelineError::Input(format!("sequence {id} has no entry in {LABELS_FILE}")))?;
        sequences.push(scan_sequence(cfg, id, dir, label)?);
    }
    if let Some(missing) = labels.keys().find(|k| !dirs.iter().any(|(d, _)| d == *k)) {
        return Err(PipelineError::Input(format!("{LABELS_FILE} lists `{missing}` but there is no such directory")));
    }

    let options = PatchOptions {
        k: cfg.features.k,
        scale_normalize: cfg.features.scale_normalize,
    };
    let processed: Vec<(crate::patch::FeatureTensor, LandmarkSet)> = sequences
        .par_iter()
        .map(|seq| {
            let frames: Vec<(TexturedMesh, LandmarkSet)> = seq
                .frames
                .iter()
                .map(|(m, l)| {
                    load_frame(cfg, m, l)
                        .map_err(|e| PipelineError::Input(format!("sequence {}, frame {}: {e}", seq.id, m.display())))
                })
                .collect::<Result<_, _>>()?;
            let tensor = build_sequence_tensor(&frames, options)
                .map_err(|e| PipelineError::Input(format!("sequence {}: {e}", seq.id)))?;
            Ok((tensor, frames.into_iter().next().unwrap().1))
        })
        .collect::<Result<_, PipelineError>>()?;

    let (first, first_set) = &processed[0];
    for (seq, (t, _)) in sequences.iter().zip(&processed) {
        if t.landmarks != first.landmarks || t.ordering_hash != first.ordering_hash {
            return Err(PipelineError::Input(format!(
                "sequence {} has {} landmarks (hash {:016x}), sequence {} has {} (hash {:016x})",
                seq.id, t.landmarks, t.ordering_hash, sequences[0].id, first.landmarks, first.ordering_hash
            )));
        }
    }
    let graph = build_spatial_edges(first_set, &cfg.graph.edges).map_err(|e| PipelineError::Input(e.to_string()))?;
    let labels = partition(&graph, cfg.graph.partition);

    let dir = cfg.data_dir();
    let _lock = OutputLock::acquire(&dir)?;
    refuse_existing(&dir.join(MANIFEST_FILE), force)?;
    let mut manifest = Manifest::new(cfg.features.k, first.landmarks, first.ordering_hash, None);
    reset_tensor_dir(&dir)?;
    let items = sequences
        .iter()
        .zip(processed)
        .map(|(seq, (tensor, _))| {
            let sample = ManifestSample {
                id: seq.id.clone(),
                identity: seq.identity,
                emotion: seq.emotion,
                frames: tensor.frames,
                tensor: Path::new(TENSOR_DIR).join(format!("{}.fgt", seq.id)),
                identity_seed: None,
                expression_seed: None,
            };
            (sample, tensor)
        })
        .collect();
    write_dataset(&dir, &mut manifest, items, &labels)?;
    Ok(manifest)
}

/// A dataset loaded for training or evaluation.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub manifest: Manifest,
    pub graph: SpatialGraph,
    pub labels: PartitionLabels,
    pub examples: Vec<Example<f32>>,
}

impl LoadedData {
    pub fn keys(&self) -> Vec<(usize, usize)> {
        self.manifest.samples.iter().map(|s| (s.identity, s.emotion)).collect()
    }
}

pub fn load_dataset(cfg: &RunConfig) -> Result<LoadedData, PipelineError> {
    let dir = cfg.data_dir();
    let manifest = Manifest::load(&dir)?;
    if manifest.k != cfg.features.k {
        return Err(PipelineError::Config(format!(
            "dataset was built with k = {}, configuration says k = {}",
            manifest.k, cfg.features.k
        )));
    }
    if manifest.samples.is_empty() {
        return Err(PipelineError::Input(format!("{} lists no samples", dir.join(MANIFEST_FILE).display())));
    }
    let graph_path = dir.join(&manifest.graph);
    let (graph, labels) =
        read_graph_cache(&graph_path).map_err(|e| PipelineError::Input(format!("{}: {e}", graph_path.display())))?;
    if labels.strategy() != cfg.graph.partition {
        return Err(PipelineError::Config(format!(
            "dataset graph uses the {} partition, configuration says {}",
            labels.strategy().name(),
            cfg.graph.partition.name()
        )));
    }
    let hash = manifest.ordering_hash()?;
    let examples = manifest
        .samples
        .par_iter()
        .map(|s| {
            let path = dir.join(&s.tensor);
            let t = read_tensor(&path).map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?;
            let expected = (CHANNELS_PER_POINT * manifest.k, manifest.landmarks, s.frames);
            if t.shape() != expected || t.ordering_hash != hash || graph.nodes() != t.landmarks {
                return Err(PipelineError::Input(format!(
                    "{}: tensor shape {:?} / hash {:016x} does not match the manifest {:?} / {:016x}",
                    path.display(),
                    t.shape(),
                    t.ordering_hash,
                    expected,
                    hash
                )));
            }
            Ok(Example {
                input: Tensor3::from_features(&t),
                label: s.identity,
            })
        })
        .collect::<Result<_, PipelineError>>()?;
    Ok(LoadedData {
        manifest,
        graph,
        labels,
        examples,
    })
}

fn split_for(mode: SplitMode, keys: &[(usize, usize)], train_emotions: &[usize]) -> Result<Split, PipelineError> {
    match mode {
        SplitMode::All => Ok(Split {
            train: (0..keys.len()).collect(),
            test: (0..keys.len()).collect(),
        }),
        SplitMode::CrossEmotion | SplitMode::AllSubsets => {
            let present: BTreeSet<usize> = keys.iter().map(|k| k.1).collect();
            if let Some(e) = train_emotions.iter().find(|e| !present.contains(e)) {
                return Err(PipelineError::Config(format!("train emotion {e} does not occur in the dataset")));
            }
            cross_emotion_split(keys, train_emotions).map_err(|e| PipelineError::Input(e.to_string()))
        }
    }
}

fn pick(examples: &[Example<f32>], idx: &[usize]) -> Vec<Example<f32>> {
    idx.iter().map(|&i| examples[i].clone()).collect()
}

/// Result of `cmd_train`.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model<f32>,
    pub epochs: Vec<EpochLog>,
    pub subsets: Option<SubsetSummary>,
}

fn train_one(
    cfg: &RunConfig,
    data: &LoadedData,
    split: &Split,
    out: &Path,
    log: &mut dyn Write,
) -> Result<(Model<f32>, Vec<EpochLog>), PipelineError> {
    let m = &data.manifest;
    let arch = cfg.architecture(CHANNELS_PER_POINT * m.k, m.num_classes());
    let mut model = Model::<f32>::init(arch, data.graph.clone(), data.labels.clone(), derive_seed(&[cfg.seed, MODEL_SALT]))
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let train = pick(&data.examples, &split.train);
    let held_out = pick(&data.examples, &split.test);
    if cfg.model.standardize_input {
        model.fit_input_norm(train.iter().map(|e| &e.input)).map_err(net_error)?;
    }
    let mut meta = CheckpointMeta {
        k: m.k,
        seed: cfg.seed,
        data_seed: m.seed.unwrap_or(0),
        epoch: 0,
    };
    fs::create_dir_all(out).map_err(|e| PipelineError::io(out, e))?;
    let log_path = out.join(super::LOG_FILE);
    let mut log_file = fs::File::create(&log_path).map_err(|e| PipelineError::io(&log_path, e))?;
    let mut opt = Sgd::new(cfg.train.optimizer.clone(), &model);
    let shuffle = derive_seed(&[cfg.seed, SHUFFLE_SALT]);
    let mut logs = Vec::with_capacity(cfg.train.epochs);
    let mut best = f64::INFINITY;
    for epoch in 0..cfg.train.epochs {
        let mut entry =
            train_epoch(&mut model, &mut opt, &train, cfg.train.batch_size, epoch, shuffle).map_err(net_error)?;
        if model.params().iter().any(|(_, p)| p.iter().any(|v| !v.is_finite())) {
            return Err(PipelineError::Numerical(format!("parameters became non-finite in epoch {epoch}")));
        }
        if cfg.train.eval_each_epoch && !held_out.is_empty() {
            entry.eval_accuracy = Some(accuracy(&model, &held_out).map_err(net_error)?);
        }
        writeln!(log_file, "{entry}").map_err(|e| PipelineError::io(&log_path, e))?;
        let _ = writeln!(log, "{entry}");
        meta.epoch = epoch + 1;
        if entry.loss < best {
            best = entry.loss;
            let p = out.join("best.fgc");
            save_checkpoint(&model, &meta, &p).map_err(|e| PipelineError::Input(format!("{}: {e}", p.display())))?;
        }
        logs.push(entry);
    }
    let p = out.join("final.fgc");
    save_checkpoint(&model, &meta, &p).map_err(|e| PipelineError::Input(format!("{}: {e}", p.display())))?;
    Ok((model, logs))
}

/// Trains on the configured split of the dataset in `paths.data` and writes
/// checkpoints and the epoch log to `paths.run`.
pub fn cmd_train(cfg: &RunConfig, force: bool, log: &mut dyn Write) -> Result<TrainOutcome, PipelineError> {
    cfg.validate()?;
    let data = load_dataset(cfg)?;
    let run = cfg.run_dir();
    let _lock = OutputLock::acquire(&run)?;
    let marker = if cfg.split.mode == SplitMode::AllSubsets { "subsets.toml" } else { "final.fgc" };
    refuse_existing(&run.join(marker), force)?;
    let keys = data.keys();
    if cfg.split.mode != SplitMode::AllSubsets {
        let split = split_for(cfg.split.mode, &keys, &cfg.split.train_emotions)?;
        let (model, epochs) = train_one(cfg, &data, &split, &run, log)?;
        return Ok(TrainOutcome {
            model,
            epochs,
            subsets: None,
        });
    }
    let emotions: Vec<usize> = keys.iter().map(|k| k.1).collect::<BTreeSet<_>>().into_iter().collect();
    let mut runs = Vec::new();
    let mut last = None;
    for subset in emotion_subsets(&emotions, cfg.split.train_emotions.len()) {
        let split = split_for(SplitMode::CrossEmotion, &keys, &subset)?;
        let name: String = subset.iter().map(|e| e.to_string()).collect();
        let _ = writeln!(log, "train emotions {subset:?}");
        let (model, epochs) = train_one(cfg, &data, &split, &run.join(format!("subset_{name}")), log)?;
        let acc = accuracy(&model, &pick(&data.examples, &split.test)).map_err(net_error)?;
        runs.push(SubsetRun {
            train_emotions: subset,
            accuracy: acc,
        });
        last = Some((model, epochs));
    }
    let summary = SubsetSummary {
        mean_accuracy: runs.iter().map(|r| r.accuracy).sum::<f64>() / runs.len().max(1) as f64,
        runs,
    };
    let path = run.join("subsets.toml");
    fs::write(&path, toml::to_string(&summary).expect("summary is serializable")).map_err(|e| PipelineError::io(&path, e))?;
    let (model, epochs) = last.ok_or_else(|| PipelineError::Config("no emotion subsets to train on".into()))?;
    Ok(TrainOutcome {
        model,
        epochs,
        subsets: Some(summary),
    })
}

/// Scores `paths.checkpoint` on the configured side of the split and writes
/// the report to `paths.report`.
pub fn cmd_eval(cfg: &RunConfig) -> Result<Report, PipelineError> {
    cfg.validate()?;
    let data = load_dataset(cfg)?;
    let ckpt_path = cfg.checkpoint_path();
    let ckpt = load_checkpoint(&ckpt_path).map_err(|e| PipelineError::Input(format!("{}: {e}", ckpt_path.display())))?;
    let m = &data.manifest;
    let expected = cfg.architecture(CHANNELS_PER_POINT * m.k, m.num_classes());
    let got = ckpt.model.architecture();
    if *got != expected {
        return Err(PipelineError::ArchitectureMismatch(format!("checkpoint has {got:?}, configuration implies {expected:?}")));
    }
    if ckpt.model.graph() != &data.graph || ckpt.model.labels() != &data.labels {
        return Err(PipelineError::ArchitectureMismatch("checkpoint graph differs from the dataset graph".into()));
    }
    if ckpt.meta.k != m.k {
        return Err(PipelineError::ArchitectureMismatch(format!("checkpoint k = {}, dataset k = {}", ckpt.meta.k, m.k)));
    }
    let keys = data.keys();
    let split = split_for(cfg.split.mode, &keys, &cfg.split.train_emotions)?;
    let idx = match cfg.split.eval_side {
        Side::Train => &split.train,
        Side::Test => &split.test,
    };
    if idx.is_empty() {
        return Err(PipelineError::Input("evaluation side has no samples".into()));
    }
    let pred = predict(&ckpt.model, &pick(&data.examples, idx)).map_err(net_error)?;
    let rows: Vec<(usize, usize, usize)> = idx.iter().zip(&pred).map(|(&i, &p)| (keys[i].1, keys[i].0, p)).collect();
    let report = Report::from_predictions(&rows);
    let path = cfg.report_path();
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| PipelineError::io(parent, e))?;
    }
    fs::write(&path, report.to_toml()).map_err(|e| PipelineError::io(&path, e))?;
    Ok(report)
}

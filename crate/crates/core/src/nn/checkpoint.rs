//! FGC1 checkpoints: a `FGC1` line, `key = value` metadata lines closed by
//! `end`, then every parameter tensor followed by the input standardization
//! buffers, as little-endian f32 in declaration order. Each tensor's byte length is listed in the metadata.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Architecture, Model, NetError};
use crate::graph::{partition, PartitionStrategy, SpatialGraph};

const MAGIC: &str = "FGC1";

/// Run metadata stored next to the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CheckpointMeta {
    /// Patch size the input features were built with.
    pub k: usize,
    pub seed: u64,
    pub data_seed: u64,
    pub epoch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub meta: CheckpointMeta,
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

pub fn encode_checkpoint(model: &Model<f32>, meta: &CheckpointMeta) -> Vec<u8> {
    let arch = model.architecture();
    let edges: Vec<String> = model.graph().edges().iter().map(|(a, b)| format!("{a}-{b}")).collect();
    let mut head = String::new();
    let mut kv = |k: &str, v: String| head.push_str(&format!("{k} = {v}\n"));
    kv("in_channels", arch.in_channels.to_string());
    kv("widths", join(&arch.widths));
    kv("strides", join(&arch.strides));
    kv("kernel", arch.kernel.to_string());
    kv("num_classes", arch.num_classes.to_string());
    kv("residual", arch.residual.to_string());
    kv("bias", arch.bias.to_string());
    kv("nodes", model.nodes().to_string());
    kv("partition", model.labels().strategy().name().to_string());
    kv("partitions", model.labels().partitions().to_string());
    kv("edges", edges.join(" "));
    kv("k", meta.k.to_string());
    kv("seed", meta.seed.to_string());
    kv("data_seed", meta.data_seed.to_string());
    kv("epoch", meta.epoch.to_string());
    let mut params = model.params();
    params.extend(model.buffers());
    for (name, p) in &params {
        kv("tensor", format!("{name} {}", p.len() * 4));
    }
    let mut out = format!("{MAGIC}\n{head}end\n").into_bytes();
    for (_, p) in params {
        for v in p {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, NetError> {
    let bad = |m: String| NetError::Checkpoint(m);
    let mut pos = 0;
    let mut next_line = || -> Result<&str, NetError> {
        let rest = &bytes[pos..];
        let n = rest.iter().position(|&b| b == b'\n').ok_or_else(|| bad("truncated header".into()))?;
        pos += n + 1;
        std::str::from_utf8(&rest[..n]).map_err(|_| bad("header is not UTF-8".into()))
    };
    if next_line()? != MAGIC {
        return Err(bad("missing FGC1 magic".into()));
    }
    let mut fields: Vec<(String, String)> = Vec::new();
    loop {
        let line = next_line()?;
        if line == "end" {
            break;
        }
        let (k, v) = line
            .split_once(" = ")
            .ok_or_else(|| bad(format!("malformed metadata line `{line}`")))?;
        fields.push((k.to_string(), v.to_string()));
    }
    let get = |key: &str| -> Result<&str, NetError> {
        fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| bad(format!("missing `{key}`")))
    };
    fn num<T: std::str::FromStr>(key: &str, s: &str) -> Result<T, NetError> {
        s.parse().map_err(|_| NetError::Checkpoint(format!("bad value for `{key}`: `{s}`")))
    }
    let list = |key: &str| -> Result<Vec<usize>, NetError> {
        get(key)?.split_whitespace().map(|s| num(key, s)).collect()
    };
    let flag = |key: &str| -> Result<bool, NetError> { num(key, get(key)?) };

    let arch = Architecture {
        in_channels: num("in_channels", get("in_channels")?)?,
        widths: list("widths")?,
        strides: list("strides")?,
        kernel: num("kernel", get("kernel")?)?,
        num_classes: num("num_classes", get("num_classes")?)?,
        residual: flag("residual")?,
        bias: flag("bias")?,
    };
    let nodes: usize = num("nodes", get("nodes")?)?;
    let strategy = PartitionStrategy::from_name(get("partition")?)
        .ok_or_else(|| bad(format!("unknown partition strategy `{}`", get("partition").unwrap_or(""))))?;
    let partitions: usize = num("partitions", get("partitions")?)?;
    if partitions != strategy.partitions() {
        return Err(bad(format!("{partitions} partitions for strategy {}", strategy.name())));
    }
    let mut edges = Vec::new();
    for tok in get("edges")?.split_whitespace() {
        let (a, b) = tok.split_once('-').ok_or_else(|| bad(format!("bad edge `{tok}`")))?;
        edges.push((num::<usize>("edges", a)?, num::<usize>("edges", b)?));
    }
    let graph = SpatialGraph::from_edges(nodes, &edges).map_err(|e| bad(e.to_string()))?;
    let labels = partition(&graph, strategy);
    let meta = CheckpointMeta {
        k: num("k", get("k")?)?,
        seed: num("seed", get("seed")?)?,
        data_seed: num("data_seed", get("data_seed")?)?,
        epoch: num("epoch", get("epoch")?)?,
    };
    let declared: Vec<(&str, usize)> = fields
        .iter()
        .filter(|(k, _)| k == "tensor")
        .map(|(_, v)| {
            let (name, len) = v.rsplit_once(' ').ok_or_else(|| bad(format!("bad tensor entry `{v}`")))?;
            Ok((name, num("tensor", len)?))
        })
        .collect::<Result<_, NetError>>()?;

    let mut model = Model::<f32>::zeros(arch, graph, labels)?;
    let names: Vec<(String, usize)> = model.params().iter().chain(&model.buffers()).map(|(n, p)| (n.clone(), p.len() * 4)).collect();
    if names.len() != declared.len() || names.iter().zip(&declared).any(|((n, l), (dn, dl))| n != dn || l != dl) {
        return Err(bad("declared tensors do not match the architecture".into()));
    }
    let payload = &bytes[pos..];
    let total: usize = names.iter().map(|(_, l)| l).sum();
    if payload.len() != total {
        return Err(bad(format!("payload has {} bytes, expected {total}", payload.len())));
    }
    let mut off = 0;
    let mut fill = |dst: &mut [f32]| {
        for v in dst.iter_mut() {
            *v = f32::from_le_bytes(payload[off..off + 4].try_into().unwrap());
            off += 4;
        }
    };
    model.params_mut().into_iter().for_each(&mut fill);
    model.buffers_mut().into_iter().for_each(&mut fill);
    Ok(Checkpoint { model, meta })
}

pub fn save_checkpoint(model: &Model<f32>, meta: &CheckpointMeta, path: impl AsRef<Path>) -> Result<(), NetError> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_checkpoint(model, meta))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, NetError> {
    decode_checkpoint(&fs::read(path)?)
}

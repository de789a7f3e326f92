//! `FGG1` text graph cache: a header line `FGG1 J P strategy` followed by one
//! `i j label` line per labeled pair.

use std::io::Write;
use std::path::Path;

use super::{GraphError, PartitionLabels, PartitionStrategy, SpatialGraph};

pub fn write_graph_cache_to<W: Write>(labels: &PartitionLabels, mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "FGG1 {} {} {}",
        labels.nodes(),
        labels.partitions(),
        labels.strategy().name()
    )?;
    for (i, j, l) in labels.pairs() {
        writeln!(w, "{i} {j} {l}")?;
    }
    Ok(())
}

pub fn write_graph_cache(labels: &PartitionLabels, path: impl AsRef<Path>) -> std::io::Result<()> {
    let mut buf = Vec::new();
    write_graph_cache_to(labels, &mut buf)?;
    std::fs::write(path, buf)
}

fn err(line: usize, message: impl Into<String>) -> GraphError {
    GraphError::Parse {
        line,
        message: message.into(),
    }
}

/// Parses a cache back into the graph and its labels. The labels must be
/// exactly what `partition` produces for the recovered graph.
pub fn parse_graph_cache(text: &str) -> Result<(SpatialGraph, PartitionLabels), GraphError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty graph cache"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 4 || toks[0] != "FGG1" {
        return Err(err(1, "expected `FGG1 J P strategy`"));
    }
    let j: usize = toks[1].parse().map_err(|_| err(1, "bad node count"))?;
    let p: usize = toks[2].parse().map_err(|_| err(1, "bad partition count"))?;
    let strategy = PartitionStrategy::from_name(toks[3]).ok_or_else(|| err(1, format!("unknown strategy `{}`", toks[3])))?;
    if strategy.partitions() != p {
        return Err(err(1, format!("strategy {} has {} partitions, header says {p}", toks[3], strategy.partitions())));
    }
    let mut seen = Vec::new();
    for (ln, raw) in lines {
        let line = ln + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let vals: Vec<usize> = raw
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| err(line, format!("bad integer `{t}`"))))
            .collect::<Result<_, _>>()?;
        if vals.len() != 3 {
            return Err(err(line, "expected `i j label`"));
        }
        if vals[0] >= j || vals[1] >= j {
            return Err(err(line, "node id out of range"));
        }
        seen.push((line, vals[0], vals[1], vals[2]));
    }
    let mut graph = SpatialGraph::new(j);
    for &(_, a, b, _) in &seen {
        graph.add_edge(a, b)?;
    }
    let labels = super::partition(&graph, strategy);
    let expected = labels.pairs();
    if expected.len() != seen.len() {
        return Err(err(0, format!("expected {} labeled pairs, found {}", expected.len(), seen.len())));
    }
    for (&(line, a, b, l), &(ea, eb, el)) in seen.iter().zip(&expected) {
        if (a, b, l) != (ea, eb, el) {
            return Err(err(line, format!("expected `{ea} {eb} {el}`")));
        }
    }
    Ok((graph, labels))
}

pub fn read_graph_cache(path: impl AsRef<Path>) -> Result<(SpatialGraph, PartitionLabels), GraphError> {
    parse_graph_cache(&std::fs::read_to_string(path)?)
}

//! Shortest paths on the face-edge graph and their arc-length midpoints.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::LandmarkError;
use crate::mesh::EdgeGraph;

/// A vertex path on the mesh with cumulative arc lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicPath {
    pub vertices: Vec<usize>,
    pub cumulative: Vec<f64>,
}

impl GeodesicPath {
    pub fn total_length(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    /// Longest single edge along the path.
    pub fn max_edge_length(&self) -> f64 {
        self.cumulative
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, PartialEq)]
struct Frontier {
    dist: f64,
    vertex: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra from `src`, stopping once `dst` is settled. Returns per-vertex
/// distances and predecessors; equal-length alternatives keep the smaller
/// predecessor index.
fn dijkstra(graph: &EdgeGraph, src: usize, dst: usize) -> (Vec<f64>, Vec<usize>) {
    let n = graph.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(Frontier { dist: 0.0, vertex: src });
    while let Some(Frontier { dist: d, vertex: u }) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        if u == dst {
            break;
        }
        for &(v, w) in graph.neighbors(u) {
            if done[v] {
                continue;
            }
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                pred[v] = u;
                heap.push(Frontier { dist: nd, vertex: v });
            } else if nd == dist[v] && u < pred[v] {
                pred[v] = u;
            }
        }
    }
    (dist, pred)
}

/// Shortest path from `src` to `dst` along mesh edges.
///
/// The search always runs from the smaller of the two endpoints, so the
/// reported total length is identical in both directions.
pub fn geodesic_path(graph: &EdgeGraph, src: usize, dst: usize) -> Result<GeodesicPath, LandmarkError> {
    let n = graph.node_count();
    for v in [src, dst] {
        if v >= n {
            return Err(LandmarkError::VertexOutOfRange { vertex: v, count: n });
        }
    }
    if src == dst {
        return Ok(GeodesicPath {
            vertices: vec![src],
            cumulative: vec![0.0],
        });
    }
    let (lo, hi) = (src.min(dst), src.max(dst));
    let (dist, pred) = dijkstra(graph, lo, hi);
    if !dist[hi].is_finite() {
        return Err(LandmarkError::Unreachable { src, dst });
    }
    let mut vertices = vec![hi];
    let mut v = hi;
    while v != lo {
        v = pred[v];
        vertices.push(v);
    }
    vertices.reverse();
    let total = dist[hi];
    let (vertices, cumulative) = if src == lo {
        let cum = vertices.iter().map(|&v| dist[v]).collect();
        (vertices, cum)
    } else {
        vertices.reverse();
        let cum = vertices.iter().map(|&v| total - dist[v]).collect();
        (vertices, cum)
    };
    Ok(GeodesicPath { vertices, cumulative })
}

/// The path vertex whose arc length is closest to half the total length.
/// Ties go to the earlier vertex.
pub fn geodesic_midpoint(path: &GeodesicPath) -> Result<usize, LandmarkError> {
    let total = path.total_length();
    if path.vertices.len() < 2 || total <= 0.0 {
        return Err(LandmarkError::DegeneratePath);
    }
    let half = total / 2.0;
    let mut best = 0;
    let mut best_gap = f64::INFINITY;
    for (i, &c) in path.cumulative.iter().enumerate() {
        let gap = (c - half).abs();
        if gap < best_gap {
            best = i;
            best_gap = gap;
        }
    }
    Ok(path.vertices[best])
}

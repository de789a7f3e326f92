//! Landmark ingestion (UV lift or 3D snap) and geodesic-midpoint augmentation.

mod geodesic;

use std::path::Path;

pub use geodesic::{geodesic_midpoint, geodesic_path, GeodesicPath};

use crate::hash::Fnv1a;
use crate::mesh::{EdgeGraph, TexturedMesh};
use crate::patch::KdIndex;

/// Number of landmarks in the standard 68-point facial convention.
pub const DEFAULT_BASE_COUNT: usize = 68;

/// Default augmentation pairs over the 68-point convention. Each pair joins a
/// jaw-contour point to a nose, eye-corner or mouth-corner point so that the
/// geodesic midpoints land on the cheeks.
pub const DEFAULT_AUGMENT_PAIRS: [(usize, usize); 15] = [
    (0, 36),
    (1, 41),
    (2, 31),
    (3, 48),
    (4, 48),
    (5, 31),
    (16, 45),
    (15, 46),
    (14, 35),
    (13, 54),
    (12, 54),
    (11, 35),
    (2, 39),
    (14, 42),
    (8, 57),
];

#[derive(Debug, thiserror::Error)]
pub enum LandmarkError {
    #[error("mesh has no texture coordinates")]
    MissingUv,
    #[error("no landmark points given")]
    EmptyInput,
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("vertex {dst} is unreachable from vertex {src}")]
    Unreachable { src: usize, dst: usize },
    #[error("path has zero length")]
    DegeneratePath,
    #[error("pair ({0}, {1}) does not name two distinct base landmarks")]
    InvalidPair(usize, usize),
    #[error("vertex {vertex} out of range for {count} vertices")]
    VertexOutOfRange { vertex: usize, count: usize },
    #[error("mesh has no vertices")]
    EmptyMesh,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LandmarkKind {
    Base,
    Augmented,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Landmark {
    pub id: usize,
    pub anchor: usize,
    pub position: [f64; 3],
    pub kind: LandmarkKind,
    /// Base ids this landmark interpolates; only set for augmented entries.
    pub sources: Option<(usize, usize)>,
}

/// Ordered landmarks: all base entries first, then augmented ones, with dense
/// ids `0..len`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LandmarkSet {
    entries: Vec<Landmark>,
}

impl LandmarkSet {
    /// Base landmarks anchored at the given mesh vertices.
    pub fn from_anchors(mesh: &TexturedMesh, anchors: &[usize]) -> Result<Self, LandmarkError> {
        if anchors.is_empty() {
            return Err(LandmarkError::EmptyInput);
        }
        let n = mesh.vertex_count();
        let entries = anchors
            .iter()
            .enumerate()
            .map(|(id, &anchor)| {
                if anchor >= n {
                    return Err(LandmarkError::VertexOutOfRange { vertex: anchor, count: n });
                }
                Ok(Landmark {
                    id,
                    anchor,
                    position: mesh.vertices[anchor],
                    kind: LandmarkKind::Base,
                    sources: None,
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(LandmarkSet { entries })
    }

    pub fn entries(&self) -> &[Landmark] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn base_count(&self) -> usize {
        self.entries
            .iter()
            .take_while(|l| l.kind == LandmarkKind::Base)
            .count()
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        self.entries.iter().map(|l| l.position).collect()
    }

    pub fn anchors(&self) -> Vec<usize> {
        self.entries.iter().map(|l| l.anchor).collect()
    }

    /// Fingerprint of the landmark ordering: ids, kinds and augmentation
    /// sources. Anchors and positions are excluded since they move per frame.
    pub fn ordering_hash(&self) -> u64 {
        let mut h = Fnv1a::default();
        h.write_u64(self.entries.len() as u64);
        for l in &self.entries {
            h.write_u64(l.id as u64);
            match (l.kind, l.sources) {
                (LandmarkKind::Base, _) => h.write(&[0]),
                (LandmarkKind::Augmented, Some((a, b))) => {
                    h.write(&[1]);
                    h.write_u64(a as u64);
                    h.write_u64(b as u64);
                }
                (LandmarkKind::Augmented, None) => h.write(&[2]),
            }
        }
        h.finish()
    }
}

/// Anchors each UV point at the vertex with the nearest texture coordinate
/// (lowest vertex index on ties).
pub fn lift_landmarks(mesh: &TexturedMesh, uv_points: &[[f64; 2]]) -> Result<LandmarkSet, LandmarkError> {
    let uv = mesh.uv.as_ref().ok_or(LandmarkError::MissingUv)?;
    if uv_points.is_empty() {
        return Err(LandmarkError::EmptyInput);
    }
    if uv.is_empty() {
        return Err(LandmarkError::EmptyMesh);
    }
    let anchors: Vec<usize> = uv_points
        .iter()
        .map(|q| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (i, t) in uv.iter().enumerate() {
                let du = t[0] - q[0];
                let dv = t[1] - q[1];
                let d = du * du + dv * dv;
                if d < best_d {
                    best = i;
                    best_d = d;
                }
            }
            best
        })
        .collect();
    LandmarkSet::from_anchors(mesh, &anchors)
}

/// Anchors each 3D point at its nearest mesh vertex. Points far outside the
/// mesh are still snapped.
pub fn snap_to_mesh(mesh: &TexturedMesh, points: &[[f64; 3]]) -> Result<LandmarkSet, LandmarkError> {
    if points.is_empty() {
        return Err(LandmarkError::EmptyInput);
    }
    let index = KdIndex::build(&mesh.vertices).map_err(|_| LandmarkError::EmptyMesh)?;
    let anchors: Vec<usize> = points.iter().map(|p| index.nearest(p)).collect();
    LandmarkSet::from_anchors(mesh, &anchors)
}

fn parse_points<const D: usize>(text: &str) -> Result<Vec<[f64; D]>, LandmarkError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks.len() != D {
            return Err(LandmarkError::Parse {
                line: i + 1,
                message: format!("expected {D} values, got {}", toks.len()),
            });
        }
        let mut p = [0.0; D];
        for (slot, tok) in p.iter_mut().zip(&toks) {
            *slot = tok
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| LandmarkError::Parse {
                    line: i + 1,
                    message: format!("invalid number `{tok}`"),
                })?;
        }
        out.push(p);
    }
    if out.is_empty() {
        return Err(LandmarkError::EmptyInput);
    }
    Ok(out)
}

/// Parses `u v` lines; values must lie in `[0, 1]`.
pub fn parse_landmarks_2d(text: &str) -> Result<Vec<[f64; 2]>, LandmarkError> {
    let pts = parse_points::<2>(text)?;
    if let Some(i) = pts.iter().position(|p| p.iter().any(|x| !(0.0..=1.0).contains(x))) {
        return Err(LandmarkError::Parse {
            line: i + 1,
            message: "uv coordinate outside [0,1]".into(),
        });
    }
    Ok(pts)
}

pub fn parse_landmarks_3d(text: &str) -> Result<Vec<[f64; 3]>, LandmarkError> {
    parse_points::<3>(text)
}

pub fn load_landmarks_2d(path: impl AsRef<Path>) -> Result<Vec<[f64; 2]>, LandmarkError> {
    parse_landmarks_2d(&std::fs::read_to_string(path)?)
}

pub fn load_landmarks_3d(path: impl AsRef<Path>) -> Result<Vec<[f64; 3]>, LandmarkError> {
    parse_landmarks_3d(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    Unreachable,
    /// Both base landmarks share one anchor vertex.
    ZeroLength,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AugmentReport {
    pub skipped: Vec<((usize, usize), SkipReason)>,
}

/// Appends one landmark per pair at the geodesic midpoint between the two base
/// landmarks. Pairs that cannot be joined are skipped and reported.
pub fn augment_landmarks(
    mesh: &TexturedMesh,
    graph: &EdgeGraph,
    base: &LandmarkSet,
    pairs: &[(usize, usize)],
) -> Result<(LandmarkSet, AugmentReport), LandmarkError> {
    if base.is_empty() {
        return Err(LandmarkError::EmptyInput);
    }
    let nbase = base.base_count();
    let base_entries = &base.entries[..nbase];
    for &(a, b) in pairs {
        if a >= nbase || b >= nbase || a == b {
            return Err(LandmarkError::InvalidPair(a, b));
        }
    }
    let mut entries = base_entries.to_vec();
    let mut report = AugmentReport::default();
    for &(a, b) in pairs {
        let (src, dst) = (base_entries[a].anchor, base_entries[b].anchor);
        let path = match geodesic_path(graph, src, dst) {
            Ok(p) => p,
            Err(LandmarkError::Unreachable { .. }) => {
                report.skipped.push(((a, b), SkipReason::Unreachable));
                continue;
            }
            Err(e) => return Err(e),
        };
        let anchor = match geodesic_midpoint(&path) {
            Ok(v) => v,
            Err(LandmarkError::DegeneratePath) => {
                report.skipped.push(((a, b), SkipReason::ZeroLength));
                continue;
            }
            Err(e) => return Err(e),
        };
        entries.push(Landmark {
            id: entries.len(),
            anchor,
            position: mesh.vertices[anchor],
            kind: LandmarkKind::Augmented,
            sources: Some((a, b)),
        });
    }
    Ok((LandmarkSet { entries }, report))
}

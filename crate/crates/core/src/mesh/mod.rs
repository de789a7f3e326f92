//! Textured triangle meshes, their validation, and the face-edge graph used
//! for surface shortest paths.

mod io;

use std::fmt;

pub use io::{load_mesh, read_obj, read_ply, write_obj, write_obj_to, write_ply, write_ply_to, MeshFormat};

/// Mid-gray assigned to every vertex when the source file carries no color.
pub const DEFAULT_COLOR: [f64; 3] = [0.5, 0.5, 0.5];

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("mesh violates {} invariant(s); first: {}", .0.len(), .0[0])]
    Invariant(Vec<Violation>),
    #[error("edge {0}-{1} has zero length (coincident vertices)")]
    ZeroLengthEdge(usize, usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MeshError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        MeshError::Parse {
            line,
            message: message.into(),
        }
    }
}

/// One frame of a raw scan: positions, triangles, per-vertex color and
/// optional texture coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TexturedMesh {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
    pub colors: Vec<[f64; 3]>,
    pub uv: Option<Vec<[f64; 2]>>,
}

impl TexturedMesh {
    /// Builds a mesh and checks every invariant.
    pub fn new(
        vertices: Vec<[f64; 3]>,
        faces: Vec<[usize; 3]>,
        colors: Option<Vec<[f64; 3]>>,
        uv: Option<Vec<[f64; 2]>>,
    ) -> Result<Self, MeshError> {
        let colors = colors.unwrap_or_else(|| vec![DEFAULT_COLOR; vertices.len()]);
        let mesh = TexturedMesh {
            vertices,
            faces,
            colors,
            uv,
        };
        let report = validate_mesh(&mesh);
        if report.is_valid() {
            Ok(mesh)
        } else {
            Err(MeshError::Invariant(report.violations))
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Returns a copy with every vertex shifted by `offset`.
    pub fn translated(&self, offset: [f64; 3]) -> Self {
        let mut out = self.clone();
        for v in &mut out.vertices {
            for (x, o) in v.iter_mut().zip(offset) {
                *x += o;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    FaceIndexOutOfRange { face: usize, index: usize },
    DegenerateFace { face: usize },
    NonFiniteVertex { vertex: usize },
    NonFiniteColor { vertex: usize },
    ColorOutOfRange { vertex: usize },
    NonFiniteUv { vertex: usize },
    ColorCountMismatch { colors: usize, vertices: usize },
    UvCountMismatch { uv: usize, vertices: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::FaceIndexOutOfRange { face, index } => {
                write!(f, "face {face} references missing vertex {index}")
            }
            Violation::DegenerateFace { face } => write!(f, "face {face} repeats a vertex"),
            Violation::NonFiniteVertex { vertex } => {
                write!(f, "vertex {vertex} has a NaN/Inf coordinate")
            }
            Violation::NonFiniteColor { vertex } => write!(f, "vertex {vertex} has a NaN/Inf color"),
            Violation::ColorOutOfRange { vertex } => {
                write!(f, "vertex {vertex} has a color outside [0,1]")
            }
            Violation::NonFiniteUv { vertex } => write!(f, "vertex {vertex} has a NaN/Inf uv"),
            Violation::ColorCountMismatch { colors, vertices } => {
                write!(f, "{colors} colors for {vertices} vertices")
            }
            Violation::UvCountMismatch { uv, vertices } => {
                write!(f, "{uv} uv coordinates for {vertices} vertices")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every invariant violation of `mesh`. An empty report means the mesh
/// is safe to hand to any downstream operation.
pub fn validate_mesh(mesh: &TexturedMesh) -> ValidationReport {
    let n = mesh.vertices.len();
    let mut violations = Vec::new();

    for (i, v) in mesh.vertices.iter().enumerate() {
        if v.iter().any(|x| !x.is_finite()) {
            violations.push(Violation::NonFiniteVertex { vertex: i });
        }
    }
    if mesh.colors.len() != n {
        violations.push(Violation::ColorCountMismatch {
            colors: mesh.colors.len(),
            vertices: n,
        });
    }
    for (i, c) in mesh.colors.iter().enumerate() {
        if c.iter().any(|x| !x.is_finite()) {
            violations.push(Violation::NonFiniteColor { vertex: i });
        } else if c.iter().any(|x| !(0.0..=1.0).contains(x)) {
            violations.push(Violation::ColorOutOfRange { vertex: i });
        }
    }
    if let Some(uv) = &mesh.uv {
        if uv.len() != n {
            violations.push(Violation::UvCountMismatch {
                uv: uv.len(),
                vertices: n,
            });
        }
        for (i, t) in uv.iter().enumerate() {
            if t.iter().any(|x| !x.is_finite()) {
                violations.push(Violation::NonFiniteUv { vertex: i });
            }
        }
    }
    for (fi, f) in mesh.faces.iter().enumerate() {
        for &idx in f {
            if idx >= n {
                violations.push(Violation::FaceIndexOutOfRange { face: fi, index: idx });
            }
        }
        if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
            violations.push(Violation::DegenerateFace { face: fi });
        }
    }
    ValidationReport { violations }
}

pub(crate) fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    squared_distance(a, b).sqrt()
}

pub(crate) fn squared_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Undirected face-edge graph with Euclidean edge lengths.
///
/// Neighbor lists are stored in CSR form and sorted by neighbor index.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeGraph {
    node_count: usize,
    edges: Vec<(usize, usize, f64)>,
    offsets: Vec<usize>,
    neighbors: Vec<(usize, f64)>,
}

impl EdgeGraph {
    /// Builds a graph from an explicit edge list. Duplicate and self edges are
    /// rejected by construction of the callers; this only sorts and indexes.
    fn from_edges(node_count: usize, mut edges: Vec<(usize, usize, f64)>) -> Self {
        edges.sort_by_key(|e| (e.0, e.1));
        let mut degree = vec![0usize; node_count];
        for &(a, b, _) in &edges {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut offsets = Vec::with_capacity(node_count + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..node_count].to_vec();
        let mut neighbors = vec![(0usize, 0.0f64); offsets[node_count]];
        for &(a, b, w) in &edges {
            neighbors[cursor[a]] = (b, w);
            cursor[a] += 1;
            neighbors[cursor[b]] = (a, w);
            cursor[b] += 1;
        }
        for v in 0..node_count {
            neighbors[offsets[v]..offsets[v + 1]].sort_by_key(|&(u, _)| u);
        }
        EdgeGraph {
            node_count,
            edges,
            offsets,
            neighbors,
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(a, b, length)` with `a < b`, sorted.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Length of the edge `a`-`b`, if it exists.
    pub fn edge_length(&self, a: usize, b: usize) -> Option<f64> {
        let list = self.neighbors(a);
        list.binary_search_by_key(&b, |&(u, _)| u)
            .ok()
            .map(|i| list[i].1)
    }
}

/// One undirected edge per distinct face edge, weighted by Euclidean length.
pub fn build_edge_graph(mesh: &TexturedMesh) -> Result<EdgeGraph, MeshError> {
    let report = validate_mesh(mesh);
    if !report.is_valid() {
        return Err(MeshError::Invariant(report.violations));
    }
    let mut pairs: Vec<(usize, usize)> = mesh
        .faces
        .iter()
        .flat_map(|f| [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])])
        .map(|(a, b)| if a < b { (a, b) } else { (b, a) })
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    let mut edges = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        let w = distance(&mesh.vertices[a], &mesh.vertices[b]);
        if w <= 0.0 {
            return Err(MeshError::ZeroLengthEdge(a, b));
        }
        edges.push((a, b, w));
    }
    Ok(EdgeGraph::from_edges(mesh.vertices.len(), edges))
}

/// A flat `nx` by `ny` vertex grid in the z = 0 plane with spacing `step`,
/// each cell split into two triangles along the same diagonal.
pub fn grid_mesh(nx: usize, ny: usize, step: f64) -> TexturedMesh {
    let mut vertices = Vec::with_capacity(nx * ny);
    let mut uv = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            vertices.push([ix as f64 * step, iy as f64 * step, 0.0]);
            uv.push([
                ix as f64 / (nx.max(2) - 1) as f64,
                iy as f64 / (ny.max(2) - 1) as f64,
            ]);
        }
    }
    TexturedMesh {
        colors: vec![DEFAULT_COLOR; vertices.len()],
        vertices,
        faces: grid_faces(nx, ny),
        uv: Some(uv),
    }
}

pub(crate) fn grid_faces(nx: usize, ny: usize) -> Vec<[usize; 3]> {
    let mut faces = Vec::with_capacity(2 * nx.saturating_sub(1) * ny.saturating_sub(1));
    for iy in 0..ny.saturating_sub(1) {
        for ix in 0..nx.saturating_sub(1) {
            let v00 = iy * nx + ix;
            let v10 = v00 + 1;
            let v01 = v00 + nx;
            let v11 = v01 + 1;
            faces.push([v00, v10, v11]);
            faces.push([v00, v11, v01]);
        }
    }
    faces
}

//! Procedural face-like mesh sequences with separate identity and expression
//! factors, and the cross-emotion split used for evaluation.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::{build_spatial_edges, partition, EdgeStrategy, GraphError, PartitionLabels, PartitionStrategy, SpatialGraph};
use crate::hash::Fnv1a;
use crate::landmarks::{augment_landmarks, LandmarkError, LandmarkSet};
use crate::mesh::{build_edge_graph, grid_faces, MeshError, TexturedMesh};
use crate::patch::{build_sequence_tensor, FeatureTensor, PatchError, PatchOptions};

pub const EMOTIONS: usize = 6;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("identities are not separable: inter-identity distance {inter:.5} <= intra-identity distance {intra:.5}")]
    NotSeparable { inter: f64, intra: f64 },
    #[error("the {0} side of the split would be empty")]
    EmptySide(&'static str),
    #[error("identity {identity} has no samples on the {side} side")]
    MissingIdentity { identity: usize, side: &'static str },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Landmark(#[from] LandmarkError),
    #[error(transparent)]
    Patch(#[from] PatchError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Grid of `nx * ny` vertices draped over the front of an ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    /// Semi-axes along x (width), y (height) and z (depth).
    pub radii: [f64; 3],
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            nx: 24,
            ny: 24,
            radii: [1.0, 1.3, 0.8],
        }
    }
}

impl GridSpec {
    fn validate(&self) -> Result<(), SynthError> {
        if self.nx < 2 || self.ny < 2 {
            return Err(SynthError::Config(format!("grid {}x{} needs at least 2x2 vertices", self.nx, self.ny)));
        }
        if self.radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(SynthError::Config("ellipsoid radii must be positive".into()));
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.nx * self.ny
    }

    fn uv(&self, v: usize) -> [f64; 2] {
        let (i, j) = (v % self.nx, v / self.nx);
        [i as f64 / (self.nx - 1) as f64, j as f64 / (self.ny - 1) as f64]
    }
}

/// Gaussian bump in texture space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; 2],
    pub width: f64,
    pub amplitude: f64,
}

impl Bump {
    fn at(&self, uv: [f64; 2]) -> f64 {
        let du = uv[0] - self.center[0];
        let dv = uv[1] - self.center[1];
        self.amplitude * (-(du * du + dv * dv) / (2.0 * self.width * self.width)).exp()
    }
}

/// Mixes a list of integers into one seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h = Fnv1a::default();
    for &p in parts {
        h.write_u64(p);
    }
    h.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityParams {
    pub seed: u64,
    pub grid: GridSpec,
    /// Per-identity scaling of the ellipsoid axes.
    pub radii: [f64; 3],
    /// Displacement along the surface normal.
    pub bumps: Vec<Bump>,
    /// Colors of the forehead, eye, cheek/nose and mouth/chin bands.
    pub palette: [[f64; 3]; 4],
    /// Amplitude of a smooth color ripple on top of the palette.
    pub ripple: [f64; 3],
}

impl IdentityParams {
    pub fn from_seed(seed: u64, grid: GridSpec, amplitude: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let radii = grid.radii.map(|r| r * rng.gen_range(0.9..1.1));
        let bumps = (0..10)
            .map(|_| Bump {
                center: [rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9)],
                width: rng.gen_range(0.08..0.2),
                amplitude: amplitude * rng.gen_range(-1.0..1.0),
            })
            .collect();
        let mut palette = [[0.0; 3]; 4];
        for c in palette.iter_mut().flatten() {
            *c = rng.gen_range(0.2..0.8);
        }
        let ripple = [(); 3].map(|_| rng.gen_range(0.0..0.1));
        IdentityParams {
            seed,
            grid,
            radii,
            bumps,
            palette,
            ripple,
        }
    }

    fn color(&self, uv: [f64; 2]) -> [f64; 3] {
        let band = ((uv[1] * 4.0) as usize).min(3);
        let base = self.palette[3 - band];
        let wave = (uv[0] * 9.0).sin() * (uv[1] * 7.0).cos();
        [0, 1, 2].map(|c| (base[c] + self.ripple[c] * wave).clamp(0.0, 1.0))
    }
}

/// Emotion-specific deformation: bumps around the mouth, eyes and brows whose
/// amplitude follows `sin(pi t / (T - 1))`, zero at the first and last frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpressionParams {
    pub emotion: usize,
    pub seed: u64,
    pub bumps: Vec<Bump>,
}

const MOUTH: [f64; 2] = [0.5, 0.22];
const LEFT_EYE: [f64; 2] = [0.32, 0.62];
const RIGHT_EYE: [f64; 2] = [0.68, 0.62];
const BROWS: [f64; 2] = [0.5, 0.78];

impl ExpressionParams {
    pub fn new(emotion: usize, seed: u64, amplitude: f64) -> Result<Self, SynthError> {
        if emotion >= EMOTIONS {
            return Err(SynthError::Config(format!("emotion {emotion} out of range 0..{EMOTIONS}")));
        }
        // (mouth, eyes, brows) signed strengths per emotion
        const TEMPLATES: [[f64; 3]; EMOTIONS] = [
            [1.0, -0.3, 0.2],
            [-0.8, 0.5, 0.9],
            [0.6, 0.8, -0.7],
            [-0.5, -0.6, -0.4],
            [0.9, 0.2, 0.8],
            [-1.0, -0.2, 0.5],
        ];
        let [m, e, b] = TEMPLATES[emotion];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut jitter = |c: [f64; 2]| [c[0] + rng.gen_range(-0.03..0.03), c[1] + rng.gen_range(-0.03..0.03)];
        let bumps = vec![
            Bump {
                center: jitter(MOUTH),
                width: 0.1,
                amplitude: amplitude * m,
            },
            Bump {
                center: jitter(LEFT_EYE),
                width: 0.07,
                amplitude: amplitude * e,
            },
            Bump {
                center: jitter(RIGHT_EYE),
                width: 0.07,
                amplitude: amplitude * e,
            },
            Bump {
                center: jitter(BROWS),
                width: 0.09,
                amplitude: amplitude * b,
            },
        ];
        Ok(ExpressionParams { emotion, seed, bumps })
    }

    pub fn envelope(t: usize, frames: usize) -> f64 {
        if t == 0 || t + 1 >= frames {
            return 0.0;
        }
        (std::f64::consts::PI * t as f64 / (frames - 1) as f64).sin()
    }
}

/// Base landmarks are every `spacing`-th vertex of the grid, skipping a border.
pub fn grid_landmark_anchors(grid: &GridSpec, spacing: usize) -> Vec<usize> {
    let spacing = spacing.max(1);
    let axis = |n: usize| -> Vec<usize> {
        let count = (n.saturating_sub(1)) / spacing;
        let span = count.saturating_sub(1) * spacing;
        let start = (n - 1 - span) / 2;
        (0..count.max(1)).map(|i| start + i * spacing).collect()
    };
    let (xs, ys) = (axis(grid.nx), axis(grid.ny));
    ys.iter().flat_map(|&y| xs.iter().map(move |&x| y * grid.nx + x)).collect()
}

/// Pairs of base landmarks (indices into the grid sample) bridged by
/// augmentation: diagonal links across each row of the landmark lattice.
pub fn grid_augment_pairs(grid: &GridSpec, spacing: usize, count: usize) -> Vec<(usize, usize)> {
    let n = grid_landmark_anchors(grid, spacing).len();
    let cols = {
        let spacing = spacing.max(1);
        ((grid.nx.saturating_sub(1)) / spacing).max(1)
    };
    let rows = n / cols;
    let mut pairs = Vec::new();
    for r in 0..rows.saturating_sub(1) {
        for c in (0..cols.saturating_sub(1)).step_by(2) {
            pairs.push((r * cols + c, (r + 1) * cols + c + 1));
        }
    }
    pairs.truncate(count);
    pairs
}

/// Vertex positions of one frame.
pub fn frame_vertices(identity: &IdentityParams, expr: &ExpressionParams, weight: f64) -> Vec<[f64; 3]> {
    let grid = identity.grid;
    let [rx, ry, rz] = identity.radii;
    (0..grid.vertex_count())
        .map(|v| {
            let uv = grid.uv(v);
            let theta = (uv[0] - 0.5) * 2.0;
            let phi = (uv[1] - 0.5) * 1.6;
            let dir = [theta.sin() * phi.cos(), phi.sin(), theta.cos() * phi.cos()];
            let normal = {
                let n = [dir[0] / rx, dir[1] / ry, dir[2] / rz];
                let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
                n.map(|x| x / len)
            };
            let id: f64 = identity.bumps.iter().map(|b| b.at(uv)).sum();
            let ex: f64 = expr.bumps.iter().map(|b| b.at(uv)).sum();
            let d = id + weight * ex;
            [
                rx * dir[0] + d * normal[0],
                ry * dir[1] + d * normal[1],
                rz * dir[2] + d * normal[2],
            ]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub identities: usize,
    pub emotions: Vec<usize>,
    pub frames: usize,
    pub k: usize,
    pub scale_normalize: bool,
    pub seed: u64,
    pub grid: GridSpec,
    pub identity_amplitude: f64,
    pub expression_amplitude: f64,
    pub landmark_spacing: usize,
    pub augment_pairs: usize,
    pub edges: EdgeStrategy,
    pub partition: PartitionStrategy,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            identities: 10,
            emotions: (0..EMOTIONS).collect(),
            frames: 24,
            k: crate::patch::DEFAULT_PATCH_SIZE,
            scale_normalize: false,
            seed: 1,
            grid: GridSpec::default(),
            identity_amplitude: 0.08,
            expression_amplitude: 0.06,
            landmark_spacing: 3,
            augment_pairs: 12,
            edges: EdgeStrategy::default(),
            partition: PartitionStrategy::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        self.grid.validate()?;
        let bad = |m: String| Err(SynthError::Config(m));
        if self.identities < 2 {
            return bad(format!("need at least 2 identities, got {}", self.identities));
        }
        if self.emotions.is_empty() {
            return bad("emotion list is empty".into());
        }
        if let Some(e) = self.emotions.iter().find(|&&e| e >= EMOTIONS) {
            return bad(format!("emotion {e} out of range 0..{EMOTIONS}"));
        }
        if self.emotions.iter().collect::<BTreeSet<_>>().len() != self.emotions.len() {
            return bad("emotion list has duplicates".into());
        }
        if self.frames == 0 {
            return bad("frames must be at least 1".into());
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.k > self.grid.vertex_count() {
            return bad(format!("k = {} exceeds the {} mesh vertices", self.k, self.grid.vertex_count()));
        }
        if !(self.identity_amplitude.is_finite() && self.expression_amplitude.is_finite()) {
            return bad("amplitudes must be finite".into());
        }
        if self.landmark_spacing == 0 {
            return bad("landmark spacing must be at least 1".into());
        }
        Ok(())
    }

    pub fn identity(&self, i: usize) -> IdentityParams {
        IdentityParams::from_seed(derive_seed(&[self.seed, 0x1d, i as u64]), self.grid, self.identity_amplitude)
    }

    pub fn expression(&self, identity: usize, emotion: usize) -> Result<ExpressionParams, SynthError> {
        ExpressionParams::new(
            emotion,
            derive_seed(&[self.seed, 0xe7, identity as u64, emotion as u64]),
            self.expression_amplitude,
        )
    }

    pub fn base_anchors(&self) -> Vec<usize> {
        grid_landmark_anchors(&self.grid, self.landmark_spacing)
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        grid_augment_pairs(&self.grid, self.landmark_spacing, self.augment_pairs)
    }
}

/// Frames of one (identity, emotion) clip with augmented landmarks.
pub fn generate_sequence(
    identity: &IdentityParams,
    expr: &ExpressionParams,
    frames: usize,
    anchors: &[usize],
    pairs: &[(usize, usize)],
) -> Result<Vec<(TexturedMesh, LandmarkSet)>, SynthError> {
    identity.grid.validate()?;
    if frames == 0 {
        return Err(SynthError::Config("frames must be at least 1".into()));
    }
    let grid = identity.grid;
    let faces = grid_faces(grid.nx, grid.ny);
    let uv: Vec<[f64; 2]> = (0..grid.vertex_count()).map(|v| grid.uv(v)).collect();
    let colors: Vec<[f64; 3]> = uv.iter().map(|&p| identity.color(p)).collect();
    (0..frames)
        .map(|t| {
            let w = ExpressionParams::envelope(t, frames);
            let mesh = TexturedMesh::new(
                frame_vertices(identity, expr, w),
                faces.clone(),
                Some(colors.clone()),
                Some(uv.clone()),
            )?;
            let base = LandmarkSet::from_anchors(&mesh, anchors)?;
            let graph = build_edge_graph(&mesh)?;
            let (set, _) = augment_landmarks(&mesh, &graph, &base, pairs)?;
            Ok((mesh, set))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample {
    pub features: FeatureTensor,
    pub identity: usize,
    pub emotion: usize,
    pub identity_seed: u64,
    pub expression_seed: u64,
}

/// Mean per-vertex distances backing the separability check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Separability {
    /// Between different identities at frame 0.
    pub inter: f64,
    /// Between emotions of the same identity, over all frames.
    pub intra: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<SequenceSample>,
    pub graph: SpatialGraph,
    pub labels: PartitionLabels,
    pub separability: Separability,
}

fn mean_vertex_distance(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt())
        .sum::<f64>()
        / a.len() as f64
}

/// One sample per (identity, emotion), identity-major. Fails if the identity
/// factor does not dominate the expression factor.
pub fn build_dataset(config: &SynthConfig) -> Result<Dataset, SynthError> {
    config.validate()?;
    let anchors = config.base_anchors();
    let pairs = config.pairs();
    let jobs: Vec<(usize, usize)> = (0..config.identities)
        .flat_map(|i| config.emotions.iter().map(move |&e| (i, e)))
        .collect();
    let options = PatchOptions {
        k: config.k,
        scale_normalize: config.scale_normalize,
    };

    let built: Vec<(SequenceSample, Vec<Vec<[f64; 3]>>, LandmarkSet)> = jobs
        .par_iter()
        .map(|&(i, e)| {
            let identity = config.identity(i);
            let expr = config.expression(i, e)?;
            let frames = generate_sequence(&identity, &expr, config.frames, &anchors, &pairs)?;
            let features = build_sequence_tensor(&frames, options)?;
            let first = frames[0].1.clone();
            let vertices = frames.into_iter().map(|(m, _)| m.vertices).collect();
            let sample = SequenceSample {
                features,
                identity: i,
                emotion: e,
                identity_seed: identity.seed,
                expression_seed: expr.seed,
            };
            Ok((sample, vertices, first))
        })
        .collect::<Result<_, SynthError>>()?;

    let hash = built[0].0.features.ordering_hash;
    if let Some((s, _, _)) = built.iter().find(|(s, _, _)| s.features.ordering_hash != hash) {
        return Err(SynthError::Config(format!(
            "landmark ordering differs for identity {} emotion {}",
            s.identity, s.emotion
        )));
    }

    let separability = separability(config, &built.iter().map(|(s, v, _)| (s.identity, v)).collect::<Vec<_>>());
    if separability.inter <= separability.intra {
        return Err(SynthError::NotSeparable {
            inter: separability.inter,
            intra: separability.intra,
        });
    }

    let graph = build_spatial_edges(&built[0].2, &config.edges)?;
    let labels = partition(&graph, config.partition);
    Ok(Dataset {
        samples: built.into_iter().map(|(s, _, _)| s).collect(),
        graph,
        labels,
        separability,
    })
}

fn separability(config: &SynthConfig, seqs: &[(usize, &Vec<Vec<[f64; 3]>>)]) -> Separability {
    let first_frames: Vec<&Vec<[f64; 3]>> = (0..config.identities)
        .map(|i| &seqs.iter().find(|(id, _)| *id == i).unwrap().1[0])
        .collect();
    let (mut inter, mut n_inter) = (0.0, 0usize);
    for a in 0..first_frames.len() {
        for b in a + 1..first_frames.len() {
            inter += mean_vertex_distance(first_frames[a], first_frames[b]);
            n_inter += 1;
        }
    }
    let (mut intra, mut n_intra) = (0.0, 0usize);
    for i in 0..config.identities {
        let own: Vec<&Vec<Vec<[f64; 3]>>> = seqs.iter().filter(|(id, _)| *id == i).map(|(_, v)| *v).collect();
        for a in 0..own.len() {
            for b in a + 1..own.len() {
                for (fa, fb) in own[a].iter().zip(own[b]) {
                    intra += mean_vertex_distance(fa, fb);
                    n_intra += 1;
                }
            }
        }
    }
    Separability {
        inter: inter / n_inter.max(1) as f64,
        intra: intra / n_intra.max(1) as f64,
    }
}

/// Indices of the train and test sides of a cross-emotion split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Puts every sample whose emotion is in `train_emotions` on the train side
/// and the rest on the test side. Both sides must contain every identity.
pub fn cross_emotion_split(samples: &[(usize, usize)], train_emotions: &[usize]) -> Result<Split, SynthError> {
    if train_emotions.is_empty() {
        return Err(SynthError::EmptySide("train"));
    }
    let train_set: BTreeSet<usize> = train_emotions.iter().copied().collect();
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for (idx, &(_, e)) in samples.iter().enumerate() {
        if train_set.contains(&e) {
            split.train.push(idx);
        } else {
            split.test.push(idx);
        }
    }
    if split.train.is_empty() {
        return Err(SynthError::EmptySide("train"));
    }
    if split.test.is_empty() {
        return Err(SynthError::EmptySide("test"));
    }
    let identities: BTreeSet<usize> = samples.iter().map(|s| s.0).collect();
    for (side, idx) in [("train", &split.train), ("test", &split.test)] {
        let present: BTreeSet<usize> = idx.iter().map(|&i| samples[i].0).collect();
        if let Some(&identity) = identities.difference(&present).next() {
            return Err(SynthError::MissingIdentity { identity, side });
        }
    }
    Ok(split)
}

/// All `size`-element subsets of `emotions`, in lexicographic order.
pub fn emotion_subsets(emotions: &[usize], size: usize) -> Vec<Vec<usize>> {
    let mut sorted = emotions.to_vec();
    sorted.sort_unstable();
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(items: &[usize], size: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            rec(items, size, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(&sorted, size, 0, &mut cur, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            identities: 3,
            emotions: vec![0, 3],
            frames: 5,
            k: 9,
            grid: GridSpec {
                nx: 12,
                ny: 12,
                ..GridSpec::default()
            },
            augment_pairs: 4,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn zero_expression_gives_static_sequence() {
        let c = SynthConfig {
            expression_amplitude: 0.0,
            ..small()
        };
        let seq = generate_sequence(&c.identity(0), &c.expression(0, 1).unwrap(), 6, &c.base_anchors(), &c.pairs()).unwrap();
        for (m, _) in &seq[1..] {
            assert_eq!(m, &seq[0].0);
        }
    }

    #[test]
    fn emotions_share_the_first_frame() {
        let c = small();
        let id = c.identity(1);
        let a = generate_sequence(&id, &c.expression(1, 0).unwrap(), 4, &c.base_anchors(), &[]).unwrap();
        let b = generate_sequence(&id, &c.expression(1, 4).unwrap(), 4, &c.base_anchors(), &[]).unwrap();
        assert_eq!(a[0].0, b[0].0);
        assert_eq!(a[3].0, b[3].0);
        assert_ne!(a[1].0, b[1].0);
    }

    #[test]
    fn identities_differ() {
        let c = small();
        let e = c.expression(0, 0).unwrap();
        let a = frame_vertices(&c.identity(0), &e, 0.0);
        let b = frame_vertices(&c.identity(1), &e, 0.0);
        assert!(a.iter().zip(&b).any(|(p, q)| p != q));
    }

    #[test]
    fn default_landmark_layout() {
        let c = SynthConfig::default();
        assert_eq!(c.base_anchors().len(), 49);
        let pairs = c.pairs();
        assert_eq!(pairs.len(), 12);
        assert!(pairs.iter().all(|&(a, b)| a < 49 && b < 49 && a != b));
    }

    #[test]
    fn dataset_counts_and_determinism() {
        let c = small();
        let d = build_dataset(&c).unwrap();
        assert_eq!(d.samples.len(), 6);
        for i in 0..3 {
            assert_eq!(d.samples.iter().filter(|s| s.identity == i).count(), 2);
        }
        assert_eq!((c.base_anchors().len(), c.pairs().len()), (9, 2));
        let j = 11;
        assert!(d.samples.iter().all(|s| s.features.shape() == (54, j, 5)));
        assert!(d.separability.inter > d.separability.intra);
        assert_eq!(build_dataset(&c).unwrap(), d);
    }

    #[test]
    fn bad_configs() {
        assert!(matches!(
            build_dataset(&SynthConfig { identities: 1, ..small() }),
            Err(SynthError::Config(_))
        ));
        assert!(matches!(
            build_dataset(&SynthConfig { k: 0, ..small() }),
            Err(SynthError::Config(_))
        ));
        assert!(ExpressionParams::new(6, 0, 0.1).is_err());
    }

    #[test]
    fn split_protocol() {
        let samples: Vec<(usize, usize)> = (0..10).flat_map(|i| (0..6).map(move |e| (i, e))).collect();
        let s = cross_emotion_split(&samples, &[0, 1, 2]).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (30, 30));
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..60).collect::<Vec<_>>());
        assert!(matches!(
            cross_emotion_split(&samples, &[0, 1, 2, 3, 4, 5]),
            Err(SynthError::EmptySide("test"))
        ));
        assert!(matches!(cross_emotion_split(&samples, &[]), Err(SynthError::EmptySide(_))));
        let partial: Vec<(usize, usize)> = samples.iter().copied().filter(|&(i, e)| !(i == 4 && e > 2)).collect();
        assert!(matches!(
            cross_emotion_split(&partial, &[0, 1, 2]),
            Err(SynthError::MissingIdentity { identity: 4, side: "test" })
        ));
    }

    #[test]
    fn twenty_subsets_of_three() {
        let s = emotion_subsets(&[0, 1, 2, 3, 4, 5], 3);
        assert_eq!(s.len(), 20);
        assert_eq!(s[0], vec![0, 1, 2]);
        assert_eq!(s[19], vec![3, 4, 5]);
    }
}

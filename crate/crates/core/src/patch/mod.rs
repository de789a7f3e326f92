//! Landmark neighborhoods and the `(C, J, T)` feature tensors built from them.
//!
//! Every landmark contributes `k` mesh points ordered by distance. Each point
//! adds six channels: its position relative to the landmark followed by its
//! RGB color, so a patch flattens to `6k` channels.

mod cache;
mod kdtree;

use rayon::prelude::*;

pub use cache::{read_tensor, read_tensor_from, write_tensor, write_tensor_to};
pub use kdtree::KdIndex;

use crate::landmarks::{Landmark, LandmarkSet};
use crate::mesh::TexturedMesh;

/// Channels contributed by each patch point: relative xyz then RGB.
pub const CHANNELS_PER_POINT: usize = 6;
/// Points per landmark patch unless configured otherwise.
pub const DEFAULT_PATCH_SIZE: usize = 200;

#[derive(Debug, thiserror::Error)]
pub enum PatchError {
    #[error("mesh has no vertices")]
    EmptyMesh,
    #[error("patch size k must be at least 1")]
    ZeroK,
    #[error("frame {frame} has {found} landmarks (ordering {found_hash:#018x}); expected {expected} ({expected_hash:#018x})")]
    InconsistentLandmarks {
        frame: usize,
        expected: usize,
        found: usize,
        expected_hash: u64,
        found_hash: u64,
    },
    #[error("sequence has no frames")]
    NoFrames,
    #[error("landmark anchor {anchor} out of range for {count} vertices")]
    AnchorOutOfRange { anchor: usize, count: usize },
    #[error("feature cache: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchOptions {
    pub k: usize,
    /// Divide relative positions by the largest relative distance in the patch.
    pub scale_normalize: bool,
}

impl PatchOptions {
    pub fn new(k: usize) -> Self {
        PatchOptions {
            k,
            scale_normalize: false,
        }
    }
}

impl Default for PatchOptions {
    fn default() -> Self {
        PatchOptions::new(DEFAULT_PATCH_SIZE)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub landmark: usize,
    pub points: Vec<usize>,
    pub relative: Vec<[f64; 3]>,
    pub rgb: Vec<[f64; 3]>,
    /// Set when the mesh had fewer than `k` vertices and the last point was
    /// repeated.
    pub padded: bool,
}

impl Patch {
    pub fn k(&self) -> usize {
        self.points.len()
    }
}

pub fn build_kd_index(mesh: &TexturedMesh) -> Result<KdIndex, PatchError> {
    KdIndex::build(&mesh.vertices)
}

/// The `k` nearest mesh vertices around `landmark`, as positions relative to
/// the landmark plus their colors.
pub fn extract_patch(
    index: &KdIndex,
    mesh: &TexturedMesh,
    landmark: &Landmark,
    options: PatchOptions,
) -> Result<Patch, PatchError> {
    if options.k == 0 {
        return Err(PatchError::ZeroK);
    }
    let center = landmark.position;
    let mut points = index.k_nearest(&center, options.k);
    let padded = points.len() < options.k;
    let last = *points.last().ok_or(PatchError::EmptyMesh)?;
    points.resize(options.k, last);
    let mut relative: Vec<[f64; 3]> = points
        .iter()
        .map(|&i| {
            let p = mesh.vertices[i];
            [p[0] - center[0], p[1] - center[1], p[2] - center[2]]
        })
        .collect();
    if options.scale_normalize {
        let radius = relative
            .iter()
            .map(|r| (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt())
            .fold(0.0, f64::max);
        if radius > 0.0 {
            for r in &mut relative {
                for x in r.iter_mut() {
                    *x /= radius;
                }
            }
        }
    }
    let rgb = points.iter().map(|&i| mesh.colors[i]).collect();
    Ok(Patch {
        landmark: landmark.id,
        points,
        relative,
        rgb,
        padded,
    })
}

/// Flattens a patch to `6k` values: for rank `r`, `[6r, 6r+3)` holds the
/// relative position and `[6r+3, 6r+6)` the color.
pub fn patch_to_channels(patch: &Patch) -> Vec<f64> {
    let mut out = Vec::with_capacity(CHANNELS_PER_POINT * patch.k());
    for (rel, rgb) in patch.relative.iter().zip(&patch.rgb) {
        out.extend_from_slice(rel);
        out.extend_from_slice(rgb);
    }
    out
}

/// Per-sequence feature array with layout `(C, J, T)`, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub channels: usize,
    pub landmarks: usize,
    pub frames: usize,
    pub k: usize,
    pub ordering_hash: u64,
    pub values: Vec<f32>,
}

impl FeatureTensor {
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.landmarks, self.frames)
    }

    pub fn at(&self, c: usize, j: usize, t: usize) -> f32 {
        self.values[(c * self.landmarks + j) * self.frames + t]
    }
}

/// Builds the `(6k, J, T)` tensor for a sequence of frames. Every frame must
/// carry the same landmark ordering.
pub fn build_sequence_tensor(
    frames: &[(TexturedMesh, LandmarkSet)],
    options: PatchOptions,
) -> Result<FeatureTensor, PatchError> {
    if options.k == 0 {
        return Err(PatchError::ZeroK);
    }
    let (_, first) = frames.first().ok_or(PatchError::NoFrames)?;
    let j = first.len();
    let hash = first.ordering_hash();
    for (t, (_, set)) in frames.iter().enumerate() {
        let h = set.ordering_hash();
        if set.len() != j || h != hash {
            return Err(PatchError::InconsistentLandmarks {
                frame: t,
                expected: j,
                found: set.len(),
                expected_hash: hash,
                found_hash: h,
            });
        }
    }
    let c = CHANNELS_PER_POINT * options.k;
    let t_len = frames.len();

    // Column (j, t) of the tensor, as a C-long vector, for every frame.
    let columns: Vec<Vec<Vec<f64>>> = frames
        .par_iter()
        .map(|(mesh, set)| {
            let index = build_kd_index(mesh)?;
            set.entries()
                .iter()
                .map(|l| {
                    if l.anchor >= mesh.vertex_count() {
                        return Err(PatchError::AnchorOutOfRange {
                            anchor: l.anchor,
                            count: mesh.vertex_count(),
                        });
                    }
                    extract_patch(&index, mesh, l, options).map(|p| patch_to_channels(&p))
                })
                .collect()
        })
        .collect::<Result<_, PatchError>>()?;

    let mut values = vec![0.0f32; c * j * t_len];
    for (t, frame) in columns.iter().enumerate() {
        for (jj, col) in frame.iter().enumerate() {
            for (ch, &v) in col.iter().enumerate() {
                values[(ch * j + jj) * t_len + t] = v as f32;
            }
        }
    }
    Ok(FeatureTensor {
        channels: c,
        landmarks: j,
        frames: t_len,
        k: options.k,
        ordering_hash: hash,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landmarks::LandmarkSet;
    use crate::mesh::grid_mesh;

    fn setup(k: usize) -> (TexturedMesh, KdIndex, LandmarkSet, PatchOptions) {
        let m = grid_mesh(20, 20, 0.1);
        let idx = build_kd_index(&m).unwrap();
        let set = LandmarkSet::from_anchors(&m, &[210, 5]).unwrap();
        (m, idx, set, PatchOptions::new(k))
    }

    #[test]
    fn k1_patch_is_anchor() {
        let (mut m, idx, set, opt) = setup(1);
        m.colors[210] = [1.0, 0.0, 0.0];
        let p = extract_patch(&idx, &m, &set.entries()[0], opt).unwrap();
        assert_eq!(p.points, vec![210]);
        assert_eq!(p.relative, vec![[0.0; 3]]);
        assert_eq!(patch_to_channels(&p), vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn k200_patch_has_1200_channels() {
        let (m, idx, set, opt) = setup(200);
        let p = extract_patch(&idx, &m, &set.entries()[0], opt).unwrap();
        assert_eq!(p.k(), 200);
        assert!(!p.padded);
        let ch = patch_to_channels(&p);
        assert_eq!(ch.len(), 1200);
        for r in 0..200 {
            assert_eq!(&ch[6 * r + 3..6 * r + 6], &[0.5, 0.5, 0.5]);
        }
        let norms: Vec<f64> = p
            .relative
            .iter()
            .map(|r| (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt())
            .collect();
        assert!(norms.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn small_mesh_pads_with_last_point() {
        let m = grid_mesh(2, 2, 1.0);
        let idx = build_kd_index(&m).unwrap();
        let set = LandmarkSet::from_anchors(&m, &[0]).unwrap();
        let p = extract_patch(&idx, &m, &set.entries()[0], PatchOptions::new(7)).unwrap();
        assert!(p.padded);
        assert_eq!(p.k(), 7);
        assert_eq!(p.points[..4], [0, 1, 2, 3]);
        assert!(p.points[4..].iter().all(|&i| i == 3));
    }

    #[test]
    fn scale_normalization_bounds_patch() {
        let (m, idx, set, mut opt) = setup(9);
        opt.scale_normalize = true;
        let p = extract_patch(&idx, &m, &set.entries()[0], opt).unwrap();
        let max = p
            .relative
            .iter()
            .map(|r| (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt())
            .fold(0.0, f64::max);
        assert!((max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tensor_shape_and_layout() {
        let (m, _, set, _) = setup(1);
        let t = build_sequence_tensor(&[(m.clone(), set.clone())], PatchOptions::new(1)).unwrap();
        assert_eq!(t.shape(), (6, 2, 1));
        assert_eq!(t.at(3, 1, 0), 0.5);
        assert_eq!(t.at(0, 0, 0), 0.0);
    }

    #[test]
    fn frame_permutation_permutes_time_axis() {
        let (m, _, _, _) = setup(4);
        let frames: Vec<_> = (0..3)
            .map(|i| {
                let mut mesh = m.clone();
                mesh.vertices[211][2] += 0.05 * i as f64;
                let s = LandmarkSet::from_anchors(&mesh, &[210, 5]).unwrap();
                (mesh, s)
            })
            .collect();
        let a = build_sequence_tensor(&frames, PatchOptions::new(4)).unwrap();
        let rev: Vec<_> = frames.iter().rev().cloned().collect();
        let b = build_sequence_tensor(&rev, PatchOptions::new(4)).unwrap();
        for c in 0..a.channels {
            for j in 0..a.landmarks {
                for t in 0..3 {
                    assert_eq!(a.at(c, j, t), b.at(c, j, 2 - t));
                }
            }
        }
    }

    #[test]
    fn inconsistent_landmarks_rejected() {
        let (m, _, set, opt) = setup(2);
        let other = LandmarkSet::from_anchors(&m, &[1]).unwrap();
        let err = build_sequence_tensor(&[(m.clone(), set), (m, other)], opt).unwrap_err();
        assert!(matches!(err, PatchError::InconsistentLandmarks { frame: 1, .. }));
    }
}

//! Balanced 3D KD-tree with exact, deterministically ordered k-NN queries.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::PatchError;
use crate::mesh::squared_distance;

const LEAF_SIZE: usize = 8;

/// Candidate ordered by `(squared distance, index)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    d2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then_with(|| self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Implicit KD-tree: `order` is a permutation of point indices where each
/// range `[lo, hi)` splits at its middle element on `axis[mid]`.
#[derive(Debug, Clone)]
pub struct KdIndex {
    points: Vec<[f64; 3]>,
    order: Vec<usize>,
    axis: Vec<u8>,
}

impl KdIndex {
    pub fn build(points: &[[f64; 3]]) -> Result<Self, PatchError> {
        if points.is_empty() {
            return Err(PatchError::EmptyMesh);
        }
        let mut index = KdIndex {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            axis: vec![0; points.len()],
        };
        index.split(0, points.len());
        Ok(index)
    }

    fn split(&mut self, lo: usize, hi: usize) {
        if hi - lo <= LEAF_SIZE {
            return;
        }
        let pts = &self.points;
        let slice = &self.order[lo..hi];
        let mut spread = [0.0f64; 3];
        for (a, s) in spread.iter_mut().enumerate() {
            let (mn, mx) = slice.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(mn, mx), &i| {
                (mn.min(pts[i][a]), mx.max(pts[i][a]))
            });
            *s = mx - mn;
        }
        let axis = (0..3)
            .max_by(|&a, &b| spread[a].total_cmp(&spread[b]).then(b.cmp(&a)))
            .unwrap();
        let mid = (lo + hi) / 2;
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            pts[a][axis].total_cmp(&pts[b][axis]).then(a.cmp(&b))
        });
        self.axis[mid] = axis as u8;
        self.split(lo, mid);
        self.split(mid + 1, hi);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    /// The `min(k, N)` nearest point indices, sorted by ascending distance with
    /// ties broken by ascending index.
    pub fn k_nearest(&self, query: &[f64; 3], k: usize) -> Vec<usize> {
        self.k_nearest_with_distance(query, k)
            .into_iter()
            .map(|(i, _)| i)
            .collect()
    }

    /// Like [`k_nearest`](Self::k_nearest) but also returns squared distances.
    pub fn k_nearest_with_distance(&self, query: &[f64; 3], k: usize) -> Vec<(usize, f64)> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, self.points.len(), query, k, &mut heap);
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort_unstable();
        out.into_iter().map(|c| (c.index, c.d2)).collect()
    }

    pub fn nearest(&self, query: &[f64; 3]) -> usize {
        self.k_nearest(query, 1)[0]
    }

    fn offer(&self, index: usize, query: &[f64; 3], k: usize, heap: &mut BinaryHeap<Candidate>) {
        let c = Candidate {
            d2: squared_distance(&self.points[index], query),
            index,
        };
        if heap.len() < k {
            heap.push(c);
        } else if c < *heap.peek().unwrap() {
            heap.pop();
            heap.push(c);
        }
    }

    fn search(&self, lo: usize, hi: usize, query: &[f64; 3], k: usize, heap: &mut BinaryHeap<Candidate>) {
        if hi - lo <= LEAF_SIZE {
            for &i in &self.order[lo..hi] {
                self.offer(i, query, k, heap);
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let pivot = self.order[mid];
        let axis = self.axis[mid] as usize;
        self.offer(pivot, query, k, heap);
        let diff = query[axis] - self.points[pivot][axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(near.0, near.1, query, k, heap);
        // Points across the plane are at least |diff| away; equality must
        // still be visited because index ties can displace the current worst.
        if heap.len() < k || diff * diff <= heap.peek().unwrap().d2 {
            self.search(far.0, far.1, query, k, heap);
        }
    }
}

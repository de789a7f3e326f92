//! Dynamic 3D face identification with spatio-temporal graph convolutions.
//!
//! The crate covers the whole chain from textured mesh sequences to identity
//! predictions: mesh ingestion ([`mesh`]), landmark lifting and geodesic
//! augmentation ([`landmarks`]), per-landmark patch features ([`patch`]), the
//! landmark graph ([`graph`]), the network and its training loop ([`nn`]),
//! a synthetic dataset generator ([`synth`]) and run orchestration
//! ([`pipeline`]).

pub mod graph;
mod hash;
pub mod landmarks;
pub mod mesh;
pub mod nn;
pub mod patch;
pub mod pipeline;
pub mod synth;

pub use graph::{PartitionLabels, PartitionStrategy, SpatialGraph};
pub use landmarks::{Landmark, LandmarkSet};
pub use mesh::TexturedMesh;
pub use nn::{Model, Tensor3};
pub use patch::FeatureTensor;

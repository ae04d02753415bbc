//! Manifold-hypothesis diagnostics and learned atlases for point clouds.
//!
//! The pipeline partitions a cloud into overlapping local neighborhoods
//! ([`clustering`]), measures how much topological distortion PCA embeddings
//! of each neighborhood introduce at every dimension ([`distortion`],
//! [`embedding`]), checks whether the data hangs together as one piece
//! ([`connectivity`]) and, when a common dimension emerges, trains a smooth
//! inverse for each local chart ([`atlas`]) that can be sampled generatively.
//!
//! Hot loops run on rayon with the default `parallel` feature; build with
//! `--no-default-features` for a purely sequential library. Most entry points
//! have a `*_with` variant taking an explicit [`Exec`].

pub mod atlas;
pub mod clustering;
pub mod connectivity;
pub mod dataset;
pub mod distortion;
pub mod embedding;
mod error;
pub mod neighbors;
pub mod par;

pub use error::{Error, Result};
pub use par::Exec;

pub use dataset::PointCloud;

//! Over-segmentation of 3D point clouds into super-points with the Local
//! Variation family of graph algorithms.
//!
//! A run goes cloud → connectivity graph → descriptors → per-edge weights →
//! merge → small-segment cleanup, and can be scored against a ground-truth
//! label image. [`pipeline::run`] strings the stages together; each stage is
//! also usable on its own.

pub mod cli;
pub mod cloud;
pub mod descriptors;
pub mod disjoint;
pub mod error;
pub mod eval;
pub mod graph;
pub mod merge;
pub mod pipeline;
pub mod spatial;
pub mod synthetic;
pub mod weights;

pub use cloud::{PointCloud, Point3};
pub use error::{Error, Result, Stage};
pub use graph::{ConnectivityGraph, GraphKind};
pub use merge::{MergeConfig, MergeEngine, MergeMode, Segmentation};
pub use pipeline::{RunConfig, RunOutput};
pub use weights::{Modality, ModalitySet, WeightedGraph};

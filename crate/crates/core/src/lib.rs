//! Correlation-graph data augmentation for multi-lead waveforms.
//!
//! The crate estimates a signed lead graph from the lag-0 Pearson correlations
//! of a dataset, mixes leads along that graph, composes the result with
//! standard time-series augmentations under a seeded policy, and ships a
//! small evaluation harness for measuring adversarial robustness.

pub mod augment;
pub mod container;
pub mod graph;
pub mod harness;
pub mod policy;
pub mod record;
pub mod rng;

#[cfg(feature = "cli")]
pub mod cli;

pub use augment::{AugmentError, GraphAugParams, Intensity, StandardOp};
pub use container::{read_container, write_container, ContainerError};
pub use graph::{estimate_graph, CorrelationAccumulator, GraphError, LeadGraph, MixNormalization};
pub use policy::{apply_policy, AugmentPolicy, PolicyError, ScoreReport, SearchGrid};
pub use record::{MultiLeadRecord, RecordError};
pub use rng::RandomStream;

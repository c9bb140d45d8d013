//! Augmentation operators.
//!
//! Every stochastic operator is split in two: a `sample_*` step that draws
//! the operator's random choices from a [`RandomStream`](crate::rng::RandomStream),
//! and an `apply_*` step that is a pure function of the record and those
//! choices. The convenience wrappers combine both.

mod graph_ops;
mod standard;

pub use graph_ops::{graph_augment, graph_augment_with, graph_mix, graph_mix_weighted, sample_graph_draw, GraphDraw};
pub use standard::{
    apply_mask, apply_smooth, apply_time_warp, gaussian_kernel, gaussian_noise, gaussian_smooth,
    percent_to_samples, resample_linear, sample_mask, sample_smooth, sample_time_warp, time_warp,
    zero_mask, MaskDraw, SmoothDraw, WarpDraw, WarpMode,
};

use serde::{Deserialize, Serialize};

use crate::graph::MixNormalization;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AugmentError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("graph leads {graph:?} do not match record leads {record:?}")]
    LeadMismatch { graph: Vec<String>, record: Vec<String> },
    #[error("lead index {index} out of range for {n_leads} leads")]
    LeadIndex { index: usize, n_leads: usize },
    #[error("time warp of {removed} samples leaves fewer than 2 of {n_samples}")]
    TooShort { removed: usize, n_samples: usize },
}

/// Per-lead application probability `p` and the upper bound `alpha` of the
/// mixing coefficient, drawn as `U(0, alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphAugParams {
    pub p: f64,
    pub alpha: f64,
    #[serde(default)]
    pub normalization: MixNormalization,
}

impl GraphAugParams {
    pub fn new(p: f64, alpha: f64) -> Self {
        Self {
            p,
            alpha,
            normalization: MixNormalization::Raw,
        }
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(AugmentError::InvalidParams(format!("p = {} not in [0, 1]", self.p)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(AugmentError::InvalidParams(format!("alpha = {} not in [0, 1]", self.alpha)));
        }
        Ok(())
    }
}

/// Shared magnitude of the standard operators, in `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Intensity(f64);

impl Intensity {
    pub fn new(gamma: f64) -> Result<Self, AugmentError> {
        if (0.0..=100.0).contains(&gamma) {
            Ok(Self(gamma))
        } else {
            Err(AugmentError::InvalidParams(format!("gamma = {gamma} not in [0, 100]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// The four lead-wise augmentations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StandardOp {
    Noise,
    TimeWarp,
    Smooth,
    Mask,
}

impl StandardOp {
    pub const ALL: [StandardOp; 4] = [
        StandardOp::Noise,
        StandardOp::TimeWarp,
        StandardOp::Smooth,
        StandardOp::Mask,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StandardOp::Noise => "noise",
            StandardOp::TimeWarp => "time_warp",
            StandardOp::Smooth => "smooth",
            StandardOp::Mask => "mask",
        }
    }
}

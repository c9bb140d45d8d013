//! End-to-end robustness comparison on synthetic data: tune policies with
//! and without graph augmentation, train a classifier for each, and attack
//! both on the same held-out records.

use serde::{Deserialize, Serialize};

use crate::augment::{GraphAugParams, StandardOp};
use crate::graph::{estimate_graph, LeadGraph};
use crate::policy::{augmented_training_set, policy_search, select_best, AugmentPolicy, PolicyError, ScoreReport, Scorer, SearchGrid};
use crate::rng::RandomStream;

use super::{
    evaluate_clean, robustness_curve, synth_dataset, train_classifier, AttackTemplate, CurvePoint, FeatureSpec,
    LabeledSet, SourceModel, SynthSpec, TrainConfig,
};

/// Scores a policy by training the linear classifier and returning clean
/// validation macro-F1.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearScorer {
    pub train: TrainConfig,
}

impl Scorer for LinearScorer {
    fn score(&self, train: &LabeledSet, validation: &LabeledSet, _seed: u64) -> Result<f64, String> {
        let (model, _) = train_classifier(train, &self.train).map_err(|e| e.to_string())?;
        evaluate_clean(&model, validation)
            .map(|r| r.macro_f1)
            .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessExperiment {
    pub synth: SynthSpec,
    pub train_frac: f64,
    pub val_frac: f64,
    pub train: TrainConfig,
    pub grid: SearchGrid,
    pub epsilons: Vec<f64>,
    pub attack: AttackTemplate,
}

impl RobustnessExperiment {
    /// 2000 twelve-lead records with weak class separation and strong noise,
    /// split 20/20/60 so the classifier can overfit its training split. The
    /// six-cell grid crosses two intensities with no graph, `(p, alpha) =
    /// (1, 1)` and `(1, 0.5)`, over time warp, smoothing and masking, with four
    /// augmented copies per training record.
    pub fn desk_scale() -> Self {
        let mut synth = SynthSpec::twelve_lead(2000, 64, 4, 0);
        synth.source = SourceModel::Harmonic {
            harmonics: 4,
            class_separation: 0.12,
        };
        synth.noise = 0.6;
        synth.direction_jitter = 0.5;
        let train = TrainConfig {
            features: FeatureSpec {
                downsample: 2,
                standardize: true,
            },
            ..TrainConfig::default()
        };
        let grid = SearchGrid {
            gammas: vec![5.0, 15.0],
            n_ops: vec![1],
            graph: vec![None, Some(GraphAugParams::new(1.0, 1.0)), Some(GraphAugParams::new(1.0, 0.5))],
            standard_ops: vec![StandardOp::TimeWarp, StandardOp::Smooth, StandardOp::Mask],
            trials: 3,
            copies: 4,
            seed: 0,
        };
        Self {
            synth,
            train_frac: 0.2,
            val_frac: 0.2,
            train,
            grid,
            epsilons: vec![0.0, 0.01, 0.02, 0.03, 0.04],
            attack: AttackTemplate::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessComparison {
    pub seed: u64,
    pub search: ScoreReport,
    pub baseline_policy: AugmentPolicy,
    pub graph_policy: AugmentPolicy,
    pub baseline_curve: Vec<CurvePoint>,
    pub graph_curve: Vec<CurvePoint>,
}

impl RobustnessComparison {
    /// True when the graph-augmented curve is at least the baseline at every epsilon.
    pub fn graph_dominates(&self) -> bool {
        self.baseline_curve
            .iter()
            .zip(&self.graph_curve)
            .all(|(b, g)| g.macro_f1 >= b.macro_f1)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Harness(#[from] super::HarnessError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error("grid needs at least one cell with and one without graph augmentation")]
    Grid,
}

impl RobustnessExperiment {
    /// Runs the comparison for one seed. The seed drives data generation,
    /// the search and the attacks.
    pub fn run(&self, seed: u64) -> Result<RobustnessComparison, ExperimentError> {
        let spec = SynthSpec { seed, ..self.synth.clone() };
        let data = synth_dataset(&spec)?;
        let (train, val, test) = data.split(self.train_frac, self.val_frac);
        let (graph, _) = estimate_graph(&train.records)?;
        let grid = SearchGrid { seed, ..self.grid.clone() };
        let scorer = LinearScorer { train: self.train };
        let search = policy_search(&grid, &train, &val, Some(&graph), &scorer)?;

        let pick = |with_graph: bool| -> Option<AugmentPolicy> {
            let cells: Vec<_> = search
                .cells
                .iter()
                .filter(|c| c.cell.graph.is_some() == with_graph)
                .cloned()
                .collect();
            (!cells.is_empty()).then(|| grid.policy_for(&cells[select_best(&cells)].cell))
        };
        let baseline_policy = pick(false).ok_or(ExperimentError::Grid)?;
        let graph_policy = pick(true).ok_or(ExperimentError::Grid)?;

        let attack = AttackTemplate { seed, ..self.attack };
        let curve = |policy: &AugmentPolicy, label: &str| -> Result<Vec<CurvePoint>, ExperimentError> {
            let stream = RandomStream::new(seed).fork("final").fork(label);
            let augmented = augmented_training_set(&train, Some(&graph), policy, grid.copies, &stream)?;
            let (model, _) = train_classifier(&augmented, &self.train)?;
            Ok(robustness_curve(&model, &test, &self.epsilons, &attack)?)
        };
        let baseline_curve = curve(&baseline_policy, "baseline")?;
        let graph_curve = curve(&graph_policy, "graph")?;
        Ok(RobustnessComparison {
            seed,
            search,
            baseline_policy,
            graph_policy,
            baseline_curve,
            graph_curve,
        })
    }

    /// Graph estimated from the training split of `seed`'s dataset.
    pub fn training_graph(&self, seed: u64) -> Result<LeadGraph, ExperimentError> {
        let data = synth_dataset(&SynthSpec { seed, ..self.synth.clone() })?;
        let (train, _, _) = data.split(self.train_frac, self.val_frac);
        Ok(estimate_graph(&train.records)?.0)
    }
}

//! Augmentation policies: graph augmentation first, then `n_ops` standard
//! operations sampled RandAugment-style at one shared intensity, plus a grid
//! search over policy parameters against a pluggable scorer.

use serde::{Deserialize, Serialize};

use crate::augment::{
    apply_mask, apply_smooth, apply_time_warp, gaussian_noise, graph_augment_with, sample_graph_draw, sample_mask,
    sample_smooth, sample_time_warp, AugmentError, GraphAugParams, GraphDraw, Intensity, MaskDraw, SmoothDraw,
    StandardOp, WarpDraw,
};
use crate::graph::LeadGraph;
use crate::harness::LabeledSet;
use crate::record::MultiLeadRecord;
use crate::rng::RandomStream;

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("invalid policy: {0}")]
    Invalid(String),
    #[error("policy enables graph augmentation but no lead graph was supplied")]
    MissingGraph,
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error("record {index} ({id}): {source}")]
    Record {
        index: usize,
        id: String,
        #[source]
        source: Box<PolicyError>,
    },
    #[error("scorer failed on cell {cell} trial {trial}: {message}")]
    Scorer { cell: usize, trial: usize, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Full augmentation configuration, stored on disk as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentPolicy {
    pub graph: Option<GraphAugParams>,
    pub standard_ops: Vec<StandardOp>,
    pub n_ops: usize,
    pub gamma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self::identity()
    }
}

impl AugmentPolicy {
    /// No graph augmentation and no standard ops.
    pub fn identity() -> Self {
        Self {
            graph: None,
            standard_ops: Vec::new(),
            n_ops: 0,
            gamma: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if let Some(g) = &self.graph {
            g.validate()?;
        }
        Intensity::new(self.gamma)?;
        if self.n_ops > self.standard_ops.len() {
            return Err(PolicyError::Invalid(format!(
                "n_ops = {} exceeds the {} standard ops",
                self.n_ops,
                self.standard_ops.len()
            )));
        }
        for (i, op) in self.standard_ops.iter().enumerate() {
            if self.standard_ops[..i].contains(op) {
                return Err(PolicyError::Invalid(format!("standard op {} listed twice", op.name())));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, PolicyError> {
        let policy: AugmentPolicy = serde_json::from_str(text)?;
        policy.validate()?;
        Ok(policy)
    }

    pub fn to_json(&self) -> Result<String, PolicyError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn is_identity(&self) -> bool {
        self.graph.is_none() && self.n_ops == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStep {
    Graph,
    Standard(StandardOp),
}

impl PlanStep {
    pub fn name(&self) -> &'static str {
        match self {
            PlanStep::Graph => "graph",
            PlanStep::Standard(op) => op.name(),
        }
    }
}

/// Ordered operator list for one record: the graph step (if configured) at
/// position 0, then `n_ops` standard ops drawn without replacement.
pub fn sample_plan(policy: &AugmentPolicy, rng: &mut RandomStream) -> Vec<PlanStep> {
    let mut plan = Vec::with_capacity(policy.n_ops + 1);
    if policy.graph.is_some() {
        plan.push(PlanStep::Graph);
    }
    let mut pool = policy.standard_ops.clone();
    for k in 0..policy.n_ops.min(pool.len()) {
        let pick = k + rng.below(pool.len() - k);
        pool.swap(k, pick);
        plan.push(PlanStep::Standard(pool[k]));
    }
    plan
}

/// A plan step with its random choices fixed.
#[derive(Debug, Clone)]
pub enum ResolvedStep {
    Graph(GraphDraw),
    Noise(RandomStream),
    TimeWarp(WarpDraw),
    Smooth(SmoothDraw),
    Mask(MaskDraw),
}

impl ResolvedStep {
    pub fn name(&self) -> &'static str {
        match self {
            ResolvedStep::Graph(_) => "graph",
            ResolvedStep::Noise(_) => StandardOp::Noise.name(),
            ResolvedStep::TimeWarp(_) => StandardOp::TimeWarp.name(),
            ResolvedStep::Smooth(_) => StandardOp::Smooth.name(),
            ResolvedStep::Mask(_) => StandardOp::Mask.name(),
        }
    }
}

/// Names of the steps that were executed, in order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PlanLog {
    pub steps: Vec<&'static str>,
}

impl PlanLog {
    pub fn graph_position(&self) -> Option<usize> {
        self.steps.iter().position(|s| *s == "graph")
    }
}

/// Samples a plan and the random choices of each of its steps.
///
/// Substreams: `plan` for the op order, `graph` for the graph draw, and
/// `<op name>/<k>` for the k-th standard op.
pub fn resolve_plan(
    record: &MultiLeadRecord,
    policy: &AugmentPolicy,
    rng: &RandomStream,
) -> Result<Vec<ResolvedStep>, PolicyError> {
    let plan = sample_plan(policy, &mut rng.fork("plan"));
    let n_samples = record.n_samples();
    plan.iter()
        .enumerate()
        .map(|(k, step)| {
            let mut sub = rng.fork(step.name()).fork_index(k as u64);
            Ok(match step {
                PlanStep::Graph => {
                    let params = policy.graph.as_ref().expect("graph step without params");
                    ResolvedStep::Graph(sample_graph_draw(record.n_leads(), params, &mut sub))
                }
                PlanStep::Standard(StandardOp::Noise) => ResolvedStep::Noise(sub),
                PlanStep::Standard(StandardOp::TimeWarp) => {
                    ResolvedStep::TimeWarp(sample_time_warp(n_samples, policy.gamma, &mut sub)?)
                }
                PlanStep::Standard(StandardOp::Smooth) => ResolvedStep::Smooth(sample_smooth(&mut sub)),
                PlanStep::Standard(StandardOp::Mask) => ResolvedStep::Mask(sample_mask(record.n_leads(), n_samples, policy.gamma, &mut sub)?),
            })
        })
        .collect()
}

/// Runs resolved steps in order.
pub fn execute_plan(
    record: &MultiLeadRecord,
    graph: Option<&LeadGraph>,
    policy: &AugmentPolicy,
    steps: &[ResolvedStep],
) -> Result<(MultiLeadRecord, PlanLog), PolicyError> {
    let mut current = record.clone();
    let mut log = PlanLog::default();
    for step in steps {
        current = match step {
            ResolvedStep::Graph(draw) => {
                let graph = graph.ok_or(PolicyError::MissingGraph)?;
                let params = policy.graph.ok_or(PolicyError::MissingGraph)?;
                graph_augment_with(&current, graph, &params, draw)?
            }
            ResolvedStep::Noise(stream) => gaussian_noise(&current, policy.gamma, &mut stream.clone())?,
            ResolvedStep::TimeWarp(draw) => apply_time_warp(&current, draw)?,
            ResolvedStep::Smooth(draw) => apply_smooth(&current, policy.gamma, draw)?,
            ResolvedStep::Mask(draw) => apply_mask(&current, draw)?,
        };
        log.steps.push(step.name());
    }
    Ok((current, log))
}

/// Augments one record under `policy` using the record's own stream.
pub fn apply_policy(
    record: &MultiLeadRecord,
    graph: Option<&LeadGraph>,
    policy: &AugmentPolicy,
    rng: &RandomStream,
) -> Result<(MultiLeadRecord, PlanLog), PolicyError> {
    policy.validate()?;
    if policy.graph.is_some() && graph.is_none() {
        return Err(PolicyError::MissingGraph);
    }
    let steps = resolve_plan(record, policy, rng)?;
    execute_plan(record, graph, policy, &steps)
}

/// Stream of the record at `index` within a dataset pass.
pub fn record_stream(root: &RandomStream, index: usize) -> RandomStream {
    root.fork("record").fork_index(index as u64)
}

fn augment_one(
    index: usize,
    record: &MultiLeadRecord,
    graph: Option<&LeadGraph>,
    policy: &AugmentPolicy,
    root: &RandomStream,
) -> Result<MultiLeadRecord, PolicyError> {
    apply_policy(record, graph, policy, &record_stream(root, index))
        .map(|(r, _)| r)
        .map_err(|e| PolicyError::Record {
            index,
            id: record.record_id.clone(),
            source: Box::new(e),
        })
}

/// Augments every record; record `i` uses `record_stream(root, i)`.
pub fn augment_records(
    records: &[MultiLeadRecord],
    graph: Option<&LeadGraph>,
    policy: &AugmentPolicy,
    root: &RandomStream,
) -> Result<Vec<MultiLeadRecord>, PolicyError> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| augment_one(i, r, graph, policy, root))
        .collect()
}

/// [`augment_records`] on `shards` threads; output order and values do not
/// depend on the shard count.
#[cfg(feature = "parallel")]
pub fn augment_records_sharded(
    records: &[MultiLeadRecord],
    graph: Option<&LeadGraph>,
    policy: &AugmentPolicy,
    root: &RandomStream,
    shards: usize,
) -> Result<Vec<MultiLeadRecord>, PolicyError> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(shards.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| {
        records
            .par_iter()
            .enumerate()
            .map(|(i, r)| augment_one(i, r, graph, policy, root))
            .collect()
    })
}

/// Training data the scorer sees for one policy: the original records
/// followed by `copies` augmented passes, each with its own stream.
pub fn augmented_training_set(
    train: &LabeledSet,
    graph: Option<&LeadGraph>,
    policy: &AugmentPolicy,
    copies: usize,
    root: &RandomStream,
) -> Result<LabeledSet, PolicyError> {
    if policy.is_identity() {
        return Ok(train.clone());
    }
    let mut records = train.records.clone();
    let mut labels = train.labels.clone();
    for copy in 0..copies {
        let pass = root.fork("copy").fork_index(copy as u64);
        records.extend(augment_records(&train.records, graph, policy, &pass)?);
        labels.extend_from_slice(&train.labels);
    }
    Ok(LabeledSet {
        records,
        labels,
        n_classes: train.n_classes,
    })
}

/// Trains on (augmented) training data and scores on clean validation data.
pub trait Scorer {
    fn score(&self, train: &LabeledSet, validation: &LabeledSet, seed: u64) -> Result<f64, String>;
}

impl<F> Scorer for F
where
    F: Fn(&LabeledSet, &LabeledSet, u64) -> Result<f64, String>,
{
    fn score(&self, train: &LabeledSet, validation: &LabeledSet, seed: u64) -> Result<f64, String> {
        self(train, validation, seed)
    }
}

/// Candidate values; cells are the product `gammas x n_ops x graph`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub gammas: Vec<f64>,
    pub n_ops: Vec<usize>,
    /// `None` is a cell without graph augmentation.
    pub graph: Vec<Option<GraphAugParams>>,
    pub standard_ops: Vec<StandardOp>,
    pub trials: usize,
    /// Augmented passes appended to the training set per trial.
    #[serde(default = "default_copies")]
    pub copies: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_copies() -> usize {
    1
}

impl Default for SearchGrid {
    /// Six cells: two intensities times {no graph, two graph settings}, one
    /// standard op per record.
    fn default() -> Self {
        Self {
            gammas: vec![5.0, 15.0],
            n_ops: vec![1],
            graph: vec![None, Some(GraphAugParams::new(0.5, 0.5)), Some(GraphAugParams::new(1.0, 0.5))],
            standard_ops: StandardOp::ALL.to_vec(),
            trials: 3,
            copies: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub index: usize,
    pub gamma: f64,
    pub n_ops: usize,
    pub graph: Option<GraphAugParams>,
}

impl SearchGrid {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.trials == 0 {
            return Err(PolicyError::Invalid("trials must be at least 1".into()));
        }
        if self.gammas.is_empty() || self.n_ops.is_empty() || self.graph.is_empty() {
            return Err(PolicyError::Invalid("every candidate list needs at least one value".into()));
        }
        for cell in self.cells() {
            self.policy_for(&cell).validate()?;
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<GridCell> {
        let mut cells = Vec::new();
        for &gamma in &self.gammas {
            for &n_ops in &self.n_ops {
                for graph in &self.graph {
                    cells.push(GridCell {
                        index: cells.len(),
                        gamma,
                        n_ops,
                        graph: *graph,
                    });
                }
            }
        }
        cells
    }

    pub fn policy_for(&self, cell: &GridCell) -> AugmentPolicy {
        AugmentPolicy {
            graph: cell.graph,
            standard_ops: self.standard_ops.clone(),
            n_ops: cell.n_ops,
            gamma: cell.gamma,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub cell: GridCell,
    pub scores: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// Seed handed to the scorer for each trial.
    pub trial_seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub cells: Vec<CellReport>,
    pub best: usize,
}

impl ScoreReport {
    pub fn best_cell(&self) -> &CellReport {
        &self.cells[self.best]
    }

    pub fn to_json(&self) -> Result<String, PolicyError> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Index of the best cell: highest mean, then lower gamma, then lower
/// `n_ops`, then lower cell index.
pub fn select_best(cells: &[CellReport]) -> usize {
    let key = |c: &CellReport| (c.mean, c.cell.gamma, c.cell.n_ops, c.cell.index);
    let mut best = 0;
    for (i, c) in cells.iter().enumerate().skip(1) {
        let (m, g, n, idx) = key(c);
        let (bm, bg, bn, bidx) = key(&cells[best]);
        let better = m.total_cmp(&bm).then(bg.total_cmp(&g)).then(bn.cmp(&n)).then(bidx.cmp(&idx));
        if better == std::cmp::Ordering::Greater {
            best = i;
        }
    }
    best
}

/// Scores every grid cell `trials` times. Each trial augments the training
/// set with a stream derived from (grid seed, cell, trial); validation data is
/// passed through untouched. The graph, when needed, comes from the caller
/// and should be estimated from the training split only.
pub fn policy_search<S: Scorer + ?Sized>(
    grid: &SearchGrid,
    train: &LabeledSet,
    validation: &LabeledSet,
    graph: Option<&LeadGraph>,
    scorer: &S,
) -> Result<ScoreReport, PolicyError> {
    grid.validate()?;
    if train.is_empty() || validation.is_empty() {
        return Err(PolicyError::Invalid("training and validation sets must be non-empty".into()));
    }
    let root = RandomStream::new(grid.seed).fork("search");
    let mut cells = Vec::new();
    for cell in grid.cells() {
        let policy = grid.policy_for(&cell);
        let cell_stream = root.fork_index(cell.index as u64);
        let mut scores = Vec::with_capacity(grid.trials);
        let mut trial_seeds = Vec::with_capacity(grid.trials);
        for trial in 0..grid.trials {
            let stream = cell_stream.fork_index(trial as u64);
            let augmented = augmented_training_set(train, graph, &policy, grid.copies, &stream)?;
            let seed = stream.fork("scorer").key();
            let score = scorer
                .score(&augmented, validation, seed)
                .map_err(|message| PolicyError::Scorer {
                    cell: cell.index,
                    trial,
                    message,
                })?;
            scores.push(score);
            trial_seeds.push(seed);
        }
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let std = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt();
        cells.push(CellReport {
            cell,
            scores,
            mean,
            std,
            trial_seeds,
        });
    }
    let best = select_best(&cells);
    Ok(ScoreReport { cells, best })
}

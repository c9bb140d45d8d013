//! Demo computations behind the browser exports.

use leadaug::harness::{synth_dataset, RobustnessExperiment, SynthSpec};
use leadaug::policy::AugmentPolicy;
use leadaug::{apply_policy, estimate_graph as estimate, GraphAugParams, RandomStream, StandardOp};

const DEMO_SAMPLES: usize = 128;

pub fn lead_names() -> Vec<String> {
    SynthSpec::twelve_lead(1, DEMO_SAMPLES, 2, 0).lead_names
}

pub fn estimate_graph(n_records: usize, direction_jitter: f64, seed: u64) -> Result<Vec<f64>, String> {
    let mut spec = SynthSpec::twelve_lead(n_records.max(1), DEMO_SAMPLES, 4, seed);
    spec.direction_jitter = direction_jitter;
    let set = synth_dataset(&spec).map_err(|e| e.to_string())?;
    let (graph, _) = estimate(&set.records).map_err(|e| e.to_string())?;
    Ok(graph.adjacency.concat())
}

#[derive(Debug, Clone)]
pub struct AugmentParams {
    pub lead: usize,
    pub p: f64,
    pub alpha: f64,
    pub gamma: f64,
    /// Comma-separated standard op names.
    pub ops: String,
    pub n_ops: usize,
    pub seed: u64,
}

fn parse_ops(list: &str) -> Result<Vec<StandardOp>, String> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|name| {
            StandardOp::ALL
                .into_iter()
                .find(|op| op.name() == name)
                .ok_or_else(|| format!("unknown op {name:?}"))
        })
        .collect()
}

pub fn augment_lead(params: &AugmentParams) -> Result<Vec<f64>, String> {
    let set = synth_dataset(&SynthSpec::twelve_lead(200, DEMO_SAMPLES, 4, params.seed)).map_err(|e| e.to_string())?;
    let (graph, _) = estimate(&set.records).map_err(|e| e.to_string())?;
    let record = &set.records[0];
    if params.lead >= record.n_leads() {
        return Err(format!("lead {} out of range", params.lead));
    }
    let standard_ops = parse_ops(&params.ops)?;
    let policy = AugmentPolicy {
        graph: (params.p > 0.0).then(|| GraphAugParams::new(params.p, params.alpha)),
        n_ops: params.n_ops.min(standard_ops.len()),
        standard_ops,
        gamma: params.gamma,
        seed: params.seed,
    };
    let stream = RandomStream::new(params.seed).fork("demo");
    let (out, _) = apply_policy(record, Some(&graph), &policy, &stream).map_err(|e| e.to_string())?;
    let mut values = record.leads[params.lead].clone();
    values.extend_from_slice(&out.leads[params.lead]);
    Ok(values)
}

/// A scaled-down run of the robustness experiment that finishes in seconds.
pub fn demo_experiment(n_records: usize) -> RobustnessExperiment {
    let mut exp = RobustnessExperiment::desk_scale();
    exp.synth.n_records = n_records.max(50);
    exp.grid.trials = 1;
    exp.attack.n_steps = 10;
    exp
}

pub fn robustness_curves(n_records: usize, seed: u64) -> Result<Vec<f64>, String> {
    let cmp = demo_experiment(n_records).run(seed).map_err(|e| e.to_string())?;
    let mut out: Vec<f64> = cmp.baseline_curve.iter().map(|p| p.epsilon).collect();
    out.extend(cmp.baseline_curve.iter().map(|p| p.macro_f1));
    out.extend(cmp.graph_curve.iter().map(|p| p.macro_f1));
    Ok(out)
}

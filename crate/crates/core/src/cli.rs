//! Command-line front end.
//!
//! Exit codes: 0 success, 2 I/O or unreadable input, 3 semantic
//! incompatibility (lead sets, policy/graph mismatch, bad configuration),
//! 4 numerical failure (divergence, non-finite scores).

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::Command;

use clap::{Args, Parser, Subcommand};

use crate::container::{load_container, save_container, ContainerError};
use crate::graph::{estimate_graph_sharded, GraphError, LeadGraph};
use crate::harness::{
    read_labels, robustness_curve, synth_dataset, train_classifier, write_labels, AttackTemplate, CurvePoint,
    HarnessError, LabeledSet, LinearScorer, SynthSpec, TrainConfig,
};
use crate::policy::{
    augment_records_sharded, augmented_training_set, policy_search, AugmentPolicy, PolicyError, Scorer, SearchGrid,
};
use crate::record::{CanonicalLeadOrder, MultiLeadRecord};
use crate::rng::RandomStream;

#[derive(Debug, Parser)]
#[command(name = "leadaug", version, about = "Correlation-graph augmentation for multi-lead waveforms")]
pub struct Cli {
    /// Root seed for every random draw [default: 0, or the seed stored in
    /// the policy, grid or spec file]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for per-record work; outputs do not depend on it
    #[arg(long, global = true, default_value_t = 1)]
    pub shards: usize,
    /// Suppress the human-readable summary on stderr
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Estimate the lead graph from training containers
    EstimateGraph(EstimateGraphArgs),
    /// Apply an augmentation policy to every record of a container
    Augment(AugmentArgs),
    /// Score a grid of policies and report the best cell
    PolicySearch(PolicySearchArgs),
    /// Write a synthetic labelled dataset
    Synth(SynthArgs),
    /// Train per policy and report macro-F1 under PGD attack
    AttackEval(AttackEvalArgs),
}

#[derive(Debug, Args)]
pub struct EstimateGraphArgs {
    /// Training containers; records from all files are pooled
    pub inputs: Vec<PathBuf>,
    /// Lead graph JSON
    #[arg(short, long)]
    pub output: PathBuf,
    /// Also write the adjacency as CSV
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    /// Lead graph JSON, required when the policy enables graph augmentation
    #[arg(short, long)]
    pub graph: Option<PathBuf>,
    /// Policy JSON
    #[arg(short, long)]
    pub policy: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct LabeledInput {
    /// Training container
    #[arg(long)]
    pub train: PathBuf,
    /// `record_id,label` CSV for the training container
    #[arg(long)]
    pub train_labels: PathBuf,
    /// Lead graph JSON [default: estimated from --train]
    #[arg(short, long)]
    pub graph: Option<PathBuf>,
    /// Classifier settings JSON
    #[arg(long)]
    pub train_config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PolicySearchArgs {
    #[command(flatten)]
    pub data: LabeledInput,
    /// Validation container, never augmented
    #[arg(long)]
    pub val: PathBuf,
    #[arg(long)]
    pub val_labels: PathBuf,
    /// Search grid JSON [default: 2 gammas x {no graph, 2 graph settings}]
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// External scorer, run as `<cmd> <train.mwv> <val.mwv>`; prints one score
    #[arg(long)]
    pub scorer_cmd: Option<String>,
    /// Score report JSON
    #[arg(short, long)]
    pub output: PathBuf,
    /// Also write the best cell's policy JSON
    #[arg(long)]
    pub best_policy: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output container
    #[arg(short, long)]
    pub output: PathBuf,
    /// `record_id,label` CSV
    #[arg(long)]
    pub labels: PathBuf,
    /// Full generator spec JSON; overrides the size flags
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pub records: usize,
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
}

#[derive(Debug, Args)]
pub struct AttackEvalArgs {
    #[command(flatten)]
    pub data: LabeledInput,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub test_labels: PathBuf,
    /// Ascending perturbation radii, comma separated
    #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.02,0.03,0.04")]
    pub eps: Vec<f64>,
    /// Policy JSON, repeatable; without any, trains on clean data only
    #[arg(long)]
    pub policy: Vec<PathBuf>,
    /// Augmented passes appended to the training set
    #[arg(long, default_value_t = 1)]
    pub copies: usize,
    /// PGD iterations per record
    #[arg(long, default_value_t = 40)]
    pub steps: usize,
    /// CSV with one row per epsilon for the first policy
    #[arg(short, long)]
    pub output: PathBuf,
    /// Long-format CSV covering every policy
    #[arg(long)]
    pub long_csv: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Semantic(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 2,
            CliError::Semantic(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl From<ContainerError> for CliError {
    fn from(e: ContainerError) -> Self {
        match e {
            ContainerError::InvalidRecord { .. } | ContainerError::TooLarge(_) => CliError::Semantic(e.to_string()),
            _ => CliError::Io(e.to_string()),
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::Empty | GraphError::Json(_) | GraphError::Csv(_) | GraphError::Io(_) => {
                CliError::Io(e.to_string())
            }
            _ => CliError::Semantic(e.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Divergence { .. } => CliError::Numerical(e.to_string()),
            HarnessError::Csv(_) => CliError::Io(e.to_string()),
            _ => CliError::Semantic(e.to_string()),
        }
    }
}

impl From<PolicyError> for CliError {
    fn from(e: PolicyError) -> Self {
        let code = policy_code(&e);
        match code {
            2 => CliError::Io(e.to_string()),
            4 => CliError::Numerical(e.to_string()),
            _ => CliError::Semantic(e.to_string()),
        }
    }
}

fn policy_code(e: &PolicyError) -> i32 {
    match e {
        PolicyError::Json(_) => 2,
        PolicyError::Scorer { .. } => 4,
        PolicyError::Record { source, .. } => policy_code(source),
        _ => 3,
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn load(path: &Path) -> Result<Vec<MultiLeadRecord>, CliError> {
    load_container(path).map_err(|e| match CliError::from(e) {
        CliError::Io(m) => CliError::Io(format!("{}: {m}", path.display())),
        CliError::Semantic(m) => CliError::Semantic(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn load_labeled(records: &Path, labels: &Path, n_classes: Option<usize>) -> Result<LabeledSet, CliError> {
    let recs = load(records)?;
    let file = File::open(labels).map_err(|e| io_err(labels, e))?;
    let table = read_labels(BufReader::new(file)).map_err(|e| match e {
        HarnessError::Csv(e) => io_err(labels, e),
        other => CliError::Semantic(format!("{}: {other}", labels.display())),
    })?;
    Ok(LabeledSet::from_label_table(recs, &table, n_classes)?)
}

fn n_classes_of(a: &LabeledSet, b: &LabeledSet) -> usize {
    a.n_classes.max(b.n_classes)
}

/// Loads the graph file, or estimates the graph from the training records.
fn graph_for(path: Option<&Path>, train: &[MultiLeadRecord], shards: usize) -> Result<LeadGraph, CliError> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            Ok(LeadGraph::from_json(&text)?)
        }
        None => Ok(estimate_graph_sharded(train, shards)?.0),
    }
}

struct Ctx {
    seed: Option<u64>,
    shards: usize,
    quiet: bool,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn seed_or(&self, stored: u64) -> u64 {
        self.seed.unwrap_or(stored)
    }
}

fn estimate_graph_cmd(ctx: &Ctx, args: &EstimateGraphArgs) -> Result<(), CliError> {
    if args.inputs.is_empty() {
        return Err(CliError::Io("estimate-graph needs at least one input container".into()));
    }
    let mut records = Vec::new();
    for path in &args.inputs {
        records.extend(load(path)?);
    }
    let Some(first) = records.first() else {
        return Err(CliError::Io("input containers hold no records".into()));
    };
    // Recognised 12-lead sets are pooled in canonical order.
    let order = CanonicalLeadOrder::order_for(&first.lead_names);
    let mut aligned = Vec::with_capacity(records.len());
    for r in &records {
        let r = if r.lead_names == order {
            r.clone()
        } else {
            r.reordered(&order).map_err(|e| CliError::Semantic(format!("record {:?}: {e}", r.record_id)))?
        };
        aligned.push(r);
    }
    let (graph, degenerate) = estimate_graph_sharded(&aligned, ctx.shards)?;
    write_text(&args.output, &graph.to_json()?)?;
    if let Some(csv_path) = &args.csv {
        let file = File::create(csv_path).map_err(|e| io_err(csv_path, e))?;
        graph.write_csv(BufWriter::new(file))?;
    }
    ctx.say(format!("{} records, {} leads", graph.record_count, graph.n_leads()));
    if degenerate > 0 {
        ctx.say(format!("warning: {degenerate} constant leads contributed zero correlation"));
    }
    Ok(())
}

fn augment_cmd(ctx: &Ctx, args: &AugmentArgs) -> Result<(), CliError> {
    let records = load(&args.input)?;
    let policy: AugmentPolicy = {
        let text = std::fs::read_to_string(&args.policy).map_err(|e| io_err(&args.policy, e))?;
        AugmentPolicy::from_json(&text).map_err(|e| match e {
            PolicyError::Json(j) => io_err(&args.policy, j),
            other => other.into(),
        })?
    };
    let graph = match &args.graph {
        Some(p) => Some(graph_for(Some(p), &[], ctx.shards)?),
        None => None,
    };
    let root = RandomStream::new(ctx.seed_or(policy.seed));
    let out = augment_records_sharded(&records, graph.as_ref(), &policy, &root, ctx.shards)?;
    save_container(&args.output, &out)?;
    ctx.say(format!("augmented {} records", out.len()));
    Ok(())
}

/// Runs an external command on temporary containers and parses its stdout.
struct SubprocessScorer {
    command: String,
}

impl SubprocessScorer {
    fn run(&self, train: &LabeledSet, validation: &LabeledSet, seed: u64) -> Result<f64, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let train_path = dir.path().join("train.mwv");
        let val_path = dir.path().join("val.mwv");
        save_container(&train_path, &train.records).map_err(|e| e.to_string())?;
        save_container(&val_path, &validation.records).map_err(|e| e.to_string())?;
        let train_labels = dir.path().join("train_labels.csv");
        let val_labels = dir.path().join("val_labels.csv");
        for (path, set) in [(&train_labels, train), (&val_labels, validation)] {
            let file = File::create(path).map_err(|e| e.to_string())?;
            write_labels(BufWriter::new(file), &set.label_table()).map_err(|e| e.to_string())?;
        }
        let output = Command::new("sh")
            .arg("-c")
            .arg(format!("{} \"$1\" \"$2\"", self.command))
            .arg("leadaug-scorer")
            .arg(&train_path)
            .arg(&val_path)
            .env("LEADAUG_TRAIN_LABELS", &train_labels)
            .env("LEADAUG_VAL_LABELS", &val_labels)
            .env("LEADAUG_SEED", seed.to_string())
            .output()
            .map_err(|e| format!("cannot run scorer: {e}"))?;
        if !output.status.success() {
            return Err(format!(
                "scorer exited with {}: {}",
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            ));
        }
        let stdout = String::from_utf8_lossy(&output.stdout);
        let score: f64 = stdout
            .trim()
            .parse()
            .map_err(|_| format!("scorer printed {:?}, expected one number", stdout.trim()))?;
        if !score.is_finite() {
            return Err(format!("scorer printed non-finite score {score}"));
        }
        Ok(score)
    }
}

impl Scorer for SubprocessScorer {
    fn score(&self, train: &LabeledSet, validation: &LabeledSet, seed: u64) -> Result<f64, String> {
        self.run(train, validation, seed)
    }
}

fn train_config(path: Option<&Path>) -> Result<TrainConfig, CliError> {
    path.map_or(Ok(TrainConfig::default()), read_json)
}

fn policy_search_cmd(ctx: &Ctx, args: &PolicySearchArgs) -> Result<(), CliError> {
    let train = load_labeled(&args.data.train, &args.data.train_labels, None)?;
    let val = load_labeled(&args.val, &args.val_labels, None)?;
    let n_classes = n_classes_of(&train, &val);
    let train = LabeledSet { n_classes, ..train };
    let val = LabeledSet { n_classes, ..val };
    let mut grid: SearchGrid = match &args.grid {
        Some(p) => read_json(p)?,
        None => SearchGrid::default(),
    };
    grid.seed = ctx.seed_or(grid.seed);
    let needs_graph = grid.graph.iter().any(Option::is_some);
    let graph = if needs_graph {
        Some(graph_for(args.data.graph.as_deref(), &train.records, ctx.shards)?)
    } else {
        None
    };
    let report = match &args.scorer_cmd {
        Some(cmd) => policy_search(&grid, &train, &val, graph.as_ref(), &SubprocessScorer { command: cmd.clone() })?,
        None => {
            let scorer = LinearScorer {
                train: train_config(args.data.train_config.as_deref())?,
            };
            policy_search(&grid, &train, &val, graph.as_ref(), &scorer)?
        }
    };
    write_text(&args.output, &report.to_json()?)?;
    let best = report.best_cell();
    if let Some(p) = &args.best_policy {
        write_text(p, &grid.policy_for(&best.cell).to_json()?)?;
    }
    for c in &report.cells {
        ctx.say(format!(
            "cell {}: gamma {} n_ops {} graph {} -> {:.4} +- {:.4}",
            c.cell.index,
            c.cell.gamma,
            c.cell.n_ops,
            c.cell
                .graph
                .map_or("none".to_string(), |g| format!("p={} alpha={}", g.p, g.alpha)),
            c.mean,
            c.std
        ));
    }
    ctx.say(format!("best cell {}", best.cell.index));
    Ok(())
}

fn synth_cmd(ctx: &Ctx, args: &SynthArgs) -> Result<(), CliError> {
    let mut spec = match &args.spec {
        Some(p) => read_json(p)?,
        None => SynthSpec::twelve_lead(args.records, args.samples, args.classes, 0),
    };
    spec.seed = ctx.seed_or(spec.seed);
    let set = synth_dataset(&spec)?;
    save_container(&args.output, &set.records)?;
    let file = File::create(&args.labels).map_err(|e| io_err(&args.labels, e))?;
    write_labels(BufWriter::new(file), &set.label_table()).map_err(|e| io_err(&args.labels, e))?;
    ctx.say(format!(
        "{} records, {} leads x {} samples, {} classes",
        set.len(),
        spec.n_leads(),
        spec.n_samples,
        spec.n_classes
    ));
    Ok(())
}

struct PolicyCurve {
    name: String,
    seed: u64,
    curve: Vec<CurvePoint>,
}

fn attack_eval_cmd(ctx: &Ctx, args: &AttackEvalArgs) -> Result<(), CliError> {
    let train = load_labeled(&args.data.train, &args.data.train_labels, None)?;
    let test = load_labeled(&args.test, &args.test_labels, None)?;
    let n_classes = n_classes_of(&train, &test);
    let train = LabeledSet { n_classes, ..train };
    let test = LabeledSet { n_classes, ..test };
    let cfg = train_config(args.data.train_config.as_deref())?;

    let mut policies = Vec::new();
    for path in &args.policy {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let policy = AugmentPolicy::from_json(&text).map_err(|e| match e {
            PolicyError::Json(j) => io_err(path, j),
            other => other.into(),
        })?;
        let name = path.file_stem().map_or("policy".into(), |s| s.to_string_lossy().into_owned());
        policies.push((name, policy));
    }
    if policies.is_empty() {
        policies.push(("clean".to_string(), AugmentPolicy::identity()));
    }
    let graph = if policies.iter().any(|(_, p)| p.graph.is_some()) {
        Some(graph_for(args.data.graph.as_deref(), &train.records, ctx.shards)?)
    } else {
        None
    };

    let mut curves = Vec::new();
    for (name, policy) in &policies {
        let seed = ctx.seed_or(policy.seed);
        let stream = RandomStream::new(seed).fork("attack-eval");
        let augmented = augmented_training_set(&train, graph.as_ref(), policy, args.copies, &stream)?;
        let (model, _) = train_classifier(&augmented, &cfg)?;
        let template = AttackTemplate {
            n_steps: args.steps,
            seed,
            ..AttackTemplate::default()
        };
        let curve = robustness_curve(&model, &test, &args.eps, &template)?;
        for p in &curve {
            ctx.say(format!("{name}: eps {} -> macro-F1 {:.4}", p.epsilon, p.macro_f1));
        }
        curves.push(PolicyCurve {
            name: name.clone(),
            seed,
            curve,
        });
    }

    let n = test.len();
    let write_csv = |path: &Path, rows: &mut dyn FnMut(&mut csv::Writer<BufWriter<File>>) -> csv::Result<()>| {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        rows(&mut w).map_err(|e| io_err(path, e))?;
        w.flush().map_err(|e| io_err(path, e))
    };
    let first = &curves[0];
    write_csv(&args.output, &mut |w| {
        w.write_record(["epsilon", "macro_f1", "n_records", "seed"])?;
        for p in &first.curve {
            w.write_record([p.epsilon.to_string(), p.macro_f1.to_string(), n.to_string(), first.seed.to_string()])?;
        }
        Ok(())
    })?;
    if let Some(long) = &args.long_csv {
        write_csv(long, &mut |w| {
            w.write_record(["policy", "epsilon", "macro_f1", "n_records", "seed"])?;
            for c in &curves {
                for p in &c.curve {
                    w.write_record([
                        c.name.clone(),
                        p.epsilon.to_string(),
                        p.macro_f1.to_string(),
                        n.to_string(),
                        c.seed.to_string(),
                    ])?;
                }
            }
            Ok(())
        })?;
    }
    Ok(())
}

/// Executes a parsed command line.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let ctx = Ctx {
        seed: cli.seed,
        shards: cli.shards.max(1),
        quiet: cli.quiet,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.shards)
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;
    pool.install(|| match &cli.command {
        Cmd::EstimateGraph(a) => estimate_graph_cmd(&ctx, a),
        Cmd::Augment(a) => augment_cmd(&ctx, a),
        Cmd::PolicySearch(a) => policy_search_cmd(&ctx, a),
        Cmd::Synth(a) => synth_cmd(&ctx, a),
        Cmd::AttackEval(a) => attack_eval_cmd(&ctx, a),
    })
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 3 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run() -> i32 {
    run_with(std::env::args_os())
}

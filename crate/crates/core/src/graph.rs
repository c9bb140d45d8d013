//! Lead-graph estimation: the dataset-mean of per-record lag-0 Pearson
//! correlation matrices, accumulated in a mergeable streaming form.
//!
//! Each record contributes its own normalized correlation matrix (with the
//! `1/T` factor, so entries lie in `[-1, 1]`); the graph is the arithmetic mean
//! of those matrices with the diagonal fixed at zero. Signs are preserved.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::record::{permutation_to, MultiLeadRecord};

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("lead mismatch: expected {expected:?}, found {found:?}")]
    LeadMismatch { expected: Vec<String>, found: Vec<String> },
    #[error("cannot finalize an empty accumulator")]
    Empty,
    #[error("invalid lead graph: {0}")]
    Invalid(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Weighted adjacency between leads. Symmetric, zero diagonal, entries in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadGraph {
    pub lead_names: Vec<String>,
    pub record_count: u64,
    /// Row-major `L x L` matrix.
    pub adjacency: Vec<Vec<f64>>,
}

/// How the rows of the adjacency are scaled before mixing leads.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixNormalization {
    /// Use the correlation weights as they are.
    #[default]
    Raw,
    /// Divide row `i` by `sum_j |A_ij|` (rows summing to zero stay zero).
    RowAbsSum,
}

impl LeadGraph {
    pub fn n_leads(&self) -> usize {
        self.lead_names.len()
    }

    pub fn check_invariants(&self) -> Result<(), GraphError> {
        let n = self.lead_names.len();
        if self.adjacency.len() != n || self.adjacency.iter().any(|r| r.len() != n) {
            return Err(GraphError::Invalid(format!("adjacency is not {n}x{n}")));
        }
        for i in 0..n {
            if self.adjacency[i][i] != 0.0 {
                return Err(GraphError::Invalid(format!("diagonal entry {i} is nonzero")));
            }
            for j in 0..n {
                let a = self.adjacency[i][j];
                if !a.is_finite() || a.abs() > 1.0 {
                    return Err(GraphError::Invalid(format!("entry ({i},{j}) = {a} outside [-1, 1]")));
                }
                if (a - self.adjacency[j][i]).abs() > 1e-12 {
                    return Err(GraphError::Invalid(format!("not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(())
    }

    /// The same graph with leads permuted to follow `order`.
    pub fn aligned_to(&self, order: &[String]) -> Result<LeadGraph, GraphError> {
        if order == self.lead_names.as_slice() {
            return Ok(self.clone());
        }
        let perm = permutation_to(&self.lead_names, order).ok_or_else(|| GraphError::LeadMismatch {
            expected: self.lead_names.clone(),
            found: order.to_vec(),
        })?;
        let adjacency = perm
            .iter()
            .map(|&i| perm.iter().map(|&j| self.adjacency[i][j]).collect())
            .collect();
        Ok(LeadGraph {
            lead_names: order.to_vec(),
            record_count: self.record_count,
            adjacency,
        })
    }

    /// Mixing weights per target lead.
    pub fn mix_weights(&self, normalization: MixNormalization) -> Vec<Vec<f64>> {
        match normalization {
            MixNormalization::Raw => self.adjacency.clone(),
            MixNormalization::RowAbsSum => self
                .adjacency
                .iter()
                .map(|row| {
                    let total: f64 = row.iter().map(|a| a.abs()).sum();
                    if total > 0.0 {
                        row.iter().map(|a| a / total).collect()
                    } else {
                        row.clone()
                    }
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String, GraphError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<LeadGraph, GraphError> {
        let graph: LeadGraph = serde_json::from_str(text)?;
        graph.check_invariants()?;
        Ok(graph)
    }

    /// CSV with a lead-name header row and a lead-name first column.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), GraphError> {
        let mut wtr = csv::Writer::from_writer(writer);
        let header: Vec<&str> = std::iter::once("")
            .chain(self.lead_names.iter().map(String::as_str))
            .collect();
        wtr.write_record(&header)?;
        for (name, row) in self.lead_names.iter().zip(&self.adjacency) {
            let mut fields = vec![name.clone()];
            fields.extend(row.iter().map(f64::to_string));
            wtr.write_record(&fields)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Per-record correlation matrix plus the leads that had zero variance.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordCorrelation {
    pub matrix: Vec<Vec<f64>>,
    pub degenerate_leads: Vec<usize>,
}

/// Lag-0 Pearson correlation between every pair of leads of one record.
///
/// Diagonal entries are zero. Pairs involving a constant lead get 0 and the
/// lead is listed in `degenerate_leads`.
pub fn record_correlation(record: &MultiLeadRecord) -> RecordCorrelation {
    let n = record.n_leads();
    let t = record.n_samples() as f64;
    let mut degenerate = Vec::new();
    let centered: Vec<Vec<f64>> = record
        .leads
        .iter()
        .map(|lead| {
            let mean = lead.iter().sum::<f64>() / t;
            lead.iter().map(|v| v - mean).collect()
        })
        .collect();
    let sq: Vec<f64> = centered.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
    for (i, lead) in record.leads.iter().enumerate() {
        let max_abs = lead.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let first = lead[0];
        let constant = lead.iter().all(|&v| v == first);
        if constant || (sq[i] / t).sqrt() <= 1e-12 * max_abs {
            degenerate.push(i);
        }
    }
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if degenerate.contains(&i) || degenerate.contains(&j) {
                continue;
            }
            let sxy: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
            let r = (sxy / (sq[i] * sq[j]).sqrt()).clamp(-1.0, 1.0);
            matrix[i][j] = r;
            matrix[j][i] = r;
        }
    }
    RecordCorrelation {
        matrix,
        degenerate_leads: degenerate,
    }
}

/// Running sum of per-record correlation matrices for a fixed lead order.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationAccumulator {
    lead_names: Vec<String>,
    record_count: u64,
    sum: Vec<f64>,
    degenerate_count: u64,
}

impl CorrelationAccumulator {
    pub fn new(lead_names: Vec<String>) -> Self {
        let n = lead_names.len();
        Self {
            lead_names,
            record_count: 0,
            sum: vec![0.0; n * n],
            degenerate_count: 0,
        }
    }

    pub fn lead_names(&self) -> &[String] {
        &self.lead_names
    }

    pub fn record_count(&self) -> u64 {
        self.record_count
    }

    /// Number of (record, lead) pairs that had zero variance.
    pub fn degenerate_count(&self) -> u64 {
        self.degenerate_count
    }

    /// Adds one record. Its leads must match the accumulator's names and order.
    pub fn accumulate(&mut self, record: &MultiLeadRecord) -> Result<(), GraphError> {
        if record.lead_names != self.lead_names {
            return Err(GraphError::LeadMismatch {
                expected: self.lead_names.clone(),
                found: record.lead_names.clone(),
            });
        }
        self.add_correlation(&record_correlation(record));
        Ok(())
    }

    /// Adds a precomputed per-record correlation (same lead order assumed).
    pub fn add_correlation(&mut self, corr: &RecordCorrelation) {
        let n = self.lead_names.len();
        for (i, row) in corr.matrix.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                self.sum[i * n + j] += v;
            }
        }
        self.record_count += 1;
        self.degenerate_count += corr.degenerate_leads.len() as u64;
    }

    pub fn merge(mut self, other: &CorrelationAccumulator) -> Result<Self, GraphError> {
        if other.lead_names != self.lead_names {
            return Err(GraphError::LeadMismatch {
                expected: self.lead_names.clone(),
                found: other.lead_names.clone(),
            });
        }
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        self.record_count += other.record_count;
        self.degenerate_count += other.degenerate_count;
        Ok(self)
    }

    pub fn finalize(&self) -> Result<LeadGraph, GraphError> {
        if self.record_count == 0 {
            return Err(GraphError::Empty);
        }
        let n = self.lead_names.len();
        let count = self.record_count as f64;
        let mut adjacency = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let sym = 0.5 * (self.sum[i * n + j] + self.sum[j * n + i]);
                    adjacency[i][j] = (sym / count).clamp(-1.0, 1.0);
                }
            }
        }
        Ok(LeadGraph {
            lead_names: self.lead_names.clone(),
            record_count: self.record_count,
            adjacency,
        })
    }
}

/// Estimates a graph from records already in a common lead order.
pub fn estimate_graph(records: &[MultiLeadRecord]) -> Result<(LeadGraph, u64), GraphError> {
    let first = records.first().ok_or(GraphError::Empty)?;
    let mut acc = CorrelationAccumulator::new(first.lead_names.clone());
    for r in records {
        acc.accumulate(r)?;
    }
    Ok((acc.finalize()?, acc.degenerate_count()))
}

/// Like [`estimate_graph`], with per-record correlations computed on `shards`
/// worker threads. Sums are reduced in input order, so the result is
/// bit-identical for every shard count.
#[cfg(feature = "parallel")]
pub fn estimate_graph_sharded(
    records: &[MultiLeadRecord],
    shards: usize,
) -> Result<(LeadGraph, u64), GraphError> {
    use rayon::prelude::*;

    let first = records.first().ok_or(GraphError::Empty)?;
    let names = first.lead_names.clone();
    if let Some(bad) = records.iter().find(|r| r.lead_names != names) {
        return Err(GraphError::LeadMismatch {
            expected: names,
            found: bad.lead_names.clone(),
        });
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(shards.max(1))
        .build()
        .expect("thread pool");
    let correlations: Vec<RecordCorrelation> =
        pool.install(|| records.par_iter().map(record_correlation).collect());
    let mut acc = CorrelationAccumulator::new(names);
    for c in &correlations {
        acc.add_correlation(c);
    }
    Ok((acc.finalize()?, acc.degenerate_count()))
}

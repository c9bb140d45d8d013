//! Multi-lead waveform records, per-lead statistics and the canonical lead order.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// One waveform example: `L` leads of `T` samples each.
///
/// Fields are public so that malformed data read from disk can be inspected
/// with [`validate_record`]; operations in this crate assume a valid record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiLeadRecord {
    pub record_id: String,
    pub sample_rate: f64,
    pub lead_names: Vec<String>,
    /// Lead-major samples, `leads[i][t]`.
    pub leads: Vec<Vec<f64>>,
}

impl MultiLeadRecord {
    /// Builds a record and rejects it if any invariant is violated.
    pub fn new(
        record_id: impl Into<String>,
        sample_rate: f64,
        lead_names: Vec<String>,
        leads: Vec<Vec<f64>>,
    ) -> Result<Self, RecordError> {
        let record = Self {
            record_id: record_id.into(),
            sample_rate,
            lead_names,
            leads,
        };
        let report = validate_record(&record);
        if report.is_ok() {
            Ok(record)
        } else {
            Err(RecordError::Invalid(report))
        }
    }

    /// Record with generated lead names `L0..L{n-1}`.
    pub fn from_leads(record_id: impl Into<String>, leads: Vec<Vec<f64>>) -> Result<Self, RecordError> {
        let names = (0..leads.len()).map(|i| format!("L{i}")).collect();
        Self::new(record_id, 500.0, names, leads)
    }

    pub fn n_leads(&self) -> usize {
        self.leads.len()
    }

    pub fn n_samples(&self) -> usize {
        self.leads.first().map_or(0, Vec::len)
    }

    /// Copy of this record with the samples replaced.
    pub fn with_leads(&self, leads: Vec<Vec<f64>>) -> Self {
        Self {
            record_id: self.record_id.clone(),
            sample_rate: self.sample_rate,
            lead_names: self.lead_names.clone(),
            leads,
        }
    }

    /// Reorders the leads so that they follow `order` (matched by name).
    pub fn reordered(&self, order: &[String]) -> Result<Self, RecordError> {
        let perm = permutation_to(&self.lead_names, order).ok_or_else(|| RecordError::LeadSetMismatch {
            expected: order.to_vec(),
            found: self.lead_names.clone(),
        })?;
        Ok(Self {
            record_id: self.record_id.clone(),
            sample_rate: self.sample_rate,
            lead_names: order.to_vec(),
            leads: perm.iter().map(|&src| self.leads[src].clone()).collect(),
        })
    }
}

/// For each name in `target`, the index of that name in `source`.
/// `None` when the two lists are not permutations of each other.
pub fn permutation_to(source: &[String], target: &[String]) -> Option<Vec<usize>> {
    if source.len() != target.len() {
        return None;
    }
    let mut used = vec![false; source.len()];
    let mut perm = Vec::with_capacity(target.len());
    for name in target {
        let idx = source.iter().position(|s| s == name)?;
        if used[idx] {
            return None;
        }
        used[idx] = true;
        perm.push(idx);
    }
    Some(perm)
}

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("invalid record: {0}")]
    Invalid(ValidationReport),
    #[error("lead set mismatch: expected {expected:?}, found {found:?}")]
    LeadSetMismatch { expected: Vec<String>, found: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TooFewLeads(usize),
    TooFewSamples(usize),
    NonFinite { lead: usize, t: usize },
    RaggedLead { lead: usize, len: usize, expected: usize },
    DuplicateLead(String),
    NameCountMismatch { names: usize, leads: usize },
    BadSampleRate(f64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewLeads(n) => write!(f, "too few leads ({n} < 2)"),
            Violation::TooFewSamples(n) => write!(f, "too few samples ({n} < 2)"),
            Violation::NonFinite { lead, t } => write!(f, "non-finite sample at ({lead}, {t})"),
            Violation::RaggedLead { lead, len, expected } => {
                write!(f, "ragged lead {lead}: {len} samples, expected {expected}")
            }
            Violation::DuplicateLead(name) => write!(f, "duplicate lead {name:?}"),
            Violation::NameCountMismatch { names, leads } => {
                write!(f, "{names} lead names for {leads} leads")
            }
            Violation::BadSampleRate(r) => write!(f, "sample rate must be positive, got {r}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks every record invariant and lists what is violated.
///
/// Only the first non-finite sample of each lead is reported.
pub fn validate_record(record: &MultiLeadRecord) -> ValidationReport {
    let mut violations = Vec::new();
    let n_leads = record.leads.len();
    if n_leads < 2 {
        violations.push(Violation::TooFewLeads(n_leads));
    }
    if !(record.sample_rate.is_finite() && record.sample_rate > 0.0) {
        violations.push(Violation::BadSampleRate(record.sample_rate));
    }
    if record.lead_names.len() != n_leads {
        violations.push(Violation::NameCountMismatch {
            names: record.lead_names.len(),
            leads: n_leads,
        });
    }
    let mut seen = HashSet::new();
    for name in &record.lead_names {
        if !seen.insert(name.as_str()) {
            violations.push(Violation::DuplicateLead(name.clone()));
        }
    }
    let expected = record.n_samples();
    if n_leads > 0 && expected < 2 {
        violations.push(Violation::TooFewSamples(expected));
    }
    for (lead, samples) in record.leads.iter().enumerate() {
        if samples.len() != expected {
            violations.push(Violation::RaggedLead {
                lead,
                len: samples.len(),
                expected,
            });
        }
        if let Some(t) = samples.iter().position(|v| !v.is_finite()) {
            violations.push(Violation::NonFinite { lead, t });
        }
    }
    ValidationReport { violations }
}

/// Per-lead means and population standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadStats {
    pub means: Vec<f64>,
    pub stddevs: Vec<f64>,
}

/// Mean and population standard deviation (divides by `T`) of one signal.
pub fn mean_std(signal: &[f64]) -> (f64, f64) {
    let n = signal.len() as f64;
    let mean = signal.iter().sum::<f64>() / n;
    let var = signal.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn lead_stats(record: &MultiLeadRecord) -> LeadStats {
    let (means, stddevs) = record.leads.iter().map(|l| mean_std(l)).unzip();
    LeadStats { means, stddevs }
}

/// Standard 12-lead ordering used for every adjacency matrix whose lead
/// names are all recognised.
pub struct CanonicalLeadOrder;

impl CanonicalLeadOrder {
    pub const NAMES: [&'static str; 12] = [
        "I", "II", "III", "aVR", "aVL", "aVF", "V1", "V2", "V3", "V4", "V5", "V6",
    ];

    /// Canonical spelling of a lead name, matching case-insensitively.
    pub fn canonical_name(name: &str) -> Option<&'static str> {
        Self::NAMES
            .iter()
            .copied()
            .find(|c| c.eq_ignore_ascii_case(name.trim()))
    }

    /// The order to use for a dataset with these lead names: canonical order
    /// when every name is a recognised 12-lead name, otherwise `names` as given.
    /// Returned names keep the dataset's own spelling.
    pub fn order_for(names: &[String]) -> Vec<String> {
        let ranks: Option<Vec<usize>> = names
            .iter()
            .map(|n| {
                Self::canonical_name(n).and_then(|c| Self::NAMES.iter().position(|x| *x == c))
            })
            .collect();
        match ranks {
            Some(ranks) => {
                let mut idx: Vec<usize> = (0..names.len()).collect();
                idx.sort_by_key(|&i| ranks[i]);
                idx.into_iter().map(|i| names[i].clone()).collect()
            }
            None => names.to_vec(),
        }
    }

    pub fn names() -> Vec<String> {
        Self::NAMES.iter().map(|s| s.to_string()).collect()
    }
}

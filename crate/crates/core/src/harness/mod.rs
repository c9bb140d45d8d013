//! Desk-scale evaluation harness: synthetic graph-structured data, a linear
//! softmax classifier with analytic gradients, an l-infinity PGD attack,
//! macro-F1 and robustness curves.

mod attack;
mod classifier;
mod experiment;
mod metrics;
mod robustness;
mod synth;

pub use attack::{fgsm, pgd_attack, pgd_attack_traced, project_linf, AttackConfig};
pub use classifier::{
    loss_gradient, train_classifier, FeatureSpec, LinearClassifier, LossGradient, TrainConfig, TrainReport,
};
pub use experiment::{LinearScorer, RobustnessComparison, RobustnessExperiment};
pub use metrics::{macro_f1, F1Report};
pub use robustness::{evaluate_clean, robustness_curve, AttackTemplate, CurvePoint};
pub use synth::{default_directions, synth_dataset, SourceModel, SynthSpec};

use std::io::{Read, Write};

use crate::record::MultiLeadRecord;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("training diverged at step {step}: loss = {loss}, step size = {step_size}")]
    Divergence { step: usize, loss: f64, step_size: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("labels: {0}")]
    Labels(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Records with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub records: Vec<MultiLeadRecord>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Contiguous slice `[start, end)` as a new set.
    pub fn slice(&self, start: usize, end: usize) -> LabeledSet {
        LabeledSet {
            records: self.records[start..end].to_vec(),
            labels: self.labels[start..end].to_vec(),
            n_classes: self.n_classes,
        }
    }

    /// Splits into consecutive train / validation / test parts with the given
    /// train and validation fractions; the test part takes the rest.
    pub fn split(&self, train_frac: f64, val_frac: f64) -> (LabeledSet, LabeledSet, LabeledSet) {
        let n = self.len();
        let n_train = (n as f64 * train_frac).round() as usize;
        let n_val = ((n as f64 * val_frac).round() as usize).min(n - n_train.min(n));
        let n_train = n_train.min(n);
        (
            self.slice(0, n_train),
            self.slice(n_train, n_train + n_val),
            self.slice(n_train + n_val, n),
        )
    }

    /// Pairs records with labels from a `record_id,label` table.
    pub fn from_label_table(
        records: Vec<MultiLeadRecord>,
        table: &[(String, usize)],
        n_classes: Option<usize>,
    ) -> Result<LabeledSet, HarnessError> {
        let map: std::collections::HashMap<&str, usize> = table.iter().map(|(id, l)| (id.as_str(), *l)).collect();
        let labels = records
            .iter()
            .map(|r| {
                map.get(r.record_id.as_str())
                    .copied()
                    .ok_or_else(|| HarnessError::Labels(format!("no label for record {:?}", r.record_id)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let n_classes = n_classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1)).max(2);
        if labels.iter().any(|&l| l >= n_classes) {
            return Err(HarnessError::Labels(format!("label outside 0..{n_classes}")));
        }
        Ok(LabeledSet {
            records,
            labels,
            n_classes,
        })
    }

    pub fn label_table(&self) -> Vec<(String, usize)> {
        self.records
            .iter()
            .zip(&self.labels)
            .map(|(r, &l)| (r.record_id.clone(), l))
            .collect()
    }
}

/// Reads a `record_id,label` CSV with a header row.
pub fn read_labels<R: Read>(reader: R) -> Result<Vec<(String, usize)>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let id = row.get(0).ok_or_else(|| HarnessError::Labels("missing record_id".into()))?;
        let label = row
            .get(1)
            .and_then(|l| l.trim().parse().ok())
            .ok_or_else(|| HarnessError::Labels(format!("bad label for {id:?}")))?;
        out.push((id.to_string(), label));
    }
    Ok(out)
}

pub fn write_labels<W: Write>(writer: W, table: &[(String, usize)]) -> Result<(), HarnessError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["record_id", "label"])?;
    for (id, label) in table {
        wtr.write_record([id.as_str(), &label.to_string()])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip() {
        let table = vec![("a".to_string(), 1), ("b".to_string(), 0)];
        let mut buf = Vec::new();
        write_labels(&mut buf, &table).unwrap();
        assert_eq!(read_labels(buf.as_slice()).unwrap(), table);
    }

    #[test]
    fn split_sizes() {
        let r = MultiLeadRecord::from_leads("x", vec![vec![0.0, 1.0]; 2]).unwrap();
        let set = LabeledSet {
            records: vec![r; 20],
            labels: (0..20).map(|i| i % 2).collect(),
            n_classes: 2,
        };
        let (a, b, c) = set.split(0.7, 0.15);
        assert_eq!((a.len(), b.len(), c.len()), (14, 3, 3));
    }

    #[test]
    fn missing_label() {
        let r = MultiLeadRecord::from_leads("x", vec![vec![0.0, 1.0]; 2]).unwrap();
        assert!(LabeledSet::from_label_table(vec![r], &[("y".into(), 0)], None).is_err());
    }
}

use serde::{Deserialize, Serialize};

use crate::rng::RandomStream;

use super::{macro_f1, pgd_attack, AttackConfig, F1Report, HarnessError, LabeledSet, LinearClassifier};

/// Attack settings relative to each epsilon of a curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackTemplate {
    pub n_steps: usize,
    /// Step size as a fraction of epsilon.
    pub step_fraction: f64,
    pub random_start: bool,
    pub seed: u64,
}

impl Default for AttackTemplate {
    fn default() -> Self {
        Self {
            n_steps: 40,
            step_fraction: 0.1,
            random_start: true,
            seed: 0,
        }
    }
}

impl AttackTemplate {
    pub fn config(&self, epsilon: f64) -> AttackConfig {
        AttackConfig {
            epsilon,
            step_size: if epsilon > 0.0 { epsilon * self.step_fraction } else { 1.0 },
            n_steps: self.n_steps,
            random_start: self.random_start,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epsilon: f64,
    pub macro_f1: f64,
}

fn map_records<T: Send>(
    n: usize,
    f: impl Fn(usize) -> Result<T, HarnessError> + Sync + Send,
) -> Result<Vec<T>, HarnessError> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

pub fn evaluate_clean(model: &LinearClassifier, set: &LabeledSet) -> Result<F1Report, HarnessError> {
    let predictions = map_records(set.len(), |i| model.predict(&set.records[i].leads))?;
    macro_f1(&predictions, &set.labels, set.n_classes)
}

/// Macro-F1 on PGD-attacked test records for each epsilon (ascending).
/// `epsilon = 0` is the clean score.
pub fn robustness_curve(
    model: &LinearClassifier,
    test: &LabeledSet,
    epsilons: &[f64],
    template: &AttackTemplate,
) -> Result<Vec<CurvePoint>, HarnessError> {
    if epsilons.iter().any(|e| !(e.is_finite() && *e >= 0.0)) || epsilons.windows(2).any(|w| w[1] < w[0]) {
        return Err(HarnessError::Config("epsilons must be finite, non-negative and ascending".into()));
    }
    if test.is_empty() {
        return Err(HarnessError::Empty("test set"));
    }
    let root = RandomStream::new(template.seed).fork("attack");
    epsilons
        .iter()
        .enumerate()
        .map(|(k, &epsilon)| {
            let score = if epsilon == 0.0 {
                evaluate_clean(model, test)?.macro_f1
            } else {
                let cfg = template.config(epsilon);
                let stream = root.fork_index(k as u64);
                let predictions = map_records(test.len(), |i| {
                    let mut rng = stream.fork_index(i as u64);
                    let adv = pgd_attack(model, &test.records[i].leads, test.labels[i], &cfg, &mut rng)?;
                    model.predict(&adv)
                })?;
                macro_f1(&predictions, &test.labels, test.n_classes)?.macro_f1
            };
            Ok(CurvePoint {
                epsilon,
                macro_f1: score,
            })
        })
        .collect()
}

//! Synthetic multi-lead data with a physical graph structure.
//!
//! Each class owns a latent 3-D source trajectory `s(t)`. Lead `i` observes
//! the projection `<d_i, s(t)>` onto its direction vector, plus white noise.
//! Every record perturbs the lead directions by a small random angle, rescales
//! the amplitude and shifts the phase, so records of a class differ in the
//! way real recordings differ through electrode placement.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::record::{CanonicalLeadOrder, MultiLeadRecord};
use crate::rng::RandomStream;

use super::{HarnessError, LabeledSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceModel {
    /// Per class, a sum of `harmonics` sinusoids with random 3-D amplitudes.
    /// Classes share a common base trajectory and differ by
    /// `class_separation` times a class-specific deviation.
    Harmonic { harmonics: usize, class_separation: f64 },
    /// I.i.d. `N(0, I)` source samples, identical in law for every class.
    WhiteIsotropic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_records: usize,
    pub n_samples: usize,
    pub n_classes: usize,
    /// Unit direction vector per lead; the lead count is its length.
    pub directions: Vec<[f64; 3]>,
    pub lead_names: Vec<String>,
    pub source: SourceModel,
    /// Standard deviation of per-sample white noise.
    pub noise: f64,
    /// Standard deviation of the per-record direction perturbation.
    pub direction_jitter: f64,
    /// Relative amplitude jitter, `scale ~ U(1 - a, 1 + a)`.
    pub amplitude_jitter: f64,
    /// Maximum phase shift as a fraction of the record length.
    pub phase_jitter: f64,
    pub sample_rate: f64,
    pub seed: u64,
}

/// Approximate 12-lead directions in a heart-centred frame
/// (x left, y inferior, z anterior), canonical lead order.
pub fn default_directions() -> Vec<[f64; 3]> {
    let frontal = [0.0f64, 60.0, 120.0, -150.0, -30.0, 90.0];
    let precordial = [120.0f64, 90.0, 75.0, 60.0, 30.0, 0.0];
    let mut dirs: Vec<[f64; 3]> = frontal
        .iter()
        .map(|deg| {
            let a = deg.to_radians();
            [a.cos(), a.sin(), 0.0]
        })
        .collect();
    dirs.extend(precordial.iter().map(|deg| {
        let a = deg.to_radians();
        normalize([a.cos(), 0.3, a.sin()])
    }));
    dirs
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

impl SynthSpec {
    /// A 12-lead, graph-structured dataset with `n_classes` harmonic classes.
    pub fn twelve_lead(n_records: usize, n_samples: usize, n_classes: usize, seed: u64) -> Self {
        Self {
            n_records,
            n_samples,
            n_classes,
            directions: default_directions(),
            lead_names: CanonicalLeadOrder::names(),
            source: SourceModel::Harmonic {
                harmonics: 4,
                class_separation: 0.35,
            },
            noise: 0.3,
            direction_jitter: 0.25,
            amplitude_jitter: 0.2,
            phase_jitter: 0.05,
            sample_rate: 100.0,
            seed,
        }
    }

    pub fn n_leads(&self) -> usize {
        self.directions.len()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n_classes < 2 {
            return Err(HarnessError::Config("n_classes must be at least 2".into()));
        }
        if self.directions.len() < 2 || self.lead_names.len() != self.directions.len() {
            return Err(HarnessError::Config("need at least 2 leads, one name per direction".into()));
        }
        if self.n_samples < 2 {
            return Err(HarnessError::Config("n_samples must be at least 2".into()));
        }
        for d in &self.directions {
            let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(HarnessError::Config(format!("direction {d:?} is not unit length")));
            }
        }
        let nonneg = [self.noise, self.direction_jitter, self.amplitude_jitter, self.phase_jitter];
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || !(self.sample_rate > 0.0) {
            return Err(HarnessError::Config("noise and jitter levels must be finite and non-negative".into()));
        }
        if let SourceModel::Harmonic { harmonics, .. } = self.source {
            if harmonics == 0 {
                return Err(HarnessError::Config("harmonic source needs at least one harmonic".into()));
            }
        }
        Ok(())
    }
}

/// Amplitude vector and phase of one harmonic.
#[derive(Debug, Clone, Copy)]
struct Harmonic {
    amplitude: [f64; 3],
    phase: f64,
}

fn draw_harmonics(n: usize, rng: &mut RandomStream) -> Vec<Harmonic> {
    (1..=n)
        .map(|h| {
            let scale = 1.0 / h as f64;
            Harmonic {
                amplitude: [0; 3].map(|_| scale * rng.standard_normal()),
                phase: rng.uniform_range(0.0, 2.0 * PI),
            }
        })
        .collect()
}

/// Generates the dataset. Labels cycle through the classes, so class counts
/// differ by at most one.
pub fn synth_dataset(spec: &SynthSpec) -> Result<LabeledSet, HarnessError> {
    spec.validate()?;
    let root = RandomStream::new(spec.seed).fork("synth");
    let t_len = spec.n_samples;
    let classes: Vec<(Vec<Harmonic>, Vec<Harmonic>)> = match spec.source {
        SourceModel::Harmonic { harmonics, .. } => {
            let base = draw_harmonics(harmonics, &mut root.fork("base"));
            (0..spec.n_classes)
                .map(|c| (base.clone(), draw_harmonics(harmonics, &mut root.fork("class").fork_index(c as u64))))
                .collect()
        }
        SourceModel::WhiteIsotropic => Vec::new(),
    };

    let mut records = Vec::with_capacity(spec.n_records);
    let mut labels = Vec::with_capacity(spec.n_records);
    for idx in 0..spec.n_records {
        let label = idx % spec.n_classes;
        let mut rng = root.fork("record").fork_index(idx as u64);
        let dirs: Vec<[f64; 3]> = spec
            .directions
            .iter()
            .map(|d| {
                if spec.direction_jitter == 0.0 {
                    *d
                } else {
                    normalize([0, 1, 2].map(|k| d[k] + spec.direction_jitter * rng.standard_normal()))
                }
            })
            .collect();
        let scale = rng.uniform_range(1.0 - spec.amplitude_jitter, 1.0 + spec.amplitude_jitter);
        let shift = rng.uniform_range(-spec.phase_jitter, spec.phase_jitter) * 2.0 * PI;

        let source: Vec<[f64; 3]> = match spec.source {
            SourceModel::Harmonic { class_separation, .. } => {
                let (base, delta) = &classes[label];
                (0..t_len)
                    .map(|t| {
                        let angle = 2.0 * PI * t as f64 / t_len as f64 + shift;
                        let mut s = [0.0; 3];
                        for (h, (b, d)) in base.iter().zip(delta).enumerate() {
                            let k = (h + 1) as f64;
                            let wb = (k * angle + b.phase).sin();
                            let wd = (k * angle + d.phase).sin();
                            for a in 0..3 {
                                s[a] += scale * (b.amplitude[a] * wb + class_separation * d.amplitude[a] * wd);
                            }
                        }
                        s
                    })
                    .collect()
            }
            SourceModel::WhiteIsotropic => (0..t_len)
                .map(|_| [0; 3].map(|_| rng.standard_normal()))
                .collect(),
        };

        let leads = dirs
            .iter()
            .map(|d| {
                source
                    .iter()
                    .map(|s| {
                        let clean = d[0] * s[0] + d[1] * s[1] + d[2] * s[2];
                        if spec.noise == 0.0 {
                            clean
                        } else {
                            clean + spec.noise * rng.standard_normal()
                        }
                    })
                    .collect()
            })
            .collect();
        records.push(MultiLeadRecord {
            record_id: format!("synth-{idx:06}"),
            sample_rate: spec.sample_rate,
            lead_names: spec.lead_names.clone(),
            leads,
        });
        labels.push(label);
    }
    Ok(LabeledSet {
        records,
        labels,
        n_classes: spec.n_classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::estimate_graph;
    use crate::record::validate_record;

    #[test]
    fn default_spec_is_valid_and_structured() {
        let spec = SynthSpec::twelve_lead(60, 64, 3, 1);
        let set = synth_dataset(&spec).unwrap();
        assert_eq!(set.len(), 60);
        assert!(set.records.iter().all(|r| validate_record(r).is_ok()));
        let (g, _) = estimate_graph(&set.records).unwrap();
        g.check_invariants().unwrap();
        // I and aVR point in nearly opposite directions, II and aVF nearly the same
        assert!(g.adjacency[0][3] < -0.2, "{}", g.adjacency[0][3]);
        assert!(g.adjacency[1][5] > 0.5);
    }

    #[test]
    fn labels_are_balanced() {
        let set = synth_dataset(&SynthSpec::twelve_lead(31, 16, 4, 0)).unwrap();
        let counts: Vec<usize> = (0..4).map(|c| set.labels.iter().filter(|&&l| l == c).count()).collect();
        assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
    }

    #[test]
    fn shared_direction_without_noise() {
        let mut spec = SynthSpec::twelve_lead(5, 32, 2, 3);
        spec.directions = vec![[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        spec.lead_names = vec!["a".into(), "b".into(), "c".into()];
        spec.noise = 0.0;
        spec.direction_jitter = 0.0;
        let set = synth_dataset(&spec).unwrap();
        for r in &set.records {
            assert_eq!(r.leads[0], r.leads[1]);
        }
        let (g, _) = estimate_graph(&set.records).unwrap();
        assert_eq!(g.adjacency[0][1], 1.0);
    }

    #[test]
    fn orthogonal_white_leads_are_uncorrelated() {
        let mut spec = SynthSpec::twelve_lead(200, 100, 2, 4);
        spec.directions = vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        spec.lead_names = vec!["x".into(), "y".into(), "z".into()];
        spec.source = SourceModel::WhiteIsotropic;
        spec.direction_jitter = 0.0;
        spec.noise = 0.0;
        let set = synth_dataset(&spec).unwrap();
        let (g, _) = estimate_graph(&set.records).unwrap();
        assert!(g.adjacency.iter().flatten().all(|a| a.abs() < 0.05));
    }

    #[test]
    fn seeded() {
        let spec = SynthSpec::twelve_lead(10, 32, 2, 9);
        assert_eq!(synth_dataset(&spec).unwrap(), synth_dataset(&spec).unwrap());
        let other = SynthSpec { seed: 10, ..spec.clone() };
        assert_ne!(synth_dataset(&spec).unwrap(), synth_dataset(&other).unwrap());
    }

    #[test]
    fn rejects_bad_spec() {
        let mut spec = SynthSpec::twelve_lead(10, 32, 1, 9);
        assert!(synth_dataset(&spec).is_err());
        spec.n_classes = 2;
        spec.directions[0] = [2.0, 0.0, 0.0];
        assert!(synth_dataset(&spec).is_err());
    }
}

//! Linear softmax classifier on block-averaged, optionally per-lead
//! standardized signals, trained by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use super::{HarnessError, LabeledSet};

/// Floor added to the pooled-lead variance before standardizing.
const STD_FLOOR: f64 = 1e-6;
/// Examples per partial sum; partial sums are reduced in order.
const CHUNK: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    /// Block length of the average pooling along time.
    pub downsample: usize,
    /// Standardize each pooled lead by its own mean and deviation.
    pub standardize: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            downsample: 4,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub n_leads: usize,
    pub n_samples: usize,
    pub n_classes: usize,
    pub features: FeatureSpec,
    /// `n_features x n_classes`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

impl LinearClassifier {
    pub fn zeros(n_leads: usize, n_samples: usize, n_classes: usize, features: FeatureSpec) -> Result<Self, HarnessError> {
        if features.downsample == 0 || n_samples / features.downsample == 0 {
            return Err(HarnessError::Config(format!(
                "downsample {} leaves no features for {n_samples} samples",
                features.downsample
            )));
        }
        if n_classes < 2 {
            return Err(HarnessError::Config("need at least 2 classes".into()));
        }
        let n_features = n_leads * (n_samples / features.downsample);
        Ok(Self {
            n_leads,
            n_samples,
            n_classes,
            features,
            weights: vec![0.0; n_features * n_classes],
            bias: vec![0.0; n_classes],
        })
    }

    pub fn pooled_len(&self) -> usize {
        self.n_samples / self.features.downsample
    }

    pub fn n_features(&self) -> usize {
        self.n_leads * self.pooled_len()
    }

    pub fn check_shape(&self, leads: &[Vec<f64>]) -> Result<(), HarnessError> {
        if leads.len() != self.n_leads || leads.iter().any(|l| l.len() != self.n_samples) {
            return Err(HarnessError::Shape(format!(
                "model expects {}x{}, got {}x{}",
                self.n_leads,
                self.n_samples,
                leads.len(),
                leads.first().map_or(0, Vec::len)
            )));
        }
        Ok(())
    }

    /// Feature vector: per lead, block means, then (optionally) standardization.
    pub fn extract(&self, leads: &[Vec<f64>]) -> Result<Vec<f64>, HarnessError> {
        self.check_shape(leads)?;
        let ds = self.features.downsample;
        let m = self.pooled_len();
        let mut out = Vec::with_capacity(self.n_features());
        for lead in leads {
            let pooled: Vec<f64> = (0..m)
                .map(|k| lead[k * ds..(k + 1) * ds].iter().sum::<f64>() / ds as f64)
                .collect();
            if self.features.standardize {
                let mean = pooled.iter().sum::<f64>() / m as f64;
                let var = pooled.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / m as f64;
                let s = (var + STD_FLOOR * STD_FLOOR).sqrt();
                out.extend(pooled.iter().map(|p| (p - mean) / s));
            } else {
                out.extend(pooled);
            }
        }
        Ok(out)
    }

    /// Pulls a feature-space gradient back to the input signal.
    pub fn features_vjp(&self, leads: &[Vec<f64>], grad: &[f64]) -> Vec<Vec<f64>> {
        let ds = self.features.downsample;
        let m = self.pooled_len();
        leads
            .iter()
            .enumerate()
            .map(|(i, lead)| {
                let g = &grad[i * m..(i + 1) * m];
                let g_pooled: Vec<f64> = if self.features.standardize {
                    let pooled: Vec<f64> = (0..m)
                        .map(|k| lead[k * ds..(k + 1) * ds].iter().sum::<f64>() / ds as f64)
                        .collect();
                    let n = m as f64;
                    let mean = pooled.iter().sum::<f64>() / n;
                    let var = pooled.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n;
                    let s = (var + STD_FLOOR * STD_FLOOR).sqrt();
                    let z: Vec<f64> = pooled.iter().map(|p| (p - mean) / s).collect();
                    let g_mean = g.iter().sum::<f64>() / n;
                    let gz_mean = g.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() / n;
                    g.iter()
                        .zip(&z)
                        .map(|(gk, zk)| (gk - g_mean - zk * gz_mean) / s)
                        .collect()
                } else {
                    g.to_vec()
                };
                let mut out = vec![0.0; self.n_samples];
                for (k, gp) in g_pooled.iter().enumerate() {
                    out[k * ds..(k + 1) * ds].fill(gp / ds as f64);
                }
                out
            })
            .collect()
    }

    pub fn logits_from_features(&self, phi: &[f64]) -> Vec<f64> {
        let c = self.n_classes;
        let mut logits = self.bias.clone();
        for (f, x) in phi.iter().enumerate() {
            if *x == 0.0 {
                continue;
            }
            for (l, w) in logits.iter_mut().zip(&self.weights[f * c..(f + 1) * c]) {
                *l += x * w;
            }
        }
        logits
    }

    pub fn logits(&self, leads: &[Vec<f64>]) -> Result<Vec<f64>, HarnessError> {
        Ok(self.logits_from_features(&self.extract(leads)?))
    }

    pub fn predict_proba(&self, leads: &[Vec<f64>]) -> Result<Vec<f64>, HarnessError> {
        Ok(softmax(&self.logits(leads)?))
    }

    /// Arg-max class; ties go to the lower index.
    pub fn predict(&self, leads: &[Vec<f64>]) -> Result<usize, HarnessError> {
        let logits = self.logits(leads)?;
        let mut best = 0;
        for (k, l) in logits.iter().enumerate() {
            if *l > logits[best] {
                best = k;
            }
        }
        Ok(best)
    }

    /// Input gradient of the cross-entropy of one example.
    pub fn input_gradient(&self, leads: &[Vec<f64>], label: usize) -> Result<Vec<Vec<f64>>, HarnessError> {
        let phi = self.extract(leads)?;
        let mut g = softmax(&self.logits_from_features(&phi));
        g[label] -= 1.0;
        let c = self.n_classes;
        let g_phi: Vec<f64> = (0..phi.len())
            .map(|f| self.weights[f * c..(f + 1) * c].iter().zip(&g).map(|(w, gk)| w * gk).sum())
            .collect();
        Ok(self.features_vjp(leads, &g_phi))
    }
}

/// Mean cross-entropy of a batch with its exact gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    pub loss: f64,
    /// One `L x T` gradient per example.
    pub input: Vec<Vec<Vec<f64>>>,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Mean softmax cross-entropy over the batch and its gradients with respect to
/// every input and to the parameters.
pub fn loss_gradient(
    model: &LinearClassifier,
    batch: &[&[Vec<f64>]],
    labels: &[usize],
) -> Result<LossGradient, HarnessError> {
    if batch.len() != labels.len() {
        return Err(HarnessError::Shape(format!("{} examples, {} labels", batch.len(), labels.len())));
    }
    if batch.is_empty() {
        return Err(HarnessError::Empty("batch"));
    }
    let n = batch.len() as f64;
    let c = model.n_classes;
    let mut out = LossGradient {
        loss: 0.0,
        input: Vec::with_capacity(batch.len()),
        weights: vec![0.0; model.weights.len()],
        bias: vec![0.0; c],
    };
    for (leads, &label) in batch.iter().zip(labels) {
        if label >= c {
            return Err(HarnessError::Shape(format!("label {label} outside 0..{c}")));
        }
        let phi = model.extract(leads)?;
        let logits = model.logits_from_features(&phi);
        out.loss += cross_entropy(&logits, label) / n;
        let mut g = softmax(&logits);
        g[label] -= 1.0;
        for gk in g.iter_mut() {
            *gk /= n;
        }
        for (b, gk) in out.bias.iter_mut().zip(&g) {
            *b += gk;
        }
        let mut g_phi = vec![0.0; phi.len()];
        for (f, x) in phi.iter().enumerate() {
            let w = &model.weights[f * c..(f + 1) * c];
            let dw = &mut out.weights[f * c..(f + 1) * c];
            for k in 0..c {
                dw[k] += x * g[k];
                g_phi[f] += w[k] * g[k];
            }
        }
        out.input.push(model.features_vjp(leads, &g_phi));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub features: FeatureSpec,
    pub learning_rate: f64,
    pub steps: usize,
    /// Coefficient of `0.5 * ||W||^2` in the objective (bias excluded).
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            features: FeatureSpec::default(),
            learning_rate: 0.5,
            steps: 300,
            l2: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Objective before the first step and after every accepted step.
    pub losses: Vec<f64>,
    pub halvings: usize,
    pub final_step_size: f64,
}

/// Objective and parameter gradients over precomputed features.
fn objective(
    phis: &[Vec<f64>],
    labels: &[usize],
    weights: &[f64],
    bias: &[f64],
    c: usize,
    l2: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let n = phis.len() as f64;
    let partial = |range: (&[Vec<f64>], &[usize])| {
        let mut loss = 0.0;
        let mut gw = vec![0.0; weights.len()];
        let mut gb = vec![0.0; c];
        for (phi, &label) in range.0.iter().zip(range.1) {
            let mut logits = bias.to_vec();
            for (f, x) in phi.iter().enumerate() {
                for (l, w) in logits.iter_mut().zip(&weights[f * c..(f + 1) * c]) {
                    *l += x * w;
                }
            }
            loss += cross_entropy(&logits, label);
            let mut g = softmax(&logits);
            g[label] -= 1.0;
            for (b, gk) in gb.iter_mut().zip(&g) {
                *b += gk;
            }
            for (f, x) in phi.iter().enumerate() {
                for (dw, gk) in gw[f * c..(f + 1) * c].iter_mut().zip(&g) {
                    *dw += x * gk;
                }
            }
        }
        (loss, gw, gb)
    };
    let chunks: Vec<(&[Vec<f64>], &[usize])> = phis.chunks(CHUNK).zip(labels.chunks(CHUNK)).collect();
    #[cfg(feature = "parallel")]
    let parts: Vec<(f64, Vec<f64>, Vec<f64>)> = {
        use rayon::prelude::*;
        chunks.into_par_iter().map(partial).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<(f64, Vec<f64>, Vec<f64>)> = chunks.into_iter().map(partial).collect();

    let mut loss = 0.0;
    let mut gw = vec![0.0; weights.len()];
    let mut gb = vec![0.0; c];
    for (l, w, b) in parts {
        loss += l;
        gw.iter_mut().zip(&w).for_each(|(a, x)| *a += x);
        gb.iter_mut().zip(&b).for_each(|(a, x)| *a += x);
    }
    loss /= n;
    gw.iter_mut().for_each(|g| *g /= n);
    gb.iter_mut().for_each(|g| *g /= n);
    if l2 > 0.0 {
        loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
        gw.iter_mut().zip(weights).for_each(|(g, w)| *g += l2 * w);
    }
    (loss, gw, gb)
}

/// Full-batch gradient descent from zero weights. A step that would raise the
/// objective is retried at half the step size.
pub fn train_classifier(train: &LabeledSet, cfg: &TrainConfig) -> Result<(LinearClassifier, TrainReport), HarnessError> {
    let first = train.records.first().ok_or(HarnessError::Empty("training set"))?;
    if train.labels.len() != train.records.len() {
        return Err(HarnessError::Shape("records and labels differ in length".into()));
    }
    if !(cfg.learning_rate > 0.0) || cfg.l2 < 0.0 {
        return Err(HarnessError::Config("learning rate must be positive and l2 non-negative".into()));
    }
    let mut model = LinearClassifier::zeros(first.n_leads(), first.n_samples(), train.n_classes, cfg.features)?;
    if let Some(&bad) = train.labels.iter().find(|&&l| l >= train.n_classes) {
        return Err(HarnessError::Shape(format!("label {bad} outside 0..{}", train.n_classes)));
    }
    let phis = train
        .records
        .iter()
        .map(|r| model.extract(&r.leads))
        .collect::<Result<Vec<_>, _>>()?;
    let c = model.n_classes;
    let (mut loss, mut gw, mut gb) = objective(&phis, &train.labels, &model.weights, &model.bias, c, cfg.l2);
    let mut report = TrainReport {
        losses: vec![loss],
        halvings: 0,
        final_step_size: cfg.learning_rate,
    };
    let mut step_size = cfg.learning_rate;
    for step in 0..cfg.steps {
        if !loss.is_finite() {
            return Err(HarnessError::Divergence { step, loss, step_size });
        }
        loop {
            let w: Vec<f64> = model.weights.iter().zip(&gw).map(|(w, g)| w - step_size * g).collect();
            let b: Vec<f64> = model.bias.iter().zip(&gb).map(|(b, g)| b - step_size * g).collect();
            let (new_loss, new_gw, new_gb) = objective(&phis, &train.labels, &w, &b, c, cfg.l2);
            if new_loss.is_finite() && new_loss <= loss {
                model.weights = w;
                model.bias = b;
                loss = new_loss;
                gw = new_gw;
                gb = new_gb;
                report.losses.push(loss);
                break;
            }
            step_size *= 0.5;
            report.halvings += 1;
            if step_size < 1e-12 {
                if !new_loss.is_finite() {
                    return Err(HarnessError::Divergence { step, loss: new_loss, step_size });
                }
                // no descent possible at any usable step: converged
                report.final_step_size = step_size;
                return Ok((model, report));
            }
        }
    }
    report.final_step_size = step_size;
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::MultiLeadRecord;
    use crate::rng::RandomStream;

    fn random_model(seed: u64, n_leads: usize, n_samples: usize, c: usize, features: FeatureSpec) -> LinearClassifier {
        let mut rng = RandomStream::new(seed);
        let mut m = LinearClassifier::zeros(n_leads, n_samples, c, features).unwrap();
        m.weights.iter_mut().for_each(|w| *w = rng.normal(0.0, 0.5));
        m.bias.iter_mut().for_each(|b| *b = rng.normal(0.0, 0.5));
        m
    }

    fn random_leads(rng: &mut RandomStream, l: usize, t: usize) -> Vec<Vec<f64>> {
        (0..l).map(|_| (0..t).map(|_| rng.standard_normal()).collect()).collect()
    }

    fn batch_loss(m: &LinearClassifier, batch: &[Vec<Vec<f64>>], labels: &[usize]) -> f64 {
        let refs: Vec<&[Vec<f64>]> = batch.iter().map(|b| b.as_slice()).collect();
        loss_gradient(m, &refs, labels).unwrap().loss
    }

    #[test]
    fn input_gradient_matches_central_differences() {
        for standardize in [false, true] {
            let features = FeatureSpec { downsample: 2, standardize };
            let m = random_model(1, 3, 8, 3, features);
            let mut rng = RandomStream::new(2);
            let batch: Vec<_> = (0..2).map(|_| random_leads(&mut rng, 3, 8)).collect();
            let labels = [0, 2];
            let refs: Vec<&[Vec<f64>]> = batch.iter().map(|b| b.as_slice()).collect();
            let grad = loss_gradient(&m, &refs, &labels).unwrap();
            let h = 1e-5;
            for _ in 0..20 {
                let (e, i, t) = (rng.below(2), rng.below(3), rng.below(8));
                let mut plus = batch.clone();
                plus[e][i][t] += h;
                let mut minus = batch.clone();
                minus[e][i][t] -= h;
                let fd = (batch_loss(&m, &plus, &labels) - batch_loss(&m, &minus, &labels)) / (2.0 * h);
                let an = grad.input[e][i][t];
                assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "{fd} vs {an}");
            }
        }
    }

    #[test]
    fn zero_model_has_zero_input_gradient() {
        let m = LinearClassifier::zeros(2, 4, 3, FeatureSpec { downsample: 1, standardize: true }).unwrap();
        let leads = vec![vec![1.0, -2.0, 0.5, 3.0], vec![0.0, 1.0, 2.0, 1.0]];
        let g = loss_gradient(&m, &[&leads], &[1]).unwrap();
        assert!(g.input[0].iter().flatten().all(|&v| v == 0.0));
        assert!((g.loss - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_prediction_has_vanishing_gradient() {
        let mut m = LinearClassifier::zeros(2, 2, 2, FeatureSpec { downsample: 1, standardize: false }).unwrap();
        // feature 0 votes strongly for class 0
        m.weights[0] = 50.0;
        m.weights[1] = -50.0;
        let leads = vec![vec![1.0, 0.0], vec![0.0, 0.0]];
        let g = m.input_gradient(&leads, 0).unwrap();
        let norm: f64 = g.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-6, "{norm}");
    }

    #[test]
    fn shape_errors() {
        let m = LinearClassifier::zeros(2, 4, 2, FeatureSpec::default()).unwrap();
        assert!(m.extract(&[vec![0.0; 4]]).is_err());
        assert!(loss_gradient(&m, &[], &[]).is_err());
        assert!(LinearClassifier::zeros(2, 3, 2, FeatureSpec { downsample: 4, standardize: false }).is_err());
    }

    fn toy_set() -> LabeledSet {
        let mut rng = RandomStream::new(5);
        let mut records = Vec::new();
        let mut labels = Vec::new();
        for k in 0..40 {
            let label = k % 2;
            let sign = if label == 0 { 1.0 } else { -1.0 };
            let leads = vec![
                vec![sign + 0.3 * rng.standard_normal(), 0.1 * rng.standard_normal()],
                vec![rng.standard_normal(), rng.standard_normal()],
            ];
            records.push(MultiLeadRecord::from_leads(format!("t{k}"), leads).unwrap());
            labels.push(label);
        }
        LabeledSet { records, labels, n_classes: 2 }
    }

    #[test]
    fn separable_toy_reaches_full_accuracy() {
        let set = toy_set();
        let cfg = TrainConfig {
            features: FeatureSpec { downsample: 1, standardize: false },
            learning_rate: 1.0,
            steps: 500,
            l2: 0.0,
        };
        let (m, report) = train_classifier(&set, &cfg).unwrap();
        let correct = set
            .records
            .iter()
            .zip(&set.labels)
            .filter(|(r, &l)| m.predict(&r.leads).unwrap() == l)
            .count();
        assert_eq!(correct, set.len());
        assert!(report.losses.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn zero_steps_is_uniform() {
        let set = toy_set();
        let cfg = TrainConfig { steps: 0, features: FeatureSpec { downsample: 1, standardize: false }, ..Default::default() };
        let (m, report) = train_classifier(&set, &cfg).unwrap();
        assert!((report.losses[0] - 2f64.ln()).abs() < 1e-9);
        assert_eq!(m.predict_proba(&set.records[0].leads).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn duplicated_dataset_gives_same_parameters() {
        let set = toy_set();
        let mut doubled = set.clone();
        doubled.records.extend(set.records.clone());
        doubled.labels.extend(set.labels.clone());
        let cfg = TrainConfig { steps: 50, features: FeatureSpec { downsample: 1, standardize: false }, ..Default::default() };
        let (a, _) = train_classifier(&set, &cfg).unwrap();
        let (b, _) = train_classifier(&doubled, &cfg).unwrap();
        for (x, y) in a.weights.iter().chain(&a.bias).zip(b.weights.iter().chain(&b.bias)) {
            assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
        }
    }

    #[test]
    fn divergence_is_reported() {
        let mut set = toy_set();
        set.records[0].leads[0][0] = 1e300;
        let cfg = TrainConfig { features: FeatureSpec { downsample: 1, standardize: false }, ..Default::default() };
        assert!(matches!(train_classifier(&set, &cfg), Err(HarnessError::Divergence { .. })));
    }
}

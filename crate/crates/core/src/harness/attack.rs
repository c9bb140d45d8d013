//! Untargeted l-infinity projected gradient ascent on the true-class loss.

use serde::{Deserialize, Serialize};

use crate::rng::RandomStream;

use super::{HarnessError, LinearClassifier};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// Radius of the l-infinity ball, in signal units.
    pub epsilon: f64,
    pub step_size: f64,
    pub n_steps: usize,
    pub random_start: bool,
}

impl AttackConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(HarnessError::Config(format!("epsilon = {} must be >= 0", self.epsilon)));
        }
        if !(self.step_size > 0.0) || self.n_steps == 0 {
            return Err(HarnessError::Config("step_size must be > 0 and n_steps >= 1".into()));
        }
        Ok(())
    }
}

/// Clamps `value` into `[origin - eps, origin + eps]` such that the rounded
/// difference `value - origin` also stays within `eps`.
fn project_scalar(value: f64, origin: f64, eps: f64) -> f64 {
    let mut v = value.clamp(origin - eps, origin + eps);
    while v - origin > eps {
        v = v.next_down();
    }
    while origin - v > eps {
        v = v.next_up();
    }
    v
}

/// Projects `x` onto the l-infinity ball of radius `eps` around `origin`.
pub fn project_linf(x: &mut [Vec<f64>], origin: &[Vec<f64>], eps: f64) {
    for (lead, o) in x.iter_mut().zip(origin) {
        for (v, &o) in lead.iter_mut().zip(o) {
            *v = project_scalar(*v, o, eps);
        }
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// PGD that reports every iterate (including the start point) to `visit`.
pub fn pgd_attack_traced(
    model: &LinearClassifier,
    leads: &[Vec<f64>],
    label: usize,
    cfg: &AttackConfig,
    rng: &mut RandomStream,
    mut visit: impl FnMut(&[Vec<f64>]),
) -> Result<Vec<Vec<f64>>, HarnessError> {
    cfg.validate()?;
    model.check_shape(leads)?;
    if cfg.epsilon == 0.0 {
        visit(leads);
        return Ok(leads.to_vec());
    }
    let mut x = leads.to_vec();
    if cfg.random_start {
        for lead in x.iter_mut() {
            for v in lead.iter_mut() {
                *v += rng.uniform_range(-cfg.epsilon, cfg.epsilon);
            }
        }
        project_linf(&mut x, leads, cfg.epsilon);
    }
    visit(&x);
    for _ in 0..cfg.n_steps {
        let grad = model.input_gradient(&x, label)?;
        for (lead, g) in x.iter_mut().zip(&grad) {
            for (v, gv) in lead.iter_mut().zip(g) {
                *v += cfg.step_size * sign(*gv);
            }
        }
        project_linf(&mut x, leads, cfg.epsilon);
        visit(&x);
    }
    Ok(x)
}

/// Final PGD iterate. `epsilon = 0` returns the input unchanged.
pub fn pgd_attack(
    model: &LinearClassifier,
    leads: &[Vec<f64>],
    label: usize,
    cfg: &AttackConfig,
    rng: &mut RandomStream,
) -> Result<Vec<Vec<f64>>, HarnessError> {
    pgd_attack_traced(model, leads, label, cfg, rng, |_| {})
}

/// One signed-gradient step of size `min(step_size, epsilon)`, projected onto
/// the `epsilon` ball.
pub fn fgsm(
    model: &LinearClassifier,
    leads: &[Vec<f64>],
    label: usize,
    step_size: f64,
    epsilon: f64,
) -> Result<Vec<Vec<f64>>, HarnessError> {
    let grad = model.input_gradient(leads, label)?;
    let step = step_size.min(epsilon);
    let mut x: Vec<Vec<f64>> = leads
        .iter()
        .zip(&grad)
        .map(|(lead, g)| lead.iter().zip(g).map(|(v, gv)| v + step * sign(*gv)).collect())
        .collect();
    project_linf(&mut x, leads, epsilon);
    Ok(x)
}

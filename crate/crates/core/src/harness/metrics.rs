use serde::Serialize;

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct F1Report {
    pub macro_f1: f64,
    pub per_class: Vec<f64>,
    /// Classes that appear in neither predictions nor labels (scored as 0).
    pub absent_classes: Vec<usize>,
}

/// Unweighted mean of per-class F1 over `0..n_classes`.
pub fn macro_f1(predictions: &[usize], labels: &[usize], n_classes: usize) -> Result<F1Report, HarnessError> {
    if predictions.len() != labels.len() {
        return Err(HarnessError::Shape(format!(
            "{} predictions, {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(HarnessError::Empty("predictions"));
    }
    if n_classes == 0 {
        return Err(HarnessError::Config("n_classes must be positive".into()));
    }
    let mut tp = vec![0usize; n_classes];
    let mut predicted = vec![0usize; n_classes];
    let mut actual = vec![0usize; n_classes];
    for (&p, &l) in predictions.iter().zip(labels) {
        if p >= n_classes || l >= n_classes {
            return Err(HarnessError::Shape(format!("class index outside 0..{n_classes}")));
        }
        predicted[p] += 1;
        actual[l] += 1;
        if p == l {
            tp[p] += 1;
        }
    }
    let mut absent_classes = Vec::new();
    let per_class: Vec<f64> = (0..n_classes)
        .map(|k| {
            if predicted[k] + actual[k] == 0 {
                absent_classes.push(k);
                return 0.0;
            }
            2.0 * tp[k] as f64 / (predicted[k] + actual[k]) as f64
        })
        .collect();
    let macro_f1 = per_class.iter().sum::<f64>() / n_classes as f64;
    Ok(F1Report {
        macro_f1,
        per_class,
        absent_classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect() {
        let y = [0, 1, 2, 1, 0];
        assert_eq!(macro_f1(&y, &y, 3).unwrap().macro_f1, 1.0);
    }

    #[test]
    fn single_class_predictions() {
        // class 0: precision 1/2, recall 1 -> 2/3; class 1: 0
        let r = macro_f1(&[0, 0, 0, 0], &[0, 1, 0, 1], 2).unwrap();
        assert!((r.macro_f1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn complement_is_zero() {
        assert_eq!(macro_f1(&[1, 0, 1, 0], &[0, 1, 0, 1], 2).unwrap().macro_f1, 0.0);
    }

    #[test]
    fn absent_class_flagged() {
        let r = macro_f1(&[0, 1], &[0, 1], 3).unwrap();
        assert_eq!(r.absent_classes, vec![2]);
        assert!((r.macro_f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn order_and_relabel_invariance() {
        let p = [0, 2, 1, 1, 0, 2, 2];
        let l = [0, 1, 1, 2, 0, 2, 0];
        let base = macro_f1(&p, &l, 3).unwrap().macro_f1;
        let mut pairs: Vec<(usize, usize)> = p.iter().copied().zip(l.iter().copied()).collect();
        pairs.reverse();
        let (rp, rl): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        assert_eq!(macro_f1(&rp, &rl, 3).unwrap().macro_f1, base);
        let relabel = |c: usize| (c + 1) % 3;
        let pp: Vec<_> = p.iter().map(|&c| relabel(c)).collect();
        let ll: Vec<_> = l.iter().map(|&c| relabel(c)).collect();
        assert!((macro_f1(&pp, &ll, 3).unwrap().macro_f1 - base).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(macro_f1(&[], &[], 2).is_err());
        assert!(macro_f1(&[0], &[0, 1], 2).is_err());
        assert!(macro_f1(&[3], &[0], 2).is_err());
    }
}

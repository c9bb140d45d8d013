use crate::graph::LeadGraph;
use crate::record::MultiLeadRecord;
use crate::rng::RandomStream;

use super::{AugmentError, GraphAugParams};

fn check_leads(record: &MultiLeadRecord, graph: &LeadGraph) -> Result<(), AugmentError> {
    if record.lead_names != graph.lead_names {
        return Err(AugmentError::LeadMismatch {
            graph: graph.lead_names.clone(),
            record: record.lead_names.clone(),
        });
    }
    Ok(())
}

/// `sum_{j != i} weights[j] * leads[j]`, sample by sample.
pub fn graph_mix_weighted(record: &MultiLeadRecord, weights: &[f64], i: usize) -> Vec<f64> {
    let mut out = vec![0.0; record.n_samples()];
    for (j, (lead, &w)) in record.leads.iter().zip(weights).enumerate() {
        if j == i || w == 0.0 {
            continue;
        }
        for (o, x) in out.iter_mut().zip(lead) {
            *o += w * x;
        }
    }
    out
}

/// Correlation-weighted combination of every lead other than `i`.
pub fn graph_mix(record: &MultiLeadRecord, graph: &LeadGraph, i: usize) -> Result<Vec<f64>, AugmentError> {
    check_leads(record, graph)?;
    if i >= record.n_leads() {
        return Err(AugmentError::LeadIndex {
            index: i,
            n_leads: record.n_leads(),
        });
    }
    Ok(graph_mix_weighted(record, &graph.adjacency[i], i))
}

/// Random choices of one graph-augmentation call: the mixing coefficient of
/// each lead, or `None` where the lead is left alone.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphDraw {
    pub lambdas: Vec<Option<f64>>,
}

impl GraphDraw {
    pub fn applied(&self) -> usize {
        self.lambdas.iter().filter(|l| l.is_some()).count()
    }
}

/// Per lead: apply with probability `p`, then draw `lambda ~ U(0, alpha)`.
pub fn sample_graph_draw(n_leads: usize, params: &GraphAugParams, rng: &mut RandomStream) -> GraphDraw {
    let lambdas = (0..n_leads)
        .map(|_| (rng.uniform() < params.p).then(|| params.alpha * rng.uniform()))
        .collect();
    GraphDraw { lambdas }
}

/// Replaces each selected lead with `(1 - lambda) * x_i + lambda * mix_i`.
///
/// All mixes use the original leads, so the result does not depend on the
/// order in which leads are visited.
pub fn graph_augment_with(
    record: &MultiLeadRecord,
    graph: &LeadGraph,
    params: &GraphAugParams,
    draw: &GraphDraw,
) -> Result<MultiLeadRecord, AugmentError> {
    params.validate()?;
    check_leads(record, graph)?;
    if draw.lambdas.len() != record.n_leads() {
        return Err(AugmentError::InvalidParams(format!(
            "{} mixing coefficients for {} leads",
            draw.lambdas.len(),
            record.n_leads()
        )));
    }
    let weights = graph.mix_weights(params.normalization);
    let leads = record
        .leads
        .iter()
        .enumerate()
        .map(|(i, lead)| match draw.lambdas[i] {
            Some(lambda) if lambda != 0.0 => {
                let mix = graph_mix_weighted(record, &weights[i], i);
                lead.iter()
                    .zip(&mix)
                    .map(|(x, m)| (1.0 - lambda) * x + lambda * m)
                    .collect()
            }
            _ => lead.clone(),
        })
        .collect();
    Ok(record.with_leads(leads))
}

pub fn graph_augment(
    record: &MultiLeadRecord,
    graph: &LeadGraph,
    params: &GraphAugParams,
    rng: &mut RandomStream,
) -> Result<MultiLeadRecord, AugmentError> {
    params.validate()?;
    check_leads(record, graph)?;
    let draw = sample_graph_draw(record.n_leads(), params, rng);
    graph_augment_with(record, graph, params, &draw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::MixNormalization;

    fn graph(adjacency: Vec<Vec<f64>>) -> LeadGraph {
        LeadGraph {
            lead_names: (0..adjacency.len()).map(|i| format!("L{i}")).collect(),
            record_count: 1,
            adjacency,
        }
    }

    fn random_record(seed: u64, n: usize, t: usize) -> MultiLeadRecord {
        let mut rng = RandomStream::new(seed);
        MultiLeadRecord::from_leads("r", (0..n).map(|_| (0..t).map(|_| rng.standard_normal()).collect()).collect())
            .unwrap()
    }

    fn random_symmetric(seed: u64, n: usize) -> LeadGraph {
        let mut rng = RandomStream::new(seed);
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = rng.uniform_range(-1.0, 1.0);
                a[i][j] = v;
                a[j][i] = v;
            }
        }
        graph(a)
    }

    #[test]
    fn zero_row_gives_zero_mix() {
        let r = random_record(1, 3, 10);
        let g = graph(vec![vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 0.5], vec![0.0, 0.5, 0.0]]);
        assert_eq!(graph_mix(&r, &g, 0).unwrap(), vec![0.0; 10]);
    }

    #[test]
    fn single_weight_selects_lead() {
        let r = random_record(2, 3, 10);
        let g = graph(vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]]);
        assert_eq!(graph_mix(&r, &g, 0).unwrap(), r.leads[2]);
    }

    #[test]
    fn mix_matches_per_sample_sum() {
        let r = random_record(3, 4, 25);
        let g = random_symmetric(4, 4);
        for i in 0..4 {
            let mix = graph_mix(&r, &g, i).unwrap();
            for t in 0..25 {
                let mut expect = 0.0;
                for j in 0..4 {
                    if j != i {
                        expect += g.adjacency[i][j] * r.leads[j][t];
                    }
                }
                assert!((mix[t] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identities() {
        let r = random_record(5, 4, 30);
        let g = random_symmetric(6, 4);
        let mut rng = RandomStream::new(0);
        assert_eq!(graph_augment(&r, &g, &GraphAugParams::new(0.0, 0.8), &mut rng).unwrap(), r);
        assert_eq!(graph_augment(&r, &g, &GraphAugParams::new(1.0, 0.0), &mut rng).unwrap(), r);
    }

    #[test]
    fn forced_full_mix_equals_graph_mix() {
        let r = random_record(7, 4, 30);
        let g = random_symmetric(8, 4);
        let params = GraphAugParams::new(1.0, 1.0);
        let draw = GraphDraw { lambdas: vec![Some(1.0); 4] };
        let out = graph_augment_with(&r, &g, &params, &draw).unwrap();
        for i in 0..4 {
            assert_eq!(out.leads[i], graph_mix(&r, &g, i).unwrap());
        }
    }

    #[test]
    fn mixes_use_original_leads() {
        let r = random_record(9, 3, 8);
        let g = random_symmetric(10, 3);
        let params = GraphAugParams::new(1.0, 1.0);
        let draw = GraphDraw { lambdas: vec![Some(0.4), Some(0.7), None] };
        let out = graph_augment_with(&r, &g, &params, &draw).unwrap();
        let mix1 = graph_mix(&r, &g, 1).unwrap();
        for t in 0..8 {
            assert_eq!(out.leads[1][t], (1.0 - 0.7) * r.leads[1][t] + 0.7 * mix1[t]);
        }
        assert_eq!(out.leads[2], r.leads[2]);
    }

    #[test]
    fn draws_respect_bounds() {
        let mut rng = RandomStream::new(12);
        let params = GraphAugParams::new(0.5, 0.3);
        let mut applied = 0;
        for _ in 0..1000 {
            let d = sample_graph_draw(12, &params, &mut rng);
            applied += d.applied();
            assert!(d.lambdas.iter().flatten().all(|&l| (0.0..0.3).contains(&l)));
        }
        let frac = applied as f64 / 12000.0;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let r = random_record(1, 3, 5);
        let g = random_symmetric(1, 4);
        let mut rng = RandomStream::new(0);
        assert!(matches!(
            graph_augment(&r, &g, &GraphAugParams::new(0.5, 0.5), &mut rng),
            Err(AugmentError::LeadMismatch { .. })
        ));
        let g = random_symmetric(1, 3);
        assert!(graph_augment(&r, &g, &GraphAugParams::new(1.5, 0.5), &mut rng).is_err());
        assert!(matches!(graph_mix(&r, &g, 3), Err(AugmentError::LeadIndex { .. })));
    }

    #[test]
    fn row_normalized_mix() {
        let r = random_record(13, 3, 6);
        let g = graph(vec![vec![0.0, 0.5, 0.5], vec![0.5, 0.0, 0.0], vec![0.5, 0.0, 0.0]]);
        let params = GraphAugParams {
            normalization: MixNormalization::RowAbsSum,
            ..GraphAugParams::new(1.0, 1.0)
        };
        let out = graph_augment_with(&r, &g, &params, &GraphDraw { lambdas: vec![None, Some(1.0), None] }).unwrap();
        assert_eq!(out.leads[1], r.leads[0]);
    }
}

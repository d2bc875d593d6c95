//! Graded-relevance ranking metrics: NDCG@k, Recall@k, MRR.
//!
//! All metrics consume only the ordering of candidates. Queries that
//! cannot be scored (all-zero labels for NDCG, no relevant item for
//! recall and MRR) are excluded from the aggregate and counted.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Any grade at or above this counts as relevant for Recall and MRR.
pub const RELEVANCE_THRESHOLD: u8 = 1;

/// Report cutoffs.
pub const CUTOFFS: [usize; 4] = [1, 3, 5, 10];

fn dcg(labels: &[u8], k: usize) -> f64 {
    labels
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &rel)| (2f64.powi(rel as i32) - 1.0) / ((i as f64 + 2.0).log2()))
        .sum()
}

/// NDCG@k of labels listed in predicted order. `None` when the ideal DCG
/// is zero (an all-zero-label query), which excludes the query.
pub fn ndcg_at_k(labels_in_predicted_order: &[u8], k: usize) -> Option<f64> {
    assert!(k >= 1, "cutoff must be at least 1");
    let mut ideal = labels_in_predicted_order.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg(&ideal, k);
    if idcg == 0.0 {
        return None;
    }
    Some(dcg(labels_in_predicted_order, k) / idcg)
}

/// Fraction of relevant items covered in the top k. `None` when the query
/// has no relevant item at all.
pub fn recall_at_k(labels_in_predicted_order: &[u8], k: usize, tau: u8) -> Option<f64> {
    assert!(k >= 1, "cutoff must be at least 1");
    let relevant = labels_in_predicted_order.iter().filter(|&&l| l >= tau).count();
    if relevant == 0 {
        return None;
    }
    let hit = labels_in_predicted_order
        .iter()
        .take(k)
        .filter(|&&l| l >= tau)
        .count();
    Some(hit as f64 / relevant as f64)
}

/// Reciprocal rank of the first relevant item; `None` when none exists.
pub fn reciprocal_rank(labels_in_predicted_order: &[u8], tau: u8) -> Option<f64> {
    labels_in_predicted_order
        .iter()
        .position(|&l| l >= tau)
        .map(|pos| 1.0 / (pos as f64 + 1.0))
}

/// Indices ordering `scores` descending, ties broken by row index.
pub fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| {
        scores[j]
            .partial_cmp(&scores[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    order
}

/// Labels of one query rearranged into predicted order.
pub fn labels_in_predicted_order(scores: &[f64], labels: &[u8]) -> Vec<u8> {
    descending_order(scores)
        .into_iter()
        .map(|i| labels[i])
        .collect()
}

/// Mean and contributing query count of one metric cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricCell {
    pub mean: f64,
    pub queries: usize,
}

/// Aggregated evaluation over a query set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub total_queries: usize,
    /// Queries excluded everywhere because no label reaches the threshold.
    pub excluded_queries: usize,
    pub relevance_threshold: u8,
    /// NDCG@k keyed by cutoff.
    pub ndcg: BTreeMap<usize, MetricCell>,
    /// Recall@k keyed by cutoff.
    pub recall: BTreeMap<usize, MetricCell>,
    pub mrr: MetricCell,
}

impl MetricsReport {
    pub fn ndcg_at(&self, k: usize) -> f64 {
        self.ndcg.get(&k).map(|c| c.mean).unwrap_or(f64::NAN)
    }

    pub fn recall_at(&self, k: usize) -> f64 {
        self.recall.get(&k).map(|c| c.mean).unwrap_or(f64::NAN)
    }
}

/// Evaluate per-query label lists (already in predicted order) at the
/// standard cutoffs. Per-query values are accumulated in query order, so
/// the result does not depend on how the caller parallelized scoring.
pub fn evaluate_queries(queries: &[Vec<u8>]) -> MetricsReport {
    let tau = RELEVANCE_THRESHOLD;
    let mut ndcg = BTreeMap::new();
    let mut recall = BTreeMap::new();
    for &k in &CUTOFFS {
        let cells: Vec<f64> = queries.iter().filter_map(|q| ndcg_at_k(q, k)).collect();
        ndcg.insert(
            k,
            MetricCell {
                mean: mean(&cells),
                queries: cells.len(),
            },
        );
        let cells: Vec<f64> = queries.iter().filter_map(|q| recall_at_k(q, k, tau)).collect();
        recall.insert(
            k,
            MetricCell {
                mean: mean(&cells),
                queries: cells.len(),
            },
        );
    }
    let rr: Vec<f64> = queries.iter().filter_map(|q| reciprocal_rank(q, tau)).collect();
    let excluded = queries
        .iter()
        .filter(|q| q.iter().all(|&l| l < tau))
        .count();

    MetricsReport {
        total_queries: queries.len(),
        excluded_queries: excluded,
        relevance_threshold: tau,
        ndcg,
        recall,
        mrr: MetricCell {
            mean: mean(&rr),
            queries: rr.len(),
        },
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn descending_labels_score_one() {
        for labels in [vec![3, 2, 1, 0], vec![2, 2, 1], vec![1], vec![3, 3, 3]] {
            assert_relative_eq!(ndcg_at_k(&labels, 3).unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn hand_derived_ndcg() {
        // predicted order (2, 3, 0): DCG = 3/log2(2) + 7/log2(3) = 7.41651...
        // ideal (3, 2, 0): IDCG = 7 + 3/log2(3) = 8.89278...
        let v = ndcg_at_k(&[2, 3, 0], 3).unwrap();
        assert!((v - 0.8340).abs() < 1e-4, "got {v}");
    }

    #[test]
    fn all_zero_labels_excluded() {
        assert_eq!(ndcg_at_k(&[0, 0, 0], 3), None);
        let report = evaluate_queries(&[vec![0, 0], vec![2, 1, 0]]);
        assert_eq!(report.ndcg[&3].queries, 1);
        assert_eq!(report.excluded_queries, 1);
    }

    #[test]
    fn recall_counts_relevant_coverage() {
        // 3 relevant, exactly 1 in the top 3
        let labels = [1, 0, 0, 2, 3];
        assert_relative_eq!(recall_at_k(&labels, 3, 1).unwrap(), 1.0 / 3.0, epsilon = 1e-12);
        // k covering the whole list always reaches 1
        assert_relative_eq!(recall_at_k(&labels, 5, 1).unwrap(), 1.0, epsilon = 1e-12);
        // single relevant item ranked first is a hit at k = 1
        assert_relative_eq!(recall_at_k(&[2, 0, 0], 1, 1).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(recall_at_k(&[0, 0], 3, 1), None);
    }

    #[test]
    fn reciprocal_rank_cases() {
        assert_relative_eq!(reciprocal_rank(&[2, 0], 1).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(reciprocal_rank(&[0, 2], 1).unwrap(), 0.5, epsilon = 1e-12);
        assert_eq!(reciprocal_rank(&[0, 0], 1), None);
        // mean over queries {1, 1, 0.5}
        let report = evaluate_queries(&[vec![3, 0], vec![1, 0], vec![0, 1]]);
        assert_relative_eq!(report.mrr.mean, (1.0 + 1.0 + 0.5) / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn recall_monotone_in_k() {
        let mut rng = crate::rng::stream(3, crate::rng::StreamKind::EmInit, 1);
        for _ in 0..200 {
            let n = rng.gen_range(1..12usize);
            let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..4u8)).collect();
            if labels.iter().all(|&l| l == 0) {
                continue;
            }
            let mut prev = 0.0;
            for k in 1..=n {
                let r = recall_at_k(&labels, k, 1).unwrap();
                assert!(r >= prev - 1e-12);
                prev = r;
            }
        }
    }

    #[test]
    fn metrics_invariant_to_monotone_score_transforms() {
        let mut rng = crate::rng::stream(5, crate::rng::StreamKind::EmInit, 2);
        for _ in 0..100 {
            let n = rng.gen_range(2..10usize);
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..4u8)).collect();
            let transformed: Vec<f64> = scores.iter().map(|s| (2.5 * s).tanh() * 10.0 + 4.0).collect();
            let a = labels_in_predicted_order(&scores, &labels);
            let b = labels_in_predicted_order(&transformed, &labels);
            assert_eq!(a, b);
        }
    }

    /// Brute-force oracle: the best achievable DCG over all permutations.
    fn permutation_idcg(labels: &[u8], k: usize) -> f64 {
        fn permute(rest: &mut Vec<u8>, chosen: &mut Vec<u8>, k: usize, best: &mut f64) {
            if rest.is_empty() || chosen.len() == k {
                let mut full = chosen.clone();
                full.extend(rest.iter().cloned());
                *best = best.max(dcg(&full, k));
                return;
            }
            for i in 0..rest.len() {
                let v = rest.remove(i);
                chosen.push(v);
                permute(rest, chosen, k, best);
                chosen.pop();
                rest.insert(i, v);
            }
        }
        let mut best = 0.0;
        permute(&mut labels.to_vec(), &mut Vec::new(), k, &mut best);
        best
    }

    #[test]
    fn ndcg_matches_permutation_oracle() {
        let mut rng = crate::rng::stream(9, crate::rng::StreamKind::EmInit, 3);
        for _ in 0..300 {
            let n = rng.gen_range(1..=6usize);
            let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..4u8)).collect();
            let k = rng.gen_range(1..=n);
            let idcg = permutation_idcg(&labels, k);
            match ndcg_at_k(&labels, k) {
                None => assert_eq!(idcg, 0.0),
                Some(v) => {
                    let expect = dcg(&labels, k) / idcg;
                    assert_relative_eq!(v, expect, epsilon = 1e-12);
                    assert!((0.0..=1.0 + 1e-12).contains(&v));
                }
            }
        }
    }
}

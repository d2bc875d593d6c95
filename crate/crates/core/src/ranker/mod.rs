//! From-scratch gradient-boosted tree ranker.
//!
//! Boosting loop: score, pairwise lambdas, one second-order regression
//! tree per round, early stopping on validation NDCG@10. Two objectives:
//! a LambdaRank-style swap-delta-weighted pairwise gradient, and plain
//! pairwise logistic.

mod lambdas;
mod tree;

pub use lambdas::{compute_lambdas, Lambdas};
pub use tree::{fit_tree, Node};

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{labels_in_predicted_order, ndcg_at_k};
use crate::rng::{stream, StreamKind};

/// Ranking objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Lambdarank,
    PairwiseLogistic,
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambdarank" => Ok(Objective::Lambdarank),
            "pairwise" | "pairwise_logistic" => Ok(Objective::PairwiseLogistic),
            other => Err(Error::InvalidConfig(format!("unknown objective {other:?}"))),
        }
    }
}

/// One query's contiguous row range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRange {
    pub event_id: u64,
    pub start: usize,
    pub end: usize,
}

/// Feature rows, graded labels, and query boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingDataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub queries: Vec<QueryRange>,
}

impl RankingDataset {
    /// Build from rows tagged with their event id; rows of one event must
    /// be adjacent. Validates that queries tile the row range.
    pub fn from_rows(features: Vec<Vec<f64>>, labels: Vec<u8>, event_ids: &[u64]) -> Result<Self> {
        if features.len() != labels.len() || features.len() != event_ids.len() {
            return Err(Error::InvalidInput(format!(
                "row count mismatch: {} features, {} labels, {} event ids",
                features.len(),
                labels.len(),
                event_ids.len()
            )));
        }
        let mut queries = Vec::new();
        let mut start = 0usize;
        for i in 1..=event_ids.len() {
            if i == event_ids.len() || event_ids[i] != event_ids[start] {
                queries.push(QueryRange {
                    event_id: event_ids[start],
                    start,
                    end: i,
                });
                start = i;
            }
        }
        let mut seen = std::collections::HashSet::new();
        for q in &queries {
            if !seen.insert(q.event_id) {
                return Err(Error::InvalidInput(format!(
                    "rows of event {} are not contiguous",
                    q.event_id
                )));
            }
        }
        let ds = RankingDataset {
            features,
            labels,
            queries,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.queries.is_empty() {
            return Err(Error::InvalidInput("empty ranking dataset".into()));
        }
        let mut cursor = 0usize;
        for q in &self.queries {
            if q.start != cursor || q.end <= q.start {
                return Err(Error::InvalidInput(format!(
                    "query {} does not tile the row range",
                    q.event_id
                )));
            }
            cursor = q.end;
        }
        if cursor != self.labels.len() || self.labels.len() != self.features.len() {
            return Err(Error::InvalidInput("query ranges do not cover all rows".into()));
        }
        let arity = self.features[0].len();
        if self.features.iter().any(|r| r.len() != arity) {
            return Err(Error::InvalidInput("ragged feature rows".into()));
        }
        Ok(())
    }

    pub fn arity(&self) -> usize {
        self.features.first().map(|r| r.len()).unwrap_or(0)
    }

    fn event_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.queries.iter().map(|q| q.event_id)
    }
}

/// Boosting hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub num_rounds: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub l2_leaf: f64,
    pub row_subsample: f64,
    pub feature_subsample: f64,
    pub early_stopping_rounds: usize,
    pub eval_k: usize,
    pub objective: Objective,
    pub sigmoid_scale: f64,
    pub hessian_floor: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            num_rounds: 500,
            learning_rate: 0.05,
            max_leaves: 31,
            max_depth: 8,
            min_samples_leaf: 20,
            l2_leaf: 1.0,
            row_subsample: 0.8,
            feature_subsample: 0.8,
            early_stopping_rounds: 50,
            eval_k: 10,
            objective: Objective::Lambdarank,
            sigmoid_scale: 1.0,
            hessian_floor: 1e-12,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_rounds == 0
            || self.learning_rate <= 0.0
            || self.max_leaves < 2
            || self.max_depth == 0
            || self.min_samples_leaf == 0
            || self.early_stopping_rounds == 0
            || self.eval_k == 0
            || self.sigmoid_scale <= 0.0
        {
            return Err(Error::InvalidConfig("non-positive training parameter".into()));
        }
        for (name, f) in [
            ("row_subsample", self.row_subsample),
            ("feature_subsample", self.feature_subsample),
        ] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidConfig(format!("{name} = {f} not in (0, 1]")));
            }
        }
        Ok(())
    }
}

/// Per-round evaluation trace.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_ndcg: Vec<f64>,
    pub valid_ndcg: Vec<f64>,
}

/// Trained ensemble. Prediction sums `learning_rate * leaf(x)` over trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtRankerModel {
    pub objective: Objective,
    pub learning_rate: f64,
    pub sigmoid_scale: f64,
    pub n_features: usize,
    /// Index of the best validation round; the tree list is truncated to
    /// `best_iteration + 1` trees.
    pub best_iteration: usize,
    pub trees: Vec<Node>,
    pub history: TrainHistory,
    pub config: TrainConfig,
}

impl GbdtRankerModel {
    /// Scores for a batch of rows.
    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        for r in rows {
            if r.len() != self.n_features {
                return Err(Error::ArityMismatch {
                    expected: self.n_features,
                    got: r.len(),
                });
            }
        }
        Ok(rows
            .par_iter()
            .map(|x| {
                self.trees
                    .iter()
                    .map(|t| self.learning_rate * t.predict(x))
                    .sum()
            })
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&json)
    }
}

/// Mean NDCG@k over a dataset's queries given current scores. Per-query
/// values are reduced in query order.
fn mean_ndcg(scores: &[f64], ds: &RankingDataset, k: usize) -> f64 {
    let per_query: Vec<Option<f64>> = ds
        .queries
        .par_iter()
        .map(|q| {
            let ordered =
                labels_in_predicted_order(&scores[q.start..q.end], &ds.labels[q.start..q.end]);
            ndcg_at_k(&ordered, k)
        })
        .collect();
    let values: Vec<f64> = per_query.into_iter().flatten().collect();
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Boost with early stopping on validation NDCG.
///
/// Train and validation query sets must be disjoint. The model records
/// the full per-round history and is truncated to the best validation
/// round. All randomness comes from per-round streams keyed off the
/// config seed, and every parallel reduction uses a fixed partition, so
/// the serialized model is bit-identical for any worker count.
pub fn train(
    train: &RankingDataset,
    valid: &RankingDataset,
    config: &TrainConfig,
) -> Result<GbdtRankerModel> {
    config.validate()?;
    train.validate()?;
    valid.validate()?;
    if train.arity() != valid.arity() {
        return Err(Error::ArityMismatch {
            expected: train.arity(),
            got: valid.arity(),
        });
    }
    let train_events: std::collections::HashSet<u64> = train.event_ids().collect();
    if valid.event_ids().any(|e| train_events.contains(&e)) {
        return Err(Error::InvalidInput(
            "train and validation query sets overlap".into(),
        ));
    }

    let n = train.labels.len();
    let arity = train.arity();
    // column-major copy for split search
    let columns: Vec<Vec<f64>> = (0..arity)
        .map(|c| train.features.iter().map(|r| r[c]).collect())
        .collect();

    let mut scores = vec![0.0f64; n];
    let mut valid_scores = vec![0.0f64; valid.labels.len()];
    let mut trees: Vec<Node> = Vec::new();
    let mut history = TrainHistory::default();
    let mut best: Option<(usize, f64)> = None;

    for round in 0..config.num_rounds {
        let lambdas = compute_lambdas(
            &scores,
            &train.labels,
            &train.queries,
            config.objective,
            config.sigmoid_scale,
        );
        // tree fitting expects descent-convention gradients
        let grad: Vec<f64> = lambdas.gradient.iter().map(|&l| -l).collect();

        let mut rng = stream(config.seed, StreamKind::BoostRound, round as u64);
        let rows: Vec<usize> = if config.row_subsample < 1.0 {
            (0..n)
                .filter(|_| rng.gen_range(0.0..1.0) < config.row_subsample)
                .collect()
        } else {
            (0..n).collect()
        };
        let rows = if rows.is_empty() { (0..n).collect() } else { rows };

        let features: Vec<usize> = if config.feature_subsample < 1.0 {
            let keep = ((arity as f64 * config.feature_subsample).ceil() as usize).clamp(1, arity);
            let mut idx: Vec<usize> = (0..arity).collect();
            // partial Fisher-Yates, then sorted for deterministic scan order
            for i in 0..keep {
                let j = rng.gen_range(i..arity);
                idx.swap(i, j);
            }
            let mut chosen = idx[..keep].to_vec();
            chosen.sort_unstable();
            chosen
        } else {
            (0..arity).collect()
        };

        let tree = fit_tree(&columns, rows, &grad, &lambdas.hessian, &features, config);

        let deltas: Vec<f64> = train
            .features
            .par_iter()
            .map(|x| config.learning_rate * tree.predict(x))
            .collect();
        scores
            .iter_mut()
            .zip(&deltas)
            .for_each(|(s, d)| *s += d);
        let valid_deltas: Vec<f64> = valid
            .features
            .par_iter()
            .map(|x| config.learning_rate * tree.predict(x))
            .collect();
        valid_scores
            .iter_mut()
            .zip(&valid_deltas)
            .for_each(|(s, d)| *s += d);
        trees.push(tree);

        history.train_ndcg.push(mean_ndcg(&scores, train, config.eval_k));
        let valid_ndcg = mean_ndcg(&valid_scores, valid, config.eval_k);
        history.valid_ndcg.push(valid_ndcg);

        match best {
            None => best = Some((round, valid_ndcg)),
            Some((_, best_value)) if valid_ndcg > best_value => {
                best = Some((round, valid_ndcg));
            }
            Some((best_round, _)) => {
                if round - best_round >= config.early_stopping_rounds {
                    break;
                }
            }
        }
    }

    let (best_iteration, _) = best.expect("at least one round ran");
    trees.truncate(best_iteration + 1);

    Ok(GbdtRankerModel {
        objective: config.objective,
        learning_rate: config.learning_rate,
        sigmoid_scale: config.sigmoid_scale,
        n_features: arity,
        best_iteration,
        trees,
        history,
        config: config.clone(),
    })
}

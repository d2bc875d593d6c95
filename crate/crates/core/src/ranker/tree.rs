//! Second-order regression trees with exact greedy splits.
//!
//! Split search walks presorted per-feature row lists; node splits
//! partition those lists stably, so no per-node sorting happens anywhere
//! in the boosting loop.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TrainConfig;

/// A tree node; leaves carry the unscaled output value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    /// Route a feature vector to its leaf value. `x[feature] <= threshold`
    /// goes left.
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Node::Leaf { value } => *value,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }
}

/// Rows argsorted by each column, ascending. Computed once per training
/// run; per-round subsampling filters these lists instead of re-sorting.
pub fn presort_columns(columns: &[Vec<f64>]) -> Vec<Vec<u32>> {
    columns
        .par_iter()
        .map(|col| {
            let mut order: Vec<u32> = (0..col.len() as u32).collect();
            order.sort_by(|&a, &b| {
                col[a as usize]
                    .partial_cmp(&col[b as usize])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            order
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct SplitChoice {
    gain: f64,
    /// Position in the node's feature subset.
    feature_slot: usize,
    threshold: f64,
}

/// A leaf pending expansion: the same row set sorted by every candidate
/// feature.
struct Frontier {
    lists: Vec<Vec<u32>>,
    depth: usize,
    best: Option<SplitChoice>,
    seq: usize,
    node_slot: usize,
}

enum Arena {
    Leaf(f64),
    Split(usize, f64, usize, usize),
}

fn leaf_denom(hess_sum: f64, cfg: &TrainConfig) -> f64 {
    (hess_sum + cfg.l2_leaf).max(cfg.hessian_floor)
}

fn leaf_value(grad_sum: f64, hess_sum: f64, cfg: &TrainConfig) -> f64 {
    // gradients arrive in descent convention: value = -G / (H + l2)
    -grad_sum / leaf_denom(hess_sum, cfg)
}

/// Best boundary on one presorted list, if any.
fn best_feature_split(
    column: &[f64],
    sorted_rows: &[u32],
    grad: &[f64],
    hess: &[f64],
    grad_sum: f64,
    hess_sum: f64,
    feature_slot: usize,
    cfg: &TrainConfig,
) -> Option<SplitChoice> {
    let m = sorted_rows.len();
    let parent_score = grad_sum * grad_sum / leaf_denom(hess_sum, cfg);
    let mut gl = 0.0;
    let mut hl = 0.0;
    let mut best: Option<SplitChoice> = None;

    for i in 0..m - 1 {
        let r = sorted_rows[i] as usize;
        gl += grad[r];
        hl += hess[r];
        let v = column[r];
        let v_next = column[sorted_rows[i + 1] as usize];
        if v == v_next {
            continue;
        }
        let left_count = i + 1;
        if left_count < cfg.min_samples_leaf || m - left_count < cfg.min_samples_leaf {
            continue;
        }
        let gr = grad_sum - gl;
        let hr = hess_sum - hl;
        let gain = 0.5
            * (gl * gl / leaf_denom(hl, cfg) + gr * gr / leaf_denom(hr, cfg) - parent_score);
        if gain <= 0.0 {
            continue;
        }
        let threshold = v + (v_next - v) / 2.0;
        let better = match best {
            None => true,
            Some(b) => gain > b.gain || (gain == b.gain && threshold < b.threshold),
        };
        if better {
            best = Some(SplitChoice {
                gain,
                feature_slot,
                threshold,
            });
        }
    }
    best
}

fn best_split(
    columns: &[Vec<f64>],
    features: &[usize],
    lists: &[Vec<u32>],
    grad: &[f64],
    hess: &[f64],
    grad_sum: f64,
    hess_sum: f64,
    cfg: &TrainConfig,
) -> Option<SplitChoice> {
    let candidates: Vec<Option<SplitChoice>> = features
        .par_iter()
        .enumerate()
        .map(|(slot, &f)| {
            best_feature_split(
                &columns[f],
                &lists[slot],
                grad,
                hess,
                grad_sum,
                hess_sum,
                slot,
                cfg,
            )
        })
        .collect();
    // deterministic reduce: higher gain, then lower feature slot
    candidates.into_iter().flatten().fold(None, |acc, c| match acc {
        None => Some(c),
        Some(a) => {
            if c.gain > a.gain || (c.gain == a.gain && c.feature_slot < a.feature_slot) {
                Some(c)
            } else {
                Some(a)
            }
        }
    })
}

/// Grow one regression tree, best-gain-first.
///
/// `features` names the candidate feature subset; `root_lists[slot]` holds
/// the (subsampled) rows sorted by `columns[features[slot]]`. `grad` is in
/// descent convention (the loss gradient).
pub fn fit_tree(
    columns: &[Vec<f64>],
    features: &[usize],
    root_lists: Vec<Vec<u32>>,
    grad: &[f64],
    hess: &[f64],
    cfg: &TrainConfig,
) -> Node {
    debug_assert_eq!(features.len(), root_lists.len());
    let mut arena: Vec<Arena> = Vec::new();
    let mut frontier: Vec<Frontier> = Vec::new();
    let mut seq = 0usize;

    let mut push_leaf = |arena: &mut Vec<Arena>,
                         frontier: &mut Vec<Frontier>,
                         lists: Vec<Vec<u32>>,
                         depth: usize,
                         seq: &mut usize| {
        let rows = &lists[0];
        let grad_sum: f64 = rows.iter().map(|&r| grad[r as usize]).sum();
        let hess_sum: f64 = rows.iter().map(|&r| hess[r as usize]).sum();
        let slot = arena.len();
        arena.push(Arena::Leaf(leaf_value(grad_sum, hess_sum, cfg)));
        let best = if depth < cfg.max_depth && rows.len() >= 2 * cfg.min_samples_leaf {
            best_split(columns, features, &lists, grad, hess, grad_sum, hess_sum, cfg)
        } else {
            None
        };
        frontier.push(Frontier {
            lists,
            depth,
            best,
            seq: *seq,
            node_slot: slot,
        });
        *seq += 1;
        slot
    };

    push_leaf(&mut arena, &mut frontier, root_lists, 0, &mut seq);
    let mut leaves = 1usize;

    while leaves < cfg.max_leaves {
        let Some(pick) = frontier
            .iter()
            .enumerate()
            .filter(|(_, f)| f.best.is_some())
            .max_by(|(_, a), (_, b)| {
                let (ga, gb) = (a.best.unwrap().gain, b.best.unwrap().gain);
                ga.partial_cmp(&gb)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(b.seq.cmp(&a.seq))
            })
            .map(|(i, _)| i)
        else {
            break;
        };

        let node = frontier.swap_remove(pick);
        let choice = node.best.expect("filtered on is_some");
        let split_column = &columns[features[choice.feature_slot]];

        // stable partition keeps every per-feature list sorted
        let partitioned: Vec<(Vec<u32>, Vec<u32>)> = node
            .lists
            .into_par_iter()
            .map(|list| {
                list.into_iter()
                    .partition(|&r| split_column[r as usize] <= choice.threshold)
            })
            .collect();
        let mut left_lists = Vec::with_capacity(partitioned.len());
        let mut right_lists = Vec::with_capacity(partitioned.len());
        for (l, r) in partitioned {
            left_lists.push(l);
            right_lists.push(r);
        }

        let left_slot = push_leaf(&mut arena, &mut frontier, left_lists, node.depth + 1, &mut seq);
        let right_slot = push_leaf(&mut arena, &mut frontier, right_lists, node.depth + 1, &mut seq);
        arena[node.node_slot] = Arena::Split(
            features[choice.feature_slot],
            choice.threshold,
            left_slot,
            right_slot,
        );
        leaves += 1;
    }

    build_nested(&arena, 0)
}

fn build_nested(arena: &[Arena], slot: usize) -> Node {
    match &arena[slot] {
        Arena::Leaf(value) => Node::Leaf { value: *value },
        Arena::Split(feature, threshold, left, right) => Node::Split {
            feature: *feature,
            threshold: *threshold,
            left: Box::new(build_nested(arena, *left)),
            right: Box::new(build_nested(arena, *right)),
        },
    }
}

//! Beta-mixture fitting of pooled TOPSIS scores and score smoothing.
//!
//! E-step responsibilities are exact. The M-step updates mixture weights
//! in closed form and refits each component's shape pair by
//! responsibility-weighted moment matching; a candidate pair is only
//! accepted when it does not lower that component's expected
//! complete-data log-likelihood, which keeps the observed log-likelihood
//! non-decreasing up to float rounding.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng::{stream, StreamKind};

/// EM hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub max_iters: usize,
    pub tol: f64,
    /// Scores are clipped into `[delta, 1 - delta]` to keep densities finite.
    pub clip_delta: f64,
    pub shape_min: f64,
    pub shape_max: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            k_min: 2,
            k_max: 5,
            max_iters: 200,
            tol: 1e-6,
            clip_delta: 1e-4,
            shape_min: 0.05,
            shape_max: 500.0,
        }
    }
}

/// A fitted Beta mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmModel {
    pub k: usize,
    pub pi: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    /// Observed-data log-likelihood after each E-step.
    pub ll_history: Vec<f64>,
}

impl EmModel {
    /// Component means `alpha / (alpha + beta)`.
    pub fn means(&self) -> Vec<f64> {
        self.alpha
            .iter()
            .zip(&self.beta)
            .map(|(&a, &b)| a / (a + b))
            .collect()
    }

    /// Posterior responsibilities for a single (clipped) score.
    pub fn responsibilities(&self, r: f64) -> Vec<f64> {
        let ln_r = r.ln();
        let ln_1mr = (1.0 - r).ln();
        let logs: Vec<f64> = (0..self.k)
            .map(|k| {
                self.pi[k].ln() + (self.alpha[k] - 1.0) * ln_r + (self.beta[k] - 1.0) * ln_1mr
                    - ln_beta_fn(self.alpha[k], self.beta[k])
            })
            .collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        weights.into_iter().map(|w| w / total).collect()
    }

    /// Responsibility-weighted expectation of the component means.
    pub fn smooth(&self, r: f64, cfg: &EmConfig) -> f64 {
        let r = clip(r, cfg.clip_delta);
        let gamma = self.responsibilities(r);
        let means = self.means();
        gamma.iter().zip(&means).map(|(&g, &m)| g * m).sum()
    }
}

/// Smoothed per-event soft relevance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftRelevance {
    pub r_hat: Vec<f64>,
    /// Normalized within the event; sums to 1.
    pub p: Vec<f64>,
}

fn clip(r: f64, delta: f64) -> f64 {
    r.clamp(delta, 1.0 - delta)
}

fn ln_beta_fn(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Moment-matched shape pair for a weighted mean/variance, clamped to the
/// configured range. Variance is pulled inside the feasible region first.
fn shapes_from_moments(mean: f64, var: f64, cfg: &EmConfig) -> (f64, f64) {
    let mean = mean.clamp(1e-6, 1.0 - 1e-6);
    let cap = mean * (1.0 - mean);
    let var = var.clamp(cap * 1e-6, cap * 0.999);
    let t = (cap / var - 1.0).max(1e-6);
    let a = (mean * t).clamp(cfg.shape_min, cfg.shape_max);
    let b = ((1.0 - mean) * t).clamp(cfg.shape_min, cfg.shape_max);
    (a, b)
}

/// Fixed-size chunks keep parallel reductions identical across worker
/// counts: partial sums are combined in chunk order.
const CHUNK: usize = 8192;

/// Per-component sufficient statistics from one E-step:
/// sums of gamma, gamma*r, gamma*r^2, gamma*ln r, gamma*ln(1-r).
#[derive(Clone, Copy, Default)]
struct CompStats {
    g: f64,
    g_r: f64,
    g_r2: f64,
    g_ln_r: f64,
    g_ln_1mr: f64,
}

struct EStep {
    stats: Vec<CompStats>,
    log_likelihood: f64,
}

fn e_step(
    scores: &[f64],
    ln_r: &[f64],
    ln_1mr: &[f64],
    pi: &[f64],
    alpha: &[f64],
    beta: &[f64],
) -> EStep {
    let k = pi.len();
    let ln_pi: Vec<f64> = pi.iter().map(|p| p.ln()).collect();
    let ln_norm: Vec<f64> = (0..k).map(|j| ln_beta_fn(alpha[j], beta[j])).collect();

    let indices: Vec<usize> = (0..scores.len()).collect();
    let partials: Vec<EStep> = indices
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut stats = vec![CompStats::default(); k];
            let mut ll = 0.0;
            let mut logs = vec![0.0f64; k];
            for &i in chunk {
                for j in 0..k {
                    logs[j] = ln_pi[j] + (alpha[j] - 1.0) * ln_r[i] + (beta[j] - 1.0) * ln_1mr[i]
                        - ln_norm[j];
                }
                let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for j in 0..k {
                    logs[j] = (logs[j] - max).exp();
                    total += logs[j];
                }
                ll += max + total.ln();
                for j in 0..k {
                    let g = logs[j] / total;
                    stats[j].g += g;
                    stats[j].g_r += g * scores[i];
                    stats[j].g_r2 += g * scores[i] * scores[i];
                    stats[j].g_ln_r += g * ln_r[i];
                    stats[j].g_ln_1mr += g * ln_1mr[i];
                }
            }
            EStep {
                stats,
                log_likelihood: ll,
            }
        })
        .collect();

    let mut stats = vec![CompStats::default(); k];
    let mut ll = 0.0;
    for p in partials {
        ll += p.log_likelihood;
        for j in 0..k {
            stats[j].g += p.stats[j].g;
            stats[j].g_r += p.stats[j].g_r;
            stats[j].g_r2 += p.stats[j].g_r2;
            stats[j].g_ln_r += p.stats[j].g_ln_r;
            stats[j].g_ln_1mr += p.stats[j].g_ln_1mr;
        }
    }
    EStep {
        stats,
        log_likelihood: ll,
    }
}

/// Expected complete-data log-likelihood of one component's shape pair,
/// up to terms independent of (a, b).
fn component_q(s: &CompStats, a: f64, b: f64) -> f64 {
    (a - 1.0) * s.g_ln_r + (b - 1.0) * s.g_ln_1mr - s.g * ln_beta_fn(a, b)
}

/// Fit a `k`-component Beta mixture to the pooled scores.
///
/// Initialization spreads component means over jittered data quantiles
/// with uniform mixture weights; the jitter comes from the seeded init
/// stream so fits are reproducible. Iterates until the log-likelihood
/// moves less than `tol` or `max_iters` E-steps have run.
pub fn em_fit(scores: &[f64], k: usize, cfg: &EmConfig, seed: u64) -> Result<EmModel> {
    if k < 1 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    if scores.len() < 10 * k {
        return Err(Error::InvalidInput(format!(
            "need at least {} samples to fit k = {k}, got {}",
            10 * k,
            scores.len()
        )));
    }

    let data: Vec<f64> = scores.iter().map(|&r| clip(r, cfg.clip_delta)).collect();
    let ln_r: Vec<f64> = data.iter().map(|r| r.ln()).collect();
    let ln_1mr: Vec<f64> = data.iter().map(|r| (1.0 - r).ln()).collect();

    // init: jittered quantile means, variance split evenly
    let mut sorted = data.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let global_mean = data.iter().sum::<f64>() / n as f64;
    let global_var = data.iter().map(|r| (r - global_mean).powi(2)).sum::<f64>() / n as f64;

    let mut rng = stream(seed, StreamKind::EmInit, k as u64);
    let mut pi = vec![1.0 / k as f64; k];
    let mut alpha = vec![0.0; k];
    let mut beta = vec![0.0; k];
    for j in 0..k {
        let q = (j as f64 + 0.5) / k as f64;
        let base = sorted[((q * n as f64) as usize).min(n - 1)];
        let jitter = rng.gen_range(-0.02..0.02);
        let mean = (base + jitter).clamp(cfg.clip_delta, 1.0 - cfg.clip_delta);
        let var = (global_var / k as f64).max(1e-6);
        let (a, b) = shapes_from_moments(mean, var, cfg);
        alpha[j] = a;
        beta[j] = b;
    }

    let mut ll_history = Vec::new();
    let mut prev_ll = f64::NEG_INFINITY;
    for it in 0..cfg.max_iters {
        let e = e_step(&data, &ln_r, &ln_1mr, &pi, &alpha, &beta);
        ll_history.push(e.log_likelihood);
        let converged = (e.log_likelihood - prev_ll).abs() < cfg.tol;
        prev_ll = e.log_likelihood;
        if converged || it + 1 == cfg.max_iters {
            break;
        }

        // M-step: closed-form mixture weights
        for j in 0..k {
            pi[j] = (e.stats[j].g / n as f64).max(1e-12);
        }
        let pi_total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|p| *p /= pi_total);

        // M-step: moment-matched shapes, kept only when they do not lower
        // the component's expected log-likelihood
        for j in 0..k {
            let s = &e.stats[j];
            if s.g <= 1e-12 {
                continue;
            }
            let mean = s.g_r / s.g;
            let var = (s.g_r2 / s.g - mean * mean).max(0.0);
            let (a_new, b_new) = shapes_from_moments(mean, var, cfg);
            if component_q(s, a_new, b_new) >= component_q(s, alpha[j], beta[j]) {
                alpha[j] = a_new;
                beta[j] = b_new;
            }
        }
    }

    Ok(EmModel {
        k,
        pi,
        alpha,
        beta,
        log_likelihood: prev_ll,
        iterations: ll_history.len(),
        ll_history,
    })
}

/// Pick `k` in the configured range by Bayesian information criterion:
/// `-2 LL + (3k - 1) ln N`.
pub fn select_k(scores: &[f64], cfg: &EmConfig, seed: u64) -> Result<usize> {
    if cfg.k_min < 1 || cfg.k_min > cfg.k_max {
        return Err(Error::InvalidConfig(format!(
            "bad k range [{}, {}]",
            cfg.k_min, cfg.k_max
        )));
    }
    let n = scores.len() as f64;
    let mut best = (f64::INFINITY, cfg.k_min);
    for k in cfg.k_min..=cfg.k_max {
        let model = em_fit(scores, k, cfg, seed)?;
        let bic = -2.0 * model.log_likelihood + (3.0 * k as f64 - 1.0) * n.ln();
        if bic < best.0 {
            best = (bic, k);
        }
    }
    Ok(best.1)
}

/// Smooth one event's raw scores and normalize them into a distribution.
pub fn em_smooth(model: &EmModel, event_scores: &[f64], cfg: &EmConfig) -> SoftRelevance {
    let r_hat: Vec<f64> = event_scores.iter().map(|&r| model.smooth(r, cfg)).collect();
    let total: f64 = r_hat.iter().sum();
    let p = r_hat.iter().map(|&v| v / total).collect();
    SoftRelevance { r_hat, p }
}

//! Query-item feature assembly and encoding.
//!
//! Every event-candidate pair becomes one fixed-arity vector: candidate
//! attributes, EV state, cyclic time encodings, encoded spatial cells, and
//! context. Scalers and vocabularies are fitted on the training split only
//! and applied unchanged everywhere else.

use std::collections::BTreeMap;

use chrono::{Datelike, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::DecisionEvent;

/// Continuous columns, scaled to `[0, 1]` on the training split.
pub const CONTINUOUS_NAMES: [&str; 12] = [
    "distance_km",
    "charging_speed_kw",
    "popularity",
    "capacity_wh",
    "energy_wh",
    "soc_e",
    "pressure",
    "quantity_wh",
    "hour",
    "day_of_week",
    "month",
    "candidate_count",
];

/// Cyclic sine/cosine pairs; already bounded, never rescaled.
pub const CYCLIC_NAMES: [&str; 6] = [
    "hour_sin", "hour_cos", "dow_sin", "dow_cos", "month_sin", "month_cos",
];

/// Label-encoded categorical columns.
pub const CATEGORICAL_NAMES: [&str; 4] = [
    "role_code",
    "location_cell_code",
    "community_area_code",
    "model_code",
];

/// Which slice of the feature set a model trains on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureMode {
    /// Candidate, EV-state, temporal, spatial, and context features.
    Full,
    /// Candidate attributes only: distance, speed, popularity.
    CandidateOnly,
}

/// Canonical feature column names for a mode, in emission order.
pub fn feature_names(mode: FeatureMode) -> Vec<&'static str> {
    match mode {
        FeatureMode::CandidateOnly => vec!["distance_km", "charging_speed_kw", "popularity"],
        FeatureMode::Full => {
            let mut names = CONTINUOUS_NAMES.to_vec();
            names.extend(CYCLIC_NAMES);
            names.extend(CATEGORICAL_NAMES);
            names
        }
    }
}

/// `(sin, cos)` of `2 pi value / period`.
pub fn cyclic_encode(value: f64, period: f64) -> (f64, f64) {
    assert!(period > 0.0, "period must be positive");
    let angle = std::f64::consts::TAU * value / period;
    (angle.sin(), angle.cos())
}

/// One event-candidate pair before encoding. Identifiers ride along for
/// grouping and joining but never enter the feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub event_id: u64,
    pub station_id: u64,
    /// Values for `CONTINUOUS_NAMES`, in order.
    pub continuous: [f64; 12],
    /// Values for `CYCLIC_NAMES`, in order.
    pub cyclic: [f64; 6],
    pub role: String,
    pub location_cell: u32,
    pub community_area: u32,
    pub model_id: u8,
}

/// Flatten events into raw rows, candidate order preserved. Zero-candidate
/// events contribute nothing.
pub fn assemble_rows(events: &[DecisionEvent]) -> Vec<RawRow> {
    let mut rows = Vec::new();
    for e in events {
        let hour = f64::from(e.timestamp.hour());
        let dow = f64::from(e.timestamp.weekday().num_days_from_monday());
        let month = f64::from(e.timestamp.month());
        let (hour_sin, hour_cos) = cyclic_encode(hour, 24.0);
        let (dow_sin, dow_cos) = cyclic_encode(dow, 7.0);
        let (month_sin, month_cos) = cyclic_encode(month - 1.0, 12.0);
        for c in &e.candidates {
            rows.push(RawRow {
                event_id: e.event_id,
                station_id: c.station_id,
                continuous: [
                    c.distance_km,
                    c.charging_speed_kw,
                    c.popularity,
                    e.battery_capacity_wh,
                    e.energy_level_wh,
                    e.soc_e,
                    e.pressure,
                    e.quantity_wh,
                    hour,
                    dow,
                    month,
                    e.candidates.len() as f64,
                ],
                cyclic: [hour_sin, hour_cos, dow_sin, dow_cos, month_sin, month_cos],
                role: e.role.code().to_string(),
                location_cell: e.community_area,
                community_area: e.community_area,
                model_id: e.model_id,
            });
        }
    }
    rows
}

/// Per-column min-max scaler.
///
/// Constant columns map to 0.5; out-of-range values at transform time clip
/// into `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl Scaler {
    pub fn fit(columns: &[Vec<f64>]) -> Result<Self> {
        if columns.iter().any(|c| c.is_empty()) {
            return Err(Error::InvalidInput("cannot fit scaler on empty training data".into()));
        }
        let mins = columns
            .iter()
            .map(|c| c.iter().cloned().fold(f64::INFINITY, f64::min))
            .collect();
        let maxs = columns
            .iter()
            .map(|c| c.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        Ok(Scaler { mins, maxs })
    }

    pub fn transform_value(&self, col: usize, v: f64) -> f64 {
        let (min, max) = (self.mins[col], self.maxs[col]);
        if max == min {
            0.5
        } else {
            ((v - min) / (max - min)).clamp(0.0, 1.0)
        }
    }
}

/// Lexicographic label encoding with code 0 reserved for unseen values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabelEncoder {
    pub vocab: BTreeMap<String, u32>,
}

impl LabelEncoder {
    pub fn fit<I: IntoIterator<Item = String>>(values: I) -> Self {
        let keys: std::collections::BTreeSet<String> = values.into_iter().collect();
        let vocab = keys
            .into_iter()
            .enumerate()
            .map(|(i, k)| (k, i as u32 + 1))
            .collect();
        LabelEncoder { vocab }
    }

    pub fn encode(&self, value: &str) -> u32 {
        self.vocab.get(value).copied().unwrap_or(0)
    }
}

/// Fitted encoding state: scaler plus vocabularies, serialized alongside
/// the model so prediction uses exactly the training-time transforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePipeline {
    pub mode: FeatureMode,
    pub scaler: Scaler,
    pub role_encoder: LabelEncoder,
    pub cell_encoder: LabelEncoder,
    pub community_encoder: LabelEncoder,
    pub model_encoder: LabelEncoder,
}

impl FeaturePipeline {
    /// Fit on the training rows only.
    pub fn fit(mode: FeatureMode, train_rows: &[RawRow]) -> Result<Self> {
        if train_rows.is_empty() {
            return Err(Error::InvalidInput("empty training split".into()));
        }
        let n_cont = match mode {
            FeatureMode::Full => CONTINUOUS_NAMES.len(),
            FeatureMode::CandidateOnly => 3,
        };
        let columns: Vec<Vec<f64>> = (0..n_cont)
            .map(|c| train_rows.iter().map(|r| r.continuous[c]).collect())
            .collect();
        Ok(FeaturePipeline {
            mode,
            scaler: Scaler::fit(&columns)?,
            role_encoder: LabelEncoder::fit(train_rows.iter().map(|r| r.role.clone())),
            cell_encoder: LabelEncoder::fit(
                train_rows.iter().map(|r| r.location_cell.to_string()),
            ),
            community_encoder: LabelEncoder::fit(
                train_rows.iter().map(|r| r.community_area.to_string()),
            ),
            model_encoder: LabelEncoder::fit(train_rows.iter().map(|r| r.model_id.to_string())),
        })
    }

    pub fn arity(&self) -> usize {
        feature_names(self.mode).len()
    }

    pub fn transform_row(&self, row: &RawRow) -> Vec<f64> {
        match self.mode {
            FeatureMode::CandidateOnly => (0..3)
                .map(|c| self.scaler.transform_value(c, row.continuous[c]))
                .collect(),
            FeatureMode::Full => {
                let mut out = Vec::with_capacity(self.arity());
                for c in 0..CONTINUOUS_NAMES.len() {
                    out.push(self.scaler.transform_value(c, row.continuous[c]));
                }
                out.extend_from_slice(&row.cyclic);
                out.push(f64::from(self.role_encoder.encode(&row.role)));
                out.push(f64::from(
                    self.cell_encoder.encode(&row.location_cell.to_string()),
                ));
                out.push(f64::from(
                    self.community_encoder
                        .encode(&row.community_area.to_string()),
                ));
                out.push(f64::from(self.model_encoder.encode(&row.model_id.to_string())));
                out
            }
        }
    }

    pub fn transform(&self, rows: &[RawRow]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }
}

/// Pairwise Pearson correlation of the columns. Zero-variance columns get
/// 0 in their off-diagonal entries and are flagged.
pub fn pearson_corr(columns: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<bool>)> {
    let d = columns.len();
    let n = columns.first().map(|c| c.len()).unwrap_or(0);
    if n < 2 {
        return Err(Error::InvalidInput("need at least 2 rows for correlation".into()));
    }
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidInput("ragged correlation input".into()));
    }

    let means: Vec<f64> = columns.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let stds: Vec<f64> = columns
        .iter()
        .zip(&means)
        .map(|(c, &m)| (c.iter().map(|&v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt())
        .collect();
    let degenerate: Vec<bool> = stds.iter().map(|&s| s == 0.0).collect();

    let mut corr = vec![vec![0.0; d]; d];
    for i in 0..d {
        corr[i][i] = 1.0;
        for j in (i + 1)..d {
            let value = if degenerate[i] || degenerate[j] {
                0.0
            } else {
                let cov = columns[i]
                    .iter()
                    .zip(&columns[j])
                    .map(|(&a, &b)| (a - means[i]) * (b - means[j]))
                    .sum::<f64>()
                    / n as f64;
                (cov / (stds[i] * stds[j])).clamp(-1.0, 1.0)
            };
            corr[i][j] = value;
            corr[j][i] = value;
        }
    }
    Ok((corr, degenerate))
}
